//! Versioned JSON files written atomically.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HanError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes to a sibling temp file and renames, so a failed write never
/// clobbers the previous contents.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HanError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| HanError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HanError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("state serializes");
    s.push('\n');
    s
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json(value))
}

/// Parses a file whose top-level object carries `format_version`.
pub fn from_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let format = |msg: String| HanError::Format {
        path: path.to_path_buf(),
        msg,
    };
    #[derive(serde::Deserialize)]
    struct Header {
        format_version: Option<u64>,
    }
    let header: Header = serde_json::from_str(text).map_err(|e| format(e.to_string()))?;
    let found = header
        .format_version
        .ok_or_else(|| format("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(HanError::Version {
            path: path.to_path_buf(),
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_str(text).map_err(|e| format(e.to_string()))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
    from_json(&text, path)
}
