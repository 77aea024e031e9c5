//! Experiment configuration.
//!
//! A config is one TOML (or JSON) document. Any leaf can be overridden from
//! the command line with a dotted path, e.g. `es.population=64`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::envs::EnvSpec;
use crate::error::{HanError, Result};
use crate::evolution::{AdaptiveEsConfig, GenomeLayout, OpenAiEsConfig};
use crate::net::{Activation, NetworkShape};
use crate::plasticity::{
    Condition, LearningRateMode, PlasticityConfig, StabilizationMode, UpdateSchedule,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    /// Plastic weights start from `U(-weight_init, weight_init)` each episode.
    pub weight_init: f64,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![16],
            weight_init: 0.1,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticitySettings {
    /// Informational label of the preset these settings came from.
    pub condition: Option<Condition>,
    pub stabilization: StabilizationMode,
    pub window: usize,
    /// Hebbian update rate in Hz; the controller rate comes from the env.
    pub f_hebb: f64,
    pub learning_rate: LearningRateMode,
    pub oja_averaged: bool,
}

impl Default for PlasticitySettings {
    fn default() -> Self {
        PlasticitySettings {
            condition: Some(Condition::E),
            stabilization: StabilizationMode::MaxNorm,
            window: 10,
            f_hebb: 5.0,
            learning_rate: LearningRateMode::Evolved,
            oja_averaged: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EsSettings {
    Adaptive(AdaptiveEsConfig),
    OpenAi(OpenAiEsConfig),
}

impl EsSettings {
    pub fn population(&self) -> usize {
        match self {
            EsSettings::Adaptive(c) => c.population,
            EsSettings::OpenAi(c) => c.population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSettings {
    /// Rollouts of the final genome used for attractor classification.
    pub rollouts: usize,
    pub rho: f64,
    pub early_fraction: f64,
    /// Weights sampled for the limit-cycle frequency estimate.
    pub spectrum_weights: usize,
    /// Unrecorded episodes run first so the observation statistics are warm,
    /// as they are for all but the first training repeat.
    pub warmup_episodes: usize,
    /// Stop updating observation statistics after the warm-up.
    #[serde(default)]
    pub freeze_normalizer: bool,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            rollouts: 10,
            rho: 0.9,
            early_fraction: 0.05,
            spectrum_weights: 30,
            warmup_episodes: 3,
            freeze_normalizer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub network: NetworkConfig,
    pub plasticity: PlasticitySettings,
    pub es: EsSettings,
    pub generations: usize,
    /// Episodes averaged per fitness evaluation.
    pub repeats: usize,
    pub seed: u64,
    /// Evaluation threads; 0 uses all cores. Results do not depend on it.
    pub workers: usize,
    /// Fitness assigned to rollouts whose weights or state became non-finite.
    pub fitness_floor: f64,
    /// Share episode seeds across a generation's candidates.
    pub common_random_numbers: bool,
    /// Normalized observations are clamped to `[-obs_clip, obs_clip]`.
    pub obs_clip: f64,
    pub evaluation: EvaluationSettings,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvSpec::point_mass(),
            network: NetworkConfig::default(),
            plasticity: PlasticitySettings::default(),
            es: EsSettings::Adaptive(AdaptiveEsConfig {
                population: 64,
                ..Default::default()
            }),
            generations: 150,
            repeats: 4,
            seed: 0,
            workers: 0,
            fitness_floor: -1e6,
            common_random_numbers: true,
            obs_clip: 10.0,
            evaluation: EvaluationSettings::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Overwrites stabilization, window and Hebbian rate with a preset.
    pub fn apply_condition(&mut self, condition: Condition) {
        let (stabilization, window, ratio) = condition.preset();
        self.plasticity.condition = Some(condition);
        self.plasticity.stabilization = stabilization;
        self.plasticity.window = window;
        self.plasticity.f_hebb = self.env.f_nn() / f64::from(ratio);
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.apply_condition(condition);
        self
    }

    pub fn shape(&self) -> Result<NetworkShape> {
        NetworkShape::with_hidden(
            self.env.obs_dim(),
            &self.network.hidden,
            self.env.action_dim(),
        )
    }

    pub fn plasticity_config(&self) -> PlasticityConfig {
        let p = &self.plasticity;
        PlasticityConfig {
            stabilization: p.stabilization,
            window: p.window,
            schedule: UpdateSchedule {
                f_nn: self.env.f_nn(),
                f_hebb: p.f_hebb,
            },
            learning_rate: p.learning_rate,
            oja_averaged: p.oja_averaged,
        }
    }

    pub fn layout(&self) -> Result<GenomeLayout> {
        Ok(GenomeLayout::new(self.shape()?, self.plasticity.learning_rate))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.shape()?;
        self.plasticity_config().validate()?;
        match &self.es {
            EsSettings::Adaptive(c) => c.validate()?,
            EsSettings::OpenAi(c) => c.validate()?,
        }
        if self.repeats == 0 {
            return Err(HanError::config("repeats must be at least 1"));
        }
        if !(self.network.weight_init >= 0.0) {
            return Err(HanError::config("weight_init must be non-negative"));
        }
        if !self.fitness_floor.is_finite() {
            return Err(HanError::config("fitness_floor must be finite"));
        }
        if !(self.obs_clip > 0.0) {
            return Err(HanError::config("obs_clip must be positive"));
        }
        let e = &self.evaluation;
        if !(e.rho > 0.0 && e.early_fraction > 0.0 && e.early_fraction < 1.0) {
            return Err(HanError::config("need rho > 0 and 0 < early_fraction < 1"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
        let fmt_err = |msg: String| HanError::Format {
            path: path.to_path_buf(),
            msg,
        };
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| fmt_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| fmt_err(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Applies `key.path=value` overrides. Values parse as JSON when possible
    /// and fall back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut root = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| HanError::config(format!("override {o:?} is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut root, path, value)?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(root)
            .map_err(|e| HanError::config(format!("override produced invalid config: {e}")))?;
        Ok(cfg)
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if !map.contains_key(*key) {
                    if !last {
                        return Err(HanError::config(format!("unknown config key {path:?}")));
                    }
                    // Optional fields serialize as null and may be absent.
                }
                if last {
                    map.insert((*key).to_string(), value);
                    return Ok(());
                }
                map.get_mut(*key).unwrap()
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| HanError::config(format!("bad index in {path:?}")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| HanError::config(format!("index out of range in {path:?}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(HanError::config(format!("{path:?} does not name a config field"))),
        };
    }
    Ok(())
}
