//! Sweeps over averaging window and Hebbian rate.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::run_meta_training;
use crate::error::{HanError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub window: usize,
    pub f_hebb: f64,
    pub seeds: Vec<u64>,
    /// Fixed-point share over all evaluation rollouts of all seeds.
    pub converged_ratio: Option<f64>,
    /// Mean best-genome fitness over seeds.
    pub mean_fitness: Option<f64>,
    /// Set when any seed failed; the other cells still run.
    pub error: Option<String>,
}

impl GridCell {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub windows: Vec<usize>,
    pub f_hebbs: Vec<f64>,
    pub cells: Vec<GridCell>,
}

impl GridReport {
    pub fn cell(&self, window: usize, f_hebb: f64) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.window == window && c.f_hebb == f_hebb)
    }

    fn table(&self, value: impl Fn(&GridCell) -> Option<f64>) -> String {
        let mut out = String::from("M");
        for f in &self.f_hebbs {
            let _ = write!(out, ",{f}");
        }
        out.push('\n');
        for &m in &self.windows {
            let _ = write!(out, "{m}");
            for &f in &self.f_hebbs {
                match self.cell(m, f) {
                    Some(c) if !c.failed() => match value(c) {
                        Some(v) => {
                            let _ = write!(out, ",{v}");
                        }
                        None => out.push_str(",n/a"),
                    },
                    _ => out.push_str(",failed"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Converged ratios, one row per window and one column per Hebbian rate.
    pub fn ratio_csv(&self) -> String {
        self.table(|c| c.converged_ratio)
    }

    pub fn fitness_csv(&self) -> String {
        self.table(|c| c.mean_fitness)
    }
}

/// Meta-trains and evaluates every (window, rate) pair for every seed.
/// Stabilization and everything else come from `base`.
pub fn run_condition_grid(
    base: &ExperimentConfig,
    windows: &[usize],
    f_hebbs: &[f64],
    seeds: &[u64],
) -> Result<GridReport> {
    if windows.is_empty() || f_hebbs.is_empty() || seeds.is_empty() {
        return Err(HanError::config("grid needs at least one window, rate and seed"));
    }
    let mut cells = Vec::new();
    for &window in windows {
        for &f_hebb in f_hebbs {
            let mut fixed = 0usize;
            let mut rollouts = 0usize;
            let mut fitness = Vec::new();
            let mut error = None;
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.plasticity.condition = None;
                cfg.plasticity.window = window;
                cfg.plasticity.f_hebb = f_hebb;
                cfg.seed = seed;
                cfg.output_dir = base
                    .output_dir
                    .as_ref()
                    .map(|d| d.join(format!("M{window}_f{f_hebb}")).join(format!("seed{seed}")));
                match run_meta_training(&cfg) {
                    Ok(rec) => {
                        rollouts += rec.evaluations.len();
                        fixed += rec
                            .evaluations
                            .iter()
                            .filter(|e| e.report.verdict == crate::analysis::Verdict::FixedPoint)
                            .count();
                        if let Some(b) = &rec.best {
                            fitness.push(b.fitness);
                        }
                    }
                    Err(e) => {
                        error = Some(format!("seed {seed}: {e}"));
                        break;
                    }
                }
            }
            cells.push(GridCell {
                window,
                f_hebb,
                seeds: seeds.to_vec(),
                converged_ratio: (rollouts > 0).then(|| fixed as f64 / rollouts as f64),
                mean_fitness: (!fitness.is_empty())
                    .then(|| fitness.iter().sum::<f64>() / fitness.len() as f64),
                error,
            });
        }
    }
    Ok(GridReport {
        windows: windows.to_vec(),
        f_hebbs: f_hebbs.to_vec(),
        cells,
    })
}
