//! Experiment orchestration: configuration, rollouts, meta-training,
//! condition grids and persistence.

mod config;
mod grid;
mod persist;
mod rollout;
mod train;

pub use config::{EsSettings, EvaluationSettings, ExperimentConfig, NetworkConfig, PlasticitySettings};
pub use grid::{run_condition_grid, GridCell, GridReport};
pub use persist::{from_json, load_json, save_json, to_json, write_atomic, FORMAT_VERSION};
pub use rollout::{
    evaluate_rule, freeze_contrast, rollout_rule, run_rollout, DumpRow, Episode, EvaluationRollout,
    FreezeContrast, HotSwap, RolloutContext, RolloutHooks, RolloutOutcome, TrajectoryDump,
};
pub use train::{
    curve_csv, finish, resume_meta_training, run_meta_training, BestCandidate, Checkpoint, Fitness,
    GenerationStats, RunRecord, Trainer,
};
