//! Plastic feedforward controllers whose weights self-modify online through an
//! evolved ABCD Hebbian rule, plus the machinery to meta-train and study them:
//!
//! - [`net`]: tanh feedforward network with per-layer activation traces.
//! - [`plasticity`]: ABCD updates, stabilization modes and the update schedule.
//! - [`evolution`]: genome layout, AdaptiveES and OpenAI-ES.
//! - [`envs`]: small deterministic control tasks and observation normalization.
//! - [`analysis`]: plasticity series, convergence classification, PCA, spectra.
//! - [`harness`]: rollouts, meta-training, condition grids and persistence.

pub mod analysis;
pub mod envs;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod matrix;
pub mod net;
pub mod plasticity;
pub mod seeding;

pub use error::{HanError, Result};
pub use matrix::Matrix;
pub use net::{Activation, NetworkShape, NetworkSnapshot, PlasticNetwork};
pub use plasticity::{
    Condition, LayerCoefficients, LearningRateMode, PlasticityConfig, PlasticityRule,
    StabilizationMode, UpdateSchedule,
};
