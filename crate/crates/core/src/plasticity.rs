//! ABCD Hebbian updates, stabilization and the dual-timescale schedule.
//!
//! For connection `(i, j)` of a layer, with moving-averaged presynaptic
//! activation `pre_j` and postsynaptic activation `post_i`:
//!
//! ```text
//! dw_ij = eta_ij * (a_ij * pre_j * post_i + b_ij * pre_j + c_ij * post_i + d_ij)
//! ```
//!
//! The delta is then folded into the weights under one [`StabilizationMode`].
//! Updates only fire every `tau = floor(f_nn / f_hebb)` control steps.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::matrix::Matrix;
use crate::net::{NetworkShape, PlasticNetwork};

/// Below this layerwise max-abs the max-norm division is skipped.
pub const MAX_NORM_GUARD: f64 = 1e-12;

pub const RULE_FORMAT_VERSION: u32 = 1;

/// Coefficients of one weight layer. Every matrix is shaped like the layer's
/// weight matrix (`post x pre`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCoefficients {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "C")]
    pub c: Matrix,
    #[serde(rename = "D")]
    pub d: Matrix,
    pub eta: Matrix,
}

impl LayerCoefficients {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LayerCoefficients {
            a: Matrix::zeros(rows, cols),
            b: Matrix::zeros(rows, cols),
            c: Matrix::zeros(rows, cols),
            d: Matrix::zeros(rows, cols),
            eta: Matrix::zeros(rows, cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.a.shape()
    }

    fn check(&self) -> Result<()> {
        let s = self.a.shape();
        for (name, m) in [("B", &self.b), ("C", &self.c), ("D", &self.d), ("eta", &self.eta)] {
            if m.shape() != s {
                return Err(HanError::config(format!(
                    "coefficient {name} is {:?}, expected {:?}",
                    m.shape(),
                    s
                )));
            }
        }
        for m in [&self.a, &self.b, &self.c, &self.d, &self.eta] {
            if !m.is_finite() {
                return Err(HanError::config("non-finite Hebbian coefficient"));
            }
        }
        Ok(())
    }
}

/// Per-connection ABCD coefficients and learning rates for a whole network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticityRule {
    pub layers: Vec<LayerCoefficients>,
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    format_version: u32,
    #[serde(flatten)]
    rule: PlasticityRule,
}

impl PlasticityRule {
    pub fn zeros(shape: &NetworkShape) -> Self {
        PlasticityRule {
            layers: (0..shape.weight_layers())
                .map(|k| {
                    let (r, c) = shape.weight_dims(k);
                    LayerCoefficients::zeros(r, c)
                })
                .collect(),
        }
    }

    /// Every coefficient from `U(-range, range)`; `eta` likewise unless the
    /// learning rate is constant.
    pub fn random<R: Rng + ?Sized>(
        shape: &NetworkShape,
        rng: &mut R,
        range: f64,
        learning_rate: LearningRateMode,
    ) -> Self {
        let mut rule = Self::zeros(shape);
        for layer in &mut rule.layers {
            for m in [&mut layer.a, &mut layer.b, &mut layer.c, &mut layer.d] {
                for v in m.as_mut_slice() {
                    *v = rng.random_range(-range..=range);
                }
            }
            for v in layer.eta.as_mut_slice() {
                *v = match learning_rate {
                    LearningRateMode::Evolved => rng.random_range(-range..=range),
                    LearningRateMode::Constant(c) => c,
                };
            }
        }
        rule
    }

    pub fn validate(&self, shape: &NetworkShape) -> Result<()> {
        if self.layers.len() != shape.weight_layers() {
            return Err(HanError::config(format!(
                "rule has {} layers, network has {}",
                self.layers.len(),
                shape.weight_layers()
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.shape() != shape.weight_dims(k) {
                return Err(HanError::config(format!(
                    "rule layer {k} is {:?}, network layer is {:?}",
                    layer.shape(),
                    shape.weight_dims(k)
                )));
            }
            layer.check()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = RuleFile {
            format_version: RULE_FORMAT_VERSION,
            rule: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("rule serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| HanError::Format {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .unwrap_or(0) as u32;
        if found != RULE_FORMAT_VERSION {
            return Err(HanError::Version {
                path: origin.to_path_buf(),
                found,
                expected: RULE_FORMAT_VERSION,
            });
        }
        let file: RuleFile = serde_json::from_value(value).map_err(|e| HanError::Format {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(file.rule)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| HanError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
        Self::from_json(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilizationMode {
    /// Divide each layer by its largest absolute weight after every update.
    MaxNorm,
    /// Clamp each delta to `[-epsilon, epsilon]`.
    Clip { epsilon: f64 },
    /// Subtract `eta * post^2 * w` from each delta.
    Oja,
    None,
}

impl fmt::Display for StabilizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilizationMode::MaxNorm => write!(f, "max-norm"),
            StabilizationMode::Clip { epsilon } => write!(f, "clip({epsilon})"),
            StabilizationMode::Oja => write!(f, "oja"),
            StabilizationMode::None => write!(f, "none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRateMode {
    Evolved,
    Constant(f64),
}

/// Controller rate and Hebbian rate, both in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub f_nn: f64,
    pub f_hebb: f64,
}

impl UpdateSchedule {
    pub fn new(f_nn: f64, f_hebb: f64) -> Result<Self> {
        let s = UpdateSchedule { f_nn, f_hebb };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_hebb >= 1.0 && self.f_nn >= self.f_hebb && self.f_nn.is_finite()) {
            return Err(HanError::config(format!(
                "need f_nn >= f_hebb >= 1 Hz, got f_nn={} f_hebb={}",
                self.f_nn, self.f_hebb
            )));
        }
        Ok(())
    }

    /// Update period in control steps.
    pub fn tau(&self) -> u64 {
        ((self.f_nn / self.f_hebb).floor() as u64).max(1)
    }

    #[inline]
    pub fn is_tick(&self, t: u64) -> bool {
        t > 0 && t % self.tau() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticityConfig {
    pub stabilization: StabilizationMode,
    /// Moving-average window length `M`.
    pub window: usize,
    pub schedule: UpdateSchedule,
    pub learning_rate: LearningRateMode,
    /// Oja decay reads the averaged post activation (default) or the latest one.
    #[serde(default = "default_true")]
    pub oja_averaged: bool,
}

fn default_true() -> bool {
    true
}

impl PlasticityConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.window == 0 {
            return Err(HanError::config("window M must be at least 1"));
        }
        if let StabilizationMode::Clip { epsilon } = self.stabilization {
            if !(epsilon > 0.0) {
                return Err(HanError::config("clip epsilon must be positive"));
            }
        }
        if let LearningRateMode::Constant(c) = self.learning_rate {
            if !c.is_finite() {
                return Err(HanError::config("constant learning rate must be finite"));
            }
        }
        Ok(())
    }
}

/// The five tested combinations of max-norm, window length and rate ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    A,
    B,
    C,
    D,
    E,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::A,
        Condition::B,
        Condition::C,
        Condition::D,
        Condition::E,
    ];

    /// `(stabilization, M, f_nn / f_hebb)`.
    pub fn preset(self) -> (StabilizationMode, usize, u32) {
        use StabilizationMode::*;
        match self {
            Condition::A => (None, 1, 1),
            Condition::B => (MaxNorm, 1, 1),
            Condition::C => (MaxNorm, 1, 4),
            Condition::D => (MaxNorm, 10, 1),
            Condition::E => (MaxNorm, 10, 4),
        }
    }

    pub fn config(self, f_nn: f64) -> PlasticityConfig {
        let (stabilization, window, ratio) = self.preset();
        PlasticityConfig {
            stabilization,
            window,
            schedule: UpdateSchedule {
                f_nn,
                f_hebb: f_nn / f64::from(ratio),
            },
            learning_rate: LearningRateMode::Evolved,
            oja_averaged: true,
        }
    }
}

/// Looks up a condition by its letter.
pub fn condition_preset(name: &str) -> Result<(StabilizationMode, usize, u32)> {
    Ok(name.parse::<Condition>()?.preset())
}

impl FromStr for Condition {
    type Err = HanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Condition::A),
            "B" => Ok(Condition::B),
            "C" => Ok(Condition::C),
            "D" => Ok(Condition::D),
            "E" => Ok(Condition::E),
            other => Err(HanError::config(format!("unknown condition {other:?}"))),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[inline]
pub fn hebbian_delta_scalar(pre: f64, post: f64, abcd: (f64, f64, f64, f64), eta: f64) -> f64 {
    let (a, b, c, d) = abcd;
    eta * (a * pre * post + b * pre + c * post + d)
}

fn delta_into(pre: &[f64], post: &[f64], coeffs: &LayerCoefficients, out: &mut Matrix) {
    let cols = pre.len();
    let (a, b, c, d, eta) = (
        coeffs.a.as_slice(),
        coeffs.b.as_slice(),
        coeffs.c.as_slice(),
        coeffs.d.as_slice(),
        coeffs.eta.as_slice(),
    );
    for (i, (row, &x_post)) in out.as_mut_slice().chunks_exact_mut(cols).zip(post).enumerate() {
        let base = i * cols;
        for (j, (o, &x_pre)) in row.iter_mut().zip(pre).enumerate() {
            let n = base + j;
            *o = eta[n] * (a[n] * x_pre * x_post + b[n] * x_pre + c[n] * x_post + d[n]);
        }
    }
}

/// Layer delta `eta . (A . (post pre^T) + B . pre + C . post + D)`, shaped
/// `post.len() x pre.len()`.
pub fn hebbian_delta_matrix(
    pre_avg: &[f64],
    post_avg: &[f64],
    coeffs: &LayerCoefficients,
) -> Result<Matrix> {
    let shape = (post_avg.len(), pre_avg.len());
    if coeffs.shape() != shape {
        return Err(HanError::config(format!(
            "coefficients are {:?} but activations imply {:?}",
            coeffs.shape(),
            shape
        )));
    }
    coeffs.check()?;
    let mut out = Matrix::zeros(shape.0, shape.1);
    delta_into(pre_avg, post_avg, coeffs, &mut out);
    Ok(out)
}

/// Outcome of one layer stabilization, used for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LayerUpdate {
    /// Largest `|delta|` actually added before any rescaling.
    pub max_applied_delta: f64,
    /// Max-norm division was skipped because the layer was (numerically) zero.
    pub guarded: bool,
}

fn stabilize_in_place(
    w: &mut Matrix,
    dw: &Matrix,
    mode: StabilizationMode,
    post: &[f64],
    eta: &Matrix,
) -> Result<LayerUpdate> {
    let cols = w.cols();
    let mut report = LayerUpdate::default();
    match mode {
        StabilizationMode::MaxNorm | StabilizationMode::None => {
            for (wv, &d) in w.as_mut_slice().iter_mut().zip(dw.as_slice()) {
                *wv += d;
                report.max_applied_delta = report.max_applied_delta.max(d.abs());
            }
        }
        StabilizationMode::Clip { epsilon } => {
            for (wv, &d) in w.as_mut_slice().iter_mut().zip(dw.as_slice()) {
                let d = d.clamp(-epsilon, epsilon);
                *wv += d;
                report.max_applied_delta = report.max_applied_delta.max(d.abs());
            }
        }
        StabilizationMode::Oja => {
            let ws = w.as_mut_slice();
            let (dws, etas) = (dw.as_slice(), eta.as_slice());
            for (i, &x) in post.iter().enumerate() {
                let x2 = x * x;
                for n in i * cols..(i + 1) * cols {
                    let d = dws[n] - etas[n] * x2 * ws[n];
                    ws[n] += d;
                    report.max_applied_delta = report.max_applied_delta.max(d.abs());
                }
            }
        }
    }
    if mode == StabilizationMode::MaxNorm {
        let m = w.max_abs();
        if m.is_finite() && m >= MAX_NORM_GUARD {
            for v in w.as_mut_slice() {
                *v /= m;
            }
        } else {
            report.guarded = m.is_finite();
        }
    }
    if !w.is_finite() {
        return Err(HanError::Numeric(format!(
            "non-finite weight after {mode} update"
        )));
    }
    Ok(report)
}

/// Returns `W` with `dW` folded in under `mode`.
pub fn apply_stabilization(
    w: &Matrix,
    dw: &Matrix,
    mode: StabilizationMode,
    post_avg: &[f64],
    eta: &Matrix,
) -> Result<Matrix> {
    if !w.same_shape(dw) || !w.same_shape(eta) || post_avg.len() != w.rows() {
        return Err(HanError::config("stabilization operands have mismatched shapes"));
    }
    let mut out = w.clone();
    stabilize_in_place(&mut out, dw, mode, post_avg, eta)?;
    Ok(out)
}

/// Summary of a full-network Hebbian update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateOutcome {
    pub max_applied_delta: f64,
    pub guarded_layers: usize,
}

/// Applies one Hebbian update to every layer using the current trace averages.
pub fn hebbian_update(
    net: &mut PlasticNetwork,
    rule: &PlasticityRule,
    cfg: &PlasticityConfig,
) -> Result<UpdateOutcome> {
    debug_assert_eq!(rule.layers.len(), net.shape().weight_layers());
    net.refresh_means();
    let (weights, scratch, traces) = net.split_for_update();
    let mut outcome = UpdateOutcome::default();
    for (k, (w, coeffs)) in weights.iter_mut().zip(&rule.layers).enumerate() {
        let dw = &mut scratch.deltas[k];
        delta_into(&scratch.means[k], &scratch.means[k + 1], coeffs, dw);
        let post = if cfg.stabilization == StabilizationMode::Oja && !cfg.oja_averaged {
            traces[k + 1].last()
        } else {
            &scratch.means[k + 1]
        };
        let r = stabilize_in_place(w, dw, cfg.stabilization, post, &coeffs.eta)?;
        outcome.max_applied_delta = outcome.max_applied_delta.max(r.max_applied_delta);
        outcome.guarded_layers += usize::from(r.guarded);
    }
    Ok(outcome)
}

/// Runs the Hebbian update if `t` is a schedule tick. Off-tick steps leave the
/// weights untouched. Returns whether an update happened.
pub fn scheduled_step(
    net: &mut PlasticNetwork,
    rule: &PlasticityRule,
    cfg: &PlasticityConfig,
    t: u64,
) -> Result<bool> {
    if !cfg.schedule.is_tick(t) {
        return Ok(false);
    }
    hebbian_update(net, rule, cfg)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_delta_examples() {
        assert_eq!(hebbian_delta_scalar(0.3, -0.9, (0.0, 0.0, 0.0, 0.0), 0.7), 0.0);
        assert!((hebbian_delta_scalar(0.5, 0.5, (1.0, 0.0, 0.0, 0.0), 1.0) - 0.25).abs() < 1e-15);
        // 0.1 * (0.2 - 0.2 + 1)
        assert!((hebbian_delta_scalar(0.2, -0.2, (0.0, 1.0, 1.0, 1.0), 0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn matrix_delta_special_cases() {
        let zero = LayerCoefficients::zeros(2, 3);
        let d = hebbian_delta_matrix(&[0.1, 0.2, 0.3], &[0.5, -0.5], &zero).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));

        let mut d_only = LayerCoefficients::zeros(2, 3);
        d_only.d = Matrix::filled(2, 3, 0.37);
        d_only.eta = Matrix::filled(2, 3, 1.0);
        let d = hebbian_delta_matrix(&[0.1, 0.2, 0.3], &[0.5, -0.5], &d_only).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.37));

        assert!(matches!(
            hebbian_delta_matrix(&[0.1, 0.2], &[0.5, -0.5], &zero),
            Err(HanError::Config(_))
        ));
    }

    #[test]
    fn matrix_delta_matches_scalar_loop_2x2() {
        let mut rng = rng_from(11);
        let shape = NetworkShape::new(vec![2, 2]).unwrap();
        let rule = PlasticityRule::random(&shape, &mut rng, 1.0, LearningRateMode::Evolved);
        let c = &rule.layers[0];
        let (pre, post) = ([0.3, -0.8], [0.6, 0.1]);
        let d = hebbian_delta_matrix(&pre, &post, c).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let s = hebbian_delta_scalar(
                    pre[j],
                    post[i],
                    (c.a.get(i, j), c.b.get(i, j), c.c.get(i, j), c.d.get(i, j)),
                    c.eta.get(i, j),
                );
                assert!((d.get(i, j) - s).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn max_norm_divides_by_layer_max() {
        let w = m(2, 2, &[2.0, -4.0, 1.0, 0.5]);
        let out = apply_stabilization(
            &w,
            &Matrix::zeros(2, 2),
            StabilizationMode::MaxNorm,
            &[0.0, 0.0],
            &Matrix::zeros(2, 2),
        )
        .unwrap();
        assert_eq!(out.as_slice(), &[0.5, -1.0, 0.25, 0.125]);

        let unit = m(2, 2, &[1.0, -0.3, 0.2, 0.5]);
        let out = apply_stabilization(
            &unit,
            &Matrix::zeros(2, 2),
            StabilizationMode::MaxNorm,
            &[0.0, 0.0],
            &Matrix::zeros(2, 2),
        )
        .unwrap();
        assert_eq!(out, unit);
    }

    #[test]
    fn max_norm_zero_guard_keeps_zero_layer() {
        let z = Matrix::zeros(2, 2);
        let out =
            apply_stabilization(&z, &z, StabilizationMode::MaxNorm, &[0.0, 0.0], &z).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn clip_bounds_each_delta() {
        let w = Matrix::zeros(1, 2);
        let dw = m(1, 2, &[-7.0, 3.0]);
        let out = apply_stabilization(
            &w,
            &dw,
            StabilizationMode::Clip { epsilon: 5.0 },
            &[0.0],
            &Matrix::zeros(1, 2),
        )
        .unwrap();
        assert_eq!(out.as_slice(), &[-5.0, 3.0]);
    }

    #[test]
    fn oja_subtracts_post_squared_decay() {
        let w = m(1, 2, &[0.5, -1.0]);
        let dw = m(1, 2, &[0.1, 0.2]);
        let eta = m(1, 2, &[0.1, 0.1]);
        let out = apply_stabilization(&w, &dw, StabilizationMode::Oja, &[2.0], &eta).unwrap();
        // w + dw - eta * 4 * w
        assert!((out.get(0, 0) - (0.5 + 0.1 - 0.2)).abs() < 1e-15);
        assert!((out.get(0, 1) - (-1.0 + 0.2 + 0.4)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_result_is_numeric_error() {
        let w = m(1, 1, &[f64::MAX]);
        let dw = m(1, 1, &[f64::MAX]);
        let r = apply_stabilization(&w, &dw, StabilizationMode::None, &[0.0], &dw);
        assert!(matches!(r, Err(HanError::Numeric(_))));
    }

    #[test]
    fn schedule_tau_is_floor_ratio() {
        let s = UpdateSchedule::new(20.0, 5.0).unwrap();
        assert_eq!(s.tau(), 4);
        let ticks: Vec<u64> = (0..13).filter(|&t| s.is_tick(t)).collect();
        assert_eq!(ticks, vec![4, 8, 12]);
        assert_eq!(UpdateSchedule::new(20.0, 3.0).unwrap().tau(), 6);
        let every = UpdateSchedule::new(20.0, 20.0).unwrap();
        assert!((1..50).all(|t| every.is_tick(t)));
        assert!(!every.is_tick(0));
        assert!(UpdateSchedule::new(5.0, 20.0).is_err());
        assert!(UpdateSchedule::new(20.0, 0.5).is_err());
    }

    #[test]
    fn scheduled_step_leaves_off_tick_weights_bitwise() {
        let shape = NetworkShape::new(vec![3, 4, 2]).unwrap();
        let mut rng = rng_from(3);
        let mut net = PlasticNetwork::new(shape.clone(), 2).unwrap();
        net.randomize_weights(&mut rng, 0.1);
        let rule = PlasticityRule::random(&shape, &mut rng, 1.0, LearningRateMode::Evolved);
        let cfg = Condition::E.config(20.0);
        for t in 1..=3u64 {
            net.forward(&[0.2, -0.1, 0.4]).unwrap();
            let before = net.snapshot(t);
            assert!(!scheduled_step(&mut net, &rule, &cfg, t).unwrap());
            assert_eq!(net.snapshot(t), before);
        }
        net.forward(&[0.2, -0.1, 0.4]).unwrap();
        assert!(scheduled_step(&mut net, &rule, &cfg, 4).unwrap());
    }

    #[test]
    fn presets_match_condition_table() {
        use StabilizationMode::*;
        assert_eq!(condition_preset("A").unwrap(), (None, 1, 1));
        assert_eq!(condition_preset("B").unwrap(), (MaxNorm, 1, 1));
        assert_eq!(condition_preset("C").unwrap(), (MaxNorm, 1, 4));
        assert_eq!(condition_preset("D").unwrap(), (MaxNorm, 10, 1));
        assert_eq!(condition_preset("E").unwrap(), (MaxNorm, 10, 4));
        assert!(matches!(condition_preset("F"), Err(HanError::Config(_))));
        assert_eq!(Condition::C.config(20.0).schedule.tau(), 4);
    }

    #[test]
    fn rule_json_round_trip_and_version_check() {
        let shape = NetworkShape::new(vec![2, 3, 1]).unwrap();
        let mut rng = rng_from(9);
        let rule = PlasticityRule::random(&shape, &mut rng, 1.0, LearningRateMode::Evolved);
        let text = rule.to_json();
        let p = Path::new("rule.json");
        assert_eq!(PlasticityRule::from_json(&text, p).unwrap(), rule);
        assert!(text.contains("\"A\""));
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            PlasticityRule::from_json(&bumped, p),
            Err(HanError::Version { found: 7, .. })
        ));
        assert!(matches!(
            PlasticityRule::from_json("{not json", p),
            Err(HanError::Format { .. })
        ));
    }
}
