//! Weight-dynamics analysis: total plasticity, fixed-point vs limit-cycle
//! classification, PCA embeddings, spectra and snapshot distance matrices.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::net::{NetworkShape, NetworkSnapshot};
use crate::seeding::rng_from;

/// Early-window means below this count as "never adapted".
pub const FROZEN_GUARD: f64 = 1e-12;

/// Ordered weight snapshots of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTrajectory {
    /// Number of weights in each layer, in flattening order.
    layer_lens: Vec<usize>,
    steps: Vec<u64>,
    weights: Vec<Vec<f64>>,
}

impl WeightTrajectory {
    pub fn new(layer_lens: Vec<usize>) -> Self {
        WeightTrajectory {
            layer_lens,
            steps: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn for_shape(shape: &NetworkShape) -> Self {
        Self::new(
            (0..shape.weight_layers())
                .map(|k| {
                    let (r, c) = shape.weight_dims(k);
                    r * c
                })
                .collect(),
        )
    }

    /// Trajectory treating all weights as a single layer.
    pub fn single_layer(dim: usize) -> Self {
        Self::new(vec![dim])
    }

    pub fn push(&mut self, step: u64, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.dim() {
            return Err(HanError::input(format!(
                "snapshot has {} weights, trajectory holds {}",
                weights.len(),
                self.dim()
            )));
        }
        if self.steps.last().is_some_and(|&last| step <= last) {
            return Err(HanError::input("snapshot steps must strictly increase"));
        }
        self.steps.push(step);
        self.weights.push(weights);
        Ok(())
    }

    pub fn push_snapshot(&mut self, s: NetworkSnapshot) -> Result<()> {
        self.push(s.step, s.weights)
    }

    pub fn dim(&self) -> usize {
        self.layer_lens.iter().sum()
    }

    pub fn layer_lens(&self) -> &[usize] {
        &self.layer_lens
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn snapshots(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|v| v.is_finite())
    }

    /// Time series of a single weight.
    pub fn weight_series(&self, index: usize) -> Vec<f64> {
        self.weights.iter().map(|w| w[index]).collect()
    }

    /// Every `stride`-th snapshot, starting with the first.
    pub fn strided(&self, stride: usize) -> WeightTrajectory {
        let stride = stride.max(1);
        WeightTrajectory {
            layer_lens: self.layer_lens.clone(),
            steps: self.steps.iter().step_by(stride).copied().collect(),
            weights: self.weights.iter().step_by(stride).cloned().collect(),
        }
    }

    /// CSV with header `step,w0,w1,...` (layer-major, row-major weights).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for i in 0..self.dim() {
            let _ = write!(out, ",w{i}");
        }
        out.push('\n');
        for (s, w) in self.steps.iter().zip(&self.weights) {
            let _ = write!(out, "{s}");
            for v in w {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, layer_lens: Vec<usize>) -> Result<Self> {
        let mut traj = WeightTrajectory::new(layer_lens);
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse_err = |what: &str| HanError::input(format!("line {}: bad {what}", n + 1));
            let step = fields
                .next()
                .and_then(|f| f.trim().parse::<u64>().ok())
                .ok_or_else(|| parse_err("step"))?;
            let w = fields
                .map(|f| f.trim().parse::<f64>().map_err(|_| parse_err("weight")))
                .collect::<Result<Vec<_>>>()?;
            traj.push(step, w)?;
        }
        Ok(traj)
    }
}

/// `Delta_t W = sum_k ||W_t^(k) - W_{t-1}^(k)||_2` for every consecutive pair.
pub fn plasticity_series(traj: &WeightTrajectory) -> Result<Vec<f64>> {
    if traj.len() < 2 {
        return Err(HanError::input("plasticity series needs at least two snapshots"));
    }
    Ok(traj
        .weights
        .windows(2)
        .map(|pair| {
            let mut offset = 0;
            traj.layer_lens
                .iter()
                .map(|&n| {
                    let d: f64 = pair[1][offset..offset + n]
                        .iter()
                        .zip(&pair[0][offset..offset + n])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    offset += n;
                    d.sqrt()
                })
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    FixedPoint,
    LimitCycle,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    /// NaN for diverged runs; stored as `null`.
    #[serde(with = "nan_as_null")]
    pub mean_early: f64,
    #[serde(with = "nan_as_null")]
    pub mean_late: f64,
    pub rho: f64,
    pub early_fraction: f64,
    pub verdict: Verdict,
    /// Dominant nonzero weight frequency in Hz, filled in for limit cycles.
    pub dominant_frequency: Option<f64>,
}

impl AttractorReport {
    pub fn diverged(rho: f64, early_fraction: f64) -> Self {
        AttractorReport {
            mean_early: f64::NAN,
            mean_late: f64::NAN,
            rho,
            early_fraction,
            verdict: Verdict::Diverged,
            dominant_frequency: None,
        }
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Converged iff the mean plasticity after the first `early_fraction` of the
/// rollout is strictly below `rho` times the mean during it.
pub fn classify_convergence(
    series: &[f64],
    rho: f64,
    early_fraction: f64,
) -> Result<AttractorReport> {
    if series.len() < 2 {
        return Err(HanError::input("need at least two plasticity values"));
    }
    if !(rho > 0.0) || !(early_fraction > 0.0 && early_fraction < 1.0) {
        return Err(HanError::input("need rho > 0 and 0 < early_fraction < 1"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Ok(AttractorReport::diverged(rho, early_fraction));
    }
    let n_early = ((early_fraction * series.len() as f64).ceil() as usize).clamp(1, series.len() - 1);
    let mean_early = mean(&series[..n_early]);
    let mean_late = mean(&series[n_early..]);
    let verdict = if mean_early < FROZEN_GUARD || mean_late < rho * mean_early {
        Verdict::FixedPoint
    } else {
        Verdict::LimitCycle
    };
    Ok(AttractorReport {
        mean_early,
        mean_late,
        rho,
        early_fraction,
        verdict,
        dominant_frequency: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaEmbedding {
    /// One row per snapshot, `k` coordinates each.
    pub points: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Unit principal directions, each of trajectory dimension.
    pub components: Vec<Vec<f64>>,
}

impl PcaEmbedding {
    pub fn to_csv(&self, steps: &[u64]) -> String {
        let k = self.explained_variance_ratio.len();
        let mut out = String::from("step");
        for i in 0..k {
            let _ = write!(out, ",pc{}", i + 1);
        }
        out.push('\n');
        for (s, p) in steps.iter().zip(&self.points) {
            let _ = write!(out, "{s}");
            for v in p {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Projects centered snapshots on the top-`k` principal directions. Each
/// direction's largest-magnitude loading is made positive.
pub fn pca_embed(traj: &WeightTrajectory, k: usize) -> Result<PcaEmbedding> {
    let (n, d) = (traj.len(), traj.dim());
    if k == 0 || n < k || d < k {
        return Err(HanError::input(format!(
            "PCA with {k} components needs at least {k} snapshots and dimensions, got {n}x{d}"
        )));
    }
    let mut x = DMatrix::from_fn(n, d, |i, j| traj.weights[i][j]);
    for j in 0..d {
        let m = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-m);
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if !(total > 1e-300) {
        return Ok(PcaEmbedding {
            points: vec![vec![0.0; k]; n],
            explained_variance_ratio: vec![0.0; k],
            components: vec![vec![0.0; d]; k],
        });
    }

    // Eigen-decompose whichever of X^T X (d x d) or X X^T (n x n) is smaller.
    let use_gram = n < d;
    let sym = if use_gram { &x * x.transpose() } else { x.transpose() * &x };
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let lambda = eig.eigenvalues[idx].max(0.0);
        let mut dir: Vec<f64> = if use_gram {
            if lambda <= 1e-300 {
                vec![0.0; d]
            } else {
                let v = x.transpose() * eig.eigenvectors.column(idx);
                let norm = v.norm();
                v.iter().map(|e| e / norm).collect()
            }
        } else {
            eig.eigenvectors.column(idx).iter().copied().collect()
        };
        let pivot = dir
            .iter()
            .copied()
            .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
        ratios.push((lambda / total).clamp(0.0, 1.0));
        components.push(dir);
    }
    let points = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| x.row(i).iter().zip(c).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaEmbedding {
        points,
        explained_variance_ratio: ratios,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub sample_rate: f64,
    /// Bin frequencies in Hz, `0..=fs/2` in steps of `fs / len`.
    pub frequencies: Vec<f64>,
    /// Single-sided amplitude per bin.
    pub magnitudes: Vec<f64>,
}

impl SpectrumReport {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Strongest bin above 0 Hz, if any carries energy.
    pub fn dominant_frequency(&self) -> Option<f64> {
        self.peaks(1).first().copied()
    }

    /// Frequencies of the `count` strongest nonzero bins, strongest first.
    pub fn peaks(&self, count: usize) -> Vec<f64> {
        let mut idx: Vec<usize> = (1..self.magnitudes.len())
            .filter(|&i| self.magnitudes[i] > 1e-12)
            .collect();
        idx.sort_by(|&a, &b| self.magnitudes[b].total_cmp(&self.magnitudes[a]).then(a.cmp(&b)));
        idx.into_iter().take(count).map(|i| self.frequencies[i]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,magnitude\n");
        for (f, m) in self.frequencies.iter().zip(&self.magnitudes) {
            let _ = writeln!(out, "{f},{m}");
        }
        out
    }

    fn accumulate(&mut self, other: &SpectrumReport) {
        for (a, b) in self.magnitudes.iter_mut().zip(&other.magnitudes) {
            *a += b;
        }
    }
}

/// Mean-removed magnitude spectrum of a real signal.
pub fn spectrum(signal: &[f64], sample_rate: f64) -> Result<SpectrumReport> {
    let n = signal.len();
    if n < 8 {
        return Err(HanError::input("spectrum needs at least 8 samples"));
    }
    if !(sample_rate > 0.0) {
        return Err(HanError::input("sample rate must be positive"));
    }
    let m = mean(signal);
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let frequencies = (0..bins).map(|k| k as f64 * sample_rate / n as f64).collect();
    let magnitudes = buf[..bins]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let scale = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            scale * c.norm() / n as f64
        })
        .collect();
    Ok(SpectrumReport {
        sample_rate,
        frequencies,
        magnitudes,
    })
}

/// Summed spectrum of up to `count` weights chosen with `seed`.
pub fn weights_spectrum(
    traj: &WeightTrajectory,
    sample_rate: f64,
    count: usize,
    seed: u64,
) -> Result<SpectrumReport> {
    if traj.dim() == 0 {
        return Err(HanError::input("trajectory has no weights"));
    }
    let picks = sample(&mut rng_from(seed), traj.dim(), count.min(traj.dim()));
    let mut total: Option<SpectrumReport> = None;
    for i in picks.iter() {
        let s = spectrum(&traj.weight_series(i), sample_rate)?;
        match &mut total {
            Some(t) => t.accumulate(&s),
            None => total = Some(s),
        }
    }
    Ok(total.expect("at least one weight"))
}

/// Pairwise Euclidean distances between strided snapshots.
pub fn distance_matrix(traj: &WeightTrajectory, stride: usize) -> Result<Vec<Vec<f64>>> {
    let s = traj.strided(stride);
    if s.len() < 2 {
        return Err(HanError::input("distance matrix needs at least two snapshots"));
    }
    let n = s.len();
    let mut out = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in p + 1..n {
            let d = s.weights[p]
                .iter()
                .zip(&s.weights[q])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out[p][q] = d;
            out[q][p] = d;
        }
    }
    Ok(out)
}

pub fn series_to_csv(series: &[f64], sample_rate: f64) -> String {
    let mut out = String::from("step,time_s,delta_w\n");
    for (i, v) in series.iter().enumerate() {
        let _ = writeln!(out, "{},{},{v}", i + 1, (i + 1) as f64 / sample_rate);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(rows: &[&[f64]]) -> WeightTrajectory {
        let mut t = WeightTrajectory::single_layer(rows[0].len());
        for (i, r) in rows.iter().enumerate() {
            t.push(i as u64, r.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn constant_trajectory_has_zero_plasticity() {
        let t = traj(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        assert_eq!(plasticity_series(&t).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_entry_change() {
        let t = traj(&[&[1.0, 2.0], &[4.0, 2.0]]);
        assert_eq!(plasticity_series(&t).unwrap(), vec![3.0]);
        assert!(plasticity_series(&traj(&[&[1.0]])).is_err());
    }

    #[test]
    fn layerwise_norms_are_summed() {
        let mut t = WeightTrajectory::new(vec![1, 1]);
        t.push(0, vec![0.0, 0.0]).unwrap();
        t.push(1, vec![3.0, 4.0]).unwrap();
        // 3 + 4, not sqrt(9 + 16)
        assert_eq!(plasticity_series(&t).unwrap(), vec![7.0]);
    }

    #[test]
    fn push_validates_order_and_width() {
        let mut t = WeightTrajectory::single_layer(2);
        t.push(3, vec![0.0, 0.0]).unwrap();
        assert!(t.push(3, vec![0.0, 0.0]).is_err());
        assert!(t.push(4, vec![0.0]).is_err());
    }

    #[test]
    fn frozen_series_is_fixed_point() {
        let r = classify_convergence(&[0.0; 100], 0.9, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::FixedPoint);
    }

    #[test]
    fn non_finite_series_diverges() {
        let mut s = vec![1.0; 50];
        s[30] = f64::INFINITY;
        assert_eq!(classify_convergence(&s, 0.9, 0.05).unwrap().verdict, Verdict::Diverged);
    }

    #[test]
    fn classify_rejects_bad_arguments() {
        assert!(classify_convergence(&[1.0], 0.9, 0.05).is_err());
        assert!(classify_convergence(&[1.0, 1.0], 0.0, 0.05).is_err());
        assert!(classify_convergence(&[1.0, 1.0], 0.9, 1.0).is_err());
    }

    #[test]
    fn early_window_is_ceil_fraction() {
        // 21 entries, 5% -> ceil(1.05) = 2 early entries
        let mut s = vec![1.0; 21];
        s[0] = 10.0;
        s[1] = 10.0;
        let r = classify_convergence(&s, 0.9, 0.05).unwrap();
        assert_eq!(r.mean_early, 10.0);
        assert_eq!(r.mean_late, 1.0);
    }

    #[test]
    fn spectrum_bin_layout() {
        let s = spectrum(&[1.0; 16], 8.0).unwrap();
        assert_eq!(s.frequencies.len(), 9);
        assert_eq!(s.resolution(), 0.5);
        assert_eq!(s.dominant_frequency(), None);
        assert!(spectrum(&[1.0; 7], 8.0).is_err());
    }

    #[test]
    fn degenerate_pca_is_zero() {
        let t = traj(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let e = pca_embed(&t, 2).unwrap();
        assert!(e.points.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(e.explained_variance_ratio, vec![0.0, 0.0]);
    }

    #[test]
    fn csv_round_trip() {
        let t = traj(&[&[0.5, -0.25], &[0.125, 1.0]]);
        let back = WeightTrajectory::from_csv(&t.to_csv(), vec![2]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn distance_matrix_of_identical_snapshots_is_zero() {
        let t = traj(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let m = distance_matrix(&t, 1).unwrap();
        assert!(m.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(distance_matrix(&t, 2).unwrap().len(), 2);
        assert!(distance_matrix(&t, 5).is_err());
    }
}
