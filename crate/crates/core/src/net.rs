//! Feedforward plastic network.
//!
//! Layer `k` maps `x^(k-1)` to `x^(k) = phi(W^(k) x^(k-1))` with no bias. Every
//! layer's activation vector, the input included, is pushed into a ring
//! buffer of length `M` so the plasticity rule can read moving averages.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// Linear units. Only meant for checking classical Hebbian results.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NetworkShape {
    layer_sizes: Vec<usize>,
}

impl NetworkShape {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(HanError::config(
                "a network needs at least an input and an output layer",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(HanError::config("layer sizes must be positive"));
        }
        Ok(NetworkShape { layer_sizes })
    }

    /// `inputs -> hidden... -> outputs`.
    pub fn with_hidden(inputs: usize, hidden: &[usize], outputs: usize) -> Result<Self> {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight matrices.
    pub fn weight_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// `(rows, cols)` of weight matrix `k` (0-based), i.e. `(size_{k+1}, size_k)`.
    pub fn weight_dims(&self, k: usize) -> (usize, usize) {
        (self.layer_sizes[k + 1], self.layer_sizes[k])
    }

    pub fn connections(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

impl TryFrom<Vec<usize>> for NetworkShape {
    type Error = HanError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        NetworkShape::new(v)
    }
}

impl From<NetworkShape> for Vec<usize> {
    fn from(s: NetworkShape) -> Self {
        s.layer_sizes
    }
}

/// Ring buffer of the last `window` activation vectors of one layer.
///
/// Slots start at zero, so before `window` pushes the mean is taken over a
/// zero-padded window.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    window: usize,
    width: usize,
    slots: Vec<f64>,
    cursor: usize,
    pushes: u64,
}

impl ActivationTrace {
    pub fn new(width: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(HanError::config("moving-average window must be at least 1"));
        }
        Ok(ActivationTrace {
            window,
            width,
            slots: vec![0.0; window * width],
            cursor: 0,
            pushes: 0,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.width);
        let start = self.cursor * self.width;
        self.slots[start..start + self.width].copy_from_slice(x);
        self.cursor = (self.cursor + 1) % self.window;
        self.pushes += 1;
    }

    /// Most recently pushed vector (zeros before the first push).
    pub fn last(&self) -> &[f64] {
        let idx = (self.cursor + self.window - 1) % self.window;
        &self.slots[idx * self.width..(idx + 1) * self.width]
    }

    pub fn mean_into(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width);
        if self.window == 1 {
            out.copy_from_slice(&self.slots);
            return;
        }
        out.fill(0.0);
        for slot in self.slots.chunks_exact(self.width) {
            for (o, v) in out.iter_mut().zip(slot) {
                *o += v;
            }
        }
        let inv = self.window as f64;
        for o in out.iter_mut() {
            *o /= inv;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.mean_into(&mut out);
        out
    }

    pub fn clear(&mut self) {
        self.slots.fill(0.0);
        self.cursor = 0;
        self.pushes = 0;
    }
}

/// Flattened copy of all plastic weights at a given step.
///
/// Flattening is layer-major, then row-major within each layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub step: u64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PlasticNetwork {
    shape: NetworkShape,
    activation: Activation,
    weights: Vec<Matrix>,
    traces: Vec<ActivationTrace>,
    // Current activation of every layer, input included.
    acts: Vec<Vec<f64>>,
    forward_passes: u64,
    pub(crate) scratch: Scratch,
}

/// Buffers reused by every Hebbian update so the rollout loop does not allocate.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    pub(crate) means: Vec<Vec<f64>>,
    pub(crate) deltas: Vec<Matrix>,
}

impl PlasticNetwork {
    /// All-zero weights and zeroed traces.
    pub fn new(shape: NetworkShape, window: usize) -> Result<Self> {
        let weights: Vec<Matrix> = (0..shape.weight_layers())
            .map(|k| {
                let (r, c) = shape.weight_dims(k);
                Matrix::zeros(r, c)
            })
            .collect();
        let traces = shape
            .layer_sizes()
            .iter()
            .map(|&n| ActivationTrace::new(n, window))
            .collect::<Result<Vec<_>>>()?;
        let acts: Vec<Vec<f64>> = shape.layer_sizes().iter().map(|&n| vec![0.0; n]).collect();
        let scratch = Scratch {
            means: acts.clone(),
            deltas: weights.clone(),
        };
        Ok(PlasticNetwork {
            shape,
            activation: Activation::Tanh,
            weights,
            traces,
            acts,
            forward_passes: 0,
            scratch,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn window(&self) -> usize {
        self.traces[0].window()
    }

    pub fn forward_passes(&self) -> u64 {
        self.forward_passes
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn set_weights(&mut self, weights: Vec<Matrix>) -> Result<()> {
        if weights.len() != self.weights.len()
            || weights
                .iter()
                .zip(&self.weights)
                .any(|(a, b)| !a.same_shape(b))
        {
            return Err(HanError::config("weight matrices do not match network shape"));
        }
        self.weights = weights;
        Ok(())
    }

    /// Draws every weight from `U(-range, range)`.
    pub fn randomize_weights<R: Rng + ?Sized>(&mut self, rng: &mut R, range: f64) {
        for w in &mut self.weights {
            for v in w.as_mut_slice() {
                *v = rng.random_range(-range..=range);
            }
        }
    }

    pub fn reset_traces(&mut self) {
        for t in &mut self.traces {
            t.clear();
        }
        for a in &mut self.acts {
            a.fill(0.0);
        }
        self.forward_passes = 0;
    }

    pub fn trace(&self, layer: usize) -> Result<&ActivationTrace> {
        self.traces
            .get(layer)
            .ok_or_else(|| HanError::config(format!("no layer {layer}")))
    }

    /// Runs one control-rate forward pass and records every layer's activation.
    pub fn forward(&mut self, state: &[f64]) -> Result<&[f64]> {
        if state.len() != self.shape.inputs() {
            return Err(HanError::config(format!(
                "state has {} entries, network expects {}",
                state.len(),
                self.shape.inputs()
            )));
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(HanError::input("non-finite observation"));
        }
        self.acts[0].copy_from_slice(state);
        let act = self.activation;
        for (k, w) in self.weights.iter().enumerate() {
            let (lower, upper) = self.acts.split_at_mut(k + 1);
            w.mul_vec_into(&lower[k], &mut upper[0], |v| act.apply(v));
        }
        for (trace, a) in self.traces.iter_mut().zip(&self.acts) {
            trace.push(a);
        }
        self.forward_passes += 1;
        Ok(self.acts.last().unwrap())
    }

    /// Zero-padded moving average of the last `M` activations of `layer`
    /// (0 = input layer).
    pub fn averaged_activations(&self, layer: usize) -> Result<Vec<f64>> {
        Ok(self.trace(layer)?.mean())
    }

    /// Fills `scratch.means` with every layer's moving average.
    pub(crate) fn refresh_means(&mut self) {
        for (trace, out) in self.traces.iter().zip(self.scratch.means.iter_mut()) {
            trace.mean_into(out);
        }
    }

    pub(crate) fn split_for_update(&mut self) -> (&mut [Matrix], &mut Scratch, &[ActivationTrace]) {
        (&mut self.weights, &mut self.scratch, &self.traces)
    }

    pub fn num_weights(&self) -> usize {
        self.shape.connections()
    }

    pub fn flatten_weights_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for w in &self.weights {
            out.extend_from_slice(w.as_slice());
        }
    }

    pub fn snapshot(&self, step: u64) -> NetworkSnapshot {
        let mut weights = Vec::with_capacity(self.num_weights());
        self.flatten_weights_into(&mut weights);
        NetworkSnapshot { step, weights }
    }

    /// Rebuilds per-layer matrices from a flattened snapshot.
    pub fn unflatten(shape: &NetworkShape, flat: &[f64]) -> Result<Vec<Matrix>> {
        if flat.len() != shape.connections() {
            return Err(HanError::config(format!(
                "snapshot has {} weights, shape needs {}",
                flat.len(),
                shape.connections()
            )));
        }
        let mut offset = 0;
        (0..shape.weight_layers())
            .map(|k| {
                let (r, c) = shape.weight_dims(k);
                let m = Matrix::from_vec(r, c, flat[offset..offset + r * c].to_vec());
                offset += r * c;
                m
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(sizes: &[usize], window: usize) -> PlasticNetwork {
        PlasticNetwork::new(NetworkShape::new(sizes.to_vec()).unwrap(), window).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_action() {
        let mut n = net(&[3, 4, 2], 1);
        assert_eq!(n.forward(&[0.3, -2.0, 9.0]).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn scalar_chain_matches_hand_evaluation() {
        let mut n = net(&[1, 1, 1], 1);
        for w in n.weights_mut() {
            w.set(0, 0, 1.0);
        }
        let a = n.forward(&[0.5]).unwrap()[0];
        // tanh(tanh(0.5))
        assert!((a - 0.5f64.tanh().tanh()).abs() < 1e-15);
        assert!((a - 0.431_808_180_595_096_1).abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic_after_trace_reset() {
        let mut n = net(&[2, 5, 2], 3);
        let mut rng = crate::seeding::rng_from(1);
        n.randomize_weights(&mut rng, 1.0);
        let a = n.forward(&[0.1, -0.7]).unwrap().to_vec();
        n.reset_traces();
        let b = n.forward(&[0.1, -0.7]).unwrap().to_vec();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let mut n = net(&[2, 1], 1);
        assert!(matches!(n.forward(&[1.0]), Err(HanError::Config(_))));
        assert!(matches!(n.forward(&[1.0, f64::NAN]), Err(HanError::Input(_))));
    }

    #[test]
    fn shape_validation() {
        assert!(NetworkShape::new(vec![3]).is_err());
        assert!(NetworkShape::new(vec![3, 0, 1]).is_err());
        assert_eq!(NetworkShape::new(vec![17, 16, 6]).unwrap().connections(), 368);
    }

    #[test]
    fn averaged_activations_window_cases() {
        let mut t = ActivationTrace::new(1, 1).unwrap();
        t.push(&[0.7]);
        assert_eq!(t.mean(), vec![0.7]);

        let mut t = ActivationTrace::new(1, 2).unwrap();
        t.push(&[0.2]);
        t.push(&[0.4]);
        assert!((t.mean()[0] - 0.3).abs() < 1e-15);

        let mut t = ActivationTrace::new(1, 4).unwrap();
        t.push(&[0.8]);
        assert!((t.mean()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn input_layer_is_traced() {
        let mut n = net(&[2, 1], 2);
        n.forward(&[1.0, -1.0]).unwrap();
        assert_eq!(n.averaged_activations(0).unwrap(), vec![0.5, -0.5]);
        assert!(n.averaged_activations(2).is_err());
    }

    #[test]
    fn snapshot_is_a_deep_copy() {
        let mut n = net(&[2, 3, 1], 1);
        let mut rng = crate::seeding::rng_from(5);
        n.randomize_weights(&mut rng, 0.1);
        let s1 = n.snapshot(0);
        let s2 = n.snapshot(0);
        assert_eq!(s1, s2);
        n.weights_mut()[0].set(0, 0, 42.0);
        assert_ne!(n.snapshot(1).weights, s1.weights);
        assert_eq!(s1, s2);
        assert_eq!(s1.weights.len(), 2 * 3 + 3);
    }

    #[test]
    fn flatten_is_layer_then_row_major() {
        let shape = NetworkShape::new(vec![2, 2, 1]).unwrap();
        let mut n = PlasticNetwork::new(shape.clone(), 1).unwrap();
        let flat: Vec<f64> = (0..6).map(f64::from).collect();
        n.set_weights(PlasticNetwork::unflatten(&shape, &flat).unwrap())
            .unwrap();
        assert_eq!(n.weights()[0].get(1, 0), 2.0);
        assert_eq!(n.weights()[1].get(0, 1), 5.0);
        assert_eq!(n.snapshot(0).weights, flat);
    }
}
