//! Genome layout and the two black-box optimizers used for meta-training.
//!
//! Both optimizers follow an ask/tell protocol and maximize fitness. All
//! randomness comes from the caller's RNG so a run is reproducible from its
//! seed and resumable from a checkpoint of `(optimizer, rng)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::matrix::Matrix;
use crate::net::NetworkShape;
use crate::plasticity::{LayerCoefficients, LearningRateMode, PlasticityRule};

/// Flat vector of evolvable Hebbian parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    A,
    B,
    C,
    D,
    Eta,
}

/// Contiguous run of genome entries holding one coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub layer: usize,
    pub part: Part,
    pub offset: usize,
    pub len: usize,
}

/// Maps genome positions to rule coefficients.
///
/// Layout: for each weight layer in order, the `A`, `B`, `C`, `D` matrices
/// and then (when learning rates are evolved) `eta`, each row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeLayout {
    shape: NetworkShape,
    learning_rate: LearningRateMode,
}

impl GenomeLayout {
    pub fn new(shape: NetworkShape, learning_rate: LearningRateMode) -> Self {
        GenomeLayout {
            shape,
            learning_rate,
        }
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    fn parts(&self) -> &'static [Part] {
        match self.learning_rate {
            LearningRateMode::Evolved => &[Part::A, Part::B, Part::C, Part::D, Part::Eta],
            LearningRateMode::Constant(_) => &[Part::A, Part::B, Part::C, Part::D],
        }
    }

    pub fn params_per_connection(&self) -> usize {
        self.parts().len()
    }

    pub fn len(&self) -> usize {
        self.params_per_connection() * self.shape.connections()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut offset = 0;
        for layer in 0..self.shape.weight_layers() {
            let (r, c) = self.shape.weight_dims(layer);
            for &part in self.parts() {
                out.push(Segment {
                    layer,
                    part,
                    offset,
                    len: r * c,
                });
                offset += r * c;
            }
        }
        out
    }

    pub fn encode(&self, rule: &PlasticityRule) -> Result<Genome> {
        rule.validate(&self.shape)?;
        let mut g = Vec::with_capacity(self.len());
        for layer in &rule.layers {
            for &part in self.parts() {
                g.extend_from_slice(part_of(layer, part).as_slice());
            }
        }
        Ok(Genome(g))
    }

    pub fn decode(&self, genome: &[f64]) -> Result<PlasticityRule> {
        if genome.len() != self.len() {
            return Err(HanError::config(format!(
                "genome has {} entries, layout expects {}",
                genome.len(),
                self.len()
            )));
        }
        let mut rule = PlasticityRule::zeros(&self.shape);
        if let LearningRateMode::Constant(c) = self.learning_rate {
            for layer in &mut rule.layers {
                let (r, cols) = layer.shape();
                layer.eta = Matrix::filled(r, cols, c);
            }
        }
        for seg in self.segments() {
            let layer = &mut rule.layers[seg.layer];
            part_of_mut(layer, seg.part)
                .as_mut_slice()
                .copy_from_slice(&genome[seg.offset..seg.offset + seg.len]);
        }
        Ok(rule)
    }
}

fn part_of(layer: &LayerCoefficients, part: Part) -> &Matrix {
    match part {
        Part::A => &layer.a,
        Part::B => &layer.b,
        Part::C => &layer.c,
        Part::D => &layer.d,
        Part::Eta => &layer.eta,
    }
}

fn part_of_mut(layer: &mut LayerCoefficients, part: Part) -> &mut Matrix {
    match part {
        Part::A => &mut layer.a,
        Part::B => &mut layer.b,
        Part::C => &mut layer.c,
        Part::D => &mut layer.d,
        Part::Eta => &mut layer.eta,
    }
}

/// Candidate indices from best to worst. NaN sorts last, ties keep index order.
pub fn rank_order(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (fitness[i], fitness[j]);
        match (a.is_nan(), b.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            (false, false) => b.partial_cmp(&a).unwrap(),
        }
    });
    idx
}

/// Centered rank transform: worst maps to -0.5, best to +0.5, linear in rank.
/// Tied fitness values share their average rank; NaN counts as the worst.
pub fn center_rank(fitness: &[f64]) -> Result<Vec<f64>> {
    let n = fitness.len();
    if n < 2 {
        return Err(HanError::config("center ranking needs at least two values"));
    }
    let order = rank_order(fitness);
    let key = |i: usize| if fitness[i].is_nan() { f64::NEG_INFINITY } else { fitness[i] };
    let mut out = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && key(order[end]) == key(order[pos]) {
            end += 1;
        }
        // positions pos..end are tied; ascending rank of position p is n-1-p
        let avg = ((n - 1 - pos) + (n - end)) as f64 / 2.0;
        for &i in &order[pos..end] {
            out[i] = avg / (n - 1) as f64 - 0.5;
        }
        pos = end;
    }
    Ok(out)
}

/// Shared interface of the optimizers.
pub trait AskTell {
    fn dim(&self) -> usize;
    fn mean(&self) -> &[f64];
    fn population_size(&self) -> usize;
    fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>>;
    fn tell(&mut self, population: &[Vec<f64>], fitness: &[f64]) -> Result<()>;
}

fn check_batch(population: &[Vec<f64>], fitness: &[f64], n: usize, dim: usize) -> Result<()> {
    if population.len() != n || fitness.len() != n {
        return Err(HanError::config(format!(
            "expected {n} candidates and fitness values, got {} and {}",
            population.len(),
            fitness.len()
        )));
    }
    if population.iter().any(|x| x.len() != dim) {
        return Err(HanError::config("candidate dimension mismatch"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEsConfig {
    pub population: usize,
    pub sigma_init: f64,
    pub c_mean: f64,
    pub c_sigma: f64,
    pub elite_ratio: f64,
    /// Initial mean drawn from `U(-init_range, init_range)`.
    pub init_range: f64,
    /// Measure parent spread around the updated mean instead of the old one.
    #[serde(default)]
    pub sigma_about_new_mean: bool,
}

impl Default for AdaptiveEsConfig {
    fn default() -> Self {
        AdaptiveEsConfig {
            population: 128,
            sigma_init: 0.5,
            c_mean: 1.0,
            c_sigma: 0.1,
            elite_ratio: 0.1,
            init_range: 1.0,
            sigma_about_new_mean: false,
        }
    }
}

impl AdaptiveEsConfig {
    pub fn parents(&self) -> usize {
        // the epsilon keeps e.g. 0.1 * 30 from rounding up to 4
        ((self.elite_ratio * self.population as f64 - 1e-9).ceil() as usize)
            .clamp(1, self.population)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(HanError::config("population must be at least 2"));
        }
        if !(self.sigma_init > 0.0) || !(self.elite_ratio > 0.0 && self.elite_ratio <= 1.0) {
            return Err(HanError::config("need sigma_init > 0 and 0 < elite_ratio <= 1"));
        }
        if !(0.0..=1.0).contains(&self.c_sigma) || !self.c_mean.is_finite() {
            return Err(HanError::config("need 0 <= c_sigma <= 1 and finite c_mean"));
        }
        Ok(())
    }
}

/// Truncation-selection ES with per-dimension step-size adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEs {
    pub config: AdaptiveEsConfig,
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl AdaptiveEs {
    pub fn new<R: Rng + ?Sized>(dim: usize, config: AdaptiveEsConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let r = config.init_range;
        let mean = (0..dim)
            .map(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 })
            .collect();
        Ok(Self::with_mean(mean, config))
    }

    pub fn with_mean(mean: Vec<f64>, config: AdaptiveEsConfig) -> Self {
        let sigma = vec![config.sigma_init; mean.len()];
        AdaptiveEs {
            config,
            mean,
            sigma,
        }
    }
}

impl AskTell for AdaptiveEs {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn population_size(&self) -> usize {
        self.config.population
    }

    fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.config.population)
            .map(|_| {
                self.mean
                    .iter()
                    .zip(&self.sigma)
                    .map(|(m, s)| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + s * z
                    })
                    .collect()
            })
            .collect()
    }

    fn tell(&mut self, population: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        check_batch(population, fitness, self.config.population, self.dim())?;
        let parents = &rank_order(fitness)[..self.config.parents()];
        let w = 1.0 / parents.len() as f64;
        let old_mean = self.mean.clone();

        let mut shift = vec![0.0; self.dim()];
        for &p in parents {
            for (s, (x, m)) in shift.iter_mut().zip(population[p].iter().zip(&old_mean)) {
                *s += w * (x - m);
            }
        }
        for (m, s) in self.mean.iter_mut().zip(&shift) {
            *m += self.config.c_mean * s;
        }

        let centre = if self.config.sigma_about_new_mean {
            &self.mean
        } else {
            &old_mean
        };
        let mut spread = vec![0.0; self.dim()];
        for &p in parents {
            for (s, (x, m)) in spread.iter_mut().zip(population[p].iter().zip(centre)) {
                *s += w * (x - m) * (x - m);
            }
        }
        let c = self.config.c_sigma;
        for (sigma, s) in self.sigma.iter_mut().zip(&spread) {
            *sigma = (1.0 - c) * *sigma + c * s.sqrt();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenAiEsConfig {
    pub population: usize,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub sigma_init: f64,
    pub sigma_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Antithetic pairs `(z, -z)`.
    pub mirrored: bool,
    pub init_range: f64,
}

impl Default for OpenAiEsConfig {
    fn default() -> Self {
        OpenAiEsConfig {
            population: 512,
            lr_init: 0.1,
            lr_decay: 0.999,
            sigma_init: 0.2,
            sigma_decay: 0.995,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            mirrored: true,
            init_range: 1.0,
        }
    }
}

impl OpenAiEsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || (self.mirrored && self.population % 2 != 0) {
            return Err(HanError::config(
                "population must be at least 2 and even when mirrored",
            ));
        }
        if !(self.lr_init > 0.0 && self.lr_decay > 0.0 && self.sigma_init > 0.0 && self.sigma_decay > 0.0)
        {
            return Err(HanError::config("learning-rate and mutation schedules must be positive"));
        }
        Ok(())
    }
}

/// Adam moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

/// Search-gradient ES with centered-rank shaping, Adam and decaying schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenAiEs {
    pub config: OpenAiEsConfig,
    pub mean: Vec<f64>,
    pub adam: AdamState,
    /// Completed tell steps; the schedules are functions of it.
    pub generation: u32,
}

impl OpenAiEs {
    pub fn new<R: Rng + ?Sized>(dim: usize, config: OpenAiEsConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let r = config.init_range;
        let mean = (0..dim)
            .map(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 })
            .collect();
        Ok(Self::with_mean(mean, config))
    }

    pub fn with_mean(mean: Vec<f64>, config: OpenAiEsConfig) -> Self {
        let d = mean.len();
        OpenAiEs {
            config,
            mean,
            adam: AdamState {
                m: vec![0.0; d],
                v: vec![0.0; d],
                t: 0,
            },
            generation: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.lr_init * self.config.lr_decay.powi(self.generation as i32)
    }

    pub fn sigma(&self) -> f64 {
        self.config.sigma_init * self.config.sigma_decay.powi(self.generation as i32)
    }

    /// `g = 1/(N sigma) * sum_i shaped_i z_i` with `z_i = (x_i - mean) / sigma`.
    pub fn gradient_estimate(&self, population: &[Vec<f64>], fitness: &[f64]) -> Result<Vec<f64>> {
        check_batch(population, fitness, self.config.population, self.dim())?;
        let shaped = center_rank(fitness)?;
        let sigma = self.sigma();
        let scale = 1.0 / (population.len() as f64 * sigma);
        let mut g = vec![0.0; self.dim()];
        for (x, s) in population.iter().zip(&shaped) {
            for (gi, (xi, mi)) in g.iter_mut().zip(x.iter().zip(&self.mean)) {
                *gi += s * (xi - mi) / sigma;
            }
        }
        for gi in &mut g {
            *gi *= scale;
        }
        Ok(g)
    }
}

impl AskTell for OpenAiEs {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn population_size(&self) -> usize {
        self.config.population
    }

    fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let sigma = self.sigma();
        let n = self.config.population;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
            out.push(self.mean.iter().zip(&z).map(|(m, zi)| m + sigma * zi).collect());
            if self.config.mirrored {
                out.push(self.mean.iter().zip(&z).map(|(m, zi)| m - sigma * zi).collect());
            }
        }
        out
    }

    fn tell(&mut self, population: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        let g = self.gradient_estimate(population, fitness)?;
        let lr = self.learning_rate();
        let c = &self.config;
        let a = &mut self.adam;
        a.t += 1;
        let bc1 = 1.0 - c.beta1.powi(a.t as i32);
        let bc2 = 1.0 - c.beta2.powi(a.t as i32);
        for i in 0..g.len() {
            a.m[i] = c.beta1 * a.m[i] + (1.0 - c.beta1) * g[i];
            a.v[i] = c.beta2 * a.v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let m_hat = a.m[i] / bc1;
            let v_hat = a.v[i] / bc2;
            // ascent: fitness is maximized
            self.mean[i] += lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        self.generation += 1;
        Ok(())
    }
}

/// Either optimizer, so run state can be stored and resumed uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Adaptive(AdaptiveEs),
    OpenAi(OpenAiEs),
}

impl AskTell for Optimizer {
    fn dim(&self) -> usize {
        match self {
            Optimizer::Adaptive(o) => o.dim(),
            Optimizer::OpenAi(o) => o.dim(),
        }
    }

    fn mean(&self) -> &[f64] {
        match self {
            Optimizer::Adaptive(o) => o.mean(),
            Optimizer::OpenAi(o) => o.mean(),
        }
    }

    fn population_size(&self) -> usize {
        match self {
            Optimizer::Adaptive(o) => o.population_size(),
            Optimizer::OpenAi(o) => o.population_size(),
        }
    }

    fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            Optimizer::Adaptive(o) => o.ask(rng),
            Optimizer::OpenAi(o) => o.ask(rng),
        }
    }

    fn tell(&mut self, population: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        match self {
            Optimizer::Adaptive(o) => o.tell(population, fitness),
            Optimizer::OpenAi(o) => o.tell(population, fitness),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    fn layout(lr: LearningRateMode) -> GenomeLayout {
        GenomeLayout::new(NetworkShape::new(vec![1, 1, 1]).unwrap(), lr)
    }

    #[test]
    fn genome_lengths() {
        assert_eq!(layout(LearningRateMode::Evolved).len(), 10);
        assert_eq!(layout(LearningRateMode::Constant(0.1)).len(), 8);
        let cheetah = GenomeLayout::new(
            NetworkShape::new(vec![17, 16, 6]).unwrap(),
            LearningRateMode::Evolved,
        );
        assert_eq!(cheetah.len(), 1840);
    }

    #[test]
    fn encode_decode_round_trip() {
        let l = GenomeLayout::new(NetworkShape::new(vec![3, 4, 2]).unwrap(), LearningRateMode::Evolved);
        let mut rng = rng_from(4);
        let rule = PlasticityRule::random(l.shape(), &mut rng, 1.0, LearningRateMode::Evolved);
        let g = l.encode(&rule).unwrap();
        assert_eq!(g.len(), l.len());
        assert_eq!(l.decode(g.as_slice()).unwrap(), rule);
        assert!(matches!(l.decode(&g.0[1..]), Err(HanError::Config(_))));
    }

    #[test]
    fn constant_eta_decode_fills_rate() {
        let l = layout(LearningRateMode::Constant(0.05));
        let rule = l.decode(&[0.5; 8]).unwrap();
        assert!(rule.layers.iter().all(|c| c.eta.as_slice() == [0.05]));
        assert_eq!(l.encode(&rule).unwrap().0, vec![0.5; 8]);
    }

    #[test]
    fn segments_are_contiguous() {
        let l = GenomeLayout::new(NetworkShape::new(vec![2, 3, 1]).unwrap(), LearningRateMode::Evolved);
        let segs = l.segments();
        assert_eq!(segs.len(), 10);
        assert_eq!(segs[0], Segment { layer: 0, part: Part::A, offset: 0, len: 6 });
        assert_eq!(segs[5], Segment { layer: 1, part: Part::A, offset: 30, len: 3 });
        assert_eq!(segs.last().unwrap().offset + segs.last().unwrap().len, l.len());
    }

    #[test]
    fn rank_order_ties_and_nan() {
        assert_eq!(rank_order(&[1.0, f64::NAN, 3.0, 1.0]), vec![2, 0, 3, 1]);
    }

    #[test]
    fn center_rank_examples() {
        assert_eq!(center_rank(&[3.0, 1.0]).unwrap(), vec![0.5, -0.5]);
        assert_eq!(center_rank(&[2.0; 5]).unwrap(), vec![0.0; 5]);
        assert_eq!(center_rank(&[0.0, 1.0, 2.0]).unwrap(), vec![-0.5, 0.0, 0.5]);
        assert_eq!(center_rank(&[f64::NAN, 1.0]).unwrap(), vec![-0.5, 0.5]);
        assert!(center_rank(&[1.0]).is_err());
    }

    #[test]
    fn parents_is_ceil_of_ratio() {
        let mut c = AdaptiveEsConfig::default();
        assert_eq!(c.parents(), 13);
        c.population = 64;
        assert_eq!(c.parents(), 7);
        c.population = 30;
        assert_eq!(c.parents(), 3);
        c.population = 2;
        assert_eq!(c.parents(), 1);
    }

    #[test]
    fn ask_with_zero_sigma_returns_mean() {
        let cfg = AdaptiveEsConfig { population: 8, ..Default::default() };
        let mut es = AdaptiveEs::with_mean(vec![0.3, -0.2], cfg);
        es.sigma = vec![0.0; 2];
        let pop = es.ask(&mut rng_from(1));
        assert!(pop.iter().all(|x| x == &vec![0.3, -0.2]));
    }

    #[test]
    fn ask_is_deterministic_given_rng() {
        let cfg = AdaptiveEsConfig { population: 8, ..Default::default() };
        let es = AdaptiveEs::new(5, cfg, &mut rng_from(2)).unwrap();
        assert_eq!(es.ask(&mut rng_from(7)), es.ask(&mut rng_from(7)));
    }

    #[test]
    fn tell_with_parents_at_mean_only_shrinks_sigma() {
        let cfg = AdaptiveEsConfig { population: 10, ..Default::default() };
        let mut es = AdaptiveEs::with_mean(vec![1.0, 2.0], cfg);
        let pop = vec![vec![1.0, 2.0]; 10];
        es.tell(&pop, &[0.0; 10]).unwrap();
        assert_eq!(es.mean, vec![1.0, 2.0]);
        assert!(es.sigma.iter().all(|&s| (s - 0.45).abs() < 1e-15));
    }

    #[test]
    fn tell_single_parent_hand_example() {
        let cfg = AdaptiveEsConfig { population: 2, c_sigma: 1.0, ..Default::default() };
        let mut es = AdaptiveEs::with_mean(vec![0.0], cfg);
        es.tell(&[vec![1.0], vec![-3.0]], &[5.0, 1.0]).unwrap();
        assert_eq!(es.mean, vec![1.0]);
        // with c_sigma = 1 the new sigma is exactly sigma_hat
        assert_eq!(es.sigma, vec![1.0]);
    }

    #[test]
    fn tell_ties_prefer_lower_index_and_nan_last() {
        let cfg = AdaptiveEsConfig { population: 3, elite_ratio: 0.3, ..Default::default() };
        let mut es = AdaptiveEs::with_mean(vec![0.0], cfg.clone());
        es.tell(&[vec![1.0], vec![2.0], vec![3.0]], &[4.0, 4.0, f64::NAN]).unwrap();
        assert_eq!(es.mean, vec![1.0]);
        let mut es = AdaptiveEs::with_mean(vec![0.0], cfg);
        es.tell(&[vec![1.0], vec![2.0], vec![3.0]], &[f64::NAN, -1.0, -2.0]).unwrap();
        assert_eq!(es.mean, vec![2.0]);
    }

    #[test]
    fn tell_rejects_wrong_batch() {
        let cfg = AdaptiveEsConfig { population: 4, ..Default::default() };
        let mut es = AdaptiveEs::with_mean(vec![0.0], cfg);
        assert!(es.tell(&vec![vec![0.0]; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn openai_flat_landscape_keeps_mean() {
        let cfg = OpenAiEsConfig { population: 8, ..Default::default() };
        let mut es = OpenAiEs::with_mean(vec![0.5, -0.5], cfg);
        let pop = es.ask(&mut rng_from(3));
        es.tell(&pop, &[1.0; 8]).unwrap();
        assert_eq!(es.mean, vec![0.5, -0.5]);
    }

    #[test]
    fn openai_schedules_decay() {
        let cfg = OpenAiEsConfig { population: 4, ..Default::default() };
        let mut es = OpenAiEs::with_mean(vec![0.0], cfg);
        let mut rng = rng_from(5);
        for _ in 0..2 {
            let pop = es.ask(&mut rng);
            let f: Vec<f64> = pop.iter().map(|x| -x[0] * x[0]).collect();
            es.tell(&pop, &f).unwrap();
        }
        assert_eq!(es.learning_rate(), 0.1 * 0.999f64.powi(2));
        assert_eq!(es.sigma(), 0.2 * 0.995f64.powi(2));
    }

    #[test]
    fn mirrored_population_pairs() {
        let cfg = OpenAiEsConfig { population: 6, ..Default::default() };
        let es = OpenAiEs::with_mean(vec![1.0, 1.0], cfg);
        let pop = es.ask(&mut rng_from(8));
        for pair in pop.chunks(2) {
            for d in 0..2 {
                assert!((pair[0][d] - 1.0 + pair[1][d] - 1.0).abs() < 1e-12);
            }
        }
        let bad = OpenAiEsConfig { population: 5, ..Default::default() };
        assert!(OpenAiEs::new(1, bad, &mut rng_from(0)).is_err());
    }
}
