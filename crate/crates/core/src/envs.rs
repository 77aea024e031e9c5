//! Small deterministic control tasks, observation normalization and
//! perturbations.
//!
//! Two tasks are provided:
//!
//! - `PointMassTracking`: a 1-D mass pushed by the action against linear drag;
//!   the reward is a Gaussian around a target velocity.
//! - `ChainCrawler`: masses on a line joined by springs whose rest lengths are
//!   actuated. Ground friction is stronger backwards than forwards, so only
//!   periodic actuation produces net forward motion.
//!
//! Environments return raw observations; the caller owns a
//! [`RunningNormalizer`] whose lifetime spans one candidate evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::seeding::rng_from;

/// Smallest standard deviation used when normalizing.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMassParams {
    pub mass: f64,
    pub force_max: f64,
    pub drag: f64,
    pub target_velocity: f64,
    /// Width `sigma_r` of the Gaussian reward.
    pub reward_width: f64,
    /// Initial velocity drawn from `U(-init_noise, init_noise)`.
    pub init_noise: f64,
}

impl Default for PointMassParams {
    fn default() -> Self {
        PointMassParams {
            mass: 1.0,
            force_max: 1.0,
            drag: 0.5,
            target_velocity: 1.0,
            reward_width: 0.25,
            init_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlerParams {
    pub masses: usize,
    pub mass: f64,
    pub stiffness: f64,
    /// Viscous damping on the relative velocity across each spring.
    pub damping: f64,
    pub mu_forward: f64,
    pub mu_backward: f64,
    pub gravity: f64,
    pub rest_length: f64,
    /// Rest-length offset at full actuation, as a fraction of `rest_length`.
    pub actuation: f64,
    pub target_velocity: f64,
    pub reward_width: f64,
    /// Initial positions jittered by `U(-init_noise, init_noise) * rest_length`.
    pub init_noise: f64,
}

impl Default for CrawlerParams {
    fn default() -> Self {
        CrawlerParams {
            masses: 5,
            mass: 1.0,
            stiffness: 40.0,
            damping: 2.0,
            mu_forward: 0.1,
            mu_backward: 0.6,
            gravity: 9.81,
            rest_length: 1.0,
            actuation: 0.3,
            target_velocity: 0.3,
            reward_width: 0.25,
            init_noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    PointMassTracking(PointMassParams),
    ChainCrawler(CrawlerParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Physics step in seconds.
    pub dt: f64,
    /// Seconds between controller calls, `1 / f_nn`.
    pub control_period: f64,
    pub episode_steps: usize,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self::point_mass()
    }
}

impl EnvSpec {
    pub fn point_mass() -> Self {
        EnvSpec {
            kind: EnvKind::PointMassTracking(PointMassParams::default()),
            dt: 0.01,
            control_period: 0.05,
            episode_steps: 1000,
        }
    }

    pub fn chain_crawler() -> Self {
        EnvSpec {
            kind: EnvKind::ChainCrawler(CrawlerParams::default()),
            dt: 0.01,
            control_period: 0.05,
            episode_steps: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.control_period >= self.dt) {
            return Err(HanError::config("need 0 < dt <= control_period"));
        }
        let n = (self.control_period / self.dt).round();
        if (n * self.dt - self.control_period).abs() > 1e-9 * self.control_period.max(1.0) {
            return Err(HanError::config(format!(
                "dt {} does not divide control period {}",
                self.dt, self.control_period
            )));
        }
        if self.episode_steps == 0 {
            return Err(HanError::config("episode length must be at least 1"));
        }
        match &self.kind {
            EnvKind::PointMassTracking(p) => {
                if !(p.mass > 0.0 && p.drag > 0.0 && p.reward_width > 0.0) {
                    return Err(HanError::config("point mass needs mass, drag, reward width > 0"));
                }
            }
            EnvKind::ChainCrawler(c) => {
                if c.masses < 2 {
                    return Err(HanError::config("crawler needs at least two masses"));
                }
                if !(c.mass > 0.0 && c.stiffness > 0.0 && c.reward_width > 0.0 && c.rest_length > 0.0)
                {
                    return Err(HanError::config("crawler physical parameters must be positive"));
                }
                if c.mu_forward < 0.0 || c.mu_backward < 0.0 || c.damping < 0.0 {
                    return Err(HanError::config("friction and damping must be non-negative"));
                }
            }
        }
        Ok(())
    }

    pub fn substeps(&self) -> usize {
        (self.control_period / self.dt).round() as usize
    }

    /// Controller frequency in Hz.
    pub fn f_nn(&self) -> f64 {
        1.0 / self.control_period
    }

    pub fn obs_dim(&self) -> usize {
        match &self.kind {
            EnvKind::PointMassTracking(_) => 2,
            // spring extensions, mass velocities, head velocity
            EnvKind::ChainCrawler(c) => (c.masses - 1) + c.masses + 1,
        }
    }

    pub fn action_dim(&self) -> usize {
        match &self.kind {
            EnvKind::PointMassTracking(_) => 1,
            EnvKind::ChainCrawler(c) => c.masses - 1,
        }
    }

    /// Dimension of impulse vectors accepted by [`Env::apply_impulse`].
    pub fn impulse_dim(&self) -> usize {
        match &self.kind {
            EnvKind::PointMassTracking(_) => 1,
            EnvKind::ChainCrawler(c) => c.masses,
        }
    }

    /// Step index closest to `seconds`.
    pub fn step_at(&self, seconds: f64) -> u64 {
        (seconds / self.control_period).round().max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    /// Tracked velocity (point mass velocity or head displacement rate).
    pub velocity: f64,
    /// Point mass position or head position.
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The state became non-finite; the episode must be abandoned.
    pub diverged: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    PointMass { x: f64, v: f64 },
    Crawler { x: Vec<f64>, v: Vec<f64>, head_velocity: f64 },
}

#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    state: State,
    steps: usize,
}

#[inline]
fn gaussian_reward(v: f64, target: f64, width: f64) -> f64 {
    let e = (v - target) / width;
    (-e * e).exp()
}

impl Env {
    pub fn reset(spec: &EnvSpec, seed: u64) -> Result<(Env, Vec<f64>)> {
        spec.validate()?;
        let mut rng = rng_from(seed);
        let state = match &spec.kind {
            EnvKind::PointMassTracking(p) => {
                let v = if p.init_noise > 0.0 {
                    rng.random_range(-p.init_noise..=p.init_noise)
                } else {
                    0.0
                };
                State::PointMass { x: 0.0, v }
            }
            EnvKind::ChainCrawler(c) => {
                let x = (0..c.masses)
                    .map(|i| {
                        let jitter = if c.init_noise > 0.0 {
                            rng.random_range(-c.init_noise..=c.init_noise)
                        } else {
                            0.0
                        };
                        (i as f64 + jitter) * c.rest_length
                    })
                    .collect();
                State::Crawler {
                    x,
                    v: vec![0.0; c.masses],
                    head_velocity: 0.0,
                }
            }
        };
        let env = Env {
            spec: spec.clone(),
            state,
            steps: 0,
        };
        let obs = env.observation();
        Ok((env, obs))
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Raw (unnormalized) observation of the current state.
    pub fn observation(&self) -> Vec<f64> {
        match (&self.state, &self.spec.kind) {
            (State::PointMass { v, .. }, EnvKind::PointMassTracking(p)) => {
                vec![*v, p.target_velocity - v]
            }
            (State::Crawler { x, v, head_velocity }, EnvKind::ChainCrawler(c)) => {
                let mut obs = Vec::with_capacity(self.spec.obs_dim());
                obs.extend(x.windows(2).map(|w| w[1] - w[0] - c.rest_length));
                obs.extend_from_slice(v);
                obs.push(*head_velocity);
                obs
            }
            _ => unreachable!("state matches spec kind"),
        }
    }

    /// Position of every mass (one entry for the point mass).
    pub fn positions(&self) -> Vec<f64> {
        match &self.state {
            State::PointMass { x, .. } => vec![*x],
            State::Crawler { x, .. } => x.clone(),
        }
    }

    pub fn velocities(&self) -> Vec<f64> {
        match &self.state {
            State::PointMass { v, .. } => vec![*v],
            State::Crawler { v, .. } => v.clone(),
        }
    }

    /// Kinetic energy plus spring potential energy at zero actuation.
    pub fn energy(&self) -> f64 {
        match (&self.state, &self.spec.kind) {
            (State::PointMass { v, .. }, EnvKind::PointMassTracking(p)) => 0.5 * p.mass * v * v,
            (State::Crawler { x, v, .. }, EnvKind::ChainCrawler(c)) => {
                let ke: f64 = v.iter().map(|vi| 0.5 * c.mass * vi * vi).sum();
                let pe: f64 = x
                    .windows(2)
                    .map(|w| {
                        let e = w[1] - w[0] - c.rest_length;
                        0.5 * c.stiffness * e * e
                    })
                    .sum();
                ke + pe
            }
            _ => unreachable!("state matches spec kind"),
        }
    }

    /// Instantaneous velocity change `J / m` for each mass.
    pub fn apply_impulse(&mut self, impulse: &[f64]) -> Result<()> {
        if impulse.len() != self.spec.impulse_dim() {
            return Err(HanError::config(format!(
                "impulse has {} entries, environment expects {}",
                impulse.len(),
                self.spec.impulse_dim()
            )));
        }
        match (&mut self.state, &self.spec.kind) {
            (State::PointMass { v, .. }, EnvKind::PointMassTracking(p)) => *v += impulse[0] / p.mass,
            (State::Crawler { v, .. }, EnvKind::ChainCrawler(c)) => {
                for (vi, j) in v.iter_mut().zip(impulse) {
                    *vi += j / c.mass;
                }
            }
            _ => unreachable!("state matches spec kind"),
        }
        Ok(())
    }

    /// Advances one control period. Actions are clipped to `[-1, 1]`.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != self.spec.action_dim() {
            return Err(HanError::config(format!(
                "action has {} entries, environment expects {}",
                action.len(),
                self.spec.action_dim()
            )));
        }
        let dt = self.spec.dt;
        let substeps = self.spec.substeps();
        let (reward, info) = match (&mut self.state, &self.spec.kind) {
            (State::PointMass { x, v }, EnvKind::PointMassTracking(p)) => {
                let a = action[0].clamp(-1.0, 1.0);
                for _ in 0..substeps {
                    *v += dt * (p.force_max * a - p.drag * *v) / p.mass;
                    *x += dt * *v;
                }
                let r = gaussian_reward(*v, p.target_velocity, p.reward_width);
                (r, StepInfo { velocity: *v, position: *x })
            }
            (State::Crawler { x, v, head_velocity }, EnvKind::ChainCrawler(c)) => {
                let rest: Vec<f64> = action
                    .iter()
                    .map(|a| c.rest_length * (1.0 + c.actuation * a.clamp(-1.0, 1.0)))
                    .collect();
                let head = x.len() - 1;
                let head_start = x[head];
                let mut force = vec![0.0; x.len()];
                for _ in 0..substeps {
                    crawler_substep(c, &rest, x, v, &mut force, dt);
                }
                *head_velocity = (x[head] - head_start) / self.spec.control_period;
                let r = gaussian_reward(*head_velocity, c.target_velocity, c.reward_width);
                (r, StepInfo { velocity: *head_velocity, position: x[head] })
            }
            _ => unreachable!("state matches spec kind"),
        };
        self.steps += 1;
        let observation = self.observation();
        let diverged = !(reward.is_finite() && observation.iter().all(|o| o.is_finite()));
        Ok(StepResult {
            observation,
            reward,
            done: self.steps >= self.spec.episode_steps,
            diverged,
            info,
        })
    }
}

/// Semi-implicit Euler: velocities from spring/damper forces, then Coulomb
/// friction as a velocity projection (sticks when it can stop the mass), then
/// positions from the new velocities.
fn crawler_substep(
    c: &CrawlerParams,
    rest: &[f64],
    x: &mut [f64],
    v: &mut [f64],
    force: &mut [f64],
    dt: f64,
) {
    force.fill(0.0);
    for (i, &r) in rest.iter().enumerate() {
        let ext = x[i + 1] - x[i] - r;
        let f = c.stiffness * ext + c.damping * (v[i + 1] - v[i]);
        force[i] += f;
        force[i + 1] -= f;
    }
    for ((vi, f), xi) in v.iter_mut().zip(force.iter()).zip(x.iter_mut()) {
        let free = *vi + dt * f / c.mass;
        let mu = if free > 0.0 { c.mu_forward } else { c.mu_backward };
        let stop = mu * c.gravity * dt;
        *vi = if free.abs() <= stop {
            0.0
        } else {
            free - stop.copysign(free)
        };
        *xi += dt * *vi;
    }
}

/// Per-dimension running mean and variance (Welford updates, Chan merges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNormalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    /// Normalized values are clamped to `[-clip, clip]`.
    clip: f64,
}

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        Self::with_clip(dim, f64::INFINITY)
    }

    pub fn with_clip(dim: usize, clip: f64) -> Self {
        RunningNormalizer {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.dim()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|m| (m / n).max(0.0)).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().into_iter().map(f64::sqrt).collect()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), &xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = xi - *m;
            *m += delta / n;
            *m2 += delta * (xi - *m);
        }
    }

    /// Folds in statistics gathered on a disjoint stream.
    pub fn merge(&mut self, other: &RunningNormalizer) {
        debug_assert_eq!(self.dim(), other.dim());
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.clone_from(&other.mean);
            self.m2.clone_from(&other.m2);
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.dim() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    /// Normalizes with the current statistics without updating them.
    pub fn normalize_frozen(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; x.len()];
        }
        let n = self.count as f64;
        x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((xi, m), m2)| {
                let std = (m2 / n).max(0.0).sqrt().max(STD_FLOOR);
                ((xi - m) / std).clamp(-self.clip, self.clip)
            })
            .collect()
    }

    /// Normalizes with the statistics seen so far, then folds `x` in.
    /// With no prior samples the output is all zeros.
    pub fn normalize(&mut self, x: &[f64]) -> Vec<f64> {
        let out = self.normalize_frozen(x);
        self.update(x);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    /// Seconds since episode start.
    pub time: f64,
    /// Newton-seconds per mass.
    pub impulse: Vec<f64>,
}

/// Scheduled pushes and an optional plasticity freeze, both in seconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub impulses: Vec<Impulse>,
    #[serde(default)]
    pub freeze: Option<(f64, f64)>,
}

impl PerturbationSpec {
    pub fn validate(&self, spec: &EnvSpec) -> Result<()> {
        let horizon = spec.episode_steps as f64 * spec.control_period;
        for imp in &self.impulses {
            if !(imp.time >= 0.0 && imp.time <= horizon) {
                return Err(HanError::config(format!(
                    "impulse at {}s lies outside the {horizon}s episode",
                    imp.time
                )));
            }
            if imp.impulse.len() != spec.impulse_dim() {
                return Err(HanError::config("impulse vector has wrong dimension"));
            }
        }
        if let Some((a, b)) = self.freeze {
            if !(0.0 <= a && a <= b) {
                return Err(HanError::config("freeze interval must satisfy 0 <= start <= end"));
            }
        }
        Ok(())
    }

    /// Freeze interval as half-open step range `[start, end)`.
    pub fn freeze_steps(&self, spec: &EnvSpec) -> Option<(u64, u64)> {
        self.freeze.map(|(a, b)| (spec.step_at(a), spec.step_at(b)))
    }
}

/// Applies every impulse scheduled for control step `t`.
pub fn apply_perturbation(env: &mut Env, perturbation: &PerturbationSpec, t: u64) -> Result<()> {
    for imp in &perturbation.impulses {
        if env.spec.step_at(imp.time) == t {
            env.apply_impulse(&imp.impulse)?;
        }
    }
    Ok(())
}
