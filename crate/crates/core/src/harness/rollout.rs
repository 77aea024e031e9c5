//! Single episodes and the deployment experiments built on them.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::analysis::{
    classify_convergence, plasticity_series, weights_spectrum, AttractorReport, Verdict,
    WeightTrajectory,
};
use crate::envs::{apply_perturbation, Env, PerturbationSpec, RunningNormalizer};
use crate::error::{HanError, Result};
use crate::evolution::GenomeLayout;
use crate::net::{NetworkShape, PlasticNetwork};
use crate::plasticity::{scheduled_step, PlasticityConfig, PlasticityRule};
use crate::seeding::{rng_from, split, Domain};

/// Replaces the coefficients once `step` control steps have completed.
/// Weights and activation history carry over unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotSwap {
    pub step: u64,
    pub rule: PlasticityRule,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutHooks {
    /// Impulses plus an optional freeze interval in seconds. A Hebbian tick
    /// at step `t` is skipped when it falls in `(start, end]`.
    pub perturbation: PerturbationSpec,
    pub swaps: Vec<HotSwap>,
    pub record_weights: bool,
    pub record_dump: bool,
    /// Use the normalizer's statistics without updating them.
    pub freeze_normalizer: bool,
}

impl RolloutHooks {
    pub fn recording() -> Self {
        RolloutHooks {
            record_weights: true,
            ..Default::default()
        }
    }

    pub fn frozen_between(mut self, start: f64, end: f64) -> Self {
        self.perturbation.freeze = Some((start, end));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub t: u64,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub hebbian_tick: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryDump {
    pub rows: Vec<DumpRow>,
}

impl TrajectoryDump {
    /// Columns `t,obs*,action*,reward,weights`; the last column names the
    /// matching row of `weights_file` on Hebbian ticks.
    pub fn to_csv(&self, weights_file: &str) -> String {
        let mut out = String::from("t");
        if let Some(first) = self.rows.first() {
            for i in 0..first.observation.len() {
                let _ = write!(out, ",obs{i}");
            }
            for i in 0..first.action.len() {
                let _ = write!(out, ",action{i}");
            }
        }
        out.push_str(",reward,weights\n");
        for r in &self.rows {
            let _ = write!(out, "{}", r.t);
            for v in r.observation.iter().chain(&r.action) {
                let _ = write!(out, ",{v}");
            }
            let _ = write!(out, ",{}", r.reward);
            if r.hebbian_tick {
                let _ = write!(out, ",{weights_file}#step={}", r.t);
            } else {
                out.push(',');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub total_reward: f64,
    pub rewards: Vec<f64>,
    pub diverged: bool,
    /// Initial weights at step 0, then one snapshot per control step.
    pub trajectory: Option<WeightTrajectory>,
    pub dump: Option<TrajectoryDump>,
}

/// Everything needed to run episodes of one configuration.
#[derive(Debug, Clone)]
pub struct RolloutContext {
    pub config: ExperimentConfig,
    pub shape: NetworkShape,
    pub plasticity: PlasticityConfig,
    pub layout: GenomeLayout,
}

impl RolloutContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let shape = config.shape()?;
        Ok(RolloutContext {
            config: config.clone(),
            plasticity: config.plasticity_config(),
            layout: config.layout()?,
            shape,
        })
    }

    pub fn decode(&self, genome: &[f64]) -> Result<PlasticityRule> {
        self.layout.decode(genome)
    }

    pub fn normalizer(&self) -> RunningNormalizer {
        RunningNormalizer::with_clip(self.config.env.obs_dim(), self.config.obs_clip)
    }

    /// Runs one episode. Weights are drawn fresh from `seed`; `normalizer`
    /// keeps its statistics so repeats of one candidate can share it.
    pub fn episode(
        &self,
        rule: &PlasticityRule,
        seed: u64,
        normalizer: &mut RunningNormalizer,
        hooks: &RolloutHooks,
    ) -> Result<Episode> {
        rule.validate(&self.shape)?;
        let spec = &self.config.env;
        hooks.perturbation.validate(spec)?;
        for s in &hooks.swaps {
            s.rule.validate(&self.shape)?;
        }
        let freeze = hooks.perturbation.freeze_steps(spec);

        let mut net = PlasticNetwork::new(self.shape.clone(), self.plasticity.window)?
            .with_activation(self.config.network.activation);
        net.randomize_weights(&mut rng_from(split(seed, Domain::Weights, 0)), self.config.network.weight_init);
        let (mut env, _) = Env::reset(spec, split(seed, Domain::Environment, 0))?;

        let steps = spec.episode_steps as u64;
        let mut trajectory = hooks.record_weights.then(|| WeightTrajectory::for_shape(&self.shape));
        let mut flat = Vec::with_capacity(net.num_weights());
        if let Some(traj) = &mut trajectory {
            net.flatten_weights_into(&mut flat);
            traj.push(0, flat.clone())?;
        }
        let mut dump = hooks.record_dump.then(TrajectoryDump::default);
        let mut rewards = Vec::with_capacity(steps as usize);
        let mut active = rule;
        let mut diverged = false;

        for t in 1..=steps {
            let done_steps = t - 1;
            for s in &hooks.swaps {
                if s.step == done_steps {
                    active = &s.rule;
                }
            }
            apply_perturbation(&mut env, &hooks.perturbation, done_steps)?;
            let obs = env.observation();
            if obs.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break;
            }
            let input = if hooks.freeze_normalizer {
                normalizer.normalize_frozen(&obs)
            } else {
                normalizer.normalize(&obs)
            };
            let action = match net.forward(&input) {
                Ok(a) => a.to_vec(),
                Err(HanError::Input(_)) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let result = env.step(&action)?;
            if result.diverged || !result.reward.is_finite() {
                diverged = true;
                break;
            }
            rewards.push(result.reward);

            let frozen = freeze.is_some_and(|(a, b)| a < t && t <= b);
            let ticked = if frozen {
                false
            } else {
                match scheduled_step(&mut net, active, &self.plasticity, t) {
                    Ok(ticked) => ticked,
                    Err(HanError::Numeric(_)) => {
                        diverged = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            };
            if let Some(traj) = &mut trajectory {
                net.flatten_weights_into(&mut flat);
                traj.push(t, flat.clone())?;
            }
            if let Some(d) = &mut dump {
                d.rows.push(DumpRow {
                    t,
                    observation: obs.clone(),
                    action,
                    reward: result.reward,
                    hebbian_tick: ticked,
                });
            }
        }

        let total_reward = rewards.iter().sum();
        Ok(Episode {
            total_reward,
            rewards,
            diverged,
            trajectory,
            dump,
        })
    }

    /// Mean return over `repeats` episodes sharing one normalizer; any
    /// divergence yields the fitness floor.
    pub fn fitness(&self, rule: &PlasticityRule, seeds: impl IntoIterator<Item = u64>) -> Result<f64> {
        let mut normalizer = self.normalizer();
        let hooks = RolloutHooks::default();
        let (mut total, mut n) = (0.0, 0usize);
        for seed in seeds {
            let ep = self.episode(rule, seed, &mut normalizer, &hooks)?;
            if ep.diverged {
                return Ok(self.config.fitness_floor);
            }
            total += ep.total_reward;
            n += 1;
        }
        Ok(total / n.max(1) as f64)
    }

    /// Seeds for the repeats of candidate `index` in a generation.
    pub fn repeat_seeds(&self, generation_seed: u64, index: usize) -> Vec<u64> {
        let base = if self.config.common_random_numbers {
            generation_seed
        } else {
            split(generation_seed, Domain::Candidate, index as u64)
        };
        (0..self.config.repeats as u64)
            .map(|r| split(base, Domain::Repeat, r))
            .collect()
    }

    /// Normalizer after the configured warm-up episodes of `rule`.
    pub fn warm_normalizer(&self, rule: &PlasticityRule, seed: u64) -> Result<RunningNormalizer> {
        let mut n = self.normalizer();
        let hooks = RolloutHooks::default();
        for k in 0..self.config.evaluation.warmup_episodes as u64 {
            self.episode(rule, split(seed, Domain::Repeat, k), &mut n, &hooks)?;
        }
        Ok(n)
    }

    /// Attractor classification of one recorded episode.
    pub fn classify(&self, ep: &Episode, seed: u64) -> Result<AttractorReport> {
        let e = &self.config.evaluation;
        let traj = ep
            .trajectory
            .as_ref()
            .ok_or_else(|| HanError::config("episode was run without weight recording"))?;
        if ep.diverged || traj.len() < 3 {
            return Ok(AttractorReport::diverged(e.rho, e.early_fraction));
        }
        let series = plasticity_series(traj)?;
        let mut report = classify_convergence(&series, e.rho, e.early_fraction)?;
        if report.verdict == Verdict::LimitCycle && traj.len() >= 8 && e.spectrum_weights > 0 {
            let s = weights_spectrum(
                traj,
                self.config.env.f_nn(),
                e.spectrum_weights,
                split(seed, Domain::Weights, 1),
            )?;
            report.dominant_frequency = s.dominant_frequency();
        }
        Ok(report)
    }
}

/// Runs one recorded episode of `genome` after the normalizer warm-up.
pub fn run_rollout(
    genome: &[f64],
    config: &ExperimentConfig,
    seed: u64,
    hooks: &RolloutHooks,
) -> Result<RolloutOutcome> {
    let ctx = RolloutContext::new(config)?;
    let rule = ctx.decode(genome)?;
    rollout_rule(&ctx, &rule, seed, hooks)
}

pub fn rollout_rule(
    ctx: &RolloutContext,
    rule: &PlasticityRule,
    seed: u64,
    hooks: &RolloutHooks,
) -> Result<RolloutOutcome> {
    let mut hooks = hooks.clone();
    hooks.record_weights = true;
    hooks.freeze_normalizer |= ctx.config.evaluation.freeze_normalizer;
    let mut normalizer = ctx.warm_normalizer(rule, seed)?;
    let ep = ctx.episode(rule, seed, &mut normalizer, &hooks)?;
    let report = ctx.classify(&ep, seed)?;
    let fitness = if ep.diverged {
        ctx.config.fitness_floor
    } else {
        ep.total_reward
    };
    Ok(RolloutOutcome {
        fitness,
        report,
        episode: ep,
    })
}

#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    pub fitness: f64,
    pub report: AttractorReport,
    pub episode: Episode,
}

impl RolloutOutcome {
    pub fn trajectory(&self) -> &WeightTrajectory {
        self.episode.trajectory.as_ref().expect("rollouts record weights")
    }
}

/// Classified evaluation episode of a trained genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRollout {
    pub seed: u64,
    pub fitness: f64,
    pub report: AttractorReport,
}

/// `count` evaluation rollouts with seeds derived from `seed`.
pub fn evaluate_rule(
    ctx: &RolloutContext,
    rule: &PlasticityRule,
    seed: u64,
    count: usize,
) -> Result<Vec<EvaluationRollout>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = split(seed, Domain::Evaluation, i);
            let out = rollout_rule(ctx, rule, s, &RolloutHooks::default())?;
            Ok(EvaluationRollout {
                seed: s,
                fitness: out.fitness,
                report: out.report,
            })
        })
        .collect()
}

/// Reward over the second part of an episode with and without plasticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezeContrast {
    pub freeze_step: u64,
    pub plastic_reward: f64,
    pub frozen_reward: f64,
    /// `(plastic - frozen) / plastic`.
    pub relative_drop: f64,
}

/// Freezes plasticity from `at_seconds` to the end of the episode and
/// compares the remaining reward with an unfrozen run from the same seed.
pub fn freeze_contrast(
    ctx: &RolloutContext,
    rule: &PlasticityRule,
    seed: u64,
    at_seconds: f64,
) -> Result<FreezeContrast> {
    let spec = &ctx.config.env;
    let horizon = spec.episode_steps as f64 * spec.control_period;
    let from = spec.step_at(at_seconds) as usize;
    let warm = ctx.warm_normalizer(rule, seed)?;
    let base = RolloutHooks {
        freeze_normalizer: ctx.config.evaluation.freeze_normalizer,
        ..Default::default()
    };
    let plain = ctx.episode(rule, seed, &mut warm.clone(), &base)?;
    let hooks = base.frozen_between(at_seconds, horizon);
    let frozen = ctx.episode(rule, seed, &mut warm.clone(), &hooks)?;
    let late = |ep: &Episode| -> f64 { ep.rewards.iter().skip(from).sum() };
    let (p, f) = (late(&plain), late(&frozen));
    Ok(FreezeContrast {
        freeze_step: from as u64,
        plastic_reward: p,
        frozen_reward: f,
        relative_drop: if p > 0.0 { (p - f) / p } else { 0.0 },
    })
}
