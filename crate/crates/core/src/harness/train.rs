//! Meta-training loop with per-generation checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EsSettings, ExperimentConfig};
use super::persist::{load_json, save_json, write_atomic, FORMAT_VERSION};
use super::rollout::{evaluate_rule, EvaluationRollout, RolloutContext};
use crate::analysis::Verdict;
use crate::error::{HanError, Result};
use crate::evolution::{AdaptiveEs, AskTell, Genome, OpenAiEs, Optimizer};
use crate::seeding::{rng_from, split, Domain};

/// Scores candidate `index` of the generation seeded with `generation_seed`.
pub trait Fitness: Sync {
    fn evaluate(&self, genome: &[f64], generation_seed: u64, index: usize) -> Result<f64>;
}

impl Fitness for RolloutContext {
    fn evaluate(&self, genome: &[f64], generation_seed: u64, index: usize) -> Result<f64> {
        let rule = self.decode(genome)?;
        self.fitness(&rule, self.repeat_seeds(generation_seed, index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCandidate {
    pub generation: usize,
    pub fitness: f64,
    pub genome: Genome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Completed generations.
    pub generation: usize,
    pub optimizer: Optimizer,
    pub rng: ChaCha8Rng,
    pub best: Option<BestCandidate>,
    pub history: Vec<GenerationStats>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = load_json(path)?;
        if c.config.hash() != c.config_hash {
            return Err(HanError::Format {
                path: path.to_path_buf(),
                msg: "config hash does not match the stored config".into(),
            });
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub history: Vec<GenerationStats>,
    pub best: Option<BestCandidate>,
    pub evaluations: Vec<EvaluationRollout>,
    /// Share of evaluation rollouts classified as fixed points.
    pub converged_ratio: Option<f64>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }

    pub fn curve_csv(&self) -> String {
        curve_csv(&self.history)
    }
}

pub fn curve_csv(history: &[GenerationStats]) -> String {
    let mut out = String::from("generation,best,mean,std\n");
    for h in history {
        out.push_str(&format!("{},{},{},{}\n", h.generation, h.best, h.mean, h.std));
    }
    out
}

pub struct Trainer {
    state: Checkpoint,
    pool: rayon::ThreadPool,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HanError::config(format!("cannot start worker pool: {e}")))
}

impl Trainer {
    /// Fresh run whose genome length comes from the config's network.
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.layout()?.len();
        Self::with_dim(config, dim)
    }

    /// Fresh run over genomes of length `dim`, for custom fitness functions.
    pub fn with_dim(config: &ExperimentConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from(split(config.seed, Domain::Optimizer, 0));
        let optimizer = match &config.es {
            EsSettings::Adaptive(c) => Optimizer::Adaptive(AdaptiveEs::new(dim, c.clone(), &mut rng)?),
            EsSettings::OpenAi(c) => Optimizer::OpenAi(OpenAiEs::new(dim, c.clone(), &mut rng)?),
        };
        Ok(Trainer {
            pool: build_pool(config.workers)?,
            state: Checkpoint {
                format_version: FORMAT_VERSION,
                config_hash: config.hash(),
                config: config.clone(),
                generation: 0,
                optimizer,
                rng,
                best: None,
                history: Vec::new(),
            },
        })
    }

    pub fn resume(checkpoint: Checkpoint) -> Result<Self> {
        checkpoint.config.validate()?;
        Ok(Trainer {
            pool: build_pool(checkpoint.config.workers)?,
            state: checkpoint,
        })
    }

    /// Changes the evaluation thread count; results are unaffected.
    pub fn set_workers(&mut self, workers: usize) -> Result<()> {
        self.pool = build_pool(workers)?;
        Ok(())
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        self.state
    }

    pub fn generation(&self) -> usize {
        self.state.generation
    }

    pub fn pool(&self) -> &rayon::ThreadPool {
        &self.pool
    }

    /// One ask, evaluate, tell cycle.
    pub fn step(&mut self, fitness: &dyn Fitness) -> Result<GenerationStats> {
        let s = &mut self.state;
        let g = s.generation;
        let population = s.optimizer.ask(&mut s.rng);
        let gseed = split(s.config.seed, Domain::Generation, g as u64);
        let scores: Vec<f64> = self.pool.install(|| {
            population
                .par_iter()
                .enumerate()
                .map(|(i, x)| fitness.evaluate(x, gseed, i))
                .collect::<Result<Vec<f64>>>()
        })?;

        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = (scores.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut best_idx = 0;
        for (i, &f) in scores.iter().enumerate() {
            if f > scores[best_idx] || scores[best_idx].is_nan() {
                best_idx = i;
            }
        }
        let best = scores[best_idx];
        if best.is_finite() && s.best.as_ref().is_none_or(|b| best > b.fitness) {
            s.best = Some(BestCandidate {
                generation: g,
                fitness: best,
                genome: Genome(population[best_idx].clone()),
            });
        }
        s.optimizer.tell(&population, &scores)?;
        let stats = GenerationStats {
            generation: g,
            best,
            mean,
            std,
            best_so_far: s.best.as_ref().map_or(best, |b| b.fitness),
        };
        s.history.push(stats.clone());
        s.generation += 1;
        Ok(stats)
    }

    /// Steps until the configured generation count, calling `after` with
    /// the checkpoint after every generation.
    pub fn run(
        &mut self,
        fitness: &dyn Fitness,
        mut after: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<()> {
        while self.state.generation < self.state.config.generations {
            self.step(fitness)?;
            after(&self.state)?;
        }
        Ok(())
    }
}

fn output_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("checkpoint.json"), dir.join("curve.csv"))
}

fn write_progress(dir: &Path, c: &Checkpoint) -> Result<()> {
    let (ckpt, curve) = output_paths(dir);
    c.save(&ckpt)?;
    write_atomic(&curve, &curve_csv(&c.history))
}

/// Meta-trains from scratch, evaluates the best genome and, when an output
/// directory is configured, writes checkpoint, curve, rule and record files.
pub fn run_meta_training(config: &ExperimentConfig) -> Result<RunRecord> {
    let trainer = Trainer::new(config)?;
    drive(trainer)
}

/// Continues a checkpointed run up to `generations` (or the stored count).
pub fn resume_meta_training(checkpoint: &Path, generations: Option<usize>) -> Result<RunRecord> {
    let mut c = Checkpoint::load(checkpoint)?;
    if let Some(g) = generations {
        c.config.generations = g;
        c.config_hash = c.config.hash();
    }
    drive(Trainer::resume(c)?)
}

fn drive(mut trainer: Trainer) -> Result<RunRecord> {
    let start = Instant::now();
    let config = trainer.checkpoint().config.clone();
    let ctx = RolloutContext::new(&config)?;
    let dir = config.output_dir.clone();
    if let Some(d) = &dir {
        write_progress(d, trainer.checkpoint())?;
    }
    trainer.run(&ctx, |c| match &dir {
        Some(d) => write_progress(d, c),
        None => Ok(()),
    })?;
    let record = finish(&trainer, &ctx, start.elapsed().as_secs_f64())?;
    if let Some(d) = &dir {
        record.save(&d.join("record.json"))?;
        if let Some(b) = &record.best {
            ctx.decode(&b.genome.0)?.save(&d.join("best_rule.json"))?;
            save_json(&d.join("best_genome.json"), b)?;
        }
    }
    Ok(record)
}

/// Evaluates the best genome found so far and assembles the record.
pub fn finish(trainer: &Trainer, ctx: &RolloutContext, wall_clock_seconds: f64) -> Result<RunRecord> {
    let c = trainer.checkpoint();
    let evaluations = match &c.best {
        Some(b) => {
            let rule = ctx.decode(&b.genome.0)?;
            let n = c.config.evaluation.rollouts;
            trainer
                .pool()
                .install(|| evaluate_rule(ctx, &rule, c.config.seed, n))?
        }
        None => Vec::new(),
    };
    let converged_ratio = (!evaluations.is_empty()).then(|| {
        let fixed = evaluations
            .iter()
            .filter(|e| e.report.verdict == Verdict::FixedPoint)
            .count();
        fixed as f64 / evaluations.len() as f64
    });
    Ok(RunRecord {
        format_version: FORMAT_VERSION,
        config_hash: c.config.hash(),
        config: c.config.clone(),
        history: c.history.clone(),
        best: c.best.clone(),
        evaluations,
        converged_ratio,
        wall_clock_seconds,
    })
}
