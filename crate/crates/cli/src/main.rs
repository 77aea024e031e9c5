use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use han_core::analysis::{
    classify_convergence, distance_matrix, pca_embed, plasticity_series, series_to_csv,
    weights_spectrum, WeightTrajectory,
};
use han_core::envs::Impulse;
use han_core::harness::{
    resume_meta_training, rollout_rule, run_condition_grid, save_json, write_atomic,
    BestCandidate, ExperimentConfig, HotSwap, RolloutContext, RolloutHooks, RunRecord,
};
use han_core::plasticity::Condition;
use han_core::seeding::{split, Domain};
use han_core::{HanError, PlasticityRule, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "han", version, about = "Evolve and analyze Hebbian plastic controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-train plasticity coefficients with an evolution strategy.
    Train(TrainArgs),
    /// Run one recorded episode of a trained rule.
    Rollout(RolloutArgs),
    /// Sweep window length and Hebbian rate, one training run per cell and seed.
    Grid(GridArgs),
    /// PCA, spectrum and convergence analysis of a recorded rollout.
    Analyze(AnalyzeArgs),
    /// Swap coefficients mid-episode and classify the dynamics on each side.
    SwapDemo(SwapArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML or JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset A..E for stabilization, window and rate ratio.
    #[arg(long)]
    condition: Option<Condition>,
    /// Dotted-path override, e.g. `es.population=32`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, base) {
            (Some(p), _) => ExperimentConfig::load(p)?,
            (None, Some(c)) => c,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(c) = self.condition {
            config = config.with_condition(c);
        }
        let config = config.with_overrides(&self.overrides)?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for checkpoints, curves and the run record.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long, conflicts_with_all = ["config", "condition", "overrides"])]
    resume: Option<PathBuf>,
    /// Total generations (also extends a resumed run).
    #[arg(long)]
    generations: Option<usize>,
}

#[derive(Args)]
struct RuleSource {
    /// Run record; supplies the config and the best genome.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Best-genome file written by `train`.
    #[arg(long, conflicts_with = "rule")]
    genome: Option<PathBuf>,
    /// Coefficient file.
    #[arg(long)]
    rule: Option<PathBuf>,
}

impl RuleSource {
    fn load(&self, cfg: &ConfigArgs) -> Result<(RolloutContext, PlasticityRule)> {
        let record = self.record.as_deref().map(RunRecord::load).transpose()?;
        let config = cfg.resolve(record.as_ref().map(|r| r.config.clone()))?;
        let ctx = RolloutContext::new(&config)?;
        let rule = if let Some(p) = &self.rule {
            let rule = PlasticityRule::load(p)?;
            ctx.layout.encode(&rule)?;
            rule
        } else if let Some(p) = &self.genome {
            ctx.decode(&load_genome(p)?)?
        } else if let Some(best) = record.as_ref().and_then(|r| r.best.as_ref()) {
            ctx.decode(&best.genome.0)?
        } else {
            return Err(HanError::Input(
                "need --rule, --genome or a --record with a best genome".into(),
            ));
        };
        Ok((ctx, rule))
    }
}

fn load_genome(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if let Ok(best) = serde_json::from_str::<BestCandidate>(&text) {
        return Ok(best.genome.0);
    }
    serde_json::from_str::<Vec<f64>>(&text).map_err(|e| HanError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn io_err(path: &Path, source: std::io::Error) -> HanError {
    HanError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Args)]
struct RolloutArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    source: RuleSource,
    /// Episode seed; defaults to the first evaluation seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Disable plasticity between two times in seconds, `START:END`.
    #[arg(long, value_parser = parse_interval)]
    freeze: Option<(f64, f64)>,
    /// Velocity impulse `SECONDS:v0,v1,...`. Repeatable.
    #[arg(long, value_parser = parse_impulse)]
    impulse: Vec<Impulse>,
    /// Load another coefficient file at a time, `SECONDS:PATH`. Repeatable.
    #[arg(long, value_parser = parse_swap)]
    swap: Vec<(f64, PathBuf)>,
    /// Also write a per-step observation/action/reward table.
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    windows: Vec<usize>,
    #[arg(long = "f-hebb", value_delimiter = ',', required = true)]
    f_hebb: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `rollout`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    early: f64,
    #[arg(long, default_value_t = 2)]
    components: usize,
    /// Number of randomly chosen weights in the summed spectrum.
    #[arg(long, default_value_t = 30)]
    spectrum_weights: usize,
    /// Snapshot stride for the distance matrix.
    #[arg(long, default_value_t = 10)]
    stride: usize,
}

#[derive(Args)]
struct SwapArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    source: RuleSource,
    /// Coefficients loaded at the swap time.
    #[arg(long)]
    to: PathBuf,
    /// Swap time in seconds; defaults to mid-episode.
    #[arg(long)]
    at: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let start = a.trim().parse().map_err(|_| format!("bad start '{a}'"))?;
    let end = b.trim().parse().map_err(|_| format!("bad end '{b}'"))?;
    Ok((start, end))
}

fn parse_impulse(s: &str) -> std::result::Result<Impulse, String> {
    let (t, v) = s.split_once(':').ok_or("expected SECONDS:v0,v1,...")?;
    let time = t.trim().parse().map_err(|_| format!("bad time '{t}'"))?;
    let impulse = v
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad component '{x}'")))
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    Ok(Impulse { time, impulse })
}

fn parse_swap(s: &str) -> std::result::Result<(f64, PathBuf), String> {
    let (t, p) = s.split_once(':').ok_or("expected SECONDS:PATH")?;
    let time = t.trim().parse().map_err(|_| format!("bad time '{t}'"))?;
    Ok((time, PathBuf::from(p)))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn train(args: &TrainArgs) -> Result<()> {
    let record = if let Some(ckpt) = &args.resume {
        resume_meta_training(ckpt, args.generations)?
    } else {
        let mut config = args.config.resolve(None)?;
        if let Some(g) = args.generations {
            config.generations = g;
        }
        if args.out.is_some() {
            config.output_dir = args.out.clone();
        }
        han_core::harness::run_meta_training(&config)?
    };
    print_json(&json!({
        "config_hash": record.config_hash,
        "generations": record.history.len(),
        "best_fitness": record.best.as_ref().map(|b| b.fitness),
        "converged_ratio": record.converged_ratio,
        "output_dir": record.config.output_dir,
        "wall_clock_seconds": record.wall_clock_seconds,
    }));
    Ok(())
}

fn default_seed(config: &ExperimentConfig, seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| split(config.seed, Domain::Evaluation, 0))
}

fn rollout(args: &RolloutArgs) -> Result<()> {
    let (ctx, rule) = args.source.load(&args.config)?;
    let seed = default_seed(&ctx.config, args.seed);
    let mut hooks = RolloutHooks {
        record_dump: args.dump,
        ..Default::default()
    };
    hooks.perturbation.freeze = args.freeze;
    hooks.perturbation.impulses = args.impulse.clone();
    for (t, path) in &args.swap {
        hooks.swaps.push(HotSwap {
            step: ctx.config.env.step_at(*t),
            rule: PlasticityRule::load(path)?,
        });
    }
    let out = rollout_rule(&ctx, &rule, seed, &hooks)?;
    let traj = out.trajectory();
    let f_nn = ctx.config.env.f_nn();
    write_atomic(&args.out.join("weights.csv"), &traj.to_csv())?;
    if traj.len() >= 2 {
        let series = plasticity_series(traj)?;
        write_atomic(&args.out.join("plasticity.csv"), &series_to_csv(&series, f_nn))?;
    }
    if let Some(dump) = &out.episode.dump {
        write_atomic(&args.out.join("dump.csv"), &dump.to_csv("weights.csv"))?;
    }
    let summary = json!({
        "seed": seed,
        "fitness": out.fitness,
        "diverged": out.episode.diverged,
        "report": out.report,
        "layer_lens": traj.layer_lens(),
        "f_nn": f_nn,
        "config_hash": ctx.config.hash(),
    });
    save_json(&args.out.join("rollout.json"), &summary)?;
    print_json(&summary);
    Ok(())
}

fn grid(args: &GridArgs) -> Result<()> {
    let mut base = args.config.resolve(None)?;
    base.output_dir = Some(args.out.clone());
    let report = run_condition_grid(&base, &args.windows, &args.f_hebb, &args.seeds)?;
    write_atomic(&args.out.join("converged_ratio.csv"), &report.ratio_csv())?;
    write_atomic(&args.out.join("fitness.csv"), &report.fitness_csv())?;
    save_json(&args.out.join("grid.json"), &report)?;
    print!("{}", report.ratio_csv());
    let failed = report.cells.iter().filter(|c| c.failed()).count();
    if failed > 0 {
        eprintln!("{failed} grid cell(s) failed; see grid.json");
    }
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let meta_path = args.input.join("rollout.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: serde_json::Value = serde_json::from_str(&meta_text).map_err(|e| HanError::Format {
        path: meta_path.clone(),
        msg: e.to_string(),
    })?;
    let bad = |msg: &str| HanError::Format {
        path: meta_path.clone(),
        msg: msg.into(),
    };
    let layer_lens: Vec<usize> = serde_json::from_value(meta["layer_lens"].clone())
        .map_err(|_| bad("missing layer_lens"))?;
    let f_nn = meta["f_nn"].as_f64().ok_or_else(|| bad("missing f_nn"))?;
    let seed = meta["seed"].as_u64().unwrap_or(0);

    let weights_path = args.input.join("weights.csv");
    let text = std::fs::read_to_string(&weights_path).map_err(|e| io_err(&weights_path, e))?;
    let traj = WeightTrajectory::from_csv(&text, layer_lens)?;
    if !traj.is_finite() {
        return Err(HanError::Numeric("recorded weights are not finite".into()));
    }
    let series = plasticity_series(&traj)?;
    let report = classify_convergence(&series, args.rho, args.early)?;
    let spec = weights_spectrum(&traj, f_nn, args.spectrum_weights, split(seed, Domain::Weights, 1))?;
    let pca = pca_embed(&traj, args.components)?;
    let dist = distance_matrix(&traj, args.stride)?;

    let out = args.out.as_ref().unwrap_or(&args.input);
    write_atomic(&out.join("pca.csv"), &pca.to_csv(traj.steps()))?;
    write_atomic(&out.join("spectrum.csv"), &spec.to_csv())?;
    let dist_csv: String = dist
        .iter()
        .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    write_atomic(&out.join("distance.csv"), &dist_csv)?;
    let summary = json!({
        "report": report,
        "dominant_frequency": spec.dominant_frequency(),
        "explained_variance_ratio": pca.explained_variance_ratio,
        "snapshots": traj.len(),
    });
    save_json(&out.join("analysis.json"), &summary)?;
    print_json(&summary);
    Ok(())
}

fn swap_demo(args: &SwapArgs) -> Result<()> {
    let (ctx, rule) = args.source.load(&args.config)?;
    let target = PlasticityRule::load(&args.to)?;
    ctx.layout.encode(&target)?;
    let seed = default_seed(&ctx.config, args.seed);
    let env = &ctx.config.env;
    let at = args
        .at
        .unwrap_or(env.episode_steps as f64 * env.control_period / 2.0);
    let step = env.step_at(at);
    let hooks = RolloutHooks {
        swaps: vec![HotSwap { step, rule: target }],
        ..Default::default()
    };
    let out = rollout_rule(&ctx, &rule, seed, &hooks)?;
    let traj = out.trajectory();
    let series = plasticity_series(traj)?;
    let eval = &ctx.config.evaluation;
    let cut = (step as usize).min(series.len());
    let segment = |s: &[f64]| {
        if s.len() < 2 {
            return Ok(serde_json::Value::Null);
        }
        Ok(json!(classify_convergence(s, eval.rho, eval.early_fraction)?))
    };
    write_atomic(&args.out.join("weights.csv"), &traj.to_csv())?;
    write_atomic(&args.out.join("plasticity.csv"), &series_to_csv(&series, env.f_nn()))?;
    let summary = json!({
        "seed": seed,
        "swap_step": step,
        "fitness": out.fitness,
        "before": segment(&series[..cut])?,
        "after": segment(&series[cut..])?,
        "whole": out.report,
    });
    save_json(&args.out.join("swap.json"), &summary)?;
    print_json(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Rollout(a) => rollout(a),
        Command::Grid(a) => grid(a),
        Command::Analyze(a) => analyze(a),
        Command::SwapDemo(a) => swap_demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
