//! The `ier` command-line tool: run experiments from TOML configs, the
//! GridWorld toy protocol, the fault-metric simulation, and top-k reports.

pub mod config;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Utc;
use ier_core::harness::{run_multi_seed, run_offline_toy, ExperimentConfig, ToyRecord};
use ier_core::metrics::{fault_sim, moving_average, FaultModel};
use ier_core::rng_from_seed;
use ier_core::samplers::{FillMode, PivotMode, Strategy};
use ier_core::agents::UpdateRule;

use config::{FileConfig, Overrides, RunPlan};
use output::RunManifest;
use report::seed_csv_name;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "IER_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "runs";

/// Process exit status of a command that completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Artifacts were written but at least one seed diverged.
    Diverged,
}

pub fn output_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn stamp() -> String {
    Utc::now().format("%Y%m%dT%H%M%S").to_string()
}

pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub from_manifest: Option<PathBuf>,
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
}

fn plan_run(args: &RunArgs) -> Result<RunPlan> {
    if let Some(path) = &args.from_manifest {
        let manifest = RunManifest::read(path)?;
        if manifest.command != "run" {
            bail!("{} was written by `{}`, not `run`", path.display(), manifest.command);
        }
        manifest.config.validate()?;
        return Ok(RunPlan { config: manifest.config, seeds: manifest.seeds, window: manifest.window });
    }
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    file.resolve(&args.overrides)
}

/// Online runs, one learning-curve CSV per seed plus a manifest.
pub fn cmd_run(args: &RunArgs) -> Result<(PathBuf, Outcome)> {
    let plan = plan_run(args)?;
    let RunPlan { config, seeds, window } = plan;
    let stem = format!("{}-{}-{}", config.env, config.sampler.strategy, stamp());
    let dir = output::unique_dir(&output_root(args.out.as_deref()), &stem)?;
    let mut manifest = RunManifest::new("run", config.clone(), seeds.clone(), window);
    manifest.write(&dir)?;

    let records = run_multi_seed(&config, &seeds)?;
    for record in &records {
        let name = seed_csv_name(record.seed);
        output::write_learning_csv(&dir.join(&name), record, window)?;
        manifest.outputs.push(name);
        let timing = format!("seed-{}.timing.csv", record.seed);
        output::write_timing_csv(&dir.join(&timing), record)?;
        manifest.outputs.push(timing);
        if config.eval_every > 0 {
            let eval = format!("seed-{}.eval.csv", record.seed);
            output::write_eval_csv(&dir.join(&eval), record)?;
            manifest.outputs.push(eval);
        }
        if config.dump_surprise {
            let surprise = format!("seed-{}.surprise.csv", record.seed);
            output::write_surprise_csv(&dir.join(&surprise), record)?;
            manifest.outputs.push(surprise);
        }
        let final_avg = match record.returns.is_empty() {
            true => f64::NAN,
            false => *moving_average(&record.returns, window)?.last().unwrap(),
        };
        match &record.failure {
            Some(why) => println!("seed {:>4}: {} episodes, FAILED: {why}", record.seed, record.episodes()),
            None => println!("seed {:>4}: {} episodes, final moving average {final_avg:.2}", record.seed, record.episodes()),
        }
    }
    manifest.diverged_seeds = records.iter().filter(|r| r.diverged).map(|r| r.seed).collect();
    let outcome = if manifest.diverged_seeds.is_empty() { Outcome::Success } else { Outcome::Diverged };
    manifest.finish(if outcome == Outcome::Success { "ok" } else { "diverged" });
    manifest.write(&dir)?;
    println!("wrote {}", dir.display());
    Ok((dir, outcome))
}

pub struct ToyArgs {
    pub sampler: Strategy,
    pub seeds: u64,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub grad_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub p: Option<f64>,
    pub pivot_mode: Option<PivotMode>,
    pub fill_mode: Option<FillMode>,
    pub tabular_update: Option<UpdateRule>,
    pub from_manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn plan_toy(args: &ToyArgs) -> Result<(ExperimentConfig, Vec<u64>)> {
    if let Some(path) = &args.from_manifest {
        let manifest = RunManifest::read(path)?;
        if manifest.command != "toy" {
            bail!("{} was written by `{}`, not `toy`", path.display(), manifest.command);
        }
        manifest.config.validate()?;
        return Ok((manifest.config, manifest.seeds));
    }
    let mut config = ExperimentConfig::gridworld_toy(args.sampler);
    let spec = &mut config.sampler;
    if let Some(v) = args.grad_steps {
        spec.grad_steps = v;
    }
    if let Some(v) = args.batch_size {
        spec.batch_size = v;
    }
    if let Some(v) = args.p {
        spec.mixing_p = v;
    }
    if let Some(v) = args.pivot_mode {
        spec.pivot_mode = v;
    }
    if let Some(v) = args.fill_mode {
        spec.fill_mode = v;
    }
    if let Some(v) = args.tabular_update {
        config.agent.tabular_update = v;
    }
    if let Some(v) = args.epochs {
        config.episodes = v;
    }
    if args.seeds == 0 {
        bail!("at least one seed is required");
    }
    config.seed = args.seed;
    config.validate()?;
    Ok((config, (0..args.seeds).map(|i| args.seed + i).collect()))
}

/// Offline GridWorld runs: per-seed sampled-state and buffer histograms and
/// a table of greedy-rollout outcomes.
pub fn cmd_toy(args: &ToyArgs) -> Result<(PathBuf, Vec<ToyRecord>)> {
    let (config, seeds) = plan_toy(args)?;
    let stem = format!("toy-{}-{}", config.sampler.strategy, stamp());
    let dir = output::unique_dir(&output_root(args.out.as_deref()), &stem)?;
    let mut manifest = RunManifest::new("toy", config.clone(), seeds.clone(), 1);
    manifest.write(&dir)?;

    let mut records = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let mut cfg = config.clone();
        cfg.seed = seed;
        let record = run_offline_toy(&cfg, &mut rng_from_seed(seed)).with_context(|| format!("seed {seed}"))?;
        let freq = format!("frequency-seed-{seed}.csv");
        output::write_state_counts(&dir.join(&freq), &record.absolute_frequency)?;
        let buffer = format!("buffer-seed-{seed}.csv");
        output::write_state_counts(&dir.join(&buffer), &record.buffer_frequency)?;
        manifest.outputs.extend([freq, buffer]);
        println!(
            "seed {seed:>4}: greedy policy {} the goal ({} steps), bottleneck {}, noisy success {:.2}",
            if record.greedy_reaches_goal { "reaches" } else { "misses" },
            record.greedy_steps,
            record.has_bottleneck(),
            record.noisy_success_rate,
        );
        records.push(record);
    }
    output::write_toy_outcomes(&dir.join("outcomes.csv"), &records)?;
    manifest.outputs.push("outcomes.csv".into());
    manifest.finish("ok");
    manifest.write(&dir)?;
    println!("wrote {}", dir.display());
    Ok((dir, records))
}

pub struct FaultArgs {
    pub model: FaultModel,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Fault-model simulation; writes `faultsim.csv` with one row per metric.
pub fn cmd_faultsim(args: &FaultArgs) -> Result<PathBuf> {
    args.model.validate()?;
    let result = fault_sim(&args.model, &mut rng_from_seed(args.seed))?;
    let dir = output::unique_dir(&output_root(args.out.as_deref()), &format!("faultsim-{}", stamp()))?;
    let path = dir.join("faultsim.csv");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
    w.write_record(["metric", "accuracy"])?;
    w.write_record(["topk".to_string(), result.topk_accuracy.to_string()])?;
    w.write_record(["average".to_string(), result.avg_accuracy.to_string()])?;
    w.flush()?;
    let params = serde_json::json!({ "model": args.model, "seed": args.seed, "version": output::version_string() });
    std::fs::write(dir.join("params.json"), serde_json::to_string_pretty(&params)? + "\n")?;
    println!("top-{} accuracy {:.4}", args.model.k, result.topk_accuracy);
    println!("average accuracy {:.4}", result.avg_accuracy);
    println!("wrote {}", path.display());
    Ok(path)
}

/// Print the top-k table and optionally write it as CSV.
pub fn cmd_report(dirs: &[PathBuf], k: usize, out: Option<&Path>) -> Result<Vec<report::ReportRow>> {
    let rows = report::build_report(dirs, k)?;
    print!("{}", report::render_table(&rows));
    if let Some(path) = out {
        report::write_report_csv(path, &rows)?;
        println!("wrote {}", path.display());
    }
    Ok(rows)
}
