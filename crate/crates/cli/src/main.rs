use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ier_cli::config::Overrides;
use ier_cli::{cmd_faultsim, cmd_report, cmd_run, cmd_toy, FaultArgs, Outcome, RunArgs, ToyArgs};
use ier_core::agents::UpdateRule;
use ier_core::envs::EnvId;
use ier_core::metrics::FaultModel;
use ier_core::samplers::{FillMode, PivotMode, Strategy};

#[derive(Parser)]
#[command(name = "ier", version, about = "Experience-replay sampler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Online training runs, one CSV per seed.
    Run(RunCmd),
    /// Offline GridWorld protocol with sampled-state histograms.
    Toy(ToyCmd),
    /// Monte-Carlo comparison of the top-k and average metrics.
    Faultsim(FaultCmd),
    /// Top-k summary table over run directories.
    Report(ReportCmd),
}

#[derive(Args)]
struct RunCmd {
    /// TOML experiment file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Re-run the exact configuration and seeds recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    from_manifest: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvId>,
    #[arg(long)]
    sampler: Option<Strategy>,
    /// Number of seeds, counting up from --seed.
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    grad_steps: Option<usize>,
    /// IER mixing fraction.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    pivot_mode: Option<PivotMode>,
    #[arg(long)]
    fill_mode: Option<FillMode>,
    #[arg(long)]
    lr: Option<f64>,
    /// Moving-average window for the learning curves.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tabular_update: Option<UpdateRule>,
    /// Output root (default: $IER_OUT_DIR, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToyCmd {
    #[arg(long, default_value = "uer")]
    sampler: Strategy,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    grad_steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    pivot_mode: Option<PivotMode>,
    #[arg(long)]
    fill_mode: Option<FillMode>,
    #[arg(long)]
    tabular_update: Option<UpdateRule>,
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FaultCmd {
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Gaussian noise added to every outcome.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    envs: usize,
    #[arg(long, default_value_t = 10)]
    seeds_per_env: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportCmd {
    /// Directories written by `ier run`.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged) => {
            eprintln!("error: at least one seed diverged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Run(c) => {
            let overrides = Overrides {
                env: c.env,
                sampler: c.sampler,
                seeds: c.seeds,
                seed: c.seed,
                episodes: c.episodes,
                batch_size: c.batch_size,
                grad_steps: c.grad_steps,
                p: c.p,
                pivot_mode: c.pivot_mode,
                fill_mode: c.fill_mode,
                lr: c.lr,
                window: c.window,
                tabular_update: c.tabular_update,
            };
            let args = RunArgs { config: c.config, from_manifest: c.from_manifest, overrides, out: c.out };
            Ok(cmd_run(&args)?.1)
        }
        Command::Toy(c) => {
            let args = ToyArgs {
                sampler: c.sampler,
                seeds: c.seeds,
                seed: c.seed,
                epochs: c.epochs,
                grad_steps: c.grad_steps,
                batch_size: c.batch_size,
                p: c.p,
                pivot_mode: c.pivot_mode,
                fill_mode: c.fill_mode,
                tabular_update: c.tabular_update,
                from_manifest: c.from_manifest,
                out: c.out,
            };
            cmd_toy(&args)?;
            Ok(Outcome::Success)
        }
        Command::Faultsim(c) => {
            let model = FaultModel {
                gaussian_sigma: c.sigma,
                environments: c.envs,
                seeds_per_env: c.seeds_per_env,
                trials: c.trials,
                k: c.k,
                ..FaultModel::default()
            };
            cmd_faultsim(&FaultArgs { model, seed: c.seed, out: c.out })?;
            Ok(Outcome::Success)
        }
        Command::Report(c) => {
            cmd_report(&c.dirs, c.k, c.out.as_deref())?;
            Ok(Outcome::Success)
        }
    }
}
