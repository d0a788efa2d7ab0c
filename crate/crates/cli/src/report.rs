//! Top-k summary over finished run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ier_core::harness::ExperimentConfig;
use ier_core::metrics::topk_selection;
use ier_core::samplers::{FillMode, PivotMode, Strategy};

use crate::output::{RunManifest, LEARNING_HEADER};

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub sampler: String,
    pub env: String,
    pub seeds: usize,
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

/// Sampler label; IER variants and nonzero mixing are spelled out.
pub fn sampler_label(config: &ExperimentConfig) -> String {
    let spec = &config.sampler;
    let mut label = spec.strategy.as_str().to_string();
    if spec.strategy == Strategy::Ier {
        let mut extras = Vec::new();
        if spec.pivot_mode != PivotMode::TdTop {
            extras.push(format!("pivot={}", spec.pivot_mode));
        }
        if spec.fill_mode != FillMode::LookBack {
            extras.push(format!("fill={}", spec.fill_mode));
        }
        if spec.mixing_p != 0.0 {
            extras.push(format!("p={}", spec.mixing_p));
        }
        if !extras.is_empty() {
            label = format!("{label}({})", extras.join(","));
        }
    }
    label
}

/// Last `moving_avg` value of a learning-curve CSV, checking its schema.
pub fn final_moving_average(path: &Path) -> Result<f64> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers().with_context(|| format!("reading {}", path.display()))?.clone();
    if header.iter().ne(LEARNING_HEADER) {
        bail!("{}: expected columns {}, found {}", path.display(), LEARNING_HEADER.join(","), header.iter().collect::<Vec<_>>().join(","));
    }
    let mut last = None;
    for row in reader.records() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        let cell = row.get(2).unwrap_or_default();
        last = Some(cell.parse::<f64>().with_context(|| format!("{}: bad moving_avg '{cell}'", path.display()))?);
    }
    last.with_context(|| format!("{}: no episodes", path.display()))
}

/// Group every seed CSV in `dirs` by (sampler, environment) and take the
/// top-k mean and standard deviation of final moving averages.
pub fn build_report(dirs: &[PathBuf], k: usize) -> Result<Vec<ReportRow>> {
    if dirs.is_empty() {
        bail!("no run directories given");
    }
    let mut window: Option<(usize, &Path)> = None;
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for dir in dirs {
        let manifest = RunManifest::read(dir)?;
        if manifest.command != "run" {
            bail!("{}: not a `run` directory (command {})", dir.display(), manifest.command);
        }
        match window {
            Some((w, first)) if w != manifest.window => bail!(
                "{}: moving-average window {} differs from {} in {}",
                dir.display(),
                manifest.window,
                w,
                first.display()
            ),
            None => window = Some((manifest.window, dir)),
            _ => {}
        }
        let key = (sampler_label(&manifest.config), manifest.config.env.to_string());
        for seed in &manifest.seeds {
            let path = dir.join(seed_csv_name(*seed));
            groups.entry(key.clone()).or_default().push(final_moving_average(&path)?);
        }
    }
    groups
        .into_iter()
        .map(|((sampler, env), finals)| {
            if k == 0 || k > finals.len() {
                bail!("k = {k} but {sampler} on {env} has {} seeds", finals.len());
            }
            let (mean, std) = topk_selection(&finals, k)?;
            Ok(ReportRow { sampler, env, seeds: finals.len(), k, mean, std })
        })
        .collect()
}

pub fn seed_csv_name(seed: u64) -> String {
    format!("seed-{seed}.csv")
}

/// Plain-text table: one row per sampler, one column per environment.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut envs: Vec<&str> = rows.iter().map(|r| r.env.as_str()).collect();
    envs.sort();
    envs.dedup();
    let mut samplers: Vec<&str> = rows.iter().map(|r| r.sampler.as_str()).collect();
    samplers.sort();
    samplers.dedup();
    let cell = |s: &str, e: &str| {
        rows.iter()
            .find(|r| r.sampler == s && r.env == e)
            .map(|r| format!("{:.2} ± {:.2}", r.mean, r.std))
            .unwrap_or_else(|| "-".into())
    };
    let width = samplers.iter().map(|s| s.len()).max().unwrap_or(0).max("sampler".len());
    let mut out = String::new();
    let _ = write!(out, "{:width$}", "sampler");
    for e in &envs {
        let _ = write!(out, " | {e:>16}");
    }
    out.push('\n');
    for s in &samplers {
        let _ = write!(out, "{s:width$}");
        for e in &envs {
            let _ = write!(out, " | {:>16}", cell(s, e));
        }
        out.push('\n');
    }
    out
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["sampler", "env", "seeds", "k", "topk_mean", "topk_std"])?;
    for r in rows {
        w.write_record([r.sampler.clone(), r.env.clone(), r.seeds.to_string(), r.k.to_string(), r.mean.to_string(), r.std.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
