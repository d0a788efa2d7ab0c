//! Artifact files: learning-curve CSVs, toy frequency tables and the JSON
//! run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value read back parses to the same bits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use ier_core::harness::{ExperimentConfig, RunRecord, ToyRecord};
use ier_core::metrics::moving_average;
use serde::{Deserialize, Serialize};

pub const LEARNING_HEADER: [&str; 4] = ["episode", "return", "moving_avg", "loss"];
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn version_string() -> String {
    match option_env!("IER_BUILD_REV") {
        Some(rev) => format!("v{}-g{rev}", env!("CARGO_PKG_VERSION")),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

/// `episode,return,moving_avg,loss`; the loss cell is empty for episodes
/// without a learning phase.
pub fn write_learning_csv(path: &Path, record: &RunRecord, window: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(LEARNING_HEADER)?;
    if !record.returns.is_empty() {
        let ma = moving_average(&record.returns, window)?;
        for (i, (ret, avg)) in record.returns.iter().zip(&ma).enumerate() {
            let loss = record.loss_means[i].map(|l| l.to_string()).unwrap_or_default();
            w.write_record([i.to_string(), ret.to_string(), avg.to_string(), loss])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["episode", "wall_ms"])?;
    for (i, ms) in record.wall_ms.iter().enumerate() {
        w.write_record([i.to_string(), ms.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eval_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["episode", "greedy_return"])?;
    for (episode, ret) in &record.eval_returns {
        w.write_record([episode.to_string(), ret.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_surprise_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    ier_core::importance::write_surprise_csv(&mut out, &record.surprise)?;
    out.flush()?;
    Ok(())
}

/// One `state,count` row per GridWorld state.
pub fn write_state_counts(path: &Path, counts: &[u64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["state", "count"])?;
    for (i, c) in counts.iter().enumerate() {
        w.write_record([(i + 1).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_toy_outcomes(path: &Path, records: &[ToyRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["seed", "reaches_goal", "greedy_steps", "noisy_success_rate", "total_sampled", "bottleneck", "tv_to_buffer"])?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.greedy_reaches_goal.to_string(),
            r.greedy_steps.to_string(),
            r.noisy_success_rate.to_string(),
            r.total_sampled().to_string(),
            r.has_bottleneck().to_string(),
            r.sampling_tv_distance().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Audit trail for one invocation. Written once all inputs validate, then
/// rewritten with the end time, status and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub window: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub diverged_seeds: Vec<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: ExperimentConfig, seeds: Vec<u64>, window: usize) -> Self {
        Self {
            command: command.to_string(),
            version: version_string(),
            config,
            seeds,
            window,
            started_at: timestamp(),
            finished_at: None,
            status: "running".into(),
            outputs: Vec::new(),
            diverged_seeds: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }

    pub fn finish(&mut self, status: &str) {
        self.finished_at = Some(timestamp());
        self.status = status.into();
    }
}

/// A fresh directory under `root` whose name starts with `stem`; a numeric
/// suffix keeps it unique.
pub fn unique_dir(root: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    for n in 0.. {
        let name = if n == 0 { stem.to_string() } else { format!("{stem}-{n}") };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}
