//! Config-driven experiment runner behind the `bdgas` binary.
//!
//! A run reads one JSON config, executes the requested suite, and writes
//! `report.json` (metadata, resolved config, every check, estimates, suite
//! verdicts) plus CSV tables into the output directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CheckReport, SuiteVerdict};
use crate::interval::HeatKernelConfig;
use crate::types::Estimate;

mod config;
mod suites;

pub use config::*;
pub use suites::{charlier_product_moment, dual_battery, emit_profile, run_experiment, subset_expansion_error, ProfileKind};

/// Version of the config and report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub kernel: KernelSettings,
}

/// Heat-kernel settings as they appear in a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSettings {
    pub tol: f64,
    pub t_switch: f64,
}

impl Default for KernelSettings {
    fn default() -> Self {
        let d = HeatKernelConfig::default();
        Self {
            tol: d.tol,
            t_switch: d.t_switch,
        }
    }
}

impl KernelSettings {
    pub fn resolve(&self) -> Result<HeatKernelConfig> {
        HeatKernelConfig::new(self.tol, self.t_switch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub streams: u64,
    pub z_max: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            seed: 1,
            streams: 64,
            z_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: Estimate,
}

/// A CSV file produced by a run; cells are already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub checks: Vec<CheckReport>,
    pub estimates: Vec<NamedEstimate>,
    pub suites: Vec<SuiteVerdict>,
    /// Kind-specific payload (tables of distances, sampler diagnostics).
    pub details: serde_json::Value,
    pub tables: Vec<Table>,
}

impl RunResult {
    pub fn pass(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }
}

/// Floats are written with 17 significant digits so they round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses and validates a config, reporting errors as `path:line:col: message`.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        // serde reports fields inside the tagged experiment block at the end of
        // the block; point at the offending key instead when it can be found
        let (line, col) = backticked(&msg)
            .and_then(|key| locate_key(text, key))
            .unwrap_or((e.line(), e.column()));
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        Error::Config(format!("{origin}:{line}:{col}: {msg}"))
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        let (line, col) = locate_key(text, "schema_version").unwrap_or((1, 1));
        return Err(Error::Config(format!(
            "{origin}:{line}:{col}: unsupported schema_version {}, expected {SCHEMA_VERSION}",
            cfg.schema_version
        )));
    }
    if let Err(ValidationError { key, message }) = config::validate(&cfg) {
        let (line, col) = locate_key(text, &key).unwrap_or((1, 1));
        return Err(Error::Config(format!("{origin}:{line}:{col}: {message}")));
    }
    Ok(cfg)
}

fn backticked(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(&msg[start..end])
}

/// 1-based line and column of the first occurrence of `"key"` followed by a colon.
pub fn locate_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        if let Some(col) = line.find(&needle) {
            if line[col + needle.len()..].trim_start().starts_with(':') {
                return Some((i + 1, col + 1));
            }
        }
    }
    None
}

fn write_table(dir: &Path, table: &Table) -> Result<()> {
    write_table_to(&dir.join(&table.file_name), table)
}

/// Writes `table` as CSV to `path` with LF line endings.
pub fn write_table_to(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(&table.header).map_err(|e| Error::Io(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn checks_table(checks: &[CheckReport]) -> Table {
    let header = [
        "name", "mode", "observed", "expected", "stderr", "z_score", "threshold", "pass", "negative_control",
        "n_samples", "seed",
    ];
    Table {
        file_name: "checks.csv".into(),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    serde_json::to_value(c.mode)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    fmt_float(c.observed),
                    fmt_float(c.expected),
                    fmt_float(c.stderr),
                    fmt_float(c.z_score),
                    fmt_float(c.threshold),
                    c.pass.to_string(),
                    c.negative_control.to_string(),
                    c.n_samples.to_string(),
                    c.seed.to_string(),
                ]
            })
            .collect(),
    }
}

/// Writes `report.json`, `checks.csv` and the run's own tables. All files
/// are assembled first and written by this single call.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, result: &RunResult, timestamp: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let report = serde_json::json!({
        "metadata": {
            "library": "bdgas",
            "version": crate::VERSION,
            "schema_version": SCHEMA_VERSION,
            "timestamp_unix": timestamp,
        },
        "config": cfg,
        "pass": result.pass(),
        "suites": result.suites,
        "checks": result.checks,
        "estimates": result.estimates,
        "details": result.details,
        "files": std::iter::once("checks.csv".to_string())
            .chain(result.tables.iter().map(|t| t.file_name.clone()))
            .collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    write_table(dir, &checks_table(&result.checks))?;
    for t in &result.tables {
        write_table(dir, t)?;
    }
    Ok(())
}

/// Loads, runs and writes one experiment; returns whether every suite passed.
pub fn run(config_path: &Path, out_dir: &Path, seed: Option<u64>, negative_control: bool) -> Result<bool> {
    let mut cfg = load_config(config_path)?;
    if let Some(s) = seed {
        cfg.mc.seed = s;
    }
    let result = run_experiment(&cfg, negative_control)?;
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_outputs(out_dir, &cfg, &result, timestamp)?;
    Ok(result.pass())
}
