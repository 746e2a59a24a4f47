//! Flag parsing and the optional flat JSON config file.

use std::fs;
use std::path::{Path, PathBuf};

use abe_core::{PolicyKind, Scenario, SweepConfig};
use clap::Parser;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_OUT: &str = "results.csv";
pub const DEFAULT_SURFACE_RESOLUTION: usize = 101;

/// Regret-vs-horizon sweeps for adaptive binning and exploration.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "abe", version = env!("ABE_VERSION"))]
pub struct Args {
    /// Scenario id: 1-6 or lower_bound (repeatable).
    #[arg(long = "scenario", value_name = "ID")]
    pub scenarios: Vec<Scenario>,
    /// abe, clairvoyant, static_ucb or greedy_ils (repeatable). Defaults to
    /// the policy each scenario was built for.
    #[arg(long = "policy", value_name = "NAME")]
    pub policies: Vec<PolicyKind>,
    /// Horizon (repeatable).
    #[arg(long = "T", value_name = "T")]
    pub horizons: Vec<u64>,
    /// Covariate dimension.
    #[arg(long = "d", value_name = "D")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Sub-Gaussian constant of the schedule.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Curvature constant of the schedule.
    #[arg(long)]
    pub m2: Option<f64>,
    /// Multiplier on the decision-interval widths.
    #[arg(long = "c-delta")]
    pub c_delta: Option<f64>,
    /// Results CSV path; metadata goes next to it as `<stem>.meta.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Price-surface CSV path (d = 2 only).
    #[arg(long)]
    pub surface_out: Option<PathBuf>,
    #[arg(long)]
    pub surface_resolution: Option<usize>,
    /// Worker threads for the sweep.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat JSON file with the same keys as the flags; flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<Value>,
    policy: Option<Value>,
    #[serde(rename = "T")]
    horizons: Option<Value>,
    d: Option<usize>,
    seed: Option<u64>,
    replications: Option<usize>,
    sigma: Option<f64>,
    m2: Option<f64>,
    #[serde(alias = "c-delta")]
    c_delta: Option<f64>,
    out: Option<PathBuf>,
    #[serde(alias = "surface-out")]
    surface_out: Option<PathBuf>,
    #[serde(alias = "surface-resolution")]
    surface_resolution: Option<usize>,
    threads: Option<usize>,
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub sweep: SweepConfig,
    pub out: PathBuf,
    pub surface_out: Option<PathBuf>,
    pub surface_resolution: usize,
}

fn one_or_many(v: Value) -> Vec<Value> {
    match v {
        Value::Array(items) => items,
        other => vec![other],
    }
}

fn scenario_from(v: &Value) -> Result<Scenario, CliError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(CliError::Usage(format!("scenario must be a string or number, got {other}"))),
    };
    text.parse().map_err(|e| CliError::Usage(format!("{e}")))
}

fn policy_from(v: &Value) -> Result<PolicyKind, CliError> {
    match v {
        Value::String(s) => s.parse().map_err(|e| CliError::Usage(format!("{e}"))),
        other => Err(CliError::Usage(format!("policy must be a string, got {other}"))),
    }
}

fn horizon_from(v: &Value) -> Result<u64, CliError> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
            .ok_or_else(|| CliError::Usage(format!("T must be a positive integer, got {n}"))),
        other => Err(CliError::Usage(format!("T must be a number, got {other}"))),
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Merges defaults, the config file and flags, in that order of precedence.
pub fn resolve(args: &Args) -> Result<Settings, CliError> {
    let file = match &args.config {
        Some(path) => read_file(path)?,
        None => FileConfig::default(),
    };
    let mut sweep = SweepConfig::default();

    if !args.scenarios.is_empty() {
        sweep.scenarios = args.scenarios.clone();
    } else if let Some(v) = file.scenario {
        sweep.scenarios = one_or_many(v).iter().map(scenario_from).collect::<Result<_, _>>()?;
    }
    if !args.policies.is_empty() {
        sweep.policies = args.policies.clone();
    } else if let Some(v) = file.policy {
        sweep.policies = one_or_many(v).iter().map(policy_from).collect::<Result<_, _>>()?;
    }
    if !args.horizons.is_empty() {
        sweep.horizons = args.horizons.clone();
    } else if let Some(v) = file.horizons {
        sweep.horizons = one_or_many(v).iter().map(horizon_from).collect::<Result<_, _>>()?;
    }
    sweep.horizons.sort_unstable();
    sweep.horizons.dedup();

    if let Some(d) = args.dim.or(file.d) {
        sweep.dim = d;
    }
    if let Some(s) = args.seed.or(file.seed) {
        sweep.seed = s;
    }
    if let Some(r) = args.replications.or(file.replications) {
        sweep.replications = r;
    }
    if let Some(s) = args.sigma.or(file.sigma) {
        sweep.sigma = Some(s);
    }
    if let Some(m) = args.m2.or(file.m2) {
        sweep.m2 = m;
    }
    if let Some(c) = args.c_delta.or(file.c_delta) {
        sweep.c_delta = c;
    }
    sweep.threads = args.threads.or(file.threads);
    if sweep.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    sweep.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let surface_out = args.surface_out.clone().or(file.surface_out);
    let surface_resolution = args
        .surface_resolution
        .or(file.surface_resolution)
        .unwrap_or(DEFAULT_SURFACE_RESOLUTION);
    if surface_out.is_some() {
        if sweep.dim != 2 {
            return Err(CliError::Usage(format!("price surfaces need d = 2, got d = {}", sweep.dim)));
        }
        if surface_resolution < 2 {
            return Err(CliError::Usage("surface resolution must be at least 2".into()));
        }
    }

    Ok(Settings {
        sweep,
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        surface_out,
        surface_resolution,
    })
}
