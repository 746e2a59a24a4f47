//! CSV and JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use abe_core::{AbePolicy, OutputRow, RewardModel, SweepConfig};
use serde::Serialize;

use crate::CliError;

pub const RESULTS_HEADER: &str = "scenario,policy,T,d,seed,replicate,checkpoint_t,cum_regret";
pub const SURFACE_HEADER: &str = "x1,x2,p_opt,p_learned";

/// Formats `v` with six significant digits in the style of C's `%g`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders the results table, sorted by scenario, policy, horizon,
/// replicate and checkpoint.
pub fn results_csv(rows: &[OutputRow]) -> String {
    let mut rows: Vec<&OutputRow> = rows.iter().collect();
    rows.sort_by_key(|r| (r.scenario, r.policy, r.horizon, r.replicate, r.checkpoint_t));
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.policy,
            r.horizon,
            r.dim,
            r.seed,
            r.replicate,
            r.checkpoint_t,
            format_sig6(r.cum_regret)
        );
    }
    out
}

pub fn emit_results_csv(rows: &[OutputRow], path: &Path) -> Result<(), CliError> {
    write_file(path, &results_csv(rows))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub x1: f64,
    pub x2: f64,
    pub p_opt: f64,
    pub p_learned: f64,
}

/// Grid coordinates `j/(r−1)` pulled just inside `[0, 1)`.
pub fn surface_axis(resolution: usize) -> Vec<f64> {
    let shrink = 1.0 - f64::EPSILON;
    (0..resolution)
        .map(|j| j as f64 / (resolution - 1) as f64 * shrink)
        .collect()
}

/// Optimal and greedily learned prices on a `resolution × resolution` grid,
/// `x2` varying fastest.
pub fn price_surface(
    model: &RewardModel,
    policy: &AbePolicy,
    resolution: usize,
) -> Result<Vec<SurfacePoint>, CliError> {
    if model.dim() != 2 || policy.schedule().dim() != 2 {
        return Err(CliError::Usage("price surfaces need d = 2".into()));
    }
    if resolution < 2 {
        return Err(CliError::Usage("surface resolution must be at least 2".into()));
    }
    let axis = surface_axis(resolution);
    let mut points = Vec::with_capacity(resolution * resolution);
    for &x1 in &axis {
        for &x2 in &axis {
            let x = [x1, x2];
            let p_learned = policy.greedy_price(&x).map_err(|e| CliError::Usage(e.to_string()))?;
            points.push(SurfacePoint {
                x1,
                x2,
                p_opt: model.optimal_price(&x),
                p_learned,
            });
        }
    }
    Ok(points)
}

pub fn surface_csv(points: &[SurfacePoint]) -> String {
    let mut out = String::from(SURFACE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.x1, p.x2, p.p_opt, p.p_learned);
    }
    out
}

pub fn emit_price_surface(points: &[SurfacePoint], path: &Path) -> Result<(), CliError> {
    write_file(path, &surface_csv(points))
}

/// Contents of the JSON sidecar written next to the results CSV.
#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub version: &'a str,
    pub rng: &'a str,
    pub config: &'a SweepConfig,
    pub threads: Option<usize>,
    pub results: &'a Path,
    pub surface: Option<&'a Path>,
    pub wall_time_seconds: f64,
    pub slopes: Vec<SlopeEntry>,
}

#[derive(Debug, Serialize)]
pub struct SlopeEntry {
    pub scenario: String,
    pub policy: String,
    pub slope: Option<f64>,
    pub note: String,
}

/// `results.csv` → `results.meta.json`.
pub fn metadata_path(results: &Path) -> PathBuf {
    results.with_extension("meta.json")
}

pub fn emit_metadata(meta: &Metadata<'_>, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    text.push('\n');
    write_file(path, &text)
}
