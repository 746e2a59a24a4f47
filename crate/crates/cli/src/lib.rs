//! Command-line front end: resolves a sweep from flags and an optional JSON
//! file, runs it, and writes the results CSV, a JSON sidecar and optionally a
//! price surface.

pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use abe_core::harness::{train_abe, RNG_IDENTITY};
use abe_core::{run_sweep, PolicyKind, SlopeOutcome, SweepResults};
use thiserror::Error;

pub use config::{resolve, Args, Settings};
pub use output::{emit_price_surface, emit_results_csv, format_sig6, price_surface, results_csv};

pub const VERSION: &str = env!("ABE_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sweep(#[from] abe_core::harness::SweepError),
    #[error(transparent)]
    Harness(#[from] abe_core::harness::HarnessError),
}

impl CliError {
    /// 2 for bad invocations, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn slope_entries(results: &SweepResults) -> Vec<output::SlopeEntry> {
    results
        .slopes
        .iter()
        .map(|row| output::SlopeEntry {
            scenario: row.scenario.to_string(),
            policy: row.policy.to_string(),
            slope: match &row.outcome {
                SlopeOutcome::Fitted(fit) => Some(fit.slope),
                _ => None,
            },
            note: row.outcome.to_string(),
        })
        .collect()
}

/// Runs a resolved invocation and returns the sweep results.
pub fn execute(settings: &Settings) -> Result<SweepResults, CliError> {
    let started = Instant::now();
    let sweep = &settings.sweep;
    log::info!(
        "running {} episodes ({} scenario/policy pairs, horizons {:?}, {} replications)",
        sweep.episode_keys().len(),
        sweep.combinations().len(),
        sweep.horizons,
        sweep.replications
    );

    let results = match run_sweep(sweep) {
        Ok(r) => r,
        Err(e) => {
            let partial = e.partial_rows(sweep);
            if !partial.is_empty() {
                emit_results_csv(&partial, &settings.out)?;
                log::warn!("wrote {} partial rows to {}", partial.len(), settings.out.display());
            }
            return Err(e.into());
        }
    };
    emit_results_csv(&results.rows(), &settings.out)?;

    if let Some(path) = &settings.surface_out {
        let scenario = sweep.scenarios[0];
        let horizon = *sweep.horizons.last().expect("validated non-empty");
        let cfg = sweep.episode_config(scenario, PolicyKind::Abe, horizon);
        let (policy, _) = train_abe(&cfg, 0)?;
        let points = price_surface(&cfg.reward_model(), &policy, settings.surface_resolution)?;
        emit_price_surface(&points, path)?;
    }

    let meta = output::Metadata {
        version: VERSION,
        rng: RNG_IDENTITY,
        config: sweep,
        threads: sweep.threads,
        results: &settings.out,
        surface: settings.surface_out.as_deref(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        slopes: slope_entries(&results),
    };
    output::emit_metadata(&meta, &output::metadata_path(&settings.out))?;
    Ok(results)
}

/// Resolves `args`, runs the sweep and prints the fitted slopes.
pub fn run(args: &Args) -> Result<(), CliError> {
    let settings = resolve(args)?;
    let results = execute(&settings)?;
    println!("scenario\tpolicy\tslope");
    for row in &results.slopes {
        println!("{}\t{}\t{}", row.scenario, row.policy, row.outcome);
    }
    println!("results: {}", settings.out.display());
    if let Some(path) = &settings.surface_out {
        println!("surface: {}", path.display());
    }
    Ok(())
}
