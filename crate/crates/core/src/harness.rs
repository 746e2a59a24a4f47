//! Seeded episode execution, regret accounting and regret-vs-horizon sweeps.
//!
//! # Random streams
//!
//! Every episode draws from [`ChaCha8Rng`] keyed by `seed_from_u64(seed)`.
//! The covariate, reward and policy draws of replicate `r` use streams
//! `4r`, `4r + 1` and `4r + 2`; the lower-bound class bits use stream
//! `u64::MAX`. ChaCha streams with one key are disjoint keystreams of `2^64`
//! blocks each, so replicate streams never overlap. Episodes that differ only
//! in horizon or policy share streams, which gives common random numbers
//! across the sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::abe::AbePolicy;
use crate::baselines::{Clairvoyant, IlsState, StaticGrid};
use crate::environment::{CovariateProcess, LowerBoundClass, RewardModel};
use crate::policy::{AbeRunner, Policy, PolicyError, PolicyKind, UcbRunner};
use crate::schedule::{Schedule, ScheduleError};

/// Identity of the generator recorded in run metadata.
pub const RNG_IDENTITY: &str =
    "ChaCha8Rng (rand_chacha 0.9); key = seed_from_u64(seed); streams 4r, 4r+1, 4r+2 for covariates, rewards, policy of replicate r; u64::MAX for lower-bound bits";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("policy failed in period {period}: {source}")]
    Policy { period: u64, source: PolicyError },
    #[error("policy returned price {price} outside [0, 1] in period {period}")]
    PriceOutOfRange { period: u64, price: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points for a slope, got {0}")]
    InsufficientPoints(usize),
    #[error("log-log fit needs positive values, got ({0}, {1})")]
    NonPositive(f64, f64),
    #[error("all horizons are equal")]
    Degenerate,
}

/// Experiment scenarios: environment plus the policy it was designed to
/// exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Weighted demand, uniform covariates.
    #[serde(rename = "1")]
    Stationary,
    /// Weighted demand, covariates uniform on a rectangle redrawn every tenth
    /// of the horizon.
    #[serde(rename = "2")]
    Nonstationary,
    /// Demand copied from the nearest center (discontinuous).
    #[serde(rename = "3")]
    NearestCenter,
    /// Center demands `1 − p`, `0.5`, `0` (maximizer may sit on `p = 1`).
    #[serde(rename = "4")]
    Boundary,
    /// Weighted demand, static binning with UCB1.
    #[serde(rename = "5")]
    StaticBinning,
    /// Weighted demand, greedy least squares on a misspecified linear model.
    #[serde(rename = "6")]
    Misspecified,
    /// A random member of the localized lower-bound class.
    #[serde(rename = "lower_bound")]
    LowerBound,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Stationary,
        Scenario::Nonstationary,
        Scenario::NearestCenter,
        Scenario::Boundary,
        Scenario::StaticBinning,
        Scenario::Misspecified,
        Scenario::LowerBound,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Stationary => "1",
            Scenario::Nonstationary => "2",
            Scenario::NearestCenter => "3",
            Scenario::Boundary => "4",
            Scenario::StaticBinning => "5",
            Scenario::Misspecified => "6",
            Scenario::LowerBound => "lower_bound",
        }
    }

    pub fn default_policy(self) -> PolicyKind {
        match self {
            Scenario::StaticBinning => PolicyKind::StaticUcb,
            Scenario::Misspecified => PolicyKind::GreedyIls,
            _ => PolicyKind::Abe,
        }
    }

    /// Default sub-Gaussian constant: Bernoulli revenue in `[0, 1]` for the
    /// pricing scenarios, unit-variance Gaussian noise for the lower bound.
    pub fn default_sigma(self) -> f64 {
        match self {
            Scenario::LowerBound => 0.5,
            _ => 0.125,
        }
    }

    pub fn is_pricing(self) -> bool {
        self != Scenario::LowerBound
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown scenario {0:?} (expected 1-6 or lower_bound)")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.id() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

/// Which of the three per-replicate streams a draw comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Covariates = 0,
    Rewards = 1,
    Policy = 2,
}

pub fn episode_rng(seed: u64, replicate: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate.wrapping_mul(4).wrapping_add(role as u64));
    rng
}

fn lower_bound_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

/// `count` geometrically spaced periods ending at `horizon`, deduplicated.
pub fn geometric_checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    let count = count.max(1);
    let mut out: Vec<u64> = (1..=count)
        .map(|i| {
            let t = (horizon as f64).powf(i as f64 / count as f64).round() as u64;
            t.clamp(1, horizon)
        })
        .collect();
    out.dedup();
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Constants of the adaptive-binning schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbeConstants {
    pub sigma: f64,
    pub m2: f64,
    pub c_delta: f64,
}

/// Everything needed to run one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub dim: usize,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    pub constants: AbeConstants,
    /// Multiplier `c` in the UCB1 bonus `sqrt(c ln n / n_j)`.
    pub ucb_exploration: f64,
    /// Bins per dimension of the lower-bound class.
    pub lb_bins_per_dim: usize,
    pub record_decisions: bool,
}

impl RunConfig {
    pub fn new(scenario: Scenario, policy: PolicyKind, horizon: u64) -> Self {
        Self {
            scenario,
            policy,
            horizon,
            dim: 2,
            seed: 42,
            checkpoints: geometric_checkpoints(horizon, 20),
            constants: AbeConstants {
                sigma: scenario.default_sigma(),
                m2: 0.5,
                c_delta: 1.0,
            },
            ucb_exploration: 2.0,
            lb_bins_per_dim: 4,
            record_decisions: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.scenario.is_pricing() && self.dim != 2 {
            return bad(format!("scenario {} is defined for d = 2, got d = {}", self.scenario, self.dim));
        }
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("checkpoints must be strictly increasing".into());
        }
        if self.checkpoints[0] == 0 || self.checkpoints.last() != Some(&self.horizon) {
            return bad(format!("checkpoints must lie in 1..={} and end at the horizon", self.horizon));
        }
        if !(self.ucb_exploration >= 0.0 && self.ucb_exploration.is_finite()) {
            return bad("UCB exploration constant must be non-negative".into());
        }
        if self.lb_bins_per_dim == 0 {
            return bad("lower-bound class needs at least one bin per dimension".into());
        }
        Ok(())
    }

    pub fn reward_model(&self) -> RewardModel {
        match self.scenario {
            Scenario::Stationary
            | Scenario::Nonstationary
            | Scenario::StaticBinning
            | Scenario::Misspecified => RewardModel::WeightedPricing,
            Scenario::NearestCenter => RewardModel::NearestCenterPricing,
            Scenario::Boundary => RewardModel::BoundaryPricing,
            Scenario::LowerBound => RewardModel::LowerBound(LowerBoundClass::random(
                self.dim,
                self.lb_bins_per_dim,
                &mut lower_bound_rng(self.seed),
            )),
        }
    }

    pub fn covariate_process(&self) -> CovariateProcess {
        match self.scenario {
            Scenario::Nonstationary => CovariateProcess::piecewise(self.horizon),
            _ => CovariateProcess::uniform(self.dim),
        }
    }

    pub fn schedule(&self) -> Result<Schedule, ScheduleError> {
        let c = self.constants;
        Schedule::build(self.horizon, self.dim, c.sigma, c.m2, c.c_delta)
    }

    pub fn build_policy(&self, model: &RewardModel) -> Result<Box<dyn Policy>, HarnessError> {
        Ok(match self.policy {
            PolicyKind::Abe => Box::new(AbeRunner::new(AbePolicy::new(self.schedule()?))),
            PolicyKind::Clairvoyant => Box::new(Clairvoyant::new(model.clone())),
            PolicyKind::StaticUcb => Box::new(UcbRunner::new(StaticGrid::for_horizon(
                self.horizon,
                self.dim,
                self.ucb_exploration,
            ))),
            PolicyKind::GreedyIls => Box::new(IlsState::with_defaults(self.dim)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub t: u64,
    pub x: Vec<f64>,
    pub price: f64,
    pub reward: f64,
    pub regret: f64,
}

/// Outcome of one seeded episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    /// `(t, cumulative regret through period t)` at every checkpoint.
    pub checkpoints: Vec<(u64, f64)>,
    pub runtime: Duration,
    pub degenerate_redraws: u64,
    pub decisions: Option<Vec<DecisionRecord>>,
}

impl EpisodeTrace {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |&(_, r)| r)
    }

    pub fn series(&self) -> &[(u64, f64)] {
        &self.checkpoints
    }
}

/// Cumulative sums of per-period `increments` (period `t` at index `t − 1`)
/// sampled at each checkpoint.
pub fn cumulative_regret_series(increments: &[f64], checkpoints: &[u64]) -> Vec<(u64, f64)> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut total = 0.0;
    let mut next = checkpoints.iter().peekable();
    for (i, inc) in increments.iter().enumerate() {
        total += inc;
        let t = i as u64 + 1;
        while next.peek() == Some(&&t) {
            out.push((t, total));
            next.next();
        }
    }
    out
}

pub fn run_episode(cfg: &RunConfig, replicate: u64) -> Result<EpisodeTrace, HarnessError> {
    cfg.validate()?;
    let model = cfg.reward_model();
    let mut policy = cfg.build_policy(&model)?;
    run_episode_with(cfg, replicate, &model, policy.as_mut())
}

/// Runs `policy` through one episode of `cfg`. Regret uses the exact means
/// `f*(X_t) − f(X_t, π_t)`; the policy only sees covariates and sampled
/// feedback.
pub fn run_episode_with(
    cfg: &RunConfig,
    replicate: u64,
    model: &RewardModel,
    policy: &mut dyn Policy,
) -> Result<EpisodeTrace, HarnessError> {
    cfg.validate()?;
    if model.dim() != cfg.dim {
        return Err(HarnessError::Config(format!(
            "model dimension {} differs from configured {}",
            model.dim(),
            cfg.dim
        )));
    }
    let started = Instant::now();
    let mut process = cfg.covariate_process();
    let mut covariate_rng = episode_rng(cfg.seed, replicate, StreamRole::Covariates);
    let mut reward_rng = episode_rng(cfg.seed, replicate, StreamRole::Rewards);
    let mut policy_rng = episode_rng(cfg.seed, replicate, StreamRole::Policy);

    let mut x = vec![0.0; cfg.dim];
    let mut cumulative = 0.0;
    let mut checkpoints = Vec::with_capacity(cfg.checkpoints.len());
    let mut next_checkpoint = 0;
    let mut decisions = cfg.record_decisions.then(Vec::new);

    for t in 1..=cfg.horizon {
        process.next_into(t, &mut covariate_rng, &mut x);
        let price = policy
            .decide(&x, &mut policy_rng)
            .map_err(|source| HarnessError::Policy { period: t, source })?;
        if !(0.0..=1.0).contains(&price) {
            return Err(HarnessError::PriceOutOfRange { period: t, price });
        }
        let feedback = model.sample(&x, price, &mut reward_rng);
        policy
            .observe(&x, price, &feedback)
            .map_err(|source| HarnessError::Policy { period: t, source })?;

        let regret = model.optimal_value(&x) - model.mean_reward(&x, price);
        cumulative += regret;
        if let Some(log) = decisions.as_mut() {
            log.push(DecisionRecord {
                t,
                x: x.clone(),
                price,
                reward: feedback.reward,
                regret,
            });
        }
        if cfg.checkpoints.get(next_checkpoint) == Some(&t) {
            checkpoints.push((t, cumulative));
            next_checkpoint += 1;
        }
    }

    Ok(EpisodeTrace {
        checkpoints,
        runtime: started.elapsed(),
        degenerate_redraws: process.degenerate_redraws(),
        decisions,
    })
}

/// Trains an adaptive-binning policy on one episode and returns its final
/// state alongside the trace.
pub fn train_abe(cfg: &RunConfig, replicate: u64) -> Result<(AbePolicy, EpisodeTrace), HarnessError> {
    cfg.validate()?;
    let model = cfg.reward_model();
    let mut runner = AbeRunner::new(AbePolicy::new(cfg.schedule()?));
    let trace = run_episode_with(cfg, replicate, &model, &mut runner)?;
    Ok((runner.into_policy(), trace))
}

/// Least-squares fit of `ln regret = slope · ln T + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual on the log scale.
    pub max_residual: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::InsufficientPoints(points.len()));
    }
    if let Some(&(t, r)) = points.iter().find(|(t, r)| !(*t > 0.0 && *r > 0.0)) {
        return Err(FitError::NonPositive(t, r));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(t, r)| (t.ln(), r.ln())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_residual = logs
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(LogLogFit {
        slope,
        intercept,
        max_residual,
    })
}

/// A regret-vs-horizon sweep over scenarios, policies and replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scenarios: Vec<Scenario>,
    /// Policies to run in every scenario; empty means each scenario's own
    /// policy.
    pub policies: Vec<PolicyKind>,
    pub horizons: Vec<u64>,
    pub dim: usize,
    pub seed: u64,
    pub replications: usize,
    /// `None` picks the scenario default.
    pub sigma: Option<f64>,
    pub m2: f64,
    pub c_delta: f64,
    pub checkpoints_per_episode: usize,
    pub ucb_exploration: f64,
    pub lb_bins_per_dim: usize,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![Scenario::Stationary],
            policies: Vec::new(),
            horizons: vec![10_000, 30_000, 100_000, 300_000, 1_000_000],
            dim: 2,
            seed: 42,
            replications: 5,
            sigma: None,
            m2: 0.5,
            c_delta: 1.0,
            checkpoints_per_episode: 20,
            ucb_exploration: 2.0,
            lb_bins_per_dim: 4,
            threads: None,
        }
    }
}

/// Sort key of one episode in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EpisodeKey {
    pub scenario: Scenario,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub replicate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub key: EpisodeKey,
    pub trace: EpisodeTrace,
}

/// Mean final regret over replicates for one `(scenario, policy, T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: Scenario,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub replicates: usize,
    pub mean_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SlopeOutcome {
    Fitted(LogLogFit),
    InsufficientPoints(usize),
    /// Some mean regret is zero, so no log-log fit exists.
    Undefined,
}

impl fmt::Display for SlopeOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlopeOutcome::Fitted(fit) => write!(f, "{:.4} (max residual {:.3})", fit.slope, fit.max_residual),
            SlopeOutcome::InsufficientPoints(n) => write!(f, "insufficient points ({n})"),
            SlopeOutcome::Undefined => f.write_str("undefined (zero regret)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub scenario: Scenario,
    pub policy: PolicyKind,
    pub outcome: SlopeOutcome,
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRow {
    pub scenario: Scenario,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub dim: usize,
    pub seed: u64,
    pub replicate: u64,
    pub checkpoint_t: u64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResults {
    pub config: SweepConfig,
    /// Sorted by [`EpisodeKey`].
    pub episodes: Vec<EpisodeResult>,
    pub summary: Vec<SummaryRow>,
    pub slopes: Vec<SlopeRow>,
}

impl SweepResults {
    /// One row per (episode, checkpoint), in episode-key then checkpoint order.
    pub fn rows(&self) -> Vec<OutputRow> {
        rows_for(&self.config, &self.episodes)
    }

    pub fn slope(&self, scenario: Scenario, policy: PolicyKind) -> Option<&SlopeOutcome> {
        self.slopes
            .iter()
            .find(|s| s.scenario == scenario && s.policy == policy)
            .map(|s| &s.outcome)
    }
}

fn rows_for(cfg: &SweepConfig, episodes: &[EpisodeResult]) -> Vec<OutputRow> {
    episodes
        .iter()
        .flat_map(|e| {
            e.trace.checkpoints.iter().map(move |&(t, r)| OutputRow {
                scenario: e.key.scenario,
                policy: e.key.policy,
                horizon: e.key.horizon,
                dim: cfg.dim,
                seed: cfg.seed,
                replicate: e.key.replicate,
                checkpoint_t: t,
                cum_regret: r,
            })
        })
        .collect()
}

#[derive(Debug, Error)]
#[error("episode {failed:?} failed: {source}")]
pub struct SweepError {
    pub failed: EpisodeKey,
    pub source: HarnessError,
    /// Episodes that completed, sorted.
    pub partial: Vec<EpisodeResult>,
}

impl SweepError {
    pub fn partial_rows(&self, cfg: &SweepConfig) -> Vec<OutputRow> {
        rows_for(cfg, &self.partial)
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.scenarios.is_empty() {
            return bad("no scenarios selected");
        }
        if self.horizons.is_empty() || self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return bad("horizons must be non-empty and strictly increasing");
        }
        if self.replications == 0 {
            return bad("replication count must be at least 1");
        }
        if self.checkpoints_per_episode == 0 {
            return bad("need at least one checkpoint per episode");
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma must be positive");
            }
        }
        if !(self.m2 > 0.0 && self.m2.is_finite()) || !(self.c_delta > 0.0 && self.c_delta.is_finite()) {
            return bad("m2 and c_delta must be positive");
        }
        for &sc in &self.scenarios {
            self.episode_config(sc, sc.default_policy(), self.horizons[0]).validate()?;
        }
        Ok(())
    }

    /// `(scenario, policy)` pairs the sweep runs.
    pub fn combinations(&self) -> Vec<(Scenario, PolicyKind)> {
        let mut out: Vec<_> = self
            .scenarios
            .iter()
            .flat_map(|&sc| {
                if self.policies.is_empty() {
                    vec![(sc, sc.default_policy())]
                } else {
                    self.policies.iter().map(|&p| (sc, p)).collect()
                }
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn episode_config(&self, scenario: Scenario, policy: PolicyKind, horizon: u64) -> RunConfig {
        RunConfig {
            scenario,
            policy,
            horizon,
            dim: self.dim,
            seed: self.seed,
            checkpoints: geometric_checkpoints(horizon, self.checkpoints_per_episode),
            constants: AbeConstants {
                sigma: self.sigma.unwrap_or(scenario.default_sigma()),
                m2: self.m2,
                c_delta: self.c_delta,
            },
            ucb_exploration: self.ucb_exploration,
            lb_bins_per_dim: self.lb_bins_per_dim,
            record_decisions: false,
        }
    }

    pub fn episode_keys(&self) -> Vec<EpisodeKey> {
        let mut keys = Vec::new();
        for (scenario, policy) in self.combinations() {
            for &horizon in &self.horizons {
                for replicate in 0..self.replications as u64 {
                    keys.push(EpisodeKey {
                        scenario,
                        policy,
                        horizon,
                        replicate,
                    });
                }
            }
        }
        keys
    }
}

/// Runs every episode of the sweep (in parallel), then aggregates mean final
/// regret per horizon and a log-log slope per `(scenario, policy)`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResults, SweepError> {
    let keys = cfg.episode_keys();
    if let Err(source) = cfg.validate() {
        return Err(SweepError {
            failed: keys.first().copied().unwrap_or(EpisodeKey {
                scenario: Scenario::Stationary,
                policy: PolicyKind::Abe,
                horizon: 0,
                replicate: 0,
            }),
            source,
            partial: Vec::new(),
        });
    }

    let run_all = || -> Vec<(EpisodeKey, Result<EpisodeTrace, HarnessError>)> {
        keys.par_iter()
            .map(|&key| {
                let run = cfg.episode_config(key.scenario, key.policy, key.horizon);
                (key, run_episode(&run, key.replicate))
            })
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run_all),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                run_all()
            }
        },
        None => run_all(),
    };

    let mut episodes = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for (key, outcome) in outcomes {
        match outcome {
            Ok(trace) => episodes.push(EpisodeResult { key, trace }),
            Err(source) => {
                if failure.as_ref().is_none_or(|(k, _)| key < *k) {
                    failure = Some((key, source));
                }
            }
        }
    }
    episodes.sort_by_key(|e| e.key);
    if let Some((failed, source)) = failure {
        return Err(SweepError {
            failed,
            source,
            partial: episodes,
        });
    }

    let mut summary = Vec::new();
    let mut slopes = Vec::new();
    for (scenario, policy) in cfg.combinations() {
        let mut points = Vec::new();
        for &horizon in &cfg.horizons {
            let finals: Vec<f64> = episodes
                .iter()
                .filter(|e| e.key.scenario == scenario && e.key.policy == policy && e.key.horizon == horizon)
                .map(|e| e.trace.final_regret())
                .collect();
            let mean_regret = finals.iter().sum::<f64>() / finals.len() as f64;
            points.push((horizon as f64, mean_regret));
            summary.push(SummaryRow {
                scenario,
                policy,
                horizon,
                replicates: finals.len(),
                mean_regret,
            });
        }
        let outcome = match fit_loglog_slope(&points) {
            Ok(fit) => SlopeOutcome::Fitted(fit),
            Err(FitError::InsufficientPoints(n)) => SlopeOutcome::InsufficientPoints(n),
            Err(_) => SlopeOutcome::Undefined,
        };
        slopes.push(SlopeRow {
            scenario,
            policy,
            outcome,
        });
    }

    Ok(SweepResults {
        config: cfg.clone(),
        episodes,
        summary,
        slopes,
    })
}
