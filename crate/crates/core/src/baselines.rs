//! Comparison policies: the clairvoyant oracle, static binning with UCB1
//! inside each cell, and greedy iterated least squares on a linear demand
//! model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::environment::RewardModel;

/// Plays `p*(x)` every period.
#[derive(Debug, Clone)]
pub struct Clairvoyant {
    model: RewardModel,
}

impl Clairvoyant {
    pub fn new(model: RewardModel) -> Self {
        Self { model }
    }

    pub fn price(&self, x: &[f64]) -> f64 {
        self.model.optimal_price(x)
    }
}

/// Plays one price regardless of the covariate.
#[derive(Debug, Clone, Copy)]
pub struct FixedPrice(pub f64);

impl FixedPrice {
    pub fn price(&self) -> f64 {
        self.0
    }
}

/// `ceil(v)`, treating values within rounding noise of an integer as that
/// integer (`1e6^(1/6)` evaluates slightly above 10).
fn ceil_tolerant(v: f64) -> usize {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r as usize
    } else {
        v.ceil() as usize
    }
}

#[derive(Debug, Clone, Default, Serialize)]
struct UcbCell {
    counts: Vec<u64>,
    means: Vec<f64>,
    total: u64,
}

/// Arm pulled by [`StaticGrid::decide`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UcbToken {
    pub cell: usize,
    pub arm: usize,
}

/// `M_s^d` identical cells tiling `[0, 1)^d`, each running UCB1 over the same
/// equally spaced arms on `[0, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct StaticGrid {
    dim: usize,
    bins_per_dim: usize,
    arms: Vec<f64>,
    exploration: f64,
    cells: Vec<UcbCell>,
}

impl StaticGrid {
    /// Sizes the grid for horizon `T`: `ceil(T^(1/(d+4)))` bins per dimension
    /// and `ceil(ln T · T^(1/(d+4)))` arms.
    pub fn for_horizon(horizon: u64, dim: usize, exploration: f64) -> Self {
        let root = (horizon as f64).powf(1.0 / (dim as f64 + 4.0));
        let bins = ceil_tolerant(root).max(1);
        let arms = ceil_tolerant((horizon as f64).ln() * root).max(2);
        Self::new(dim, bins, arms, exploration)
    }

    pub fn new(dim: usize, bins_per_dim: usize, arm_count: usize, exploration: f64) -> Self {
        assert!(arm_count >= 2, "need at least two arms");
        let arms = (0..arm_count)
            .map(|j| j as f64 / (arm_count - 1) as f64)
            .collect();
        let cell_count = bins_per_dim.pow(dim as u32);
        Self {
            dim,
            bins_per_dim,
            arms,
            exploration,
            cells: vec![
                UcbCell {
                    counts: vec![0; arm_count],
                    means: vec![0.0; arm_count],
                    total: 0,
                };
                cell_count
            ],
        }
    }

    pub fn bins_per_dim(&self) -> usize {
        self.bins_per_dim
    }

    pub fn arms(&self) -> &[f64] {
        &self.arms
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Mixed-radix cell number, first coordinate least significant.
    pub fn cell_index(&self, x: &[f64]) -> usize {
        let m = self.bins_per_dim;
        x.iter().rev().fold(0, |acc, &xi| {
            acc * m + ((xi * m as f64).floor() as usize).min(m - 1)
        })
    }

    pub fn cell_counts(&self, cell: usize) -> &[u64] {
        &self.cells[cell].counts
    }

    /// Lowest-index unpulled arm in `x`'s cell, otherwise the UCB1 argmax
    /// `mean_j + sqrt(c · ln n_cell / n_j)` with ties to the lowest index.
    pub fn decide(&self, x: &[f64]) -> (f64, UcbToken) {
        debug_assert_eq!(x.len(), self.dim);
        let cell = self.cell_index(x);
        let arm = ucb_arm(&self.cells[cell], self.exploration);
        (self.arms[arm], UcbToken { cell, arm })
    }

    pub fn update(&mut self, token: UcbToken, reward: f64) {
        let cell = &mut self.cells[token.cell];
        let n = cell.counts[token.arm] as f64;
        cell.means[token.arm] = (n * cell.means[token.arm] + reward) / (n + 1.0);
        cell.counts[token.arm] += 1;
        cell.total += 1;
    }
}

fn ucb_arm(cell: &UcbCell, exploration: f64) -> usize {
    if let Some(j) = cell.counts.iter().position(|&c| c == 0) {
        return j;
    }
    let log_n = (cell.total as f64).ln();
    let mut best = 0;
    let mut best_index = f64::NEG_INFINITY;
    for (j, (&n, &m)) in cell.counts.iter().zip(&cell.means).enumerate() {
        let index = m + (exploration * log_n / n as f64).sqrt();
        if index > best_index {
            best = j;
            best_index = index;
        }
    }
    best
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("expected a {k}x{k} system, got {entries} matrix entries and {rhs} right-hand sides")]
    Shape { k: usize, entries: usize, rhs: usize },
    #[error("system contains non-finite entries")]
    NonFinite,
    #[error("system is singular")]
    Singular,
}

/// Solves `(gram + ridge·I) β = moment` for a row-major `k×k` `gram`.
pub fn solve_normal_equations(gram: &[f64], moment: &[f64], ridge: f64) -> Result<Vec<f64>, SolveError> {
    let k = moment.len();
    if gram.len() != k * k || k == 0 {
        return Err(SolveError::Shape {
            k,
            entries: gram.len(),
            rhs: moment.len(),
        });
    }
    if !ridge.is_finite() || gram.iter().chain(moment).any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    let a = DMatrix::from_row_slice(k, k, gram) + DMatrix::identity(k, k) * ridge;
    let b = DVector::from_column_slice(moment);
    let beta = a.lu().solve(&b).ok_or(SolveError::Singular)?;
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Singular);
    }
    Ok(beta.iter().copied().collect())
}

/// Fitted linear demand `a − b·p + c·x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearDemandFit {
    pub intercept: f64,
    pub price_slope: f64,
    pub covariate_slopes: Vec<f64>,
}

impl LinearDemandFit {
    /// Revenue-maximizing price under the fitted model, clipped to `[0, 1]`.
    /// A non-positive price slope makes revenue increasing in `p`.
    pub fn price(&self, x: &[f64]) -> f64 {
        if self.price_slope <= 0.0 {
            return 1.0;
        }
        let shift: f64 = self.covariate_slopes.iter().zip(x).map(|(c, xi)| c * xi).sum();
        ((self.intercept + shift) / (2.0 * self.price_slope)).clamp(0.0, 1.0)
    }
}

/// Greedy iterated least squares: regress observed demand on `(1, p, x)`,
/// then price at the maximizer of the fitted revenue.
#[derive(Debug, Clone, Serialize)]
pub struct IlsState {
    dim: usize,
    gram: Vec<f64>,
    moment: Vec<f64>,
    observations: u64,
    warmup: u64,
    ridge: f64,
    singular_solves: u64,
}

impl IlsState {
    pub const DEFAULT_WARMUP: u64 = 10;
    pub const DEFAULT_RIDGE: f64 = 1e-8;

    pub fn new(dim: usize, warmup: u64, ridge: f64) -> Self {
        let k = dim + 2;
        Self {
            dim,
            gram: vec![0.0; k * k],
            moment: vec![0.0; k],
            observations: 0,
            warmup,
            ridge,
            singular_solves: 0,
        }
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, Self::DEFAULT_WARMUP, Self::DEFAULT_RIDGE)
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn singular_solves(&self) -> u64 {
        self.singular_solves
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn moment(&self) -> &[f64] {
        &self.moment
    }

    fn regressors(&self, x: &[f64], p: f64) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim + 2);
        z.push(1.0);
        z.push(p);
        z.extend_from_slice(x);
        z
    }

    pub fn fit(&self) -> Result<LinearDemandFit, SolveError> {
        let beta = solve_normal_equations(&self.gram, &self.moment, self.ridge)?;
        Ok(LinearDemandFit {
            intercept: beta[0],
            price_slope: -beta[1],
            covariate_slopes: beta[2..].to_vec(),
        })
    }

    /// Uniform random price during warmup, greedy fitted price afterwards.
    pub fn decide(&mut self, x: &[f64], rng: &mut dyn RngCore) -> f64 {
        if self.observations >= self.warmup {
            match self.fit() {
                Ok(fit) => return fit.price(x),
                Err(e) => {
                    self.singular_solves += 1;
                    log::debug!("least squares failed after {} observations: {e}", self.observations);
                }
            }
        }
        rng.random::<f64>()
    }

    /// Adds one `(x, p, demand)` observation to the normal equations.
    pub fn update(&mut self, x: &[f64], p: f64, outcome: f64) {
        let z = self.regressors(x, p);
        let k = z.len();
        for i in 0..k {
            self.moment[i] += z[i] * outcome;
            for j in 0..k {
                self.gram[i * k + j] += z[i] * z[j];
            }
        }
        self.observations += 1;
    }
}
