//! Reward models and covariate processes.
//!
//! The pricing models place three community centers in `[0, 1)^2`, each with
//! a linear demand curve. A customer's purchase probability blends the
//! center demands by reciprocal `ℓ₁` distance (or copies the nearest center),
//! and the reward is the price on purchase, zero otherwise.
//!
//! The lower-bound class splits `[0, 1)^d` into `M^d` equal bins; bit `w_j`
//! switches bin `j` between `−p²` and `−p² + 2p·dist(x, ∂B_j)`. Rewards carry
//! unit-variance Gaussian noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Community centers and their demand curves `1 − p`, `1 − 2p`, `1 − p/2`.
pub const CENTERS: [[f64; 2]; 3] = [[0.2, 0.2], [0.2, 0.8], [0.8, 0.2]];
pub const CENTER_SLOPES: [f64; 3] = [1.0, 2.0, 0.5];

/// Observation revealed to a policy after it applies a decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feedback {
    pub reward: f64,
    /// Purchase indicator, for models whose reward is a sale at price `p`.
    pub purchased: Option<bool>,
}

fn l1_distances(x: &[f64]) -> [f64; 3] {
    CENTERS.map(|c| (x[0] - c[0]).abs() + (x[1] - c[1]).abs())
}

/// Reciprocal-distance blending weights, or `Err(i)` when `x` sits exactly
/// on center `i`.
fn blend_weights(x: &[f64]) -> Result<[f64; 3], usize> {
    let d = l1_distances(x);
    if let Some(i) = d.iter().position(|&di| di == 0.0) {
        return Err(i);
    }
    let inv = d.map(|di| 1.0 / di);
    let total: f64 = inv.iter().sum();
    Ok(inv.map(|v| v / total))
}

/// Blends three per-center values by reciprocal distance; at a center the
/// blend is that center's value.
fn blend(x: &[f64], values: [f64; 3]) -> f64 {
    match blend_weights(x) {
        Ok(w) => w.iter().zip(values).map(|(wi, v)| wi * v).sum(),
        Err(i) => values[i],
    }
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Purchase probability under the reciprocal-distance blend of the three
/// linear center demands.
pub fn weighted_demand(x: &[f64], p: f64) -> f64 {
    clamp_unit(blend(x, CENTER_SLOPES.map(|s| 1.0 - s * p)))
}

/// Index of the `ℓ₁`-closest center. Ties favour center 1, then center 2.
pub fn nearest_center(x: &[f64]) -> usize {
    let [d1, d2, d3] = l1_distances(x);
    if d1 <= d2 && d1 <= d3 {
        0
    } else if d2 < d1 && d2 <= d3 {
        1
    } else {
        2
    }
}

/// Purchase probability equal to the nearest center's demand.
pub fn nearest_center_demand(x: &[f64], p: f64) -> f64 {
    clamp_unit(1.0 - CENTER_SLOPES[nearest_center(x)] * p)
}

/// Blend of center demands `1 − p`, `0.5` and `0`.
pub fn boundary_demand(x: &[f64], p: f64) -> f64 {
    clamp_unit(blend(x, [1.0 - p, 0.5, 0.0]))
}

/// Distance from an interior point to the boundary of the box
/// `[lower, upper)`.
pub fn dist_to_boundary(x: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&xi, (&a, &b))| (xi - a).min(b - xi))
        .fold(f64::INFINITY, f64::min)
}

/// One member `f_w` of the localized lower-bound class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundClass {
    dim: usize,
    bins_per_dim: usize,
    bits: Vec<bool>,
}

impl LowerBoundClass {
    /// # Panics
    ///
    /// If `bits.len() != bins_per_dim^dim` or either size is zero.
    pub fn new(dim: usize, bins_per_dim: usize, bits: Vec<bool>) -> Self {
        assert!(dim > 0 && bins_per_dim > 0);
        assert_eq!(
            Some(bits.len()),
            bins_per_dim.checked_pow(dim as u32),
            "bit vector must have one entry per bin"
        );
        Self {
            dim,
            bins_per_dim,
            bits,
        }
    }

    /// Class member with independent fair-coin bits.
    pub fn random<R: Rng + ?Sized>(dim: usize, bins_per_dim: usize, rng: &mut R) -> Self {
        let n = bins_per_dim.pow(dim as u32);
        Self::new(dim, bins_per_dim, (0..n).map(|_| rng.random()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bins_per_dim(&self) -> usize {
        self.bins_per_dim
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn digits<'a>(&self, x: &'a [f64]) -> impl DoubleEndedIterator<Item = usize> + 'a {
        let m = self.bins_per_dim;
        x.iter()
            .map(move |&xi| ((xi * m as f64).floor() as usize).min(m - 1))
    }

    /// Mixed-radix bin number of `x`, first coordinate least significant.
    pub fn bin_index(&self, x: &[f64]) -> usize {
        let m = self.bins_per_dim;
        self.digits(x).rev().fold(0, |acc, k| acc * m + k)
    }

    /// Bounds `[lower, upper)` of the bin containing `x`.
    pub fn bin_bounds(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.bins_per_dim as f64;
        self.digits(x)
            .map(|k| (k as f64 / m, (k + 1) as f64 / m))
            .unzip()
    }

    fn active_distance(&self, x: &[f64]) -> Option<f64> {
        if self.bits[self.bin_index(x)] {
            let (lo, hi) = self.bin_bounds(x);
            Some(dist_to_boundary(x, &lo, &hi))
        } else {
            None
        }
    }

    pub fn mean_reward(&self, x: &[f64], p: f64) -> f64 {
        match self.active_distance(x) {
            Some(dist) => -p * p + 2.0 * p * dist,
            None => -p * p,
        }
    }

    pub fn optimal_price(&self, x: &[f64]) -> f64 {
        self.active_distance(x).unwrap_or(0.0)
    }
}

/// Mean-reward function `f(x, p)` together with its reward law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RewardModel {
    WeightedPricing,
    NearestCenterPricing,
    BoundaryPricing,
    LowerBound(LowerBoundClass),
}

impl RewardModel {
    pub fn dim(&self) -> usize {
        match self {
            RewardModel::LowerBound(c) => c.dim(),
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardModel::WeightedPricing => "weighted_pricing",
            RewardModel::NearestCenterPricing => "nearest_center_pricing",
            RewardModel::BoundaryPricing => "boundary_pricing",
            RewardModel::LowerBound(_) => "lower_bound",
        }
    }

    /// Purchase probability, for the pricing models.
    pub fn demand(&self, x: &[f64], p: f64) -> Option<f64> {
        match self {
            RewardModel::WeightedPricing => Some(weighted_demand(x, p)),
            RewardModel::NearestCenterPricing => Some(nearest_center_demand(x, p)),
            RewardModel::BoundaryPricing => Some(boundary_demand(x, p)),
            RewardModel::LowerBound(_) => None,
        }
    }

    pub fn mean_reward(&self, x: &[f64], p: f64) -> f64 {
        match self {
            RewardModel::LowerBound(c) => c.mean_reward(x, p),
            _ => p * self.demand(x, p).unwrap_or(0.0),
        }
    }

    /// Exact maximizer `p*(x)` of `f(x, ·)` over `[0, 1]`.
    pub fn optimal_price(&self, x: &[f64]) -> f64 {
        match self {
            RewardModel::WeightedPricing => {
                // demand is 1 − c·p with c the blended slope
                let c = blend(x, CENTER_SLOPES);
                (0.5 / c).min(1.0)
            }
            RewardModel::NearestCenterPricing => (0.5 / CENTER_SLOPES[nearest_center(x)]).min(1.0),
            RewardModel::BoundaryPricing => {
                // demand is a − b·p with a = w₁ + w₂/2, b = w₁
                let (a, b) = match blend_weights(x) {
                    Ok([w1, w2, _]) => (w1 + 0.5 * w2, w1),
                    Err(0) => (1.0, 1.0),
                    Err(1) => (0.5, 0.0),
                    Err(_) => (0.0, 0.0),
                };
                if b > 0.0 {
                    (0.5 * a / b).min(1.0)
                } else {
                    1.0
                }
            }
            RewardModel::LowerBound(c) => c.optimal_price(x),
        }
    }

    /// Optimal mean reward `f*(x) = f(x, p*(x))`.
    pub fn optimal_value(&self, x: &[f64]) -> f64 {
        self.mean_reward(x, self.optimal_price(x))
    }

    /// Draws a reward for decision `p` at covariate `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], p: f64, rng: &mut R) -> Feedback {
        match self {
            RewardModel::LowerBound(c) => {
                let noise: f64 = rng.sample(StandardNormal);
                Feedback {
                    reward: c.mean_reward(x, p) + noise,
                    purchased: None,
                }
            }
            _ => {
                let prob = self.demand(x, p).unwrap_or(0.0);
                let purchased = rng.random::<f64>() < prob;
                Feedback {
                    reward: if purchased { p } else { 0.0 },
                    purchased: Some(purchased),
                }
            }
        }
    }
}

/// Axis-aligned open rectangle used by the piecewise covariate process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rectangle {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Rectangle {
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..2).all(|i| self.lower[i] <= x[i] && x[i] < self.upper[i])
    }
}

/// Law of the covariates `X_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CovariateProcess {
    StationaryUniform { dim: usize },
    /// Every `epoch_len` periods a fresh rectangle is drawn and covariates are
    /// uniform on it until the next epoch.
    PiecewiseRectangles {
        epoch_len: u64,
        current: Option<Rectangle>,
        redraws: u64,
    },
}

impl CovariateProcess {
    pub fn uniform(dim: usize) -> Self {
        CovariateProcess::StationaryUniform { dim }
    }

    /// Ten epochs over `horizon` periods.
    pub fn piecewise(horizon: u64) -> Self {
        Self::with_epoch((horizon / 10).max(1))
    }

    pub fn with_epoch(epoch_len: u64) -> Self {
        CovariateProcess::PiecewiseRectangles {
            epoch_len: epoch_len.max(1),
            current: None,
            redraws: 0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovariateProcess::StationaryUniform { dim } => *dim,
            CovariateProcess::PiecewiseRectangles { .. } => 2,
        }
    }

    /// Current epoch's rectangle, if one has been drawn.
    pub fn rectangle(&self) -> Option<Rectangle> {
        match self {
            CovariateProcess::PiecewiseRectangles { current, .. } => *current,
            _ => None,
        }
    }

    /// Degenerate rectangles that had to be redrawn so far.
    pub fn degenerate_redraws(&self) -> u64 {
        match self {
            CovariateProcess::PiecewiseRectangles { redraws, .. } => *redraws,
            _ => 0,
        }
    }

    /// Covariate for period `t` (1-based), written into `out`.
    pub fn next_into<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R, out: &mut [f64]) {
        match self {
            CovariateProcess::StationaryUniform { .. } => {
                for v in out.iter_mut() {
                    *v = rng.random::<f64>();
                }
            }
            CovariateProcess::PiecewiseRectangles {
                epoch_len,
                current,
                redraws,
            } => {
                if current.is_none() || (t - 1).is_multiple_of(*epoch_len) {
                    *current = Some(draw_rectangle(rng, redraws));
                }
                let rect = current.as_ref().expect("rectangle drawn above");
                for (i, v) in out.iter_mut().enumerate() {
                    let u: f64 = rng.random();
                    let lo = rect.lower[i];
                    let hi = rect.upper[i];
                    // lo + u·(hi − lo) may round up to hi
                    *v = (lo + u * (hi - lo)).min(hi.next_down());
                }
            }
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.next_into(t, rng, &mut x);
        x
    }
}

fn draw_rectangle<R: Rng + ?Sized>(rng: &mut R, redraws: &mut u64) -> Rectangle {
    loop {
        let q: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        let rect = Rectangle {
            lower: [q[0].min(q[1]), q[2].min(q[3])],
            upper: [q[0].max(q[1]), q[2].max(q[3])],
        };
        if rect.lower[0] < rect.upper[0] && rect.lower[1] < rect.upper[1] {
            return rect;
        }
        *redraws += 1;
        log::warn!("degenerate covariate rectangle {rect:?} redrawn");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-12;

    /// Weighted demand from first principles: weights 1/d_i normalized.
    fn brute_weighted(x: [f64; 2], p: f64) -> f64 {
        let d: Vec<f64> = CENTERS
            .iter()
            .map(|c| (x[0] - c[0]).abs() + (x[1] - c[1]).abs())
            .collect();
        let g = [1.0 - p, 1.0 - 2.0 * p, 1.0 - p / 2.0];
        let num: f64 = (0..3).map(|i| g[i] / d[i]).sum();
        let den: f64 = d.iter().map(|di| 1.0 / di).sum();
        (num / den).max(0.0)
    }

    #[test]
    fn weighted_demand_examples() {
        assert!((weighted_demand(&[0.5, 0.5], 0.0) - 1.0).abs() < EPS);
        let want = brute_weighted([0.5, 0.5], 0.3);
        assert!((want - 0.65).abs() < EPS);
        assert!((weighted_demand(&[0.5, 0.5], 0.3) - want).abs() < EPS);
        assert!((weighted_demand(&[0.2, 0.2], 0.4) - 0.6).abs() < EPS);
        for x in [[0.1, 0.9], [0.7, 0.3], [0.33, 0.61]] {
            for p in [0.0, 0.25, 0.6, 0.95] {
                assert!((weighted_demand(&x, p) - brute_weighted(x, p)).abs() < EPS);
            }
        }
    }

    #[test]
    fn nearest_center_examples() {
        assert!((nearest_center_demand(&[0.21, 0.19], 0.5) - 0.5).abs() < EPS);
        assert!((nearest_center_demand(&[0.21, 0.79], 0.4) - 0.2).abs() < EPS);
        // equidistant from centers 1 and 2 goes to center 1
        assert_eq!(nearest_center(&[0.2, 0.5]), 0);
        // equidistant from centers 2 and 3 goes to center 2
        assert_eq!(nearest_center(&[0.8, 0.8]), 1);
    }

    #[test]
    fn boundary_demand_example() {
        assert!((boundary_demand(&[0.5, 0.5], 1.0) - 1.0 / 6.0).abs() < EPS);
        assert_eq!(boundary_demand(&[0.8, 0.2], 0.3), 0.0);
    }

    #[test]
    fn clairvoyant_examples() {
        let m = RewardModel::WeightedPricing;
        assert!((m.optimal_price(&[0.5, 0.5]) - 3.0 / 7.0).abs() < EPS);

        let m = RewardModel::NearestCenterPricing;
        assert_eq!(m.optimal_price(&[0.21, 0.19]), 0.5);
        assert!((m.optimal_value(&[0.21, 0.19]) - 0.25).abs() < EPS);
        assert_eq!(m.optimal_price(&[0.79, 0.22]), 1.0);

        let mut bits = vec![false; 4];
        bits[0] = true;
        let m = RewardModel::LowerBound(LowerBoundClass::new(2, 2, bits));
        assert_eq!(m.optimal_price(&[0.25, 0.25]), 0.25);
        assert!((m.optimal_value(&[0.25, 0.25]) - 0.0625).abs() < EPS);
        // inactive bin
        assert_eq!(m.optimal_price(&[0.75, 0.25]), 0.0);
    }

    #[test]
    fn boundary_maximizer_at_center_three_is_one() {
        let m = RewardModel::BoundaryPricing;
        assert_eq!(m.optimal_price(&[0.8, 0.2]), 1.0);
        assert_eq!(m.optimal_value(&[0.8, 0.2]), 0.0);
        assert_eq!(m.optimal_price(&[0.2, 0.2]), 0.5);
    }

    #[test]
    fn lower_bound_values() {
        let lb = LowerBoundClass::new(2, 2, vec![false; 4]);
        assert!((lb.mean_reward(&[0.1, 0.3], 0.3) + 0.09).abs() < EPS);

        let lb = LowerBoundClass::new(2, 2, vec![true, false, false, false]);
        assert_eq!(dist_to_boundary(&[0.25, 0.25], &[0.0, 0.0], &[0.5, 0.5]), 0.25);
        assert!((lb.mean_reward(&[0.25, 0.25], 0.25) - 0.0625).abs() < EPS);
        assert!((dist_to_boundary(&[0.1, 0.3], &[0.0, 0.0], &[0.5, 0.5]) - 0.1).abs() < EPS);
        assert!((lb.mean_reward(&[0.1, 0.3], 0.1) - 0.01).abs() < EPS);
    }

    #[test]
    fn lower_bound_bin_numbering() {
        let lb = LowerBoundClass::new(2, 4, vec![false; 16]);
        assert_eq!(lb.bin_index(&[0.0, 0.0]), 0);
        assert_eq!(lb.bin_index(&[0.3, 0.0]), 1);
        assert_eq!(lb.bin_index(&[0.0, 0.3]), 4);
        assert_eq!(lb.bin_index(&[0.99, 0.99]), 15);
        let (lo, hi) = lb.bin_bounds(&[0.3, 0.6]);
        assert_eq!((lo, hi), (vec![0.25, 0.5], vec![0.5, 0.75]));
    }

    #[test]
    fn degenerate_bernoulli_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = RewardModel::WeightedPricing;
        // center 1 demand 1 − p vanishes at p = 1
        for _ in 0..1000 {
            let fb = m.sample(&[0.2, 0.2], 1.0, &mut rng);
            assert_eq!(fb.reward, 0.0);
            assert_eq!(fb.purchased, Some(false));
        }
        let m = RewardModel::BoundaryPricing;
        for _ in 0..1000 {
            let fb = m.sample(&[0.2, 0.2], 0.0, &mut rng);
            assert_eq!(fb.purchased, Some(true));
        }
        let m = RewardModel::NearestCenterPricing;
        for _ in 0..1000 {
            // center 3 demand at p = 0 is 1
            let fb = m.sample(&[0.8, 0.2], 0.0, &mut rng);
            assert_eq!(fb.purchased, Some(true));
            assert_eq!(fb.reward, 0.0);
        }
    }

    #[test]
    fn bernoulli_concentration() {
        // d = 0.5 at center 1 with p = 0.5; 3σ of the mean of 10^5 draws is 0.0047
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = RewardModel::WeightedPricing;
        let n = 100_000;
        let total: f64 = (0..n).map(|_| m.sample(&[0.2, 0.2], 0.5, &mut rng).reward / 0.5).sum();
        assert!((total / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn uniform_covariates_have_mean_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut proc = CovariateProcess::uniform(2);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for t in 1..=n {
            let x = proc.next(t, &mut rng);
            assert!(x.iter().all(|v| (0.0..1.0).contains(v)));
            sum[0] += x[0];
            sum[1] += x[1];
        }
        for s in sum {
            assert!((s / n as f64 - 0.5).abs() < 0.005);
        }
    }

    #[test]
    fn piecewise_covariates_stay_in_epoch_rectangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rect = Rectangle {
            lower: [0.2, 0.6],
            upper: [0.4, 0.9],
        };
        let mut proc = CovariateProcess::PiecewiseRectangles {
            epoch_len: 100,
            current: Some(rect),
            redraws: 0,
        };
        for t in 2..=100 {
            let x = proc.next(t, &mut rng);
            assert!(rect.contains(&x), "{x:?}");
        }
        // t = 101 starts a new epoch
        proc.next(101, &mut rng);
        assert_ne!(proc.rectangle(), Some(rect));
        let fresh = proc.rectangle().unwrap();
        for t in 102..=200 {
            assert!(fresh.contains(&proc.next(t, &mut rng)));
        }
    }

    #[test]
    fn piecewise_epoch_length_is_a_tenth_of_horizon() {
        assert_eq!(
            CovariateProcess::piecewise(10_000),
            CovariateProcess::PiecewiseRectangles {
                epoch_len: 1000,
                current: None,
                redraws: 0
            }
        );
    }
}
