//! Fixtures shared by the benchmarks.

use abe_core::{build_schedule, AbePolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform covariates in `[0, 1)^dim`, flattened.
pub fn covariates(count: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count * dim).map(|_| rng.random()).collect()
}

/// A policy after `periods` rounds of linear-demand revenue feedback, so its
/// tree has grown past the root.
pub fn trained_policy(horizon: u64, periods: u64, seed: u64) -> AbePolicy {
    let mut abe = AbePolicy::new(build_schedule(horizon, 2, 0.125, 0.5).expect("valid schedule"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..periods {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let (p, token) = abe.decide(&x).expect("covariate in range");
        let reward = if rng.random::<f64>() < 1.0 - p { p } else { 0.0 };
        abe.update(token, reward).expect("fresh token");
    }
    abe
}
