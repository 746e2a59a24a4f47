//! Parameter schedule for the adaptive binning policy.
//!
//! For a horizon `T` and covariate dimension `d` the schedule fixes, per bin
//! level `k`:
//!
//! ```text
//! K     = floor(ln T / ((d + 4) ln 2))
//! Δ_k   = c_Δ · 2^(-k) · ln T
//! N_k   = ceil(ln T)
//! n_k   = max{0, ceil( 2^(4k+18) σ / (M₂² ln³T) · (ln T + ln ln T − (d+2) k ln 2) )}
//! ```
//!
//! All logarithms are natural. `n_k` is only defined for `k < K`; level-`K`
//! bins never split.

use serde::Serialize;
use thiserror::Error;

/// Smallest horizon accepted by [`build_schedule`]; guarantees `N_k >= 2`.
pub const MIN_HORIZON: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("horizon {0} is below the minimum of {MIN_HORIZON}")]
    HorizonTooShort(u64),
    #[error("covariate dimension must be at least 1")]
    ZeroDimension,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("inconsistent custom schedule: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    horizon: u64,
    dim: usize,
    sigma: f64,
    m2: f64,
    delta_scale: f64,
    max_level: u32,
    widths: Vec<f64>,
    split_thresholds: Vec<u64>,
    grid_counts: Vec<usize>,
}

/// Builds the default schedule (`c_Δ = 1`).
pub fn build_schedule(horizon: u64, dim: usize, sigma: f64, m2: f64) -> Result<Schedule, ScheduleError> {
    Schedule::build(horizon, dim, sigma, m2, 1.0)
}

impl Schedule {
    /// Builds a schedule with a multiplier `delta_scale` applied to every
    /// interval width `Δ_k`.
    pub fn build(
        horizon: u64,
        dim: usize,
        sigma: f64,
        m2: f64,
        delta_scale: f64,
    ) -> Result<Self, ScheduleError> {
        if horizon < MIN_HORIZON {
            return Err(ScheduleError::HorizonTooShort(horizon));
        }
        if dim == 0 {
            return Err(ScheduleError::ZeroDimension);
        }
        for (name, value) in [("sigma", sigma), ("m2", m2), ("c_delta", delta_scale)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScheduleError::NonPositive { name, value });
            }
        }

        let ln_t = (horizon as f64).ln();
        let ln2 = std::f64::consts::LN_2;
        let max_level = (ln_t / ((dim as f64 + 4.0) * ln2)).floor() as u32;
        let grid_count = ln_t.ceil() as usize;

        let widths = (0..=max_level)
            .map(|k| delta_scale * ln_t / f64::powi(2.0, k as i32))
            .collect();
        let grid_counts = vec![grid_count; max_level as usize + 1];

        // 2^(4k+18) overflows u64 quickly, so the whole expression stays in f64.
        let split_thresholds = (0..max_level)
            .map(|k| {
                let k = k as f64;
                let coef = f64::powf(2.0, 4.0 * k + 18.0) * sigma / (m2 * m2 * ln_t.powi(3));
                let inner = ln_t + ln_t.ln() - (dim as f64 + 2.0) * k * ln2;
                let raw = (coef * inner).ceil();
                if raw <= 0.0 {
                    0
                } else if raw >= horizon as f64 {
                    horizon
                } else {
                    raw as u64
                }
            })
            .collect();

        Ok(Self {
            horizon,
            dim,
            sigma,
            m2,
            delta_scale,
            max_level,
            widths,
            split_thresholds,
            grid_counts,
        })
    }

    /// Assembles a schedule from explicit tables, for small hand-checkable
    /// configurations. `widths` and `grid_counts` need `K + 1` entries and
    /// `split_thresholds` needs `K`.
    pub fn custom(
        dim: usize,
        widths: Vec<f64>,
        split_thresholds: Vec<u64>,
        grid_counts: Vec<usize>,
    ) -> Result<Self, ScheduleError> {
        if dim == 0 {
            return Err(ScheduleError::ZeroDimension);
        }
        if widths.is_empty() {
            return Err(ScheduleError::Inconsistent("need at least one level".into()));
        }
        let max_level = widths.len() - 1;
        if grid_counts.len() != widths.len() || split_thresholds.len() != max_level {
            return Err(ScheduleError::Inconsistent(format!(
                "{} widths, {} grid counts, {} thresholds",
                widths.len(),
                grid_counts.len(),
                split_thresholds.len()
            )));
        }
        if let Some(w) = widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(ScheduleError::NonPositive { name: "width", value: *w });
        }
        if grid_counts.iter().any(|&n| n < 2) {
            return Err(ScheduleError::Inconsistent("grid counts must be at least 2".into()));
        }
        Ok(Self {
            horizon: u64::MAX,
            dim,
            sigma: f64::NAN,
            m2: f64::NAN,
            delta_scale: 1.0,
            max_level: max_level as u32,
            widths,
            split_thresholds,
            grid_counts,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn delta_scale(&self) -> f64 {
        self.delta_scale
    }

    /// Maximal bin level `K`.
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Decision-interval width `Δ_k`, `k = 0..=K`.
    pub fn width(&self, level: u32) -> f64 {
        self.widths[level as usize]
    }

    /// Split threshold `n_k`, `k = 0..K`.
    pub fn split_threshold(&self, level: u32) -> u64 {
        self.split_thresholds[level as usize]
    }

    /// Grid size `N_k`, `k = 0..=K`.
    pub fn grid_count(&self, level: u32) -> usize {
        self.grid_counts[level as usize]
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn split_thresholds(&self) -> &[u64] {
        &self.split_thresholds
    }

    pub fn grid_counts(&self) -> &[usize] {
        &self.grid_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_halve_per_level() {
        let s = build_schedule(1_000_000, 2, 0.125, 0.5).unwrap();
        assert_eq!(s.width(1), s.width(0) / 2.0);
        assert_eq!(s.width(2), s.width(1) / 2.0);
        assert_eq!(s.width(0), (1e6f64).ln());
    }

    #[test]
    fn level_formula_is_exact_at_small_horizons() {
        // ln(100) / (7 ln 2) < 1
        let s = build_schedule(100, 3, 0.125, 0.5).unwrap();
        assert_eq!(s.max_level(), 0);
        assert!(s.split_thresholds().is_empty());
        assert_eq!(s.grid_counts(), &[5]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert_eq!(
            build_schedule(99, 2, 0.1, 0.5),
            Err(ScheduleError::HorizonTooShort(99))
        );
        assert_eq!(build_schedule(1000, 0, 0.1, 0.5), Err(ScheduleError::ZeroDimension));
        assert!(matches!(
            build_schedule(1000, 2, 0.0, 0.5),
            Err(ScheduleError::NonPositive { name: "sigma", .. })
        ));
        assert!(matches!(
            build_schedule(1000, 2, 0.1, -1.0),
            Err(ScheduleError::NonPositive { name: "m2", .. })
        ));
    }

    #[test]
    fn thresholds_are_capped_at_horizon() {
        // At T = 10^4 the level-1 formula exceeds the horizon.
        let s = build_schedule(10_000, 2, 0.125, 0.5).unwrap();
        assert_eq!(s.split_threshold(1), 10_000);
    }

    #[test]
    fn delta_scale_multiplies_every_width() {
        let base = build_schedule(100_000, 2, 0.125, 0.5).unwrap();
        let scaled = Schedule::build(100_000, 2, 0.125, 0.5, 0.05).unwrap();
        for k in 0..=base.max_level() {
            assert!((scaled.width(k) - 0.05 * base.width(k)).abs() < 1e-12);
        }
        assert_eq!(scaled.split_thresholds(), base.split_thresholds());
    }

    #[test]
    fn custom_schedule_validates_table_lengths() {
        assert!(Schedule::custom(2, vec![1.0, 0.5], vec![3], vec![3, 3]).is_ok());
        assert!(Schedule::custom(2, vec![1.0, 0.5], vec![], vec![3, 3]).is_err());
        assert!(Schedule::custom(2, vec![1.0], vec![], vec![1]).is_err());
    }
}
