//! Equally spaced candidate decisions attached to a bin.

use serde::Serialize;

/// Grid of `grid_count` prices spanning `[lower, upper] ⊆ [0, 1]`, with a
/// running mean of observed rewards per grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionSet {
    lower: f64,
    upper: f64,
    step: f64,
    counts: Vec<u64>,
    means: Vec<f64>,
}

impl DecisionSet {
    /// # Panics
    ///
    /// If the interval is not inside `[0, 1]` or `grid_count < 2`.
    pub fn new(lower: f64, upper: f64, grid_count: usize) -> Self {
        assert!(
            (0.0..=1.0).contains(&lower) && (0.0..=1.0).contains(&upper) && lower <= upper,
            "decision interval [{lower}, {upper}] outside [0, 1]"
        );
        assert!(grid_count >= 2, "decision grid needs at least two points");
        Self {
            lower,
            upper,
            step: (upper - lower) / (grid_count - 1) as f64,
            counts: vec![0; grid_count],
            means: vec![0.0; grid_count],
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Price of grid point `j`, `p_l + j·δ`.
    pub fn grid_point(&self, j: usize) -> f64 {
        // p_l + (N-1)·δ can land one ulp past p_u
        (self.lower + j as f64 * self.step).min(self.upper)
    }

    pub fn grid_points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid_count()).map(|j| self.grid_point(j))
    }

    /// Folds `reward` into the running mean of grid point `j`.
    pub fn record(&mut self, j: usize, reward: f64) {
        let n = self.counts[j] as f64;
        self.means[j] = (n * self.means[j] + reward) / (n + 1.0);
        self.counts[j] += 1;
    }

    /// Smallest index maximizing the running mean, and its price.
    pub fn empirical_argmax(&self) -> (usize, f64) {
        let mut best = 0;
        for (j, &m) in self.means.iter().enumerate().skip(1) {
            if m > self.means[best] {
                best = j;
            }
        }
        (best, self.grid_point(best))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Decision set of width `width` centered on `center`, clipped to `[0, 1]`
/// before the grid spacing is computed.
pub fn make_decision_set(center: f64, width: f64, grid_count: usize) -> DecisionSet {
    let lower = (center - 0.5 * width).max(0.0);
    let upper = (center + 0.5 * width).min(1.0);
    DecisionSet::new(lower, upper, grid_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn centered_interval_and_grid() {
        let ds = make_decision_set(0.6, 0.3, 4);
        assert!(close(ds.lower(), 0.45));
        assert!(close(ds.upper(), 0.75));
        let pts: Vec<f64> = ds.grid_points().collect();
        for (p, want) in pts.iter().zip([0.45, 0.55, 0.65, 0.75]) {
            assert!(close(*p, want), "{pts:?}");
        }
        assert_eq!(ds.counts(), &[0, 0, 0, 0]);
    }

    #[test]
    fn upper_clip() {
        let ds = make_decision_set(0.9, 0.4, 2);
        assert!(close(ds.lower(), 0.7));
        assert_eq!(ds.upper(), 1.0);
    }

    #[test]
    fn both_clips_at_wide_widths() {
        let width = (1e6f64).ln();
        assert!((width - 13.8155).abs() < 1e-4);
        let ds = make_decision_set(0.5, width, 14);
        assert_eq!((ds.lower(), ds.upper()), (0.0, 1.0));
        assert_eq!(ds.step(), 1.0 / 13.0);
        assert_eq!(ds.grid_point(13), 1.0);
    }

    #[test]
    fn argmax_picks_largest_mean() {
        let mut ds = DecisionSet::new(0.0, 1.0, 3);
        ds.record(0, 0.1);
        ds.record(1, 0.4);
        ds.record(2, 0.3);
        assert_eq!(ds.empirical_argmax(), (1, 0.5));
    }

    #[test]
    fn argmax_ties_go_to_lowest_index() {
        let ds = make_decision_set(0.6, 0.3, 4);
        let (j, p) = ds.empirical_argmax();
        assert_eq!(j, 0);
        assert!(close(p, 0.45));

        let mut ds = DecisionSet::new(0.2, 0.8, 3);
        ds.record(0, 0.2);
        ds.record(1, 0.2);
        ds.record(2, 0.1);
        assert_eq!(ds.empirical_argmax(), (0, 0.2));
    }

    #[test]
    fn running_mean_recurrence() {
        let mut ds = DecisionSet::new(0.0, 1.0, 2);
        ds.record(1, 0.7);
        assert_eq!((ds.counts()[1], ds.means()[1]), (1, 0.7));

        let mut ds = DecisionSet::new(0.0, 1.0, 2);
        ds.record(0, 0.5);
        ds.record(0, 0.5);
        ds.record(0, 0.2);
        assert_eq!(ds.counts()[0], 3);
        assert!(close(ds.means()[0], 0.4));
    }

    #[test]
    #[should_panic]
    fn rejects_single_point_grid() {
        DecisionSet::new(0.0, 1.0, 1);
    }
}
