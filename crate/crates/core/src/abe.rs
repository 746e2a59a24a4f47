//! Adaptive binning and exploration.
//!
//! Each leaf of the partition explores its decision set round-robin. When a
//! level-`k` leaf has seen `n_k` covariates it splits; every child gets a
//! decision set of width `Δ_{k+1}` centered on the parent's empirically best
//! price. Children at the maximal level `K` get a single fixed price, the
//! midpoint of that interval.
//!
//! A period that triggers a split is resolved on the child containing the
//! covariate, cascading through several levels if thresholds are already met,
//! so every call to [`AbePolicy::decide`] yields exactly one price.

use serde::Serialize;
use thiserror::Error;

use crate::decision_set::{make_decision_set, DecisionSet};
use crate::partition::{BinId, PartitionError, PartitionTree, Payload};
use crate::schedule::Schedule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbeError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("decision token {got} is stale or already consumed (next expected {expected:?})")]
    StaleToken { got: u64, expected: Option<u64> },
}

/// Identifies the statistic the next reward will update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecisionToken {
    serial: u64,
    target: TokenTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenTarget {
    Grid { bin: BinId, index: usize },
    Fixed { bin: BinId },
}

impl DecisionToken {
    pub fn target(&self) -> TokenTarget {
        self.target
    }

    pub fn bin(&self) -> BinId {
        match self.target {
            TokenTarget::Grid { bin, .. } | TokenTarget::Fixed { bin } => bin,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbePolicy {
    schedule: Schedule,
    tree: PartitionTree,
    issued: u64,
    pending: Option<u64>,
}

impl AbePolicy {
    pub fn new(schedule: Schedule) -> Self {
        let root_payload = if schedule.max_level() == 0 {
            Payload::Fixed(0.5)
        } else {
            Payload::Explore(DecisionSet::new(0.0, 1.0, schedule.grid_count(0)))
        };
        let tree = PartitionTree::new(schedule.dim(), schedule.max_level(), root_payload);
        Self {
            schedule,
            tree,
            issued: 0,
            pending: None,
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    /// Chooses the price for covariate `x` and counts the visit.
    ///
    /// Issuing a new token invalidates any token not yet passed to
    /// [`update`](Self::update).
    pub fn decide(&mut self, x: &[f64]) -> Result<(f64, DecisionToken), AbeError> {
        let mut id = self.tree.locate(x)?;
        let schedule = &self.schedule;
        let (price, target) = loop {
            let bin = self.tree.bin_mut(id);
            let level = bin.level();
            let visits = bin.visit();
            match bin.payload() {
                Payload::Fixed(price) => break (*price, TokenTarget::Fixed { bin: id }),
                Payload::Explore(ds) => {
                    if visits < schedule.split_threshold(level) {
                        let j = ((visits - 1) % ds.grid_count() as u64) as usize;
                        break (ds.grid_point(j), TokenTarget::Grid { bin: id, index: j });
                    }
                    let (_, best) = ds.empirical_argmax();
                    let first = split_with_inheritance(&mut self.tree, schedule, id, best)?;
                    id = first + self.tree.bin(id).cell().child_offset(x);
                }
            }
        };
        self.issued += 1;
        self.pending = Some(self.issued);
        Ok((
            price,
            DecisionToken {
                serial: self.issued,
                target,
            },
        ))
    }

    /// Records the reward observed for the decision identified by `token`.
    /// Fixed-price decisions carry no statistics.
    pub fn update(&mut self, token: DecisionToken, reward: f64) -> Result<(), AbeError> {
        if self.pending != Some(token.serial) {
            return Err(AbeError::StaleToken {
                got: token.serial,
                expected: self.pending,
            });
        }
        self.pending = None;
        if let TokenTarget::Grid { bin, index } = token.target {
            if let Payload::Explore(ds) = self.tree.bin_mut(bin).payload_mut() {
                ds.record(index, reward);
            }
        }
        Ok(())
    }

    /// Price the current state would apply at `x` with exploration switched
    /// off: the empirical argmax of `x`'s leaf, or its fixed price.
    pub fn greedy_price(&self, x: &[f64]) -> Result<f64, AbeError> {
        let id = self.tree.locate(x)?;
        Ok(match self.tree.bin(id).payload() {
            Payload::Fixed(p) => *p,
            Payload::Explore(ds) => ds.empirical_argmax().1,
        })
    }
}

fn split_with_inheritance(
    tree: &mut PartitionTree,
    schedule: &Schedule,
    id: BinId,
    center: f64,
) -> Result<BinId, PartitionError> {
    let child_level = tree.bin(id).level() + 1;
    let width = schedule.width(child_level);
    let grid = schedule.grid_count(child_level);
    let at_max = child_level == schedule.max_level();
    tree.split_bin(id, |_| {
        let ds = make_decision_set(center, width, grid);
        if at_max {
            Payload::Fixed(ds.midpoint())
        } else {
            Payload::Explore(ds)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::build_schedule;

    fn toy(thresholds: Vec<u64>, grid: usize, levels: usize) -> AbePolicy {
        let widths = (0..levels).map(|k| 0.5f64.powi(k as i32)).collect();
        AbePolicy::new(Schedule::custom(2, widths, thresholds, vec![grid; levels]).unwrap())
    }

    #[test]
    fn first_decision_is_grid_point_zero_of_root() {
        let mut abe = AbePolicy::new(build_schedule(1_000_000, 2, 0.125, 0.5).unwrap());
        let (price, token) = abe.decide(&[0.3, 0.6]).unwrap();
        assert_eq!(price, 0.0);
        assert_eq!(token.target(), TokenTarget::Grid { bin: 0, index: 0 });
        match abe.tree().bin(0).payload() {
            Payload::Explore(ds) => assert_eq!(ds.grid_count(), 14),
            _ => panic!("root must explore"),
        }
    }

    #[test]
    fn round_robin_index_is_visit_count_mod_grid() {
        let mut abe = toy(vec![100], 3, 2);
        let mut last = None;
        for _ in 0..5 {
            let (_, tok) = abe.decide(&[0.1, 0.1]).unwrap();
            abe.update(tok, 0.0).unwrap();
            last = Some(tok);
        }
        assert_eq!(abe.tree().bin(0).visits(), 5);
        assert_eq!(last.unwrap().target(), TokenTarget::Grid { bin: 0, index: 1 });
    }

    #[test]
    fn zero_threshold_splits_on_first_arrival() {
        let mut abe = toy(vec![0, 50], 3, 3);
        let (price, token) = abe.decide(&[0.7, 0.2]).unwrap();
        let root = abe.tree().bin(0);
        assert!(!root.is_leaf());
        let child = token.bin();
        assert_eq!(abe.tree().bin(child).cell().lower(), &[0.5, 0.0]);
        assert_eq!(abe.tree().bin(child).visits(), 1);
        // zero means inherit p_l = 0; width 0.5 centered at 0 clips to [0, 0.25]
        assert_eq!(price, 0.0);
        assert_eq!(token.target(), TokenTarget::Grid { bin: child, index: 0 });
    }

    #[test]
    fn cascade_reaches_fixed_level() {
        let mut abe = toy(vec![0, 0], 3, 3);
        let (price, token) = abe.decide(&[0.9, 0.9]).unwrap();
        assert!(matches!(token.target(), TokenTarget::Fixed { .. }));
        assert_eq!(abe.tree().bin(token.bin()).level(), 2);
        // level-2 interval is [0, 0.125]
        assert_eq!(price, 0.0625);
    }

    #[test]
    fn split_happens_on_threshold_arrival() {
        let mut abe = toy(vec![4, 100], 3, 3);
        for _ in 0..3 {
            let (_, tok) = abe.decide(&[0.1, 0.1]).unwrap();
            abe.update(tok, 0.0).unwrap();
            assert!(abe.tree().bin(0).is_leaf());
        }
        let (_, tok) = abe.decide(&[0.1, 0.1]).unwrap();
        assert!(!abe.tree().bin(0).is_leaf());
        assert_eq!(abe.tree().bin(0).visits(), 4);
        assert_ne!(tok.bin(), 0);
    }

    #[test]
    fn children_center_on_parent_argmax() {
        let mut abe = toy(vec![4, 100], 5, 3);
        // grid {0, 0.25, 0.5, 0.75, 1}; visits 1..3 explore the first three
        for _ in 0..3 {
            let (p, tok) = abe.decide(&[0.1, 0.1]).unwrap();
            abe.update(tok, if p == 0.5 { 1.0 } else { 0.2 }).unwrap();
        }
        let (_, tok) = abe.decide(&[0.6, 0.6]).unwrap();
        match abe.tree().bin(tok.bin()).payload() {
            Payload::Explore(ds) => {
                assert_eq!(ds.lower(), 0.25);
                assert_eq!(ds.upper(), 0.75);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn update_rules() {
        let mut abe = toy(vec![100], 2, 2);
        let (_, tok) = abe.decide(&[0.2, 0.2]).unwrap();
        abe.update(tok, 0.7).unwrap();
        assert_eq!(
            abe.update(tok, 0.7),
            Err(AbeError::StaleToken { got: 1, expected: None })
        );
        let (_, t2) = abe.decide(&[0.2, 0.2]).unwrap();
        let (_, t3) = abe.decide(&[0.2, 0.2]).unwrap();
        assert!(abe.update(t2, 0.1).is_err());
        abe.update(t3, 0.1).unwrap();
        match abe.tree().bin(0).payload() {
            Payload::Explore(ds) => {
                // visits 1 and 3 both land on index 0; visit 2 was never updated
                assert!((ds.means()[0] - 0.4).abs() < 1e-15);
                assert_eq!(ds.counts(), &[2, 0]);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn fixed_token_leaves_state_unchanged() {
        let mut abe = toy(vec![0], 2, 2);
        let (_, tok) = abe.decide(&[0.2, 0.2]).unwrap();
        assert!(matches!(tok.target(), TokenTarget::Fixed { .. }));
        let before = abe.tree().clone();
        abe.update(tok, 123.0).unwrap();
        assert_eq!(abe.tree(), &before);
    }

    #[test]
    fn level_zero_schedule_uses_midpoint() {
        let mut abe = AbePolicy::new(build_schedule(100, 3, 0.125, 0.5).unwrap());
        let (p, tok) = abe.decide(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(p, 0.5);
        assert!(matches!(tok.target(), TokenTarget::Fixed { bin: 0 }));
    }

    #[test]
    fn greedy_readout_of_untrained_state() {
        let abe = AbePolicy::new(build_schedule(10_000, 2, 0.125, 0.5).unwrap());
        assert_eq!(abe.greedy_price(&[0.4, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_covariate_is_rejected() {
        let mut abe = toy(vec![1], 2, 2);
        assert!(matches!(abe.decide(&[1.0, 0.0]), Err(AbeError::Partition(_))));
    }
}
