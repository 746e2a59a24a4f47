//! Structural audit of an adaptive-binning state, written against the public
//! tree accessors only.

use abe_core::decision_set::make_decision_set;
use abe_core::partition::{Cell, Payload};
use abe_core::AbePolicy;

/// Returns every violated invariant, one message each.
pub fn audit(policy: &AbePolicy) -> Vec<String> {
    let mut issues = Vec::new();
    let schedule = policy.schedule();
    let tree = policy.tree();
    let k_max = schedule.max_level();

    let volume: f64 = tree.leaves().map(|(_, b)| b.cell().volume()).sum();
    if volume != 1.0 {
        issues.push(format!("leaf volumes sum to {volume}"));
    }

    for id in 0..tree.len() {
        let bin = tree.bin(id);
        let level = bin.level();
        let side = 0.5f64.powi(level as i32);
        for (lo, hi) in bin.cell().lower().iter().zip(bin.cell().upper()) {
            if hi - lo != side {
                issues.push(format!("bin {id} side {} at level {level}", hi - lo));
            }
        }
        if level > k_max {
            issues.push(format!("bin {id} at level {level} > K = {k_max}"));
        }
        match bin.payload() {
            Payload::Explore(ds) => {
                if level == k_max {
                    issues.push(format!("level-K bin {id} explores"));
                }
                let lo = ds.counts().iter().min().copied().unwrap_or(0);
                let hi = ds.counts().iter().max().copied().unwrap_or(0);
                if bin.is_leaf() && hi - lo > 1 {
                    issues.push(format!("bin {id} round-robin counts {:?}", ds.counts()));
                }
                if ds.grid_points().any(|p| !(0.0..=1.0).contains(&p)) {
                    issues.push(format!("bin {id} grid leaves [0, 1]"));
                }
            }
            Payload::Fixed(p) => {
                if level != k_max {
                    issues.push(format!("bin {id} fixed below level K"));
                }
                if !(0.0..=1.0).contains(p) {
                    issues.push(format!("bin {id} fixed price {p}"));
                }
                if !bin.is_leaf() {
                    issues.push(format!("level-K bin {id} split"));
                }
            }
        }

        if level < k_max {
            let threshold = schedule.split_threshold(level);
            if bin.is_leaf() && threshold > 0 && bin.visits() >= threshold {
                issues.push(format!("leaf {id} has {} visits, threshold {threshold}", bin.visits()));
            }
            if !bin.is_leaf() && bin.visits() != threshold.max(1) {
                issues.push(format!("bin {id} split after {} visits, threshold {threshold}", bin.visits()));
            }
        }

        if let Some(first) = bin.first_child() {
            let expected: Vec<Cell> = bin.cell().bisect();
            let Payload::Explore(parent) = bin.payload() else {
                issues.push(format!("fixed bin {id} has children"));
                continue;
            };
            let (_, best) = parent.empirical_argmax();
            let width = schedule.width(level + 1);
            let inherited = make_decision_set(best, width, schedule.grid_count(level + 1));
            for (offset, cell) in expected.iter().enumerate() {
                let child = tree.bin(first + offset);
                if child.cell() != cell {
                    issues.push(format!("child {offset} of {id} has wrong bounds"));
                }
                match child.payload() {
                    Payload::Explore(ds) => {
                        if ds.lower() != inherited.lower() || ds.upper() != inherited.upper() {
                            issues.push(format!("child {offset} of {id} not centered on {best}"));
                        }
                        if ds.upper() - ds.lower() > width * (1.0 + 1e-12) {
                            issues.push(format!("child {offset} of {id} wider than {width}"));
                        }
                    }
                    Payload::Fixed(p) => {
                        if *p != inherited.midpoint() {
                            issues.push(format!("fixed child {offset} of {id} price {p}"));
                        }
                    }
                }
            }
        }
    }
    issues
}
