//! Dyadic partition of the covariate cube `[0, 1)^d`.
//!
//! Bins live in an arena; a split appends the `2^d` children contiguously so
//! a parent only needs the index of its first child. Child `i ∈ {0,1}^d` is
//! stored at offset `Σ_j i_j 2^j`, where `i_j = 1` selects the upper half of
//! dimension `j`.

use serde::Serialize;
use thiserror::Error;

use crate::decision_set::DecisionSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("covariate has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariate coordinate {index} = {value} is outside [0, 1)")]
    OutOfRange { index: usize, value: f64 },
    #[error("bin {0} is already split")]
    AlreadySplit(usize),
    #[error("bin {id} is at the maximal level {level} and cannot split")]
    AtMaxLevel { id: usize, level: u32 },
}

/// Index of a bin in a [`PartitionTree`].
pub type BinId = usize;

/// Half-open axis-aligned box `[lower_i, upper_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    lower: Vec<f64>,
    upper: Vec<f64>,
    level: u32,
}

impl Cell {
    pub fn root(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
            level: 0,
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&xi, (&lo, &hi))| lo <= xi && xi < hi)
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    /// Offset of the child that would contain `x`.
    pub fn child_offset(&self, x: &[f64]) -> usize {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .enumerate()
            .map(|(j, (&xi, (&lo, &hi)))| usize::from(xi >= 0.5 * (lo + hi)) << j)
            .sum()
    }

    /// The `2^d` children obtained by bisecting every dimension, in offset
    /// order.
    pub fn bisect(&self) -> Vec<Cell> {
        let dim = self.dim();
        (0..1usize << dim)
            .map(|offset| {
                let mut lower = self.lower.clone();
                let mut upper = self.upper.clone();
                for j in 0..dim {
                    let mid = 0.5 * (self.lower[j] + self.upper[j]);
                    if offset >> j & 1 == 1 {
                        lower[j] = mid;
                    } else {
                        upper[j] = mid;
                    }
                }
                Cell {
                    lower,
                    upper,
                    level: self.level + 1,
                }
            })
            .collect()
    }
}

/// What a bin applies when a covariate lands in it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Payload {
    Explore(DecisionSet),
    /// Level-`K` bins apply one price forever.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bin {
    cell: Cell,
    visits: u64,
    payload: Payload,
    first_child: Option<BinId>,
}

impl Bin {
    pub fn new(cell: Cell, payload: Payload) -> Self {
        Self {
            cell,
            visits: 0,
            payload,
            first_child: None,
        }
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn level(&self) -> u32 {
        self.cell.level
    }

    /// Covariates observed while this bin was a leaf.
    pub fn visits(&self) -> u64 {
        self.visits
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn is_leaf(&self) -> bool {
        self.first_child.is_none()
    }

    pub fn first_child(&self) -> Option<BinId> {
        self.first_child
    }

    pub(crate) fn visit(&mut self) -> u64 {
        self.visits += 1;
        self.visits
    }

    pub(crate) fn payload_mut(&mut self) -> &mut Payload {
        &mut self.payload
    }
}

/// The tree of every bin ever created. Its childless bins form the current
/// partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionTree {
    dim: usize,
    max_level: u32,
    bins: Vec<Bin>,
}

impl PartitionTree {
    pub const ROOT: BinId = 0;

    pub fn new(dim: usize, max_level: u32, root_payload: Payload) -> Self {
        Self {
            dim,
            max_level,
            bins: vec![Bin::new(Cell::root(dim), root_payload)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn bin(&self, id: BinId) -> &Bin {
        &self.bins[id]
    }

    pub(crate) fn bin_mut(&mut self, id: BinId) -> &mut Bin {
        &mut self.bins[id]
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (BinId, &Bin)> {
        self.bins.iter().enumerate().filter(|(_, b)| b.is_leaf())
    }

    pub fn check_covariate(&self, x: &[f64]) -> Result<(), PartitionError> {
        if x.len() != self.dim {
            return Err(PartitionError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        match x.iter().position(|v| !(0.0..1.0).contains(v)) {
            Some(index) => Err(PartitionError::OutOfRange {
                index,
                value: x[index],
            }),
            None => Ok(()),
        }
    }

    /// The leaf containing `x`, found by descending one level at a time.
    pub fn locate(&self, x: &[f64]) -> Result<BinId, PartitionError> {
        self.check_covariate(x)?;
        Ok(self.descend(Self::ROOT, x))
    }

    pub(crate) fn descend(&self, mut id: BinId, x: &[f64]) -> BinId {
        while let Some(first) = self.bins[id].first_child {
            id = first + self.bins[id].cell.child_offset(x);
        }
        id
    }

    /// Replaces leaf `id` by its `2^d` children, each given the payload
    /// returned by `payload_for`. Returns the id of the first child.
    pub fn split_bin(
        &mut self,
        id: BinId,
        mut payload_for: impl FnMut(&Cell) -> Payload,
    ) -> Result<BinId, PartitionError> {
        let bin = &self.bins[id];
        if !bin.is_leaf() {
            return Err(PartitionError::AlreadySplit(id));
        }
        if bin.level() >= self.max_level {
            return Err(PartitionError::AtMaxLevel {
                id,
                level: bin.level(),
            });
        }
        let first = self.bins.len();
        let children = bin.cell.bisect();
        for cell in children {
            let payload = payload_for(&cell);
            self.bins.push(Bin::new(cell, payload));
        }
        self.bins[id].first_child = Some(first);
        Ok(first)
    }
}
