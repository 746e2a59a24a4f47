//! Uniform decide/observe interface over every policy the harness can run.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::abe::{AbeError, AbePolicy, DecisionToken};
use crate::baselines::{Clairvoyant, FixedPrice, IlsState, StaticGrid, UcbToken};
use crate::environment::Feedback;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error("observe called without a preceding decision")]
    NoPendingDecision,
}

/// A pricing policy driven one period at a time. `observe` must follow each
/// `decide` before the next one.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn decide(&mut self, x: &[f64], rng: &mut dyn RngCore) -> Result<f64, PolicyError>;

    fn observe(&mut self, x: &[f64], price: f64, feedback: &Feedback) -> Result<(), PolicyError>;
}

/// Policy names accepted by run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Abe,
    Clairvoyant,
    StaticUcb,
    GreedyIls,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Abe,
        PolicyKind::Clairvoyant,
        PolicyKind::StaticUcb,
        PolicyKind::GreedyIls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Abe => "abe",
            PolicyKind::Clairvoyant => "clairvoyant",
            PolicyKind::StaticUcb => "static_ucb",
            PolicyKind::GreedyIls => "greedy_ils",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown policy {0:?} (expected abe, clairvoyant, static_ucb or greedy_ils)")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

/// Wraps [`AbePolicy`] so the token travels between `decide` and `observe`.
#[derive(Debug, Clone)]
pub struct AbeRunner {
    inner: AbePolicy,
    pending: Option<DecisionToken>,
}

impl AbeRunner {
    pub fn new(inner: AbePolicy) -> Self {
        Self {
            inner,
            pending: None,
        }
    }

    pub fn policy(&self) -> &AbePolicy {
        &self.inner
    }

    pub fn into_policy(self) -> AbePolicy {
        self.inner
    }
}

impl Policy for AbeRunner {
    fn name(&self) -> &'static str {
        "abe"
    }

    fn decide(&mut self, x: &[f64], _rng: &mut dyn RngCore) -> Result<f64, PolicyError> {
        let (price, token) = self.inner.decide(x)?;
        self.pending = Some(token);
        Ok(price)
    }

    fn observe(&mut self, _x: &[f64], _price: f64, feedback: &Feedback) -> Result<(), PolicyError> {
        let token = self.pending.take().ok_or(PolicyError::NoPendingDecision)?;
        self.inner.update(token, feedback.reward)?;
        Ok(())
    }
}

impl Policy for Clairvoyant {
    fn name(&self) -> &'static str {
        "clairvoyant"
    }

    fn decide(&mut self, x: &[f64], _rng: &mut dyn RngCore) -> Result<f64, PolicyError> {
        Ok(self.price(x))
    }

    fn observe(&mut self, _: &[f64], _: f64, _: &Feedback) -> Result<(), PolicyError> {
        Ok(())
    }
}

impl Policy for FixedPrice {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn decide(&mut self, _x: &[f64], _rng: &mut dyn RngCore) -> Result<f64, PolicyError> {
        Ok(self.price())
    }

    fn observe(&mut self, _: &[f64], _: f64, _: &Feedback) -> Result<(), PolicyError> {
        Ok(())
    }
}

/// [`StaticGrid`] with its pending arm.
#[derive(Debug, Clone)]
pub struct UcbRunner {
    grid: StaticGrid,
    pending: Option<UcbToken>,
}

impl UcbRunner {
    pub fn new(grid: StaticGrid) -> Self {
        Self { grid, pending: None }
    }

    pub fn grid(&self) -> &StaticGrid {
        &self.grid
    }
}

impl Policy for UcbRunner {
    fn name(&self) -> &'static str {
        "static_ucb"
    }

    fn decide(&mut self, x: &[f64], _rng: &mut dyn RngCore) -> Result<f64, PolicyError> {
        let (price, token) = self.grid.decide(x);
        self.pending = Some(token);
        Ok(price)
    }

    fn observe(&mut self, _x: &[f64], _price: f64, feedback: &Feedback) -> Result<(), PolicyError> {
        let token = self.pending.take().ok_or(PolicyError::NoPendingDecision)?;
        self.grid.update(token, feedback.reward);
        Ok(())
    }
}

impl Policy for IlsState {
    fn name(&self) -> &'static str {
        "greedy_ils"
    }

    fn decide(&mut self, x: &[f64], rng: &mut dyn RngCore) -> Result<f64, PolicyError> {
        Ok(IlsState::decide(self, x, rng))
    }

    fn observe(&mut self, x: &[f64], price: f64, feedback: &Feedback) -> Result<(), PolicyError> {
        // the demand observation is the purchase indicator when the model has one
        let outcome = match feedback.purchased {
            Some(bought) => f64::from(u8::from(bought)),
            None => feedback.reward,
        };
        self.update(x, price, outcome);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("ucb".parse::<PolicyKind>().is_err());
    }
}
