//! Upper bounds on the conditional outcome variance from domain knowledge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knowledge that the outcome rarely leaves a fixed value: in every cell,
/// `P(Y != anchor) <= rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RareDeviationKnowledge {
    pub anchor: f64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RareDeviationKnowledge {
    pub fn validate(&self) -> Result<()> {
        check_interval(self.lo, self.hi)?;
        check_rate(self.rate)?;
        if !(self.lo <= self.anchor && self.anchor <= self.hi) {
            return Err(Error::Domain(format!(
                "anchor {} outside [{}, {}]",
                self.anchor, self.lo, self.hi
            )));
        }
        Ok(())
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

// t(1 - t) is only monotone on [0, 1/2]
fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&rate) {
        return Err(Error::Domain(format!("deviation rate must lie in [0, 0.5], got {rate}")));
    }
    Ok(())
}

/// `(b - a)² / 4`, attained by a two-point law on `{a, b}`.
pub fn worst_case_variance(lo: f64, hi: f64) -> Result<f64> {
    check_interval(lo, hi)?;
    Ok((hi - lo) * (hi - lo) / 4.0)
}

/// `p(b-a)²/4 + p(1-p)·max{(a-y*)², (b-y*)²}`, capped at the worst case.
pub fn rare_deviation_variance(k: &RareDeviationKnowledge) -> Result<f64> {
    k.validate()?;
    let p = k.rate;
    let spread = (k.hi - k.lo) * (k.hi - k.lo) / 4.0;
    let reach = (k.lo - k.anchor).powi(2).max((k.hi - k.anchor).powi(2));
    let bound = p * spread + p * (1.0 - p) * reach;
    Ok(bound.min(spread))
}

/// `p(1 - p)` for a `{0, 1}` outcome whose rarer value has rate at most `p`.
pub fn binary_outcome_variance(rate: f64) -> Result<f64> {
    check_rate(rate)?;
    Ok(rate * (1.0 - rate))
}
