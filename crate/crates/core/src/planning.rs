//! Sufficient per-cell sample sizes.
//!
//! A cell is one (arm, leaf) pair. Every method splits the joint confidence
//! `1 - α` across `m` independent cell means, where `m = K` when the
//! guarantee concerns one random test point and `m = K·L` when it must hold
//! over every leaf at once. The per-cell miss rate is then
//! `α₀ = 1 - (1 - α)^(1/m)` and each method turns `α₀` into a minimum count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{bennett_h, normal_upper_quantile, Probability};

/// Absolute slack subtracted before taking a ceiling, so a raw bound that
/// lands on an integer up to rounding error does not gain a spurious +1.
pub const CEILING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuaranteeScope {
    /// Simultaneous over arms at a single random test point.
    RandomPoint,
    /// Simultaneous over arms and over every leaf.
    UniformOverLeaves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltVariant {
    /// `z = Φ⁻¹(1 - α₀/2)`, the two-sided per-cell interval.
    #[default]
    TwoSidedLemma,
    /// `z = Φ⁻¹((1 - α)^(1/m))`.
    OneSidedProposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    /// Normal approximation of each cell mean; needs `σ²`.
    Clt {
        #[serde(default)]
        variant: CltVariant,
    },
    /// Hoeffding's inequality; needs outcome bounds.
    Hoeffding,
    /// Bennett's inequality; needs outcome bounds and `σ²`.
    Bennett,
}

impl Method {
    pub fn clt() -> Self {
        Method::Clt {
            variant: CltVariant::TwoSidedLemma,
        }
    }

    fn needs_bounds(self) -> bool {
        matches!(self, Method::Hoeffding | Method::Bennett)
    }

    fn needs_variance(self) -> bool {
        matches!(self, Method::Clt { .. } | Method::Bennett)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Clt { .. } => "clt",
            Method::Hoeffding => "hoeffding",
            Method::Bennett => "bennett",
        }
    }
}

/// Almost-sure outcome range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBounds {
    pub lo: f64,
    pub hi: f64,
}

impl OutcomeBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("outcome bounds need finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(OutcomeBounds { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Everything a sample-size formula depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningSpec {
    pub arms: u32,
    pub leaves: u32,
    pub alpha: f64,
    /// Margin of error in outcome units (or in standard deviations when
    /// `sigma_sq = 1` is used as a standardized scale).
    pub epsilon: f64,
    #[serde(default)]
    pub bounds: Option<OutcomeBounds>,
    #[serde(default)]
    pub sigma_sq: Option<f64>,
    pub scope: GuaranteeScope,
    pub method: Method,
    /// Share of the experiment held out for honest estimation, `|S| / n`.
    pub honest_fraction: f64,
}

impl PlanningSpec {
    /// CLT spec with the two-sided variant, random-point scope and a 50%
    /// honest split.
    pub fn clt(arms: u32, leaves: u32, alpha: f64, epsilon: f64, sigma_sq: f64) -> Self {
        PlanningSpec {
            arms,
            leaves,
            alpha,
            epsilon,
            bounds: None,
            sigma_sq: Some(sigma_sq),
            scope: GuaranteeScope::RandomPoint,
            method: Method::clt(),
            honest_fraction: 0.5,
        }
    }

    pub fn hoeffding(arms: u32, leaves: u32, alpha: f64, epsilon: f64, lo: f64, hi: f64) -> Self {
        PlanningSpec {
            arms,
            leaves,
            alpha,
            epsilon,
            bounds: Some(OutcomeBounds { lo, hi }),
            sigma_sq: None,
            scope: GuaranteeScope::RandomPoint,
            method: Method::Hoeffding,
            honest_fraction: 0.5,
        }
    }

    pub fn bennett(
        arms: u32,
        leaves: u32,
        alpha: f64,
        epsilon: f64,
        lo: f64,
        hi: f64,
        sigma_sq: f64,
    ) -> Self {
        PlanningSpec {
            arms,
            leaves,
            alpha,
            epsilon,
            bounds: Some(OutcomeBounds { lo, hi }),
            sigma_sq: Some(sigma_sq),
            scope: GuaranteeScope::RandomPoint,
            method: Method::Bennett,
            honest_fraction: 0.5,
        }
    }

    pub fn with_scope(mut self, scope: GuaranteeScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_honest_fraction(mut self, honest_fraction: f64) -> Self {
        self.honest_fraction = honest_fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 {
            return Err(Error::Config("arms must be >= 1".into()));
        }
        if self.leaves == 0 {
            return Err(Error::Config("leaves must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.honest_fraction > 0.0 && self.honest_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "honest fraction must lie in (0, 1], got {}",
                self.honest_fraction
            )));
        }
        if let Some(b) = self.bounds {
            OutcomeBounds::new(b.lo, b.hi)?;
        }
        if let Some(s2) = self.sigma_sq {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(Error::Config(format!("sigma_sq must be > 0, got {s2}")));
            }
            if let Some(b) = self.bounds {
                let worst = b.width() * b.width() / 4.0;
                if s2 > worst {
                    return Err(Error::Config(format!(
                        "sigma_sq {s2} exceeds (hi - lo)^2 / 4 = {worst}"
                    )));
                }
            }
        }
        if self.method.needs_bounds() && self.bounds.is_none() {
            return Err(Error::Config(format!(
                "method {} requires outcome bounds (lo, hi)",
                self.method.name()
            )));
        }
        if self.method.needs_variance() && self.sigma_sq.is_none() {
            return Err(Error::Config(format!(
                "method {} requires a conditional variance bound sigma_sq",
                self.method.name()
            )));
        }
        Ok(())
    }

    /// Number of cell means the confidence is split across.
    pub fn groups(&self) -> f64 {
        match self.scope {
            GuaranteeScope::RandomPoint => self.arms as f64,
            GuaranteeScope::UniformOverLeaves => self.arms as f64 * self.leaves as f64,
        }
    }

    pub fn exponent(&self) -> f64 {
        1.0 / self.groups()
    }

    pub fn cells(&self) -> u64 {
        self.arms as u64 * self.leaves as u64
    }
}

/// Result of [`required_cell_size`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRequirement {
    /// Smallest admissible `min_{w,l} n_wl`.
    pub min_cell_size: u64,
    /// `ceil(K·L·min_cell_size / honest_fraction)`.
    pub total_experiment_size: u64,
    pub exponent_used: f64,
    /// The real-valued bound before the ceiling.
    pub raw_bound: f64,
}

/// Per-cell miss rate `1 - (1 - α)^(1/groups)`.
pub fn split_alpha(alpha: f64, groups: f64) -> Result<f64> {
    let a0 = -((-alpha).ln_1p() / groups).exp_m1();
    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(Error::Precision(format!(
            "per-cell miss rate underflows for alpha = {alpha} over {groups} cell means"
        )));
    }
    Ok(a0)
}

/// Inverse of [`split_alpha`]: joint confidence `(1 - α₀)^groups`.
pub fn joint_confidence(alpha0: f64, groups: f64) -> f64 {
    ((-alpha0).ln_1p() * groups).exp()
}

/// The selected method's real-valued lower bound on `min_{w,l} n_wl`.
pub fn raw_bound(spec: &PlanningSpec) -> Result<f64> {
    spec.validate()?;
    let a0 = split_alpha(spec.alpha, spec.groups())?;
    raw_bound_at(spec, a0, spec.epsilon)
}

/// Raw bound with the per-cell miss rate and margin supplied directly.
/// Callers must have validated `spec`'s assumptions.
pub(crate) fn raw_bound_at(spec: &PlanningSpec, alpha0: f64, epsilon: f64) -> Result<f64> {
    let raw = match spec.method {
        Method::Clt { variant } => {
            let sigma_sq = spec.sigma_sq.expect("validated");
            let tail = match variant {
                CltVariant::TwoSidedLemma => alpha0 / 2.0,
                CltVariant::OneSidedProposition => alpha0,
            };
            let z = normal_upper_quantile(tail)?.max(0.0);
            z * z * sigma_sq / (epsilon * epsilon)
        }
        Method::Hoeffding => {
            let b = spec.bounds.expect("validated");
            log_two_over(alpha0) * b.width() * b.width() / (2.0 * epsilon * epsilon)
        }
        Method::Bennett => {
            let b = spec.bounds.expect("validated");
            let sigma_sq = spec.sigma_sq.expect("validated");
            let m = b.max_abs();
            let s = epsilon * m / sigma_sq;
            log_two_over(alpha0) * m * m / (sigma_sq * bennett_h(s)?)
        }
    };
    if raw.is_nan() {
        return Err(Error::Precision("sample-size bound evaluated to NaN".into()));
    }
    Ok(raw)
}

fn log_two_over(alpha0: f64) -> f64 {
    std::f64::consts::LN_2 - alpha0.ln()
}

pub(crate) fn ceil_with_slack(x: f64) -> f64 {
    (x - CEILING_SLACK).ceil()
}

fn to_count(x: f64, what: &str) -> Result<u64> {
    // 2^53: beyond this the ceiling is no longer an exact integer
    if !(x.is_finite() && x <= 9_007_199_254_740_992.0) {
        return Err(Error::Precision(format!("{what} {x} is not representable as a count")));
    }
    Ok(x.max(1.0) as u64)
}

pub(crate) fn cell_size_from_raw(raw: f64) -> Result<u64> {
    to_count(ceil_with_slack(raw), "minimum cell size")
}

/// Smallest integer cell size meeting the spec's sufficient condition.
pub fn required_cell_size(spec: &PlanningSpec) -> Result<CellRequirement> {
    let raw = raw_bound(spec)?;
    let min_cell_size = cell_size_from_raw(raw)?;
    let total = spec.cells() as f64 * min_cell_size as f64 / spec.honest_fraction;
    let total_experiment_size = to_count(ceil_with_slack(total), "total experiment size")?;
    Ok(CellRequirement {
        min_cell_size,
        total_experiment_size,
        exponent_used: spec.exponent(),
        raw_bound: raw,
    })
}

/// Total experiment size for each confidence level in `confidence_grid`,
/// holding every other field of `template` fixed.
pub fn power_curve(template: &PlanningSpec, confidence_grid: &[Probability]) -> Result<Vec<(f64, u64)>> {
    confidence_grid
        .iter()
        .map(|c| {
            let c = c.value();
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Domain(format!("confidence {c} must lie in (0, 1)")));
            }
            let spec = PlanningSpec {
                alpha: 1.0 - c,
                ..*template
            };
            Ok((c, required_cell_size(&spec)?.total_experiment_size))
        })
        .collect()
}
