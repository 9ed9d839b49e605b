//! Inverting a fixed honest-set budget into one free design parameter.
//!
//! With an honest budget `n_S` split evenly over the `K·L` cells, the cell
//! budget is `floor(n_S / (K·L))`, and a design is feasible when the
//! planned minimum cell size fits inside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{bisect_bracket, normal_sf, BracketedRoot};
use crate::planning::{
    cell_size_from_raw, joint_confidence, raw_bound, raw_bound_at, split_alpha, CltVariant,
    GuaranteeScope, Method, PlanningSpec, CEILING_SLACK,
};

/// Upper limit for the arm and leaf scans.
pub const SEARCH_CAP: u64 = 10_000;
/// Confidence is never reported above `1 - CONFIDENCE_CLAMP`.
pub const CONFIDENCE_CLAMP: f64 = 1e-12;
pub const CONFIDENCE_TOLERANCE: f64 = 1e-8;
pub const EPSILON_TOLERANCE: f64 = 1e-10;
const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    /// Size of the honest estimation set, `n_S`.
    pub honest_budget: u64,
    /// All design fields; the one being solved for is ignored.
    pub base: PlanningSpec,
}

impl BudgetSpec {
    pub fn new(honest_budget: u64, base: PlanningSpec) -> Self {
        BudgetSpec { honest_budget, base }
    }

    fn cell_budget(&self, arms: u64, leaves: u64) -> u64 {
        self.honest_budget / (arms * leaves)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolvedValue {
    Count(u64),
    Real(f64),
}

impl SolvedValue {
    pub fn as_f64(self) -> f64 {
        match self {
            SolvedValue::Count(c) => c as f64,
            SolvedValue::Real(x) => x,
        }
    }
}

impl std::fmt::Display for SolvedValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolvedValue::Count(c) => write!(f, "{c}"),
            SolvedValue::Real(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub solved_value: SolvedValue,
    pub feasible: bool,
    /// Raw sample-size bound `g(...)` at the solved value (or at the
    /// boundary that proved infeasible).
    pub binding_bound: f64,
}

fn fits(spec: &PlanningSpec, cell_budget: u64) -> Result<(bool, f64)> {
    let raw = raw_bound(spec)?;
    let need = cell_size_from_raw(raw)?;
    Ok((cell_budget >= 1 && cell_budget >= need, raw))
}

/// Largest number of arms the budget supports.
pub fn max_arms(budget: &BudgetSpec) -> Result<InversionResult> {
    let leaves = budget.base.leaves as u64;
    let mut best: Option<(u64, f64)> = None;
    let mut first_raw = f64::NAN;
    for arms in 1..=SEARCH_CAP {
        let spec = PlanningSpec {
            arms: arms as u32,
            ..budget.base
        };
        let (ok, raw) = fits(&spec, budget.cell_budget(arms, leaves))?;
        if arms == 1 {
            first_raw = raw;
        }
        if !ok {
            break;
        }
        if arms == SEARCH_CAP {
            return Err(Error::SearchLimit(format!("more than {SEARCH_CAP} arms fit the budget")));
        }
        best = Some((arms, raw));
    }
    Ok(match best {
        Some((arms, raw)) => InversionResult {
            solved_value: SolvedValue::Count(arms),
            feasible: true,
            binding_bound: raw,
        },
        None => InversionResult {
            solved_value: SolvedValue::Count(0),
            feasible: false,
            binding_bound: first_raw,
        },
    })
}

/// Largest number of leaves the budget supports.
pub fn max_leaves(budget: &BudgetSpec) -> Result<InversionResult> {
    let arms = budget.base.arms as u64;
    match budget.base.scope {
        GuaranteeScope::RandomPoint => {
            // the cell requirement does not depend on L here
            let spec = PlanningSpec {
                leaves: 1,
                ..budget.base
            };
            let raw = raw_bound(&spec)?;
            let need = cell_size_from_raw(raw)?;
            let leaves = budget.honest_budget / (arms * need);
            Ok(InversionResult {
                solved_value: SolvedValue::Count(leaves),
                feasible: leaves >= 1,
                binding_bound: raw,
            })
        }
        GuaranteeScope::UniformOverLeaves => {
            let mut best: Option<(u64, f64)> = None;
            let mut first_raw = f64::NAN;
            for leaves in 1..=SEARCH_CAP {
                let spec = PlanningSpec {
                    leaves: leaves as u32,
                    ..budget.base
                };
                let (ok, raw) = fits(&spec, budget.cell_budget(arms, leaves))?;
                if leaves == 1 {
                    first_raw = raw;
                }
                if !ok {
                    break;
                }
                if leaves == SEARCH_CAP {
                    return Err(Error::SearchLimit(format!(
                        "more than {SEARCH_CAP} leaves fit the budget"
                    )));
                }
                best = Some((leaves, raw));
            }
            Ok(match best {
                Some((leaves, raw)) => InversionResult {
                    solved_value: SolvedValue::Count(leaves),
                    feasible: true,
                    binding_bound: raw,
                },
                None => InversionResult {
                    solved_value: SolvedValue::Count(0),
                    feasible: false,
                    binding_bound: first_raw,
                },
            })
        }
    }
}

/// Validates every field except `alpha`, which the caller is solving for.
fn validate_without_alpha(base: &PlanningSpec) -> Result<()> {
    PlanningSpec { alpha: 0.5, ..*base }.validate()
}

fn validate_without_epsilon(base: &PlanningSpec) -> Result<()> {
    PlanningSpec { epsilon: 1.0, ..*base }.validate()
}

fn confidence_fits(base: &PlanningSpec, confidence: f64, cell_budget: u64) -> Result<bool> {
    let spec = PlanningSpec {
        alpha: 1.0 - confidence,
        ..*base
    };
    Ok(fits(&spec, cell_budget)?.0)
}

/// Largest per-cell miss rate whose bound still fits `n` observations, from
/// the tail bound each method is built on. `None` when even `α₀ → 1` fails.
fn per_cell_miss_rate(base: &PlanningSpec, n: f64) -> f64 {
    let eps = base.epsilon;
    match base.method {
        Method::Clt { variant } => {
            let t = eps * n.sqrt() / base.sigma_sq.expect("validated").sqrt();
            match variant {
                CltVariant::TwoSidedLemma => 2.0 * normal_sf(t),
                CltVariant::OneSidedProposition => normal_sf(t),
            }
        }
        Method::Hoeffding => {
            let w = base.bounds.expect("validated").width();
            2.0 * (-2.0 * n * eps * eps / (w * w)).exp()
        }
        Method::Bennett => {
            let b = base.bounds.expect("validated");
            let s2 = base.sigma_sq.expect("validated");
            let m = b.max_abs();
            let s = eps * m / s2;
            let h = (1.0 + s) * s.ln_1p() - s;
            2.0 * (-n * s2 * h / (m * m)).exp()
        }
    }
}

/// Supremum joint confidence `1 - α` the budget supports, rounded down.
pub fn sup_confidence(budget: &BudgetSpec) -> Result<InversionResult> {
    let base = budget.base;
    validate_without_alpha(&base)?;
    let n = budget.cell_budget(base.arms as u64, base.leaves as u64);
    let groups = base.groups();
    let infeasible = |base: &PlanningSpec| -> Result<InversionResult> {
        let near_one = PlanningSpec {
            alpha: 1.0 - CONFIDENCE_CLAMP,
            ..*base
        };
        Ok(InversionResult {
            solved_value: SolvedValue::Real(0.0),
            feasible: false,
            binding_bound: raw_bound(&near_one)?,
        })
    };
    if n == 0 {
        return infeasible(&base);
    }
    let alpha0 = per_cell_miss_rate(&base, n as f64);
    if !(alpha0 < 1.0) {
        return infeasible(&base);
    }
    let mut confidence = joint_confidence(alpha0, groups).min(1.0 - CONFIDENCE_CLAMP);
    // step to the feasible side of the rounding error
    let mut step = 1e-15;
    let mut tries = 0;
    while !(confidence >= CONFIDENCE_CLAMP && confidence_fits(&base, confidence, n)?) {
        if confidence < CONFIDENCE_CLAMP {
            return infeasible(&base);
        }
        confidence -= step;
        step *= 2.0;
        tries += 1;
        if tries > 60 {
            return sup_confidence_by_bisection(budget);
        }
    }
    let spec = PlanningSpec {
        alpha: 1.0 - confidence,
        ..base
    };
    Ok(InversionResult {
        solved_value: SolvedValue::Real(confidence),
        feasible: true,
        binding_bound: raw_bound(&spec)?,
    })
}

/// Same problem as [`sup_confidence`], solved by bisection on `α` over
/// `(1e-12, 1 - 1e-12)` instead of the tail-bound closed form.
pub fn sup_confidence_by_bisection(budget: &BudgetSpec) -> Result<InversionResult> {
    let base = budget.base;
    validate_without_alpha(&base)?;
    let n = budget.cell_budget(base.arms as u64, base.leaves as u64);
    let excess = |alpha: f64| -> f64 {
        let spec = PlanningSpec { alpha, ..base };
        match raw_bound(&spec) {
            Ok(raw) => raw - CEILING_SLACK - n as f64,
            Err(_) => f64::INFINITY,
        }
    };
    let (lo, hi) = (CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP);
    let at = |alpha: f64| -> Result<f64> { raw_bound(&PlanningSpec { alpha, ..base }) };
    if n == 0 || excess(hi) > 0.0 {
        return Ok(InversionResult {
            solved_value: SolvedValue::Real(0.0),
            feasible: false,
            binding_bound: at(hi)?,
        });
    }
    if excess(lo) <= 0.0 {
        return Ok(InversionResult {
            solved_value: SolvedValue::Real(1.0 - lo),
            feasible: true,
            binding_bound: at(lo)?,
        });
    }
    let bracket = bisect_bracket(
        excess,
        BracketedRoot::new(lo, hi).with_tolerance(CONFIDENCE_TOLERANCE / 100.0),
    )?;
    // larger alpha is the feasible side
    let alpha = bracket.hi;
    Ok(InversionResult {
        solved_value: SolvedValue::Real(1.0 - alpha),
        feasible: true,
        binding_bound: at(alpha)?,
    })
}

/// Infimum margin of error the budget supports, rounded up.
pub fn inf_epsilon(budget: &BudgetSpec) -> Result<InversionResult> {
    let base = budget.base;
    validate_without_epsilon(&base)?;
    let n = budget.cell_budget(base.arms as u64, base.leaves as u64);
    let alpha0 = split_alpha(base.alpha, base.groups())?;
    let at = |epsilon: f64| -> Result<f64> { raw_bound_at(&base, alpha0, epsilon) };
    let epsilon_fits = |epsilon: f64| -> Result<bool> {
        // an unrepresentable requirement cannot fit any budget
        match cell_size_from_raw(at(epsilon)?) {
            Ok(need) => Ok(n >= 1 && n >= need),
            Err(Error::Precision(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };

    let closed_form = match base.method {
        Method::Clt { .. } | Method::Hoeffding => {
            if n == 0 {
                None
            } else {
                // raw bound scales as 1/ε², so ε = ε₀·sqrt(raw(ε₀)/n)
                Some((at(1.0)? / n as f64).sqrt())
            }
        }
        Method::Bennett => None,
    };

    if let Some(mut epsilon) = closed_form {
        if epsilon == 0.0 {
            return Ok(InversionResult {
                solved_value: SolvedValue::Real(0.0),
                feasible: true,
                binding_bound: 0.0,
            });
        }
        let mut tries = 0;
        while !epsilon_fits(epsilon)? {
            epsilon += epsilon * f64::EPSILON * 4.0 * (1u64 << tries.min(40)) as f64;
            tries += 1;
            if tries > 80 {
                return Err(Error::Precision("could not settle the margin of error".into()));
            }
        }
        return Ok(InversionResult {
            solved_value: SolvedValue::Real(epsilon),
            feasible: true,
            binding_bound: at(epsilon)?,
        });
    }

    // Bennett: the bound decreases in ε; bracket on (0, b - a]
    let width = base.bounds.expect("validated").width();
    let hi = width;
    if n == 0 || !epsilon_fits(hi)? {
        return Ok(InversionResult {
            solved_value: SolvedValue::Real(hi),
            feasible: false,
            binding_bound: at(hi)?,
        });
    }
    if epsilon_fits(EPSILON_FLOOR)? {
        return Ok(InversionResult {
            solved_value: SolvedValue::Real(EPSILON_FLOOR),
            feasible: true,
            binding_bound: at(EPSILON_FLOOR)?,
        });
    }
    let excess = |epsilon: f64| match at(epsilon) {
        Ok(raw) => raw - CEILING_SLACK - n as f64,
        Err(_) => f64::INFINITY,
    };
    let bracket = bisect_bracket(
        excess,
        BracketedRoot::new(EPSILON_FLOOR, hi).with_tolerance(EPSILON_TOLERANCE / 2.0),
    )?;
    let epsilon = bracket.hi;
    Ok(InversionResult {
        solved_value: SolvedValue::Real(epsilon),
        feasible: true,
        binding_bound: at(epsilon)?,
    })
}
