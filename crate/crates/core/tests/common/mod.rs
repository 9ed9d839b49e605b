//! Reference implementations that share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use partition_power::planning::{CltVariant, GuaranteeScope, Method, OutcomeBounds, PlanningSpec};
use rand::Rng;

/// `erf(x)` for `x >= 0` from the positive-term series
/// `2x/√π · e^{-x²} · Σ (2x²)^n / (1·3·…·(2n+1))`.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    2.0 * x / PI.sqrt() * (-x2).exp() * sum
}

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    let e = erf_series(z.abs() / 2f64.sqrt());
    if z >= 0.0 {
        0.5 * (1.0 + e)
    } else {
        0.5 * (1.0 - e)
    }
}

/// Upper tail `1 - Φ(z)` for `z >= 0`, without cancellation for moderate `z`.
pub fn phi_upper(z: f64) -> f64 {
    0.5 * (1.0 - erf_series(z / 2f64.sqrt()))
}

/// Quantile by 200 halvings of `[-40, 40]`.
pub fn quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn h(s: f64) -> f64 {
    (1.0 + s) * (1.0 + s).ln() - s
}

/// Per-cell miss probability allowed by the confidence split.
pub fn alpha0(spec: &PlanningSpec) -> f64 {
    let m = match spec.scope {
        GuaranteeScope::RandomPoint => spec.arms as f64,
        GuaranteeScope::UniformOverLeaves => spec.arms as f64 * spec.leaves as f64,
    };
    1.0 - (1.0 - spec.alpha).powf(1.0 / m)
}

/// Whether `n` observations per cell meet the method's sufficient
/// inequality, written in its original (unsolved) form. `slack` is relative.
pub fn sufficient(spec: &PlanningSpec, n: f64, slack: f64) -> bool {
    let a0 = alpha0(spec);
    let eps = spec.epsilon;
    match spec.method {
        Method::Clt { variant } => {
            let sd = spec.sigma_sq.unwrap().sqrt();
            let tail = match variant {
                CltVariant::TwoSidedLemma => a0 / 2.0,
                CltVariant::OneSidedProposition => a0,
            };
            let z = quantile(1.0 - tail).max(0.0);
            // ε ≥ z σ / √n
            eps * n.sqrt() * (1.0 + slack) >= z * sd
        }
        Method::Hoeffding => {
            let w = spec.bounds.unwrap().width();
            // 2 exp(-2 n ε² / w²) ≤ α₀
            2.0 * (-2.0 * n * eps * eps / (w * w) * (1.0 + slack)).exp() <= a0
        }
        Method::Bennett => {
            let b = spec.bounds.unwrap();
            let m = b.lo.abs().max(b.hi.abs());
            let s2 = spec.sigma_sq.unwrap();
            // 2 exp(-n σ²/M² h(εM/σ²)) ≤ α₀
            2.0 * (-n * s2 / (m * m) * h(eps * m / s2) * (1.0 + slack)).exp() <= a0
        }
    }
}

pub fn random_scope<R: Rng>(rng: &mut R) -> GuaranteeScope {
    if rng.gen_bool(0.5) {
        GuaranteeScope::RandomPoint
    } else {
        GuaranteeScope::UniformOverLeaves
    }
}

/// Random valid spec for one of the four method variants (`which` in 0..4).
pub fn random_spec<R: Rng>(rng: &mut R, which: usize, scope: GuaranteeScope) -> PlanningSpec {
    let arms = rng.gen_range(1..=8);
    let leaves = rng.gen_range(1..=20);
    let alpha = rng.gen_range(0.01..0.3);
    let mut spec = match which {
        0 | 1 => {
            let eps = rng.gen_range(0.02..0.5);
            let s2 = rng.gen_range(0.1..4.0);
            let variant = if which == 0 {
                CltVariant::TwoSidedLemma
            } else {
                CltVariant::OneSidedProposition
            };
            PlanningSpec::clt(arms, leaves, alpha, eps, s2).with_method(Method::Clt { variant })
        }
        2 => {
            let lo = rng.gen_range(-2.0..1.0);
            let hi = lo + rng.gen_range(0.5..3.0);
            let eps = rng.gen_range(0.02..0.5) * (hi - lo);
            PlanningSpec::hoeffding(arms, leaves, alpha, eps, lo, hi)
        }
        _ => {
            let lo = rng.gen_range(-2.0..1.0);
            let hi = lo + rng.gen_range(0.5..3.0);
            let b = OutcomeBounds::new(lo, hi).unwrap();
            let s2 = rng.gen_range(0.05..1.0) * b.width() * b.width() / 4.0;
            let eps = rng.gen_range(0.02..0.5) * b.width();
            PlanningSpec::bennett(arms, leaves, alpha, eps, lo, hi, s2)
        }
    };
    spec.scope = scope;
    spec
}
