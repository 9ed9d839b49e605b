mod common;

use partition_power::budget::{
    inf_epsilon, max_arms, max_leaves, sup_confidence, sup_confidence_by_bisection, BudgetSpec, CONFIDENCE_CLAMP,
    CONFIDENCE_TOLERANCE, EPSILON_TOLERANCE,
};
use partition_power::planning::{required_cell_size, GuaranteeScope, PlanningSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fits(spec: &PlanningSpec, budget: u64) -> bool {
    let per_cell = budget / (spec.arms as u64 * spec.leaves as u64);
    per_cell >= 1 && per_cell >= required_cell_size(spec).unwrap().min_cell_size
}

/// Largest value in `1..=64` that fits, by trying all of them.
fn exhaustive(budget: u64, base: &PlanningSpec, set: impl Fn(&mut PlanningSpec, u32)) -> u64 {
    (1..=64u32)
        .filter(|&v| {
            let mut s = *base;
            set(&mut s, v);
            fits(&s, budget)
        })
        .max()
        .unwrap_or(0) as u64
}

#[test]
fn integer_inversions_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 100 {
        let which = rng.gen_range(0..4);
        let scope = common::random_scope(&mut rng);
        let base = common::random_spec(&mut rng, which, scope);
        let one = required_cell_size(&PlanningSpec { arms: 1, ..base }).unwrap().min_cell_size;
        let budget = rng.gen_range(1..=one * base.leaves as u64 * 40);

        let arms = exhaustive(budget, &base, |s, v| s.arms = v);
        let leaves = exhaustive(budget, &base, |s, v| s.leaves = v);
        if arms >= 64 || leaves >= 64 {
            continue;
        }
        let ra = max_arms(&BudgetSpec::new(budget, base)).unwrap();
        assert_eq!(ra.solved_value.as_f64() as u64, arms, "{base:?} budget {budget}");
        assert_eq!(ra.feasible, arms > 0);
        let rl = max_leaves(&BudgetSpec::new(budget, base)).unwrap();
        assert_eq!(rl.solved_value.as_f64() as u64, leaves, "{base:?} budget {budget}");
        assert_eq!(rl.feasible, leaves > 0);
        checked += 1;
    }
}

#[test]
fn continuous_inversions_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let which = rng.gen_range(0..4);
        let scope = common::random_scope(&mut rng);
        let base = common::random_spec(&mut rng, which, scope);
        let cells = base.arms as u64 * base.leaves as u64;
        let budget = cells * rng.gen_range(1..5000);

        let e = inf_epsilon(&BudgetSpec::new(budget, base)).unwrap();
        if e.feasible {
            let eps = e.solved_value.as_f64();
            assert!(fits(&PlanningSpec { epsilon: eps, ..base }, budget), "{base:?}");
            let below = eps - 10.0 * EPSILON_TOLERANCE;
            if below > 0.0 {
                assert!(!fits(&PlanningSpec { epsilon: below, ..base }, budget), "{base:?} eps {eps}");
            }
        } else {
            // only Bennett can run out of room below b - a
            let w = base.bounds.unwrap().width();
            assert!(!fits(&PlanningSpec { epsilon: w, ..base }, budget));
        }

        let c = sup_confidence(&BudgetSpec::new(budget, base)).unwrap();
        if c.feasible {
            let conf = c.solved_value.as_f64();
            assert!(fits(&PlanningSpec { alpha: 1.0 - conf, ..base }, budget));
            let above = conf + 10.0 * CONFIDENCE_TOLERANCE;
            if above < 1.0 - CONFIDENCE_CLAMP && conf < 1.0 - CONFIDENCE_CLAMP {
                assert!(!fits(&PlanningSpec { alpha: 1.0 - above, ..base }, budget), "{base:?} conf {conf}");
            }
            let bis = sup_confidence_by_bisection(&BudgetSpec::new(budget, base)).unwrap();
            assert!((bis.solved_value.as_f64() - conf).abs() < CONFIDENCE_TOLERANCE, "{base:?}");
        }
    }
}

#[test]
fn inversions_are_monotone_in_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let which = rng.gen_range(0..4);
        let base = common::random_spec(&mut rng, which, GuaranteeScope::RandomPoint);
        let cells = base.arms as u64 * base.leaves as u64;
        let mut last_eps = f64::INFINITY;
        let mut last_conf = 0.0;
        for k in [1u64, 10, 100, 1000, 10_000] {
            let b = BudgetSpec::new(cells * k, base);
            let e = inf_epsilon(&b).unwrap();
            if e.feasible {
                assert!(e.solved_value.as_f64() <= last_eps);
                last_eps = e.solved_value.as_f64();
            }
            let c = sup_confidence(&b).unwrap();
            if c.feasible {
                assert!(c.solved_value.as_f64() >= last_conf);
                last_conf = c.solved_value.as_f64();
            }
        }
    }
}

#[test]
fn design_point_inverts() {
    let base = PlanningSpec::clt(2, 1, 0.1, 0.04, 1.0);
    let b = BudgetSpec::new(2 * 2374, base);
    assert!((inf_epsilon(&b).unwrap().solved_value.as_f64() - 0.04).abs() < 1e-4);
    assert!((sup_confidence(&b).unwrap().solved_value.as_f64() - 0.9).abs() < 1e-3);
    assert_eq!(max_arms(&b).unwrap().solved_value.as_f64(), 2.0);
    let r = max_arms(&BudgetSpec::new(50_000, PlanningSpec::clt(1, 5, 0.1, 0.04, 1.0))).unwrap();
    assert_eq!(r.solved_value.as_f64(), 3.0);
    assert!(!max_arms(&BudgetSpec::new(1, base)).unwrap().feasible);
}
