use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CellLaw, DgpSpec, LearnerKnobs, SimulationMode, SimulationPlan};
use crate::error::{Error, Result};
use crate::planning::PlanningSpec;

pub const PRESET_NAMES: [&str; 3] = ["known-hoeffding", "paper-desk", "paper-full"];

/// Test points per (arm, leaf) unit in learned-partition presets.
const TEST_POINTS_PER_UNIT: u64 = 20_000;

/// Two arms, five equiprobable leaves, Bernoulli cells with `p` drawn once
/// from `[0.3, 0.7]`; cells sized by Hoeffding at `α = 0.1`, `ε = 0.1`.
fn known_hoeffding(seed: u64) -> Result<SimulationPlan> {
    let (k, l) = (2usize, 5usize);
    // a stream no replicate uses
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let cells = (0..k * l)
        .map(|_| CellLaw::Bernoulli {
            p: rng.gen_range(0.3..=0.7),
        })
        .collect();
    Ok(SimulationPlan {
        dgp: DgpSpec {
            arms: k,
            leaves: l,
            leaf_probs: vec![1.0 / l as f64; l],
            arm_probs: vec![0.5; k],
            cells,
        },
        planning: PlanningSpec::hoeffding(k as u32, l as u32, 0.1, 0.1, 0.0, 1.0),
        replicates: 200,
        test_points: 200,
        master_seed: seed,
        mode: SimulationMode::KnownPartition,
        standardized: false,
        learner: LearnerKnobs::default(),
    })
}

/// Binary outcomes whose best arm alternates across five leaves; a policy
/// tree is learned at the standardized `ε = 1/25`, 90% design.
fn two_arm_five_leaf(seed: u64, replicates: u64) -> Result<SimulationPlan> {
    let (k, l) = (2usize, 5usize);
    let arm1 = [0.30, 0.60, 0.40, 0.70, 0.50];
    let arm2 = [0.60, 0.35, 0.70, 0.40, 0.55];
    let cells = arm1
        .iter()
        .chain(arm2.iter())
        .map(|&p| CellLaw::Bernoulli { p })
        .collect();
    Ok(SimulationPlan {
        dgp: DgpSpec {
            arms: k,
            leaves: l,
            leaf_probs: vec![1.0 / l as f64; l],
            arm_probs: vec![0.5; k],
            cells,
        },
        planning: PlanningSpec::clt(k as u32, l as u32, 0.1, 1.0 / 25.0, 1.0),
        replicates,
        test_points: TEST_POINTS_PER_UNIT * (k * l) as u64,
        master_seed: seed,
        mode: SimulationMode::LearnedPartition,
        standardized: true,
        learner: LearnerKnobs::default(),
    })
}

/// Named simulation plan seeded with `seed`.
pub fn preset(name: &str, seed: u64) -> Result<SimulationPlan> {
    match name {
        "known-hoeffding" => known_hoeffding(seed),
        "paper-desk" => two_arm_five_leaf(seed, 50),
        "paper-full" => two_arm_five_leaf(seed, 500),
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}
