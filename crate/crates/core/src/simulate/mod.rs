//! Monte Carlo check of the coverage guarantees.
//!
//! Each replicate draws an honest sample, fits cell means over a partition
//! and scores six events at a batch of test points:
//!
//! | event                | per test point `x`                                      |
//! |----------------------|---------------------------------------------------------|
//! | `joint_mean`         | `max_w |μ̂(x,w) - μ(x,w)| < ε`                          |
//! | `best_arm`           | `|max_w μ̂(x,w) - max_w μ(x,w)| < ε`                    |
//! | `cate`               | `max_{w≠w'} |τ̂(x,w,w') - τ(x,w,w')| < 2ε`              |
//! | `*_uniform`          | the same three, simultaneously over every leaf          |
//!
//! On the standardized scale every `ε` is multiplied by the relevant cell
//! standard deviations (`ε·σ_w`, `ε·max_w σ_w`, `ε·(σ_w + σ_w')`).

mod dgp;
mod presets;

pub use dgp::{CellLaw, DgpSpec};
pub use presets::{preset, PRESET_NAMES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{fit_honest_means, learn_tree, DataRole, Dataset, EstimatorTable, LearnerConfig};
use crate::planning::{required_cell_size, PlanningSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Cells are the DGP's own leaves, each filled to exactly the planned size.
    KnownPartition,
    /// A policy tree is learned on a training half; truth is proxied by a
    /// large independent test draw.
    LearnedPartition,
}

/// Learner knobs used in [`SimulationMode::LearnedPartition`]; the leaf cap
/// and cell floor come from the planning spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerKnobs {
    pub max_depth: usize,
    pub candidate_quantiles: usize,
}

impl Default for LearnerKnobs {
    fn default() -> Self {
        LearnerKnobs {
            max_depth: 16,
            candidate_quantiles: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub dgp: DgpSpec,
    pub planning: PlanningSpec,
    pub replicates: u64,
    pub test_points: u64,
    pub master_seed: u64,
    pub mode: SimulationMode,
    pub standardized: bool,
    #[serde(default)]
    pub learner: LearnerKnobs,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.planning.validate()?;
        if self.replicates == 0 || self.test_points == 0 {
            return Err(Error::Config("replicates and test points must be >= 1".into()));
        }
        if self.dgp.arms != self.planning.arms as usize {
            return Err(Error::Config(format!(
                "dgp has {} arms but the plan has {}",
                self.dgp.arms, self.planning.arms
            )));
        }
        if self.mode == SimulationMode::KnownPartition && self.dgp.leaves != self.planning.leaves as usize {
            return Err(Error::Config(format!(
                "known-partition mode needs dgp leaves ({}) equal to planned leaves ({})",
                self.dgp.leaves, self.planning.leaves
            )));
        }
        if self.learner.max_depth == 0 || self.learner.candidate_quantiles == 0 {
            return Err(Error::Config("learner max_depth and candidate_quantiles must be >= 1".into()));
        }
        Ok(())
    }

    /// Independent, counter-based stream for one replicate.
    pub fn replicate_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index);
        rng
    }
}

/// Coverage of each event family, as a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCoverage {
    pub joint_mean: f64,
    pub best_arm: f64,
    pub cate: f64,
    pub joint_mean_uniform: f64,
    pub best_arm_uniform: f64,
    pub cate_uniform: f64,
}

impl EventCoverage {
    pub const NAMES: [&'static str; 6] = [
        "joint_mean",
        "best_arm",
        "cate",
        "joint_mean_uniform",
        "best_arm_uniform",
        "cate_uniform",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.joint_mean,
            self.best_arm,
            self.cate,
            self.joint_mean_uniform,
            self.best_arm_uniform,
            self.cate_uniform,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        EventCoverage {
            joint_mean: v[0],
            best_arm: v[1],
            cate: v[2],
            joint_mean_uniform: v[3],
            best_arm_uniform: v[4],
            cate_uniform: v[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: u64,
    pub coverage: EventCoverage,
    pub leaf_count: usize,
    /// Smallest honest (arm, leaf) count.
    pub min_cell_size: usize,
    /// Largest and median per-cell standard deviation (true ones for a
    /// known partition, test-set estimates otherwise).
    pub max_sd: f64,
    pub median_sd: f64,
    /// Leaves where `joint_mean` held but `best_arm` or `cate` did not,
    /// plus one if the same happened for the uniform events.
    pub implication_violations: u64,
    /// Whether the honest fit met the planned cell floor everywhere.
    pub min_cell_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub records: Vec<ReplicateRecord>,
    pub aggregate: EventCoverage,
    pub mean_leaf_count: f64,
    pub total_implication_violations: u64,
}

/// Per-leaf event indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LeafEvents {
    joint_mean: bool,
    best_arm: bool,
    cate: bool,
}

impl LeafEvents {
    fn implication_holds(&self) -> bool {
        !self.joint_mean || (self.best_arm && self.cate)
    }
}

/// Indicators for one leaf given estimates, targets and per-arm scales.
fn leaf_events(estimate: &[f64], target: &[f64], scale: &[f64], epsilon: f64) -> LeafEvents {
    let dev: Vec<f64> = estimate.iter().zip(target).map(|(e, t)| e - t).collect();
    let tol: Vec<f64> = scale.iter().map(|s| epsilon * s).collect();
    let joint_mean = dev.iter().zip(&tol).all(|(d, t)| d.abs() < *t);

    let max_est = estimate.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_target = target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_tol = tol.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_arm = (max_est - max_target).abs() < max_tol;

    // τ̂ - τ = (μ̂_w - μ_w) - (μ̂_w' - μ_w')
    let k = dev.len();
    let cate = (0..k).all(|w| (0..k).all(|v| w == v || (dev[w] - dev[v]).abs() < tol[w] + tol[v]));
    LeafEvents {
        joint_mean,
        best_arm,
        cate,
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Tallies the per-leaf events at the given test-point leaf counts.
fn score(
    events: &[LeafEvents],
    test_counts: &[u64],
    index: u64,
    table: &EstimatorTable,
    sds: &mut [f64],
    required: usize,
) -> ReplicateRecord {
    let m: u64 = test_counts.iter().sum();
    let mut hits = [0u64; 3];
    for (ev, &c) in events.iter().zip(test_counts) {
        hits[0] += c * ev.joint_mean as u64;
        hits[1] += c * ev.best_arm as u64;
        hits[2] += c * ev.cate as u64;
    }
    let all = |f: fn(&LeafEvents) -> bool| events.iter().all(f) as u64 as f64;
    let uniform = LeafEvents {
        joint_mean: events.iter().all(|e| e.joint_mean),
        best_arm: events.iter().all(|e| e.best_arm),
        cate: events.iter().all(|e| e.cate),
    };
    let mut violations = events.iter().filter(|e| !e.implication_holds()).count() as u64;
    if !uniform.implication_holds() {
        violations += 1;
    }
    let check = table.check_min_cell(required);
    ReplicateRecord {
        index,
        coverage: EventCoverage {
            joint_mean: hits[0] as f64 / m as f64,
            best_arm: hits[1] as f64 / m as f64,
            cate: hits[2] as f64 / m as f64,
            joint_mean_uniform: all(|e| e.joint_mean),
            best_arm_uniform: all(|e| e.best_arm),
            cate_uniform: all(|e| e.cate),
        },
        leaf_count: table.leaves(),
        min_cell_size: check.min_count,
        max_sd: sds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        median_sd: median(sds),
        implication_violations: violations,
        min_cell_check: check.passed,
    }
}

fn known_replicate(plan: &SimulationPlan, index: u64, cell_size: u64, rng: &mut ChaCha8Rng) -> Result<ReplicateRecord> {
    let dgp = &plan.dgp;
    let (k, l_count) = (dgp.arms, dgp.leaves);
    let partition = dgp.true_partition()?;
    let mut honest = Dataset::with_capacity(1, DataRole::Honest, k * l_count * cell_size as usize);
    for arm in 1..=k {
        for leaf in 0..l_count {
            let law = dgp.cell(arm, leaf);
            for _ in 0..cell_size {
                let x = dgp.embed(leaf, rng);
                honest.push(&[x], arm, law.sample(rng))?;
            }
        }
    }
    let table = fit_honest_means(&partition, &honest, k)?;

    let mut events = Vec::with_capacity(l_count);
    let mut sds = Vec::with_capacity(k * l_count);
    for leaf in 0..l_count {
        let mut estimate = Vec::with_capacity(k);
        let mut target = Vec::with_capacity(k);
        let mut scale = Vec::with_capacity(k);
        for arm in 1..=k {
            let law = dgp.cell(arm, leaf);
            let sd = law.sd();
            if plan.standardized && !(sd > 0.0) {
                return Err(Error::Config(format!(
                    "cell (arm {arm}, leaf {leaf}) has zero variance; the standardized scale is undefined"
                )));
            }
            estimate.push(table.mean(arm, leaf)?.ok_or_else(|| Error::Estimation {
                arm,
                leaf,
                reason: "has no honest observations".into(),
            })?);
            target.push(law.mean());
            scale.push(if plan.standardized { sd } else { 1.0 });
            sds.push(sd);
        }
        events.push(leaf_events(&estimate, &target, &scale, plan.planning.epsilon));
    }

    let (leaf_dist, _) = dgp.samplers()?;
    let mut test_counts = vec![0u64; l_count];
    for _ in 0..plan.test_points {
        let leaf = rand::distributions::Distribution::sample(&leaf_dist, rng);
        let x = dgp.embed(leaf, rng);
        test_counts[partition.assign_leaf(&[x])?] += 1;
    }
    Ok(score(&events, &test_counts, index, &table, &mut sds, cell_size as usize))
}

fn learned_replicate(
    plan: &SimulationPlan,
    index: u64,
    cell_size: u64,
    total: u64,
    rng: &mut ChaCha8Rng,
) -> Result<ReplicateRecord> {
    let dgp = &plan.dgp;
    let k = dgp.arms;
    let (train, honest, config) = learning_inputs(plan, rng, cell_size, total)?;
    let (leaf_dist, arm_dist) = dgp.samplers()?;
    let partition = learn_tree(&train, &honest, k, &config)?;
    let table = fit_honest_means(&partition, &honest, k)?;
    let leaves = partition.leaf_count();

    // test draw: truth proxy and evaluation points at once
    let m = plan.test_points as usize;
    let mut test_leaf = Vec::with_capacity(m);
    let mut test_arm = Vec::with_capacity(m);
    let mut test_y = Vec::with_capacity(m);
    for _ in 0..m {
        let (_, arm, x, y) = dgp.draw_row(rng, &leaf_dist, &arm_dist);
        test_leaf.push(partition.assign_leaf(&[x])?);
        test_arm.push(arm);
        test_y.push(y);
    }
    let cell = |arm: usize, leaf: usize| (arm - 1) * leaves + leaf;
    let mut counts = vec![0usize; k * leaves];
    let mut sums = vec![0.0f64; k * leaves];
    for j in 0..m {
        let c = cell(test_arm[j], test_leaf[j]);
        counts[c] += 1;
        sums[c] += test_y[j];
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::Estimation {
                arm: c / leaves + 1,
                leaf: c % leaves,
                reason: "has no test observations to approximate the truth".into(),
            });
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mut sq = vec![0.0f64; k * leaves];
    for j in 0..m {
        let c = cell(test_arm[j], test_leaf[j]);
        sq[c] += (test_y[j] - means[c]).powi(2);
    }
    let sds: Vec<f64> = sq.iter().zip(&counts).map(|(s, &c)| (s / c as f64).sqrt()).collect();

    let mut events = Vec::with_capacity(leaves);
    for leaf in 0..leaves {
        let mut estimate = Vec::with_capacity(k);
        let mut target = Vec::with_capacity(k);
        let mut scale = Vec::with_capacity(k);
        for arm in 1..=k {
            let c = cell(arm, leaf);
            if plan.standardized && !(sds[c] > 0.0) {
                return Err(Error::Config(format!(
                    "cell (arm {arm}, leaf {leaf}) has zero test-set variance; the standardized scale is undefined"
                )));
            }
            estimate.push(table.mean(arm, leaf)?.ok_or_else(|| Error::Estimation {
                arm,
                leaf,
                reason: "has no honest observations".into(),
            })?);
            target.push(means[c]);
            scale.push(if plan.standardized { sds[c] } else { 1.0 });
        }
        events.push(leaf_events(&estimate, &target, &scale, plan.planning.epsilon));
    }
    let mut test_counts = vec![0u64; leaves];
    for &l in &test_leaf {
        test_counts[l] += 1;
    }
    let mut sds = sds;
    Ok(score(&events, &test_counts, index, &table, &mut sds, cell_size as usize))
}

/// One replicate, fully determined by `(plan.master_seed, index)`.
pub fn run_replicate(plan: &SimulationPlan, index: u64) -> Result<ReplicateRecord> {
    plan.validate()?;
    let req = required_cell_size(&plan.planning)?;
    replicate_with(plan, index, req.min_cell_size, req.total_experiment_size)
}

fn replicate_with(plan: &SimulationPlan, index: u64, cell_size: u64, total: u64) -> Result<ReplicateRecord> {
    let mut rng = plan.replicate_rng(index);
    let out = match plan.mode {
        SimulationMode::KnownPartition => known_replicate(plan, index, cell_size, &mut rng),
        SimulationMode::LearnedPartition => learned_replicate(plan, index, cell_size, total, &mut rng),
    };
    out.map_err(|e| Error::Replicate {
        index,
        source: Box::new(e),
    })
}

/// Aggregates replicate records in index order.
pub fn aggregate(records: Vec<ReplicateRecord>) -> CoverageReport {
    let r = records.len().max(1) as f64;
    let mut sums = [0.0f64; 6];
    for rec in &records {
        for (s, v) in sums.iter_mut().zip(rec.coverage.values()) {
            *s += v;
        }
    }
    CoverageReport {
        aggregate: EventCoverage::from_values(sums.map(|s| s / r)),
        mean_leaf_count: records.iter().map(|rec| rec.leaf_count as f64).sum::<f64>() / r,
        total_implication_violations: records.iter().map(|rec| rec.implication_violations).sum(),
        records,
    }
}

/// Runs every replicate on the current rayon pool.
pub fn run_simulation(plan: &SimulationPlan) -> Result<CoverageReport> {
    plan.validate()?;
    let req = required_cell_size(&plan.planning)?;
    let records = (0..plan.replicates)
        .into_par_iter()
        .map(|i| replicate_with(plan, i, req.min_cell_size, req.total_experiment_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(records))
}

/// [`run_simulation`] on a dedicated pool of at most `threads` workers.
pub fn run_simulation_with_threads(plan: &SimulationPlan, threads: Option<usize>) -> Result<CoverageReport> {
    match threads {
        None => run_simulation(plan),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| run_simulation(plan))
        }
    }
}

/// Train and honest halves plus learner settings for one learned-partition
/// replicate, drawn from the replicate's own stream exactly as
/// [`run_replicate`] draws them.
pub fn replicate_learning_inputs(plan: &SimulationPlan, index: u64) -> Result<(Dataset, Dataset, LearnerConfig)> {
    plan.validate()?;
    let req = required_cell_size(&plan.planning)?;
    let mut rng = plan.replicate_rng(index);
    learning_inputs(plan, &mut rng, req.min_cell_size, req.total_experiment_size)
}

fn learning_inputs(
    plan: &SimulationPlan,
    rng: &mut ChaCha8Rng,
    cell_size: u64,
    total: u64,
) -> Result<(Dataset, Dataset, LearnerConfig)> {
    let (leaf_dist, arm_dist) = plan.dgp.samplers()?;
    let n = total as usize;
    let n_honest = ((plan.planning.honest_fraction * n as f64).round() as usize).clamp(1, n);
    let (train, honest) = draw_split(&plan.dgp, rng, n, n_honest, &leaf_dist, &arm_dist)?;
    let config = LearnerConfig {
        max_leaves: plan.planning.leaves as usize,
        max_depth: plan.learner.max_depth,
        min_cell_size: cell_size as usize,
        candidate_quantiles: plan.learner.candidate_quantiles,
    };
    Ok((train, honest, config))
}

/// Draws `n` rows and splits them into train and honest sets, exactly as a
/// learned-partition replicate does.
pub fn draw_split(
    dgp: &DgpSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
    n_honest: usize,
    leaf_dist: &rand::distributions::WeightedIndex<f64>,
    arm_dist: &rand::distributions::WeightedIndex<f64>,
) -> Result<(Dataset, Dataset)> {
    let mut train = Dataset::with_capacity(1, DataRole::Train, n - n_honest);
    let mut honest = Dataset::with_capacity(1, DataRole::Honest, n_honest);
    for i in 0..n {
        let (_, arm, x, y) = dgp.draw_row(rng, leaf_dist, arm_dist);
        if i < n_honest {
            honest.push(&[x], arm, y)?;
        } else {
            train.push(&[x], arm, y)?;
        }
    }
    Ok((train, honest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_enumerated_leaf_events() {
        // three arms; deviations 0.05, -0.08, 0.02 against ε = 0.1
        let ev = leaf_events(&[0.55, 0.32, 0.62], &[0.5, 0.4, 0.6], &[1.0; 3], 0.1);
        assert_eq!(
            ev,
            LeafEvents {
                joint_mean: true,
                best_arm: true,
                cate: true
            }
        );
        // arm 2 misses by 0.15: joint fails; max: |0.62 - 0.6| ok; pair (1,2): 0.05+0.15 = 0.2, not < 0.2
        let ev = leaf_events(&[0.55, 0.25, 0.62], &[0.5, 0.4, 0.6], &[1.0; 3], 0.1);
        assert_eq!(
            ev,
            LeafEvents {
                joint_mean: false,
                best_arm: true,
                cate: false
            }
        );
        // best arm swaps but stays within ε
        let ev = leaf_events(&[0.58, 0.4, 0.52], &[0.5, 0.4, 0.6], &[1.0; 3], 0.1);
        assert!(ev.joint_mean && ev.best_arm && ev.cate);
        // standardized: σ scales every tolerance
        let ev = leaf_events(&[0.55, 0.4], &[0.5, 0.4], &[0.4, 0.4], 0.1);
        assert!(!ev.joint_mean);
        assert!(ev.cate);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
