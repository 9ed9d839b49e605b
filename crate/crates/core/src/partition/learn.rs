//! Greedy honest policy-tree learner.
//!
//! Splits are scored by the policy objective: every training row in a child
//! is assigned the child's best arm, with each arm's reward imputed by its
//! mean training outcome in that child. A split is admissible only if every
//! (arm, child) cell keeps at least `min_cell_size` honest rows. Honest
//! outcomes are never read.

use serde::{Deserialize, Serialize};

use super::data::{DataRole, Dataset};
use super::tree::{Node, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub max_leaves: usize,
    pub max_depth: usize,
    /// Minimum honest rows per (arm, leaf) cell.
    pub min_cell_size: usize,
    /// Cap on candidate thresholds per feature per node.
    pub candidate_quantiles: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            max_leaves: 8,
            max_depth: 16,
            min_cell_size: 1,
            candidate_quantiles: 32,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves == 0 || self.max_depth == 0 || self.min_cell_size == 0 || self.candidate_quantiles == 0 {
            return Err(Error::Config(
                "max_leaves, max_depth, min_cell_size and candidate_quantiles must all be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Frontier {
    node: usize,
    depth: usize,
    train: Vec<usize>,
    honest: Vec<usize>,
    best: Option<Candidate>,
}

enum Slot {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Policy value of a node: row count times the best per-arm mean.
fn policy_value(counts: &[usize], sums: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let best = counts
        .iter()
        .zip(sums)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &s)| s / c as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    n as f64 * best
}

/// Midpoints between consecutive distinct sorted values, thinned to at most
/// `cap` evenly spaced entries.
pub(crate) fn candidate_thresholds(sorted: &[f64], cap: usize) -> Vec<f64> {
    let mut mids = Vec::new();
    for w in sorted.windows(2) {
        if w[0] < w[1] {
            let mut mid = w[0] + 0.5 * (w[1] - w[0]);
            if mid >= w[1] {
                mid = w[0];
            }
            mids.push(mid);
        }
    }
    if mids.len() <= cap {
        return mids;
    }
    let m = mids.len();
    let mut picked: Vec<f64> = if cap == 1 {
        vec![mids[(m - 1) / 2]]
    } else {
        (0..cap)
            .map(|j| {
                let pos = (j as f64 * (m - 1) as f64 / (cap - 1) as f64).round() as usize;
                mids[pos.min(m - 1)]
            })
            .collect()
    };
    picked.dedup();
    picked
}

struct Searcher<'a> {
    train: &'a Dataset,
    honest: &'a Dataset,
    arms: usize,
    config: &'a LearnerConfig,
}

impl Searcher<'_> {
    fn best_split(&self, train_idx: &[usize], honest_idx: &[usize]) -> Option<Candidate> {
        let k = self.arms;
        let mut t_count = vec![0usize; k];
        let mut t_sum = vec![0.0f64; k];
        for &i in train_idx {
            let w = self.train.arm(i) - 1;
            t_count[w] += 1;
            t_sum[w] += self.train.y(i);
        }
        let mut h_total = vec![0usize; k];
        for &i in honest_idx {
            h_total[self.honest.arm(i) - 1] += 1;
        }
        if h_total.iter().any(|&c| c < 2 * self.config.min_cell_size) {
            return None;
        }
        let parent = policy_value(&t_count, &t_sum);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut t_sorted = train_idx.to_vec();
        let mut h_sorted = honest_idx.to_vec();
        for f in 0..self.train.n_features() {
            t_sorted.sort_by(|&a, &b| self.train.x(a)[f].total_cmp(&self.train.x(b)[f]).then(a.cmp(&b)));
            h_sorted.sort_by(|&a, &b| self.honest.x(a)[f].total_cmp(&self.honest.x(b)[f]).then(a.cmp(&b)));
            let values: Vec<f64> = t_sorted.iter().map(|&i| self.train.x(i)[f]).collect();
            let thresholds = candidate_thresholds(&values, self.config.candidate_quantiles);

            let mut l_count = vec![0usize; k];
            let mut l_sum = vec![0.0f64; k];
            let mut h_left = vec![0usize; k];
            let (mut ti, mut hi) = (0usize, 0usize);
            let mut r_count = vec![0usize; k];
            let mut r_sum = vec![0.0f64; k];
            for &t in &thresholds {
                while ti < t_sorted.len() && self.train.x(t_sorted[ti])[f] <= t {
                    let i = t_sorted[ti];
                    let w = self.train.arm(i) - 1;
                    l_count[w] += 1;
                    l_sum[w] += self.train.y(i);
                    ti += 1;
                }
                while hi < h_sorted.len() && self.honest.x(h_sorted[hi])[f] <= t {
                    h_left[self.honest.arm(h_sorted[hi]) - 1] += 1;
                    hi += 1;
                }
                let min = self.config.min_cell_size;
                let admissible = (0..k).all(|w| h_left[w] >= min && h_total[w] - h_left[w] >= min);
                if !admissible {
                    continue;
                }
                for w in 0..k {
                    r_count[w] = t_count[w] - l_count[w];
                    r_sum[w] = t_sum[w] - l_sum[w];
                }
                let objective = policy_value(&l_count, &l_sum) + policy_value(&r_count, &r_sum);
                if best.is_none_or(|(b, _, _)| objective > b) {
                    best = Some((objective, f, t));
                }
            }
        }
        best.map(|(objective, feature, threshold)| Candidate {
            feature,
            threshold,
            gain: objective - parent,
        })
    }
}

/// Grows a partition best-first: at each step the frontier leaf whose best
/// admissible split gains the most is split (ties: earliest created leaf).
/// Growth stops at `max_leaves`, at `max_depth`, or when no leaf has an
/// admissible split. Within a node, ties between splits go to the lower
/// feature index and then the smaller threshold.
pub fn learn_tree(train: &Dataset, honest: &Dataset, arms: usize, config: &LearnerConfig) -> Result<Partition> {
    config.validate()?;
    if arms == 0 {
        return Err(Error::Config("arms must be >= 1".into()));
    }
    if train.role() == DataRole::Honest || honest.role() == DataRole::Train {
        return Err(Error::Config("training and honest datasets are swapped or shared".into()));
    }
    let d = honest.n_features();
    if train.n_features() != d {
        return Err(Error::Shape {
            expected: d,
            got: train.n_features(),
        });
    }
    train.check_arms(arms)?;
    honest.check_arms(arms)?;
    let mut per_arm = vec![0usize; arms];
    for &w in honest.arms() {
        per_arm[w - 1] += 1;
    }
    if let Some((w, &c)) = per_arm.iter().enumerate().find(|(_, &c)| c < config.min_cell_size) {
        return Err(Error::Learner(format!(
            "honest data has {c} rows for arm {} but every leaf needs {}",
            w + 1,
            config.min_cell_size
        )));
    }

    let searcher = Searcher {
        train,
        honest,
        arms,
        config,
    };
    let mut slots = vec![Slot::Leaf];
    let root_train: Vec<usize> = (0..train.len()).collect();
    let root_honest: Vec<usize> = (0..honest.len()).collect();
    let root_best = if config.max_depth > 0 && config.max_leaves > 1 {
        searcher.best_split(&root_train, &root_honest)
    } else {
        None
    };
    let mut frontier = vec![Frontier {
        node: 0,
        depth: 0,
        train: root_train,
        honest: root_honest,
        best: root_best,
    }];
    let mut leaves = 1;
    while leaves < config.max_leaves {
        let pick = frontier
            .iter()
            .enumerate()
            .filter_map(|(i, fr)| fr.best.map(|c| (i, fr.node, c.gain)))
            .fold(None::<(usize, usize, f64)>, |acc, cur| match acc {
                Some(a) if a.2 > cur.2 || (a.2 == cur.2 && a.1 < cur.1) => Some(a),
                _ => Some(cur),
            });
        let Some((pos, _, _)) = pick else { break };
        let node = frontier.swap_remove(pos);
        let split = node.best.expect("picked nodes have a split");
        let (f, t) = (split.feature, split.threshold);
        let (lt, rt): (Vec<usize>, Vec<usize>) = node.train.iter().partition(|&&i| train.x(i)[f] <= t);
        let (lh, rh): (Vec<usize>, Vec<usize>) = node.honest.iter().partition(|&&i| honest.x(i)[f] <= t);
        let left = slots.len();
        slots.push(Slot::Leaf);
        let right = slots.len();
        slots.push(Slot::Leaf);
        slots[node.node] = Slot::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        leaves += 1;
        let depth = node.depth + 1;
        for (id, tr, ho) in [(left, lt, lh), (right, rt, rh)] {
            let best = if depth < config.max_depth {
                searcher.best_split(&tr, &ho)
            } else {
                None
            };
            frontier.push(Frontier {
                node: id,
                depth,
                train: tr,
                honest: ho,
                best,
            });
        }
    }

    fn build(slots: &[Slot], id: usize, next_leaf: &mut usize) -> Node {
        match slots[id] {
            Slot::Leaf => {
                let leaf = *next_leaf;
                *next_leaf += 1;
                Node::Leaf { leaf }
            }
            Slot::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let l = build(slots, left, next_leaf);
                let r = build(slots, right, next_leaf);
                Node::split(feature, threshold, l, r)
            }
        }
    }
    let mut next_leaf = 0;
    Partition::new(d, build(&slots, 0, &mut next_leaf))
}
