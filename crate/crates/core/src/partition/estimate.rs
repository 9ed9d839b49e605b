use serde::Serialize;

use super::data::{DataRole, Dataset};
use super::tree::Partition;
use crate::error::{Error, Result};

/// Honest per-(arm, leaf) counts and sample means over a fixed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTable {
    arms: usize,
    partition: Partition,
    counts: Vec<usize>,
    means: Vec<Option<f64>>,
}

/// An (arm, leaf) cell whose honest count falls short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellShortfall {
    pub arm: usize,
    pub leaf: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinCellCheck {
    pub passed: bool,
    pub min_count: usize,
    pub violations: Vec<CellShortfall>,
}

/// Counts and means over `honest` rows, summing left to right in row order.
///
/// Datasets tagged [`DataRole::Train`] are rejected: their outcomes were
/// available to the split search.
pub fn fit_honest_means(partition: &Partition, honest: &Dataset, arms: usize) -> Result<EstimatorTable> {
    if honest.role() == DataRole::Train {
        return Err(Error::Config("cell means must be fitted on honest rows, got training rows".into()));
    }
    if arms == 0 {
        return Err(Error::Config("arms must be >= 1".into()));
    }
    if honest.n_features() != partition.n_features() {
        return Err(Error::Shape {
            expected: partition.n_features(),
            got: honest.n_features(),
        });
    }
    honest.check_arms(arms)?;
    let leaves = partition.leaf_count();
    let mut counts = vec![0usize; arms * leaves];
    let mut sums = vec![0.0f64; arms * leaves];
    for i in 0..honest.len() {
        let l = partition.route(honest.x(i));
        let c = (honest.arm(i) - 1) * leaves + l;
        counts[c] += 1;
        sums[c] += honest.y(i);
    }
    let means = counts
        .iter()
        .zip(&sums)
        .map(|(&n, &s)| (n > 0).then(|| s / n as f64))
        .collect();
    Ok(EstimatorTable {
        arms,
        partition: partition.clone(),
        counts,
        means,
    })
}

impl EstimatorTable {
    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn leaves(&self) -> usize {
        self.partition.leaf_count()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    fn index(&self, arm: usize, leaf: usize) -> Result<usize> {
        if arm == 0 || arm > self.arms {
            return Err(Error::Domain(format!("arm {arm} outside 1..={}", self.arms)));
        }
        if leaf >= self.leaves() {
            return Err(Error::Domain(format!("leaf {leaf} outside 0..{}", self.leaves())));
        }
        Ok((arm - 1) * self.leaves() + leaf)
    }

    pub fn count(&self, arm: usize, leaf: usize) -> Result<usize> {
        Ok(self.counts[self.index(arm, leaf)?])
    }

    /// `None` when the cell is empty.
    pub fn mean(&self, arm: usize, leaf: usize) -> Result<Option<f64>> {
        Ok(self.means[self.index(arm, leaf)?])
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    fn cell_mean(&self, arm: usize, leaf: usize) -> Result<f64> {
        self.mean(arm, leaf)?.ok_or_else(|| Error::Estimation {
            arm,
            leaf,
            reason: "has no honest observations".into(),
        })
    }

    /// `μ̂(x, w)`: mean outcome of arm `w` in the leaf containing `x`.
    pub fn mu_hat(&self, x: &[f64], arm: usize) -> Result<f64> {
        let leaf = self.partition.assign_leaf(x)?;
        self.cell_mean(arm, leaf)
    }

    /// `τ̂(x, w, w') = μ̂(x, w) - μ̂(x, w')`.
    pub fn tau_hat(&self, x: &[f64], arm: usize, other: usize) -> Result<f64> {
        let leaf = self.partition.assign_leaf(x)?;
        Ok(self.cell_mean(arm, leaf)? - self.cell_mean(other, leaf)?)
    }

    /// Arm with the largest estimated mean at `x`; ties go to the smaller arm.
    pub fn best_arm(&self, x: &[f64]) -> Result<(usize, f64)> {
        let leaf = self.partition.assign_leaf(x)?;
        self.best_arm_in_leaf(leaf)
    }

    pub fn best_arm_in_leaf(&self, leaf: usize) -> Result<(usize, f64)> {
        let mut best = (1, self.cell_mean(1, leaf)?);
        for arm in 2..=self.arms {
            let m = self.cell_mean(arm, leaf)?;
            if m > best.1 {
                best = (arm, m);
            }
        }
        Ok(best)
    }

    /// Whether every cell holds at least `required` honest rows.
    pub fn check_min_cell(&self, required: usize) -> MinCellCheck {
        let leaves = self.leaves();
        let violations: Vec<CellShortfall> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n < required)
            .map(|(i, &count)| CellShortfall {
                arm: i / leaves + 1,
                leaf: i % leaves,
                count,
            })
            .collect();
        MinCellCheck {
            passed: violations.is_empty(),
            min_count: self.counts.iter().copied().min().unwrap_or(0),
            violations,
        }
    }
}
