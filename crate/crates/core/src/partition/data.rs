use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a dataset's rows are allowed to be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataRole {
    /// Rows whose outcomes may drive split selection.
    Train,
    /// Holdout rows reserved for cell means; the learner may read their
    /// features and arms but never their outcomes.
    Honest,
    /// Role not tracked (e.g. loaded from a file).
    Unspecified,
}

/// Rows of `(features, arm, outcome)` with a fixed feature width. Arms are
/// 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<f64>,
    arms: Vec<usize>,
    outcomes: Vec<f64>,
    role: DataRole,
}

impl Dataset {
    pub fn new(n_features: usize, role: DataRole) -> Self {
        Dataset {
            n_features,
            features: Vec::new(),
            arms: Vec::new(),
            outcomes: Vec::new(),
            role,
        }
    }

    pub fn with_capacity(n_features: usize, role: DataRole, rows: usize) -> Self {
        Dataset {
            n_features,
            features: Vec::with_capacity(rows * n_features),
            arms: Vec::with_capacity(rows),
            outcomes: Vec::with_capacity(rows),
            role,
        }
    }

    pub fn push(&mut self, x: &[f64], arm: usize, y: f64) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if arm == 0 {
            return Err(Error::Domain("arms are numbered from 1".into()));
        }
        self.features.extend_from_slice(x);
        self.arms.push(arm);
        self.outcomes.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn role(&self) -> DataRole {
        self.role
    }

    pub fn with_role(mut self, role: DataRole) -> Self {
        self.role = role;
        self
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn arm(&self, i: usize) -> usize {
        self.arms[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.outcomes[i]
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn max_arm(&self) -> usize {
        self.arms.iter().copied().max().unwrap_or(0)
    }

    /// Replaces outcomes in place, keeping features and arms.
    pub fn set_outcomes(&mut self, outcomes: Vec<f64>) -> Result<()> {
        if outcomes.len() != self.len() {
            return Err(Error::Domain(format!(
                "expected {} outcomes, got {}",
                self.len(),
                outcomes.len()
            )));
        }
        self.outcomes = outcomes;
        Ok(())
    }

    /// Checks every arm lies in `1..=arms`.
    pub fn check_arms(&self, arms: usize) -> Result<()> {
        match self.arms.iter().position(|&w| w == 0 || w > arms) {
            Some(i) => Err(Error::Domain(format!(
                "row {i} has arm {} outside 1..={arms}",
                self.arms[i]
            ))),
            None => Ok(()),
        }
    }

    /// Rows `[start, end)` as a new dataset with the given role.
    pub fn slice(&self, start: usize, end: usize, role: DataRole) -> Dataset {
        Dataset {
            n_features: self.n_features,
            features: self.features[start * self.n_features..end * self.n_features].to_vec(),
            arms: self.arms[start..end].to_vec(),
            outcomes: self.outcomes[start..end].to_vec(),
            role,
        }
    }
}
