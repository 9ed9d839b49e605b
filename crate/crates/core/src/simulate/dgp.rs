use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{normal_cdf, normal_pdf, normal_quantile, Probability};
use crate::partition::Partition;

/// Outcome law of one (arm, leaf) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum CellLaw {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// Gaussian conditioned on `[lo, hi]`.
    TruncatedGaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl CellLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CellLaw::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("bernoulli p = {p} outside [0, 1]")));
                }
            }
            CellLaw::Gaussian { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
                    return Err(Error::Config(format!("invalid gaussian ({mean}, {sd})")));
                }
            }
            CellLaw::TruncatedGaussian { mean, sd, lo, hi } => {
                if !(mean.is_finite() && sd.is_finite() && sd > 0.0 && lo < hi) {
                    return Err(Error::Config(format!(
                        "invalid truncated gaussian ({mean}, {sd}) on [{lo}, {hi}]"
                    )));
                }
                let mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
                if !(mass > 1e-12) {
                    return Err(Error::Config(format!(
                        "truncation [{lo}, {hi}] keeps no mass of N({mean}, {sd}^2)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CellLaw::Bernoulli { p } => p,
            CellLaw::Gaussian { mean, .. } => mean,
            CellLaw::TruncatedGaussian { mean, sd, lo, hi } => {
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let mass = normal_cdf(b) - normal_cdf(a);
                mean + sd * (normal_pdf(a) - normal_pdf(b)) / mass
            }
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            CellLaw::Bernoulli { p } => (p * (1.0 - p)).sqrt(),
            CellLaw::Gaussian { sd, .. } => sd,
            CellLaw::TruncatedGaussian { mean, sd, lo, hi } => {
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let mass = normal_cdf(b) - normal_cdf(a);
                let (pa, pb) = (normal_pdf(a), normal_pdf(b));
                // φ(±∞)·(±∞) terms vanish
                let ta = if a.is_finite() { a * pa } else { 0.0 };
                let tb = if b.is_finite() { b * pb } else { 0.0 };
                let shift = (pa - pb) / mass;
                (sd * sd * (1.0 + (ta - tb) / mass - shift * shift)).max(0.0).sqrt()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CellLaw::Bernoulli { p } => {
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            CellLaw::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            CellLaw::TruncatedGaussian { mean, sd, lo, hi } => {
                // inverse-CDF draw restricted to [Φ(a), Φ(b)]
                let (fa, fb) = (normal_cdf((lo - mean) / sd), normal_cdf((hi - mean) / sd));
                let u = fa + rng.gen::<f64>() * (fb - fa);
                let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                let z = Probability::new(u)
                    .and_then(normal_quantile)
                    .expect("u is inside (0, 1)");
                (mean + sd * z).clamp(lo, hi)
            }
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            CellLaw::Bernoulli { .. } => Some((0.0, 1.0)),
            CellLaw::Gaussian { .. } => None,
            CellLaw::TruncatedGaussian { lo, hi, .. } => Some((lo, hi)),
        }
    }
}

/// Synthetic experiment with known per-cell truths. Leaf `l` is embedded on
/// a single feature as the interval `[l/L, (l+1)/L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub arms: usize,
    pub leaves: usize,
    pub leaf_probs: Vec<f64>,
    pub arm_probs: Vec<f64>,
    /// Arm-major: the law of (arm `w`, leaf `l`) sits at `(w - 1) * leaves + l`.
    pub cells: Vec<CellLaw>,
}

fn check_simplex(name: &str, probs: &[f64], len: usize) -> Result<()> {
    if probs.len() != len {
        return Err(Error::Config(format!("{name} has {} entries, expected {len}", probs.len())));
    }
    if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::Config(format!("{name} entries must be in (0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 || self.leaves == 0 {
            return Err(Error::Config("dgp needs at least one arm and one leaf".into()));
        }
        check_simplex("leaf_probs", &self.leaf_probs, self.leaves)?;
        check_simplex("arm_probs", &self.arm_probs, self.arms)?;
        if self.cells.len() != self.arms * self.leaves {
            return Err(Error::Config(format!(
                "dgp has {} cell laws, expected {}",
                self.cells.len(),
                self.arms * self.leaves
            )));
        }
        self.cells.iter().try_for_each(CellLaw::validate)
    }

    pub fn cell(&self, arm: usize, leaf: usize) -> &CellLaw {
        &self.cells[(arm - 1) * self.leaves + leaf]
    }

    /// Feature value inside leaf `leaf`'s interval, kept clear of the
    /// endpoints so `≤` routing cannot misplace it.
    pub fn embed<R: Rng + ?Sized>(&self, leaf: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        (leaf as f64 + 0.001 + 0.998 * u) / self.leaves as f64
    }

    /// The partition the embedding realizes.
    pub fn true_partition(&self) -> Result<Partition> {
        let cuts: Vec<f64> = (1..self.leaves).map(|l| l as f64 / self.leaves as f64).collect();
        Partition::from_cuts(1, 0, &cuts)
    }

    pub fn samplers(&self) -> Result<(WeightedIndex<f64>, WeightedIndex<f64>)> {
        let leaf = WeightedIndex::new(&self.leaf_probs).map_err(|e| Error::Config(e.to_string()))?;
        let arm = WeightedIndex::new(&self.arm_probs).map_err(|e| Error::Config(e.to_string()))?;
        Ok((leaf, arm))
    }

    /// One iid row: `(leaf, arm, x, y)`.
    pub fn draw_row<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        leaf_dist: &WeightedIndex<f64>,
        arm_dist: &WeightedIndex<f64>,
    ) -> (usize, usize, f64, f64) {
        let leaf = leaf_dist.sample(rng);
        let arm = arm_dist.sample(rng) + 1;
        let x = self.embed(leaf, rng);
        let y = self.cell(arm, leaf).sample(rng);
        (leaf, arm, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_moments_match_sampling() {
        let law = CellLaw::TruncatedGaussian {
            mean: 0.2,
            sd: 0.5,
            lo: 0.0,
            hi: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&y| (0.0..=1.0).contains(&y)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - law.mean()).abs() < 0.005, "{mean} vs {}", law.mean());
        assert!((var.sqrt() - law.sd()).abs() < 0.005);
    }

    #[test]
    fn embedding_lands_in_its_leaf() {
        let dgp = DgpSpec {
            arms: 1,
            leaves: 7,
            leaf_probs: vec![1.0 / 7.0; 7],
            arm_probs: vec![1.0],
            cells: vec![CellLaw::Bernoulli { p: 0.5 }; 7],
        };
        dgp.validate().unwrap();
        let p = dgp.true_partition().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let l = rng.gen_range(0..7);
            assert_eq!(p.assign_leaf(&[dgp.embed(l, &mut rng)]).unwrap(), l);
        }
    }

    #[test]
    fn validation() {
        let mut dgp = DgpSpec {
            arms: 2,
            leaves: 1,
            leaf_probs: vec![1.0],
            arm_probs: vec![0.5, 0.5],
            cells: vec![CellLaw::Bernoulli { p: 0.5 }; 2],
        };
        assert!(dgp.validate().is_ok());
        dgp.leaf_probs = vec![0.0];
        assert!(dgp.validate().is_err());
        dgp.leaf_probs = vec![1.0];
        dgp.cells[1] = CellLaw::Bernoulli { p: 1.5 };
        assert!(dgp.validate().is_err());
    }
}
