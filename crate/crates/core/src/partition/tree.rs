use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned binary tree. Internal nodes send `x[feature] <= threshold`
/// to the left child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        leaf: usize,
    },
}

impl Node {
    pub fn split(feature: usize, threshold: f64, left: Node, right: Node) -> Node {
        Node::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn collect(&self, leaves: &mut Vec<usize>, max_feature: &mut Option<usize>) -> Result<()> {
        match self {
            Node::Leaf { leaf } => leaves.push(*leaf),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if !threshold.is_finite() {
                    return Err(Error::Domain(format!("non-finite threshold {threshold}")));
                }
                *max_feature = Some(max_feature.map_or(*feature, |m| m.max(*feature)));
                left.collect(leaves, max_feature)?;
                right.collect(leaves, max_feature)?;
            }
        }
        Ok(())
    }
}

/// One side of an axis-aligned cut on a leaf's path from the root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// `x[feature] <= threshold`
    AtMost { feature: usize, threshold: f64 },
    /// `x[feature] > threshold`
    Above { feature: usize, threshold: f64 },
}

impl Constraint {
    pub fn holds(&self, x: &[f64]) -> bool {
        match *self {
            Constraint::AtMost { feature, threshold } => x[feature] <= threshold,
            Constraint::Above { feature, threshold } => x[feature] > threshold,
        }
    }
}

/// A feature-space partition `ℓ: X → {0, …, L-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct Partition {
    n_features: usize,
    leaf_count: usize,
    root: Node,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionDoc {
    n_features: usize,
    leaf_count: usize,
    tree: Node,
}

impl TryFrom<PartitionDoc> for Partition {
    type Error = Error;
    fn try_from(doc: PartitionDoc) -> Result<Self> {
        let p = Partition::new(doc.n_features, doc.tree)?;
        if p.leaf_count != doc.leaf_count {
            return Err(Error::Domain(format!(
                "document declares {} leaves, tree has {}",
                doc.leaf_count, p.leaf_count
            )));
        }
        Ok(p)
    }
}

impl From<Partition> for PartitionDoc {
    fn from(p: Partition) -> Self {
        PartitionDoc {
            n_features: p.n_features,
            leaf_count: p.leaf_count,
            tree: p.root,
        }
    }
}

impl Partition {
    /// Checks that leaf ids are exactly `0..L` and features are in range.
    pub fn new(n_features: usize, root: Node) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Domain("a partition needs at least one feature".into()));
        }
        let mut leaves = Vec::new();
        let mut max_feature = None;
        root.collect(&mut leaves, &mut max_feature)?;
        if let Some(f) = max_feature {
            if f >= n_features {
                return Err(Error::Shape {
                    expected: n_features,
                    got: f + 1,
                });
            }
        }
        let leaf_count = leaves.len();
        let mut seen = vec![false; leaf_count];
        for &id in &leaves {
            if id >= leaf_count || seen[id] {
                return Err(Error::Domain(format!(
                    "leaf ids must be exactly 0..{leaf_count}, found {id} out of range or repeated"
                )));
            }
            seen[id] = true;
        }
        Ok(Partition {
            n_features,
            leaf_count,
            root,
        })
    }

    pub fn single_leaf(n_features: usize) -> Result<Self> {
        Partition::new(n_features, Node::Leaf { leaf: 0 })
    }

    /// Balanced tree over sorted cut points on one feature; leaf `i` covers
    /// `(cuts[i-1], cuts[i]]`.
    pub fn from_cuts(n_features: usize, feature: usize, cuts: &[f64]) -> Result<Self> {
        if cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("cut points must be strictly increasing".into()));
        }
        fn build(feature: usize, cuts: &[f64], first_leaf: usize) -> Node {
            if cuts.is_empty() {
                return Node::Leaf { leaf: first_leaf };
            }
            let mid = cuts.len() / 2;
            Node::split(
                feature,
                cuts[mid],
                build(feature, &cuts[..mid], first_leaf),
                build(feature, &cuts[mid + 1..], first_leaf + mid + 1),
            )
        }
        Partition::new(n_features, build(feature, cuts, 0))
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn assign_leaf(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.route(x))
    }

    /// Routing without the width check; `x` must have `n_features` entries.
    pub(crate) fn route(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { leaf } => return *leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Path constraints defining each leaf's box, indexed by leaf id.
    pub fn leaf_boxes(&self) -> Vec<Vec<Constraint>> {
        fn walk(node: &Node, path: &mut Vec<Constraint>, out: &mut Vec<Vec<Constraint>>) {
            match node {
                Node::Leaf { leaf } => out[*leaf] = path.clone(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    path.push(Constraint::AtMost {
                        feature: *feature,
                        threshold: *threshold,
                    });
                    walk(left, path, out);
                    path.pop();
                    path.push(Constraint::Above {
                        feature: *feature,
                        threshold: *threshold,
                    });
                    walk(right, path, out);
                    path.pop();
                }
            }
        }
        let mut out = vec![Vec::new(); self.leaf_count];
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// The first split in the tree, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.root {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Partition {
        Partition::new(1, Node::split(0, 0.5, Node::Leaf { leaf: 0 }, Node::Leaf { leaf: 1 })).unwrap()
    }

    #[test]
    fn routing_rule() {
        let p = stump();
        assert_eq!(p.assign_leaf(&[0.3]).unwrap(), 0);
        assert_eq!(p.assign_leaf(&[0.5]).unwrap(), 0);
        assert_eq!(p.assign_leaf(&[0.7]).unwrap(), 1);
        assert!(matches!(p.assign_leaf(&[0.1, 0.2]), Err(Error::Shape { .. })));
    }

    #[test]
    fn depth_two_matches_boxes() {
        let tree = Node::split(
            0,
            0.0,
            Node::split(1, 1.0, Node::Leaf { leaf: 2 }, Node::Leaf { leaf: 0 }),
            Node::split(1, -1.0, Node::Leaf { leaf: 1 }, Node::Leaf { leaf: 3 }),
        );
        let p = Partition::new(2, tree).unwrap();
        let boxes = p.leaf_boxes();
        for x in [[-1.0, 0.0], [-1.0, 2.0], [1.0, -2.0], [1.0, 0.0], [0.0, 1.0]] {
            let hits: Vec<usize> = (0..4).filter(|&l| boxes[l].iter().all(|c| c.holds(&x))).collect();
            assert_eq!(hits, vec![p.assign_leaf(&x).unwrap()], "{x:?}");
        }
    }

    #[test]
    fn rejects_bad_leaf_ids() {
        let dup = Node::split(0, 0.5, Node::Leaf { leaf: 0 }, Node::Leaf { leaf: 0 });
        assert!(Partition::new(1, dup).is_err());
        let gap = Node::split(0, 0.5, Node::Leaf { leaf: 0 }, Node::Leaf { leaf: 2 });
        assert!(Partition::new(1, gap).is_err());
        let wide = Node::split(3, 0.5, Node::Leaf { leaf: 0 }, Node::Leaf { leaf: 1 });
        assert!(Partition::new(2, wide).is_err());
    }

    #[test]
    fn cuts_tree() {
        let p = Partition::from_cuts(1, 0, &[0.2, 0.4, 0.6, 0.8]).unwrap();
        assert_eq!(p.leaf_count(), 5);
        for (x, l) in [(0.1, 0), (0.2, 0), (0.3, 1), (0.5, 2), (0.7, 3), (0.9, 4)] {
            assert_eq!(p.assign_leaf(&[x]).unwrap(), l);
        }
    }
}
