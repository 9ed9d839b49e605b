//! Feature-space partitions, honest cell estimates and the policy-tree learner.

mod data;
mod estimate;
mod learn;
mod tree;

pub use data::{DataRole, Dataset};
pub use estimate::{fit_honest_means, CellShortfall, EstimatorTable, MinCellCheck};
pub use learn::{learn_tree, LearnerConfig};
pub use tree::{Constraint, Node, Partition};
