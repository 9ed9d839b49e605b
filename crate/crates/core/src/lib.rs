//! Sample-size planning for jointly estimating arm means over a partition,
//! with honest policy-tree learning and a coverage simulator.

// `!(x < y)` is used on purpose so NaN lands on the rejecting side
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod cli;
pub mod error;
pub mod formats;
pub mod math;
pub mod partition;
pub mod planning;
pub mod simulate;
pub mod variance;

pub use error::{Error, Result};
pub use math::Probability;
pub use planning::{required_cell_size, CellRequirement, GuaranteeScope, Method, PlanningSpec};
