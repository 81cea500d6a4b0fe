//! Shared optimizers: ADAM, limited-memory BFGS with backtracking line
//! search, and a gradient-projection variant for box constraints.

mod adam;
mod lbfgs;

pub use adam::{Adam, AdamConfig};
pub use lbfgs::{lbfgs_minimize, projected_lbfgs, LbfgsOutcome, ProjectedOutcome};
