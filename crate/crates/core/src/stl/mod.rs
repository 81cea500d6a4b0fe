//! Signal Temporal Logic: parsing, negation normal form, and quantitative
//! robustness in both exact (true min/max) and smoothed (log-sum-exp) form.

mod expr;
mod formula;
mod parser;
mod robustness;
mod smooth;

pub use expr::Expr;
pub use formula::{Interval, Predicate, StlFormula};
pub use parser::parse_formula;
pub use robustness::robustness_exact;
pub use smooth::{
    robustness_gradient_check, robustness_smooth, smooth_max, smooth_min, RobustnessResult,
};
