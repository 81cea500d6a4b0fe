//! Symbolic distillation: genetic programming over expression trees fitted
//! to derivative data sampled from the neural surrogate, with selection by
//! integrated trajectory loss.

mod expr;
mod gp;
mod model;
mod sample;

pub use expr::{expr_jacobian, parse_expr, BinOp, ExprTree, UnaryOp, DIV_GUARD};
pub use gp::{derivative_mse, evolve, Candidate, SrConfig};
pub use model::{select_candidate, trajectory_mse, SymbolicModel};
pub use sample::{sample_derivatives, DerivativeSample};
