//! Optimal-control synthesis: trapezoidal collocation of the symbolic
//! surrogate with a smooth-robustness objective, warm-started and solved by
//! an augmented-Lagrangian method.

mod problem;
mod solve;
mod warm;

pub use problem::{extract_input, transcribe, OcpBounds, OcpProblem, DEFAULT_STATE_BOUND};
pub use solve::{
    solve, NlpSolution, SolveStatus, GRADIENT_TOL, MAX_MAJOR_ITERS, RESIDUAL_TOL,
};
pub use warm::warm_start;
