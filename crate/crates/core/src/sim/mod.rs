//! Black-box SUT abstraction: fixed-step ODE integration, piecewise-constant
//! input signals, built-in benchmark plants, and trace persistence.

mod input;
mod plant;
mod rk4;
mod sut;
mod trace;

pub use input::InputSignal;
pub use plant::Plant;
pub use rk4::{integrate_rk4, uniform_grid, Dynamics, DIVERGENCE_LIMIT};
pub use sut::{run_experiment, SutSpec};
pub use trace::{load_trace, parse_trace_csv, save_trace, Trace, TraceManifest};
