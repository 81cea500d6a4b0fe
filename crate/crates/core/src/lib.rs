//! FalConN: falsification of input-driven dynamical systems against Signal
//! Temporal Logic specifications.
//!
//! The toolkit iterates a learn-distill-optimize loop against a black-box
//! system under test (SUT):
//!
//! 1. [`surrogate`] fits a neural ODE to the traces collected so far,
//! 2. [`symreg`] distills the network's vector field into closed-form
//!    expressions via genetic programming,
//! 3. [`ocp`] transcribes the symbolic dynamics together with the smoothed
//!    robustness of the negated specification into a bounded nonlinear
//!    program and solves it for a candidate counterexample input,
//! 4. [`falsify`] validates the candidate on the SUT, classifies the
//!    outcome, and grows the dataset.
//!
//! [`stl`] provides the specification language and both exact and smoothed
//! quantitative robustness; [`sim`] provides the SUT abstraction, fixed-step
//! integration, and the built-in benchmark plants.

pub mod error;
pub mod falsify;
pub mod ocp;
pub mod opt;
pub mod signal;
pub mod sim;
pub mod stl;
pub mod surrogate;
pub mod symreg;

pub use error::{Error, Result};
pub use signal::SampledSignal;
