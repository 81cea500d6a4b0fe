//! The system under test: a plant sampled at a fixed period, queried only
//! through experiments.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::input::InputSignal;
use crate::sim::plant::Plant;
use crate::sim::rk4::{integrate_rk4, uniform_grid};
use crate::sim::trace::Trace;

/// Default SUT sampling period in seconds.
pub const DEFAULT_SUT_PERIOD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SutSpec {
    pub plant: Plant,
    pub sampling_period: f64,
}

impl SutSpec {
    pub fn new(plant: Plant) -> Self {
        Self {
            plant,
            sampling_period: DEFAULT_SUT_PERIOD,
        }
    }

    pub fn input_bounds(&self) -> Vec<(String, f64, f64)> {
        self.plant.input_bounds()
    }
}

/// Runs one deterministic experiment: integrates the plant under `u` over
/// `[0, horizon]` and samples at the SUT period.
pub fn run_experiment(sut: &SutSpec, u: &InputSignal, horizon: f64) -> Result<Trace> {
    u.check_bounds(&sut.input_bounds())?;
    let steps = (horizon / sut.sampling_period).round() as usize;
    let grid = uniform_grid(sut.sampling_period, steps);
    let plant = sut.plant;
    let dynamics = move |x: &[f64], uu: &[f64], t: f64| plant.derivative(x, uu, t);
    let x0 = plant.initial_state();
    let states = integrate_rk4(&dynamics, &x0, u, &grid)?;

    let input_names: Vec<String> = u.channels.iter().map(|(n, _)| n.clone()).collect();
    let mut inputs: Vec<(String, Vec<f64>)> = input_names
        .iter()
        .map(|n| (n.clone(), Vec::with_capacity(grid.len())))
        .collect();
    for &t in &grid {
        for (c, v) in u.value_at(t).into_iter().enumerate() {
            inputs[c].1.push(v);
        }
    }
    let output_names = plant.output_names();
    let mut outputs: Vec<(String, Vec<f64>)> = output_names
        .iter()
        .map(|n| (n.clone(), Vec::with_capacity(grid.len())))
        .collect();
    for s in &states {
        for (c, v) in plant.output(s).into_iter().enumerate() {
            outputs[c].1.push(v);
        }
    }
    Ok(Trace {
        x0,
        times: grid,
        inputs,
        outputs,
    })
}
