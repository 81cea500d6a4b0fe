//! Classical fixed-step fourth-order Runge-Kutta integration with
//! zero-order-hold inputs.

use crate::error::{Error, Result};
use crate::sim::input::InputSignal;

/// Any state component beyond this magnitude aborts the solve as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Right-hand side `(state, input, t) -> dstate/dt`.
pub trait Dynamics {
    fn eval(&self, state: &[f64], input: &[f64], t: f64) -> Vec<f64>;
}

impl<F: Fn(&[f64], &[f64], f64) -> Vec<f64>> Dynamics for F {
    fn eval(&self, state: &[f64], input: &[f64], t: f64) -> Vec<f64> {
        self(state, input, t)
    }
}

/// Integrates `dynamics` over the uniform grid `t_grid`, holding the input
/// constant at its value at the start of each step. Returns the state at
/// every grid point (including `x0` at the first).
pub fn integrate_rk4<D: Dynamics>(
    dynamics: &D,
    x0: &[f64],
    input: &InputSignal,
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidConfig(
            "integration grid needs at least two points".into(),
        ));
    }
    let mut states = Vec::with_capacity(t_grid.len());
    let mut x = x0.to_vec();
    check_finite(&x, t_grid[0])?;
    states.push(x.clone());
    for w in t_grid.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let u = input.value_at(t);
        x = rk4_step(dynamics, &x, &u, t, h);
        check_finite(&x, w[1])?;
        states.push(x.clone());
    }
    Ok(states)
}

pub(crate) fn rk4_step<D: Dynamics>(
    dynamics: &D,
    x: &[f64],
    u: &[f64],
    t: f64,
    h: f64,
) -> Vec<f64> {
    let k1 = dynamics.eval(x, u, t);
    let k2 = dynamics.eval(&axpy(x, &k1, h / 2.0), u, t + h / 2.0);
    let k3 = dynamics.eval(&axpy(x, &k2, h / 2.0), u, t + h / 2.0);
    let k4 = dynamics.eval(&axpy(x, &k3, h), u, t + h);
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn axpy(x: &[f64], d: &[f64], a: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

pub(crate) fn check_finite(x: &[f64], t: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        Err(Error::Divergence {
            t,
            limit: DIVERGENCE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Uniform grid `0, h, 2h, ..., steps*h`.
pub fn uniform_grid(h: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_input() -> InputSignal {
        InputSignal::constant(&[], &[])
    }

    #[test]
    fn zero_field_is_constant() {
        let dyn_ = |_: &[f64], _: &[f64], _: f64| vec![0.0];
        let states = integrate_rk4(&dyn_, &[5.0], &no_input(), &uniform_grid(0.1, 10)).unwrap();
        assert!(states.iter().all(|s| s[0] == 5.0));
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let dyn_ = |x: &[f64], _: &[f64], _: f64| vec![-x[0]];
        let states =
            integrate_rk4(&dyn_, &[1.0], &no_input(), &uniform_grid(0.01, 100)).unwrap();
        let expected = (-1.0f64).exp();
        assert!((states[100][0] - expected).abs() < 1e-8);
    }

    #[test]
    fn polynomial_exactness_for_constant_input() {
        let dyn_ = |_: &[f64], u: &[f64], _: f64| vec![u[0]];
        let input = InputSignal::constant(&["u"], &[1.0]);
        let states = integrate_rk4(&dyn_, &[0.0], &input, &uniform_grid(0.25, 8)).unwrap();
        for (i, s) in states.iter().enumerate() {
            assert!((s[0] - 0.25 * i as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err_at = |h: f64| {
            let dyn_ = |x: &[f64], _: &[f64], _: f64| vec![-x[0]];
            let steps = (1.0 / h).round() as usize;
            let states =
                integrate_rk4(&dyn_, &[1.0], &no_input(), &uniform_grid(h, steps)).unwrap();
            (states[steps][0] - (-1.0f64).exp()).abs()
        };
        let ratio = err_at(0.1) / err_at(0.05);
        assert!(
            (14.0..=18.0).contains(&ratio),
            "error ratio {ratio} outside [14, 18]"
        );
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let dyn_ = |x: &[f64], _: &[f64], _: f64| vec![x[0] * x[0]];
        let r = integrate_rk4(&dyn_, &[10.0], &no_input(), &uniform_grid(0.1, 100));
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }
}
