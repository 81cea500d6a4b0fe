//! Hybrid neural ODE on the lifted state: ż = A z + B(f_k(z,u) + f_θ(z,u)),
//! y = C z.

use serde::{Deserialize, Serialize};

use super::lifting::StateLifting;
use super::mlp::MlpVectorField;
use crate::error::{Error, Result};
use crate::sim::{integrate_rk4, InputSignal, DIVERGENCE_LIMIT};
use crate::sim::Trace;

/// Known part of the dynamics, one value per driven row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnownDynamics {
    /// No prior knowledge; f_k = 0.
    Zero,
    /// f_k,i = -y_i (the zeroth-derivative entry of each block).
    NegState,
}

impl KnownDynamics {
    pub fn name(&self) -> &'static str {
        match self {
            KnownDynamics::Zero => "zero",
            KnownDynamics::NegState => "neg-state",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(KnownDynamics::Zero),
            "neg-state" => Ok(KnownDynamics::NegState),
            other => Err(Error::InvalidConfig(format!(
                "unknown known-dynamics id `{other}`"
            ))),
        }
    }

    fn eval(&self, lifting: &StateLifting, z: &[f64], f: &mut [f64]) {
        match self {
            KnownDynamics::Zero => {}
            KnownDynamics::NegState => {
                for (k, &r) in lifting.output_rows().iter().enumerate() {
                    f[k] += -z[r];
                }
            }
        }
    }

    /// Accumulates the pullback of `f_bar` into `z_bar`.
    fn vjp(&self, lifting: &StateLifting, f_bar: &[f64], z_bar: &mut [f64]) {
        match self {
            KnownDynamics::Zero => {}
            KnownDynamics::NegState => {
                for (k, &r) in lifting.output_rows().iter().enumerate() {
                    z_bar[r] -= f_bar[k];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub lifting: StateLifting,
    pub known: KnownDynamics,
    pub mlp: MlpVectorField,
}

impl SurrogateModel {
    /// The MLP consumes the concatenation [z; u].
    pub fn new(lifting: StateLifting, known: KnownDynamics, mlp: MlpVectorField) -> Self {
        assert_eq!(mlp.output_dim(), lifting.n_outputs());
        Self {
            lifting,
            known,
            mlp,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.mlp.input_dim() - self.lifting.dim()
    }

    pub fn rhs(&self, z: &[f64], u: &[f64], dz: &mut [f64]) {
        let mut zu = Vec::with_capacity(z.len() + u.len());
        zu.extend_from_slice(z);
        zu.extend_from_slice(u);
        let mut f = self.mlp.forward(&zu);
        self.known.eval(&self.lifting, z, &mut f);
        self.lifting.apply(z, &f, dz);
    }

    /// Pullback of `dz_bar` through `rhs`: returns the gradient with respect
    /// to z; MLP parameter gradients accumulate into `param_bar`.
    pub fn rhs_vjp(&self, z: &[f64], u: &[f64], dz_bar: &[f64], param_bar: &mut [f64]) -> Vec<f64> {
        let mut z_bar = vec![0.0; z.len()];
        let mut f_bar = vec![0.0; self.lifting.n_outputs()];
        self.lifting.apply_transpose(dz_bar, &mut z_bar, &mut f_bar);
        self.known.vjp(&self.lifting, &f_bar, &mut z_bar);
        let mut zu = Vec::with_capacity(z.len() + u.len());
        zu.extend_from_slice(z);
        zu.extend_from_slice(u);
        let cache = self.mlp.forward_cached(&zu);
        let zu_bar = self.mlp.vjp(&cache, &f_bar, param_bar);
        for (zb, v) in z_bar.iter_mut().zip(&zu_bar) {
            *zb += v;
        }
        z_bar
    }

    /// Lifted initial state for a trace: outputs seed the zeroth rows and
    /// higher-order entries come from one-sided finite differences on the
    /// first output samples (second-order accurate).
    pub fn augment_initial_state(&self, trace: &Trace) -> Result<Vec<f64>> {
        lifted_initial_state(&self.lifting, trace)
    }

    /// Rolls the model out on `t_grid` and returns the output samples (C z)
    /// at every grid point.
    pub fn simulate(&self, z0: &[f64], u: &InputSignal, t_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        let traj = self.simulate_lifted(z0, u, t_grid)?;
        Ok(traj.iter().map(|z| self.lifting.outputs(z)).collect())
    }

    /// Like `simulate` but keeps the full lifted trajectory.
    pub fn simulate_lifted(
        &self,
        z0: &[f64],
        u: &InputSignal,
        t_grid: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        let dyn_fn = |z: &[f64], uv: &[f64], _t: f64| {
            let mut dz = vec![0.0; z.len()];
            self.rhs(z, uv, &mut dz);
            dz
        };
        integrate_rk4(&dyn_fn, z0, u, t_grid)
    }
}

pub fn lifted_initial_state(lifting: &StateLifting, trace: &Trace) -> Result<Vec<f64>> {
    if trace.outputs.len() != lifting.n_outputs() {
        return Err(Error::InvalidConfig(format!(
            "trace has {} output channels, lifting expects {}",
            trace.outputs.len(),
            lifting.n_outputs()
        )));
    }
    let p = trace.period();
    let mut z0 = vec![0.0; lifting.dim()];
    for (k, &order) in lifting.orders().iter().enumerate() {
        let y = &trace.outputs[k].1;
        let row = lifting.output_rows()[k];
        z0[row] = y[0];
        match order {
            1 => {}
            2 => {
                if y.len() < 3 {
                    return Err(Error::InvalidConfig(
                        "order-2 lifting needs at least 3 samples".into(),
                    ));
                }
                z0[row + 1] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * p);
            }
            o => {
                return Err(Error::InvalidConfig(format!(
                    "lifting order {o} not supported (max 2)"
                )))
            }
        }
    }
    if z0.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(Error::InvalidSignal("non-finite lifted initial state".into()));
    }
    Ok(z0)
}
