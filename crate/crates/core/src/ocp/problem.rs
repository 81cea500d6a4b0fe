//! Trapezoidal-collocation transcription of the symbolic surrogate plus the
//! negated specification's smooth robustness.

use crate::error::{Error, Result};
use crate::signal::SampledSignal;
use crate::sim::InputSignal;
use crate::stl::{robustness_smooth, StlFormula};
use crate::symreg::{ExprTree, SymbolicModel};

/// Default state box when the plant declares none.
pub const DEFAULT_STATE_BOUND: f64 = 1e3;

/// Value substituted when a guarded expression evaluation is flagged, so the
/// solver's line search retreats instead of crashing.
const POISON: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub sym: SymbolicModel,
    /// NNF of the negated specification; its smooth robustness is maximized.
    pub neg_spec: StlFormula,
    pub dt: f64,
    /// Number of collocation intervals; decision grid has T+1 points.
    pub t_steps: usize,
    pub smoothing: f64,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub x0: Vec<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    /// Per driven row: (d/dz trees, d/du trees).
    jac: Vec<(Vec<ExprTree>, Vec<ExprTree>)>,
}

impl OcpProblem {
    pub fn dim(&self) -> usize {
        self.sym.lifting.dim()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    /// Decision layout: states x_0..x_T (dim each), then inputs u_0..u_T.
    pub fn n_vars(&self) -> usize {
        (self.t_steps + 1) * (self.dim() + self.n_inputs())
    }

    pub fn n_defects(&self) -> usize {
        self.t_steps * self.dim()
    }

    pub fn state<'a>(&self, v: &'a [f64], k: usize) -> &'a [f64] {
        let n = self.dim();
        &v[k * n..(k + 1) * n]
    }

    pub fn input<'a>(&self, v: &'a [f64], k: usize) -> &'a [f64] {
        let n = self.dim();
        let m = self.n_inputs();
        let base = (self.t_steps + 1) * n;
        &v[base + k * m..base + (k + 1) * m]
    }

    /// Box bounds over the whole decision vector; x_0 is pinned to the
    /// initial state by equal bounds.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(self.n_vars());
        let mut hi = Vec::with_capacity(self.n_vars());
        for k in 0..=self.t_steps {
            if k == 0 {
                lo.extend_from_slice(&self.x0);
                hi.extend_from_slice(&self.x0);
            } else {
                lo.extend_from_slice(&self.x_lo);
                hi.extend_from_slice(&self.x_hi);
            }
        }
        for _ in 0..=self.t_steps {
            lo.extend_from_slice(&self.u_lo);
            hi.extend_from_slice(&self.u_hi);
        }
        (lo, hi)
    }

    /// f(x, u) = A x + B g(x, u); `None` if a guard trips.
    pub fn field(&self, x: &[f64], u: &[f64]) -> Option<Vec<f64>> {
        let mut f = Vec::with_capacity(self.sym.exprs.len());
        for e in &self.sym.exprs {
            f.push(e.eval(x, u)?);
        }
        let mut dx = vec![0.0; self.dim()];
        self.sym.lifting.apply(x, &f, &mut dx);
        Some(dx)
    }

    /// Dense Jacobians of the field at (x, u): (df/dx n×n, df/du n×m).
    pub fn field_jacobian(&self, x: &[f64], u: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let n = self.dim();
        let m = self.n_inputs();
        let mut jx = vec![vec![0.0; n]; n];
        let mut ju = vec![vec![0.0; m]; n];
        // A contributes the block superdiagonals.
        for (blk, &start) in self.sym.lifting.output_rows().iter().enumerate() {
            let end = self.sym.lifting.driven_rows()[blk];
            for r in start..end {
                jx[r][r + 1] = 1.0;
            }
        }
        for (row_idx, &r) in self.sym.lifting.driven_rows().iter().enumerate() {
            let (dz, du) = &self.jac[row_idx];
            for (i, tree) in dz.iter().enumerate() {
                jx[r][i] += tree.eval(x, u)?;
            }
            for (j, tree) in du.iter().enumerate() {
                ju[r][j] = tree.eval(x, u)?;
            }
        }
        Some((jx, ju))
    }

    /// Trapezoidal defects c_{k} = x_{k+1} - x_k - dt/2 (f_{k+1} + f_k),
    /// flattened interval-major. Guard trips poison the affected entries.
    pub fn defects(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut c = vec![0.0; self.n_defects()];
        for k in 0..self.t_steps {
            let (xk, xk1) = (self.state(v, k), self.state(v, k + 1));
            let (uk, uk1) = (self.input(v, k), self.input(v, k + 1));
            let slot = &mut c[k * n..(k + 1) * n];
            match (self.field(xk, uk), self.field(xk1, uk1)) {
                (Some(fk), Some(fk1)) => {
                    for i in 0..n {
                        slot[i] = xk1[i] - xk[i] - self.dt / 2.0 * (fk1[i] + fk[i]);
                    }
                }
                _ => slot.fill(POISON),
            }
        }
        c
    }

    /// Decision trajectory as a sampled signal (inputs then outputs) for
    /// robustness evaluation.
    pub fn to_signal(&self, v: &[f64]) -> Result<SampledSignal> {
        let times: Vec<f64> = (0..=self.t_steps).map(|k| k as f64 * self.dt).collect();
        let mut channels = Vec::with_capacity(self.n_inputs() + self.output_names.len());
        for (j, name) in self.input_names.iter().enumerate() {
            let vals = (0..=self.t_steps).map(|k| self.input(v, k)[j]).collect();
            channels.push((name.clone(), vals));
        }
        for (c, name) in self.output_names.iter().enumerate() {
            let row = self.sym.lifting.output_rows()[c];
            let vals = (0..=self.t_steps).map(|k| self.state(v, k)[row]).collect();
            channels.push((name.clone(), vals));
        }
        SampledSignal::new(times, channels)
    }

    /// Smooth robustness of the negated spec over the decision trajectory,
    /// with its gradient mapped back onto the decision variables.
    pub fn objective(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let signal = self.to_signal(v)?;
        let res = robustness_smooth(&self.neg_spec, &signal, 0, self.smoothing)?;
        let n = self.dim();
        let m = self.n_inputs();
        let base = (self.t_steps + 1) * n;
        let mut grad = vec![0.0; self.n_vars()];
        for (c, g) in res.gradient.iter().enumerate() {
            if c < m {
                for (k, gv) in g.iter().enumerate() {
                    grad[base + k * m + c] += gv;
                }
            } else {
                let row = self.sym.lifting.output_rows()[c - m];
                for (k, gv) in g.iter().enumerate() {
                    grad[k * n + row] += gv;
                }
            }
        }
        Ok((res.value, grad))
    }

    /// Accumulates w·(∂c/∂v) into `grad`, with one weight per defect entry.
    pub fn defect_vjp(&self, v: &[f64], w: &[f64], grad: &mut [f64]) -> bool {
        let n = self.dim();
        let m = self.n_inputs();
        let base = (self.t_steps + 1) * n;
        for k in 0..self.t_steps {
            let wk = &w[k * n..(k + 1) * n];
            let (xk, xk1) = (self.state(v, k), self.state(v, k + 1));
            let (uk, uk1) = (self.input(v, k), self.input(v, k + 1));
            let Some((jx_k, ju_k)) = self.field_jacobian(xk, uk) else {
                return false;
            };
            let Some((jx_k1, ju_k1)) = self.field_jacobian(xk1, uk1) else {
                return false;
            };
            for i in 0..n {
                let wi = wk[i];
                if wi == 0.0 {
                    continue;
                }
                // d c_i / d x_{k+1} = e_i - dt/2 jx_k1[i], d/dx_k = -e_i - dt/2 jx_k[i]
                grad[(k + 1) * n + i] += wi;
                grad[k * n + i] -= wi;
                for j in 0..n {
                    grad[(k + 1) * n + j] -= wi * self.dt / 2.0 * jx_k1[i][j];
                    grad[k * n + j] -= wi * self.dt / 2.0 * jx_k[i][j];
                }
                for j in 0..m {
                    grad[base + (k + 1) * m + j] -= wi * self.dt / 2.0 * ju_k1[i][j];
                    grad[base + k * m + j] -= wi * self.dt / 2.0 * ju_k[i][j];
                }
            }
        }
        true
    }
}

/// Input/state boxes for the transcription.
#[derive(Debug, Clone)]
pub struct OcpBounds {
    /// (lo, hi) per input channel, in `input_names` order.
    pub inputs: Vec<(f64, f64)>,
    /// Optional per-state box; defaults to ±`DEFAULT_STATE_BOUND`.
    pub states: Option<Vec<(f64, f64)>>,
}

#[allow(clippy::too_many_arguments)]
pub fn transcribe(
    sym: SymbolicModel,
    spec: &StlFormula,
    dt: f64,
    horizon: f64,
    bounds: &OcpBounds,
    smoothing: f64,
    x0: Vec<f64>,
    input_names: Vec<String>,
    output_names: Vec<String>,
) -> Result<OcpProblem> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("collocation step must be positive".into()));
    }
    let t_steps = (horizon / dt).round() as usize;
    if t_steps == 0 {
        return Err(Error::InvalidConfig("horizon shorter than one step".into()));
    }
    if spec.horizon() > t_steps as f64 * dt + 1e-9 {
        return Err(Error::HorizonExceeded {
            horizon: spec.horizon(),
            t: 0.0,
            end: t_steps as f64 * dt,
        });
    }
    if x0.len() != sym.lifting.dim() {
        return Err(Error::InvalidConfig(
            "initial state does not match lifted dimension".into(),
        ));
    }
    if bounds.inputs.len() != input_names.len() {
        return Err(Error::InvalidConfig("one bound pair per input required".into()));
    }
    let neg_spec = spec.clone().negated().to_nnf()?;
    let n = sym.lifting.dim();
    let (x_lo, x_hi) = match &bounds.states {
        Some(b) => {
            if b.len() != n {
                return Err(Error::InvalidConfig("one bound pair per state required".into()));
            }
            (b.iter().map(|p| p.0).collect(), b.iter().map(|p| p.1).collect())
        }
        None => (
            vec![-DEFAULT_STATE_BOUND; n],
            vec![DEFAULT_STATE_BOUND; n],
        ),
    };
    let jac = sym.jacobians(input_names.len());
    Ok(OcpProblem {
        sym,
        neg_spec,
        dt,
        t_steps,
        smoothing,
        u_lo: bounds.inputs.iter().map(|p| p.0).collect(),
        u_hi: bounds.inputs.iter().map(|p| p.1).collect(),
        x_lo,
        x_hi,
        x0,
        input_names,
        output_names,
        jac,
    })
}

/// Zero-order-hold input from the solved decision vector: u_0..u_{T-1} on
/// the collocation grid, clipped to bounds.
pub fn extract_input(p: &OcpProblem, v: &[f64]) -> InputSignal {
    let breakpoints: Vec<f64> = (0..p.t_steps).map(|k| k as f64 * p.dt).collect();
    let channels = p
        .input_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let vals = (0..p.t_steps)
                .map(|k| p.input(v, k)[j].clamp(p.u_lo[j], p.u_hi[j]))
                .collect();
            (name.clone(), vals)
        })
        .collect();
    InputSignal::new(breakpoints, channels).expect("grid is strictly increasing")
}
