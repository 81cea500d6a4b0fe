//! Warm start: a trapezoidal-consistent rollout of the symbolic model under
//! the candidate input, so every defect is (numerically) zero before the
//! solver runs.

use super::problem::OcpProblem;
use crate::error::{Error, Result};
use crate::sim::InputSignal;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_ITERS: usize = 50;

/// Solves the n×n system J s = r by Gaussian elimination with partial
/// pivoting; the lifted dimension is tiny.
fn dense_solve(mut j: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| j[a][col].abs().total_cmp(&j[b][col].abs()))?;
        if j[piv][col].abs() < 1e-14 {
            return None;
        }
        j.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = j[row][col] / j[col][col];
            for c in col..n {
                j[row][c] -= f * j[col][c];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = r[row];
        for c in row + 1..n {
            acc -= j[row][c] * x[c];
        }
        x[row] = acc / j[row][row];
    }
    Some(x)
}

/// Builds the full decision vector: states from an implicit-trapezoid
/// rollout under `u_init` (sampled on the collocation grid), inputs clipped
/// to bounds. The defect residual at the returned point is < 1e-8.
pub fn warm_start(p: &OcpProblem, u_init: &InputSignal) -> Result<Vec<f64>> {
    let n = p.dim();
    let m = p.n_inputs();
    let mut v = vec![0.0; p.n_vars()];
    let base = (p.t_steps + 1) * n;

    // Grid inputs, clipped.
    for k in 0..=p.t_steps {
        let uv = u_init.value_at(k as f64 * p.dt);
        if uv.len() != m {
            return Err(Error::InvalidConfig(
                "warm-start input channel count mismatch".into(),
            ));
        }
        for j in 0..m {
            v[base + k * m + j] = uv[j].clamp(p.u_lo[j], p.u_hi[j]);
        }
    }

    v[..n].copy_from_slice(&p.x0);
    for k in 0..p.t_steps {
        let xk = p.state(&v, k).to_vec();
        let uk = p.input(&v, k).to_vec();
        let uk1 = p.input(&v, k + 1).to_vec();
        let fk = p
            .field(&xk, &uk)
            .ok_or_else(|| Error::NonFiniteObjective { iter: k })?;

        // Newton on r(x) = x - xk - dt/2 (f(x, u_{k+1}) + fk).
        let mut x = xk.clone();
        for (xi, fi) in x.iter_mut().zip(&fk) {
            *xi += p.dt * fi; // explicit Euler predictor
        }
        let mut converged = false;
        for _ in 0..NEWTON_ITERS {
            let f = p
                .field(&x, &uk1)
                .ok_or_else(|| Error::NonFiniteObjective { iter: k })?;
            let r: Vec<f64> = (0..n)
                .map(|i| x[i] - xk[i] - p.dt / 2.0 * (f[i] + fk[i]))
                .collect();
            let rmax = r.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if !rmax.is_finite() {
                return Err(Error::NonFiniteObjective { iter: k });
            }
            if rmax < NEWTON_TOL {
                converged = true;
                break;
            }
            let (jx, _) = p
                .field_jacobian(&x, &uk1)
                .ok_or_else(|| Error::NonFiniteObjective { iter: k })?;
            // J = I - dt/2 df/dx
            let jac: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (if i == j { 1.0 } else { 0.0 }) - p.dt / 2.0 * jx[i][j])
                        .collect()
                })
                .collect();
            let step = dense_solve(jac, r)
                .ok_or_else(|| Error::NonFiniteObjective { iter: k })?;
            for i in 0..n {
                x[i] -= step[i];
            }
        }
        if !converged {
            return Err(Error::InvalidConfig(format!(
                "implicit trapezoid failed to converge at interval {k}"
            )));
        }
        v[(k + 1) * n..(k + 2) * n].copy_from_slice(&x);
    }
    Ok(v)
}
