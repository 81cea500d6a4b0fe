//! Symbolic surrogate: one expression per driven row on the same lifting as
//! the neural model, plus candidate selection by integrated trajectory loss.

use super::expr::{expr_jacobian, ExprTree};
use super::gp::Candidate;
use super::sample::DerivativeSample;
use crate::error::{Error, Result};
use crate::sim::{integrate_rk4, InputSignal, Trace, DIVERGENCE_LIMIT};
use crate::surrogate::{lifted_initial_state, StateLifting};

#[derive(Debug, Clone)]
pub struct SymbolicModel {
    pub lifting: StateLifting,
    /// One expression per driven row.
    pub exprs: Vec<ExprTree>,
    pub derivative_mse: Vec<f64>,
    pub trajectory_mse: f64,
}

impl SymbolicModel {
    pub fn n_inputs(&self) -> usize {
        let mut n = 0;
        for e in &self.exprs {
            max_input(e, &mut n);
        }
        n
    }

    /// ż = A z + B f(z, u); a tripped guard is driven past the divergence
    /// limit so the integrator reports it rather than silently continuing.
    pub fn rhs(&self, z: &[f64], u: &[f64], dz: &mut [f64]) {
        let f: Vec<f64> = self
            .exprs
            .iter()
            .map(|e| e.eval(z, u).unwrap_or(2.0 * DIVERGENCE_LIMIT))
            .collect();
        self.lifting.apply(z, &f, dz);
    }

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

    pub fn simulate(&self, z0: &[f64], u: &InputSignal, t_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        let traj = self.simulate_lifted(z0, u, t_grid)?;
        Ok(traj.iter().map(|z| self.lifting.outputs(z)).collect())
    }

    /// Symbolic partials of every driven-row expression: per row, gradients
    /// with respect to all z then all u.
    pub fn jacobians(&self, n_u: usize) -> Vec<(Vec<ExprTree>, Vec<ExprTree>)> {
        self.exprs
            .iter()
            .map(|e| expr_jacobian(e, self.lifting.dim(), n_u))
            .collect()
    }

    /// Plain-text one-expression-per-line form for manifests.
    pub fn to_lines(&self) -> Vec<String> {
        self.exprs.iter().map(|e| e.to_string()).collect()
    }
}

fn max_input(e: &ExprTree, n: &mut usize) {
    match e {
        ExprTree::U(j) => *n = (*n).max(j + 1),
        ExprTree::Unary(_, a) => max_input(a, n),
        ExprTree::Binary(_, a, b) => {
            max_input(a, n);
            max_input(b, n);
        }
        _ => {}
    }
}

/// Per-trace output MSE of the symbolic model, summed over the dataset.
/// `Err` means the rollout diverged (instability filter trips on this).
pub fn trajectory_mse(
    lifting: &StateLifting,
    exprs: &[ExprTree],
    dataset: &[Trace],
    stride: usize,
) -> Result<f64> {
    let model = SymbolicModel {
        lifting: lifting.clone(),
        exprs: exprs.to_vec(),
        derivative_mse: vec![],
        trajectory_mse: f64::NAN,
    };
    let mut total = 0.0;
    for trace in dataset {
        let z0 = lifted_initial_state(lifting, trace)?;
        let n = (trace.len() - 1) / stride + 1;
        let t_grid: Vec<f64> = (0..n).map(|i| trace.times[i * stride]).collect();
        let input = InputSignal::new(trace.times.clone(), trace.inputs.clone())?;
        let traj = model.simulate_lifted(&z0, &input, &t_grid)?;
        let mut sum = 0.0;
        for (k, &row) in lifting.output_rows().iter().enumerate() {
            let y = &trace.outputs[k].1;
            for (i, z) in traj.iter().enumerate() {
                let e = z[row] - y[i * stride];
                sum += e * e;
            }
        }
        total += sum / (n * lifting.n_outputs()) as f64;
    }
    Ok(total)
}

/// Numeric check that some candidate expression actually responds to the
/// inputs at the visited sample points.
fn input_driven(exprs: &[ExprTree], samples: &[DerivativeSample]) -> bool {
    if !exprs.iter().any(|e| e.depends_on_input()) {
        return false;
    }
    let n_u = samples.first().map_or(0, |s| s.u.len());
    for e in exprs {
        let (_, du) = expr_jacobian(e, samples[0].z.len(), n_u);
        for d in &du {
            for s in samples.iter().step_by(7) {
                if let Some(v) = d.eval(&s.z, &s.u) {
                    if v.abs() > 1e-9 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Picks the front member with minimal summed trajectory MSE, after the
/// input-dependence and instability filters. Single-row fronts are searched
/// exhaustively; with several driven rows, each row's choice is improved
/// coordinate-wise from the minimum-derivative-MSE combination.
pub fn select_candidate(
    fronts: &[Vec<Candidate>],
    dataset: &[Trace],
    samples: &[DerivativeSample],
    lifting: &StateLifting,
    stride: usize,
) -> Result<SymbolicModel> {
    if fronts.is_empty() || fronts.iter().any(|f| f.is_empty()) {
        return Err(Error::DistillationFailed("empty Pareto front".into()));
    }
    // Start from the derivative-MSE minimizer of each row.
    let mut choice: Vec<usize> = fronts
        .iter()
        .map(|f| {
            f.iter()
                .enumerate()
                .min_by(|a, b| a.1.mse.total_cmp(&b.1.mse))
                .unwrap()
                .0
        })
        .collect();

    let score = |choice: &[usize]| -> Option<f64> {
        let exprs: Vec<ExprTree> = choice
            .iter()
            .zip(fronts)
            .map(|(&i, f)| f[i].expr.clone())
            .collect();
        if !input_driven(&exprs, samples) {
            return None;
        }
        trajectory_mse(lifting, &exprs, dataset, stride).ok()
    };

    let mut best: Option<(f64, Vec<usize>)> = score(&choice).map(|s| (s, choice.clone()));
    for row in 0..fronts.len() {
        for i in 0..fronts[row].len() {
            let mut trial = best.as_ref().map_or(choice.clone(), |b| b.1.clone());
            trial[row] = i;
            if let Some(s) = score(&trial) {
                if best.as_ref().is_none_or(|b| s < b.0) {
                    best = Some((s, trial));
                }
            }
        }
    }
    let Some((traj, picked)) = best else {
        return Err(Error::DistillationFailed(
            "every candidate was filtered out (input-independent or unstable)".into(),
        ));
    };
    choice = picked;
    Ok(SymbolicModel {
        lifting: lifting.clone(),
        exprs: choice
            .iter()
            .zip(fronts)
            .map(|(&i, f)| f[i].expr.clone())
            .collect(),
        derivative_mse: choice.iter().zip(fronts).map(|(&i, f)| f[i].mse).collect(),
        trajectory_mse: traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::uniform_grid;
    use crate::surrogate::build_lifting;
    use crate::symreg::expr::parse_expr;

    fn linear_trace(u_val: f64, x0: f64) -> Trace {
        let h = 0.01;
        let grid = uniform_grid(h, 300);
        let input = InputSignal::constant(&["u"], &[u_val]);
        let rhs = |x: &[f64], u: &[f64], _t: f64| vec![-x[0] + u[0]];
        let traj = integrate_rk4(&rhs, &[x0], &input, &grid).unwrap();
        Trace {
            x0: vec![x0],
            times: grid.clone(),
            inputs: vec![("u".into(), vec![u_val; grid.len()])],
            outputs: vec![("y".into(), traj.iter().map(|x| x[0]).collect())],
        }
    }

    fn cand(src: &str, mse: f64) -> Candidate {
        let expr = parse_expr(src).unwrap();
        Candidate {
            complexity: expr.complexity(),
            expr,
            mse,
        }
    }

    fn linear_samples() -> Vec<DerivativeSample> {
        (0..30)
            .map(|i| {
                let z = -1.5 + 0.1 * i as f64;
                let u = (i % 3) as f64 - 1.0;
                DerivativeSample {
                    z: vec![z],
                    u: vec![u],
                    target: vec![-z + u],
                }
            })
            .collect()
    }

    #[test]
    fn exact_expression_has_tiny_trajectory_mse() {
        let lifting = build_lifting(&[1]);
        let exprs = vec![parse_expr("u1 - z1").unwrap()];
        let traces = vec![linear_trace(0.5, 1.0)];
        let mse = trajectory_mse(&lifting, &exprs, &traces, 10).unwrap();
        assert!(mse < 1e-8, "{mse}");
    }

    #[test]
    fn selection_prefers_trajectory_over_derivative_mse() {
        let lifting = build_lifting(&[1]);
        let traces = vec![linear_trace(0.5, 1.0), linear_trace(-0.5, 0.0)];
        // The wrong-sign candidate reports a (fake) lower derivative MSE but
        // simulates badly; selection must go by trajectory loss.
        let front = vec![vec![cand("z1 + u1", 1e-9), cand("u1 - z1", 1e-3)]];
        let picked =
            select_candidate(&front, &traces, &linear_samples(), &lifting, 10).unwrap();
        assert_eq!(picked.exprs[0], parse_expr("u1 - z1").unwrap());
        // Exhaustive optimality over the filtered front.
        for c in &front[0] {
            if let Ok(m) = trajectory_mse(&lifting, &[c.expr.clone()], &traces, 10) {
                assert!(picked.trajectory_mse <= m + 1e-15);
            }
        }
    }

    #[test]
    fn input_free_candidates_are_rejected() {
        let lifting = build_lifting(&[1]);
        let traces = vec![linear_trace(0.0, 1.0)];
        // -z1 fits the u=0 trace perfectly but ignores the input.
        let front = vec![vec![cand("0 - z1", 1e-12), cand("u1 - z1", 1e-6)]];
        let picked =
            select_candidate(&front, &traces, &linear_samples(), &lifting, 10).unwrap();
        assert!(picked.exprs[0].depends_on_input());
    }

    #[test]
    fn all_filtered_is_an_error() {
        let lifting = build_lifting(&[1]);
        let traces = vec![linear_trace(0.0, 1.0)];
        let front = vec![vec![cand("z1 * 2", 1e-12)]]; // unstable and input-free
        let err =
            select_candidate(&front, &traces, &linear_samples(), &lifting, 10).unwrap_err();
        assert!(matches!(err, Error::DistillationFailed(_)));
    }

    #[test]
    fn unstable_candidate_is_filtered() {
        let lifting = build_lifting(&[1]);
        let traces = vec![linear_trace(0.5, 1.0)];
        // exp(z1 * 20) + u1 depends on u but blows up in simulation.
        let front = vec![vec![
            cand("exp(z1 * 20) + u1", 1e-15),
            cand("u1 - z1", 1e-6),
        ]];
        let picked =
            select_candidate(&front, &traces, &linear_samples(), &lifting, 10).unwrap();
        assert_eq!(picked.exprs[0], parse_expr("u1 - z1").unwrap());
    }
}
