//! Surrogate training: full-batch ADAM followed by quasi-Newton refinement,
//! with gradients from exact reverse-mode differentiation through the
//! fixed-step RK4 unroll.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::lifting::StateLifting;
use super::mlp::MlpVectorField;
use super::model::{lifted_initial_state, KnownDynamics, SurrogateModel};
use crate::error::{Error, Result};
use crate::opt::{lbfgs_minimize, Adam, AdamConfig};
use crate::sim::InputSignal;
use crate::sim::Trace;

pub const HIDDEN_SIZES: [usize; 2] = [16, 8];

/// Loss assigned to a diverged rollout so the optimizers steer away from it.
const DIVERGED_LOSS: f64 = 1e12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_epochs: usize,
    pub quasi_newton_iters: usize,
    /// Rollout step = trace period x this stride; observations are matched
    /// at the coarse grid points.
    pub solve_stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-2,
            adam_epochs: 300,
            quasi_newton_iters: 20,
            solve_stride: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.adam_epochs == 0 || self.solve_stride == 0 {
            return Err(Error::InvalidConfig(
                "training rate, epochs, and stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One trace prepared for rollout: coarse grid, matched observations, input.
struct Prepared {
    z0: Vec<f64>,
    t_grid: Vec<f64>,
    /// Observed outputs at each coarse grid point, channel-major.
    obs: Vec<Vec<f64>>,
    input: InputSignal,
}

fn prepare(lifting: &StateLifting, trace: &Trace, stride: usize) -> Result<Prepared> {
    if trace.len() < 2 {
        return Err(Error::InvalidSignal("trace too short to train on".into()));
    }
    let n_obs = (trace.len() - 1) / stride + 1;
    if n_obs < 2 {
        return Err(Error::InvalidConfig(
            "solve stride leaves fewer than two observations".into(),
        ));
    }
    let t_grid: Vec<f64> = (0..n_obs).map(|i| trace.times[i * stride]).collect();
    let obs: Vec<Vec<f64>> = trace
        .outputs
        .iter()
        .map(|(_, y)| (0..n_obs).map(|i| y[i * stride]).collect())
        .collect();
    let input = InputSignal::new(
        trace.times.clone(),
        trace.inputs.clone(),
    )?;
    Ok(Prepared {
        z0: lifted_initial_state(lifting, trace)?,
        t_grid,
        obs,
        input,
    })
}

/// Per-trace MSE over grid points and output channels.
fn trace_loss(model: &SurrogateModel, p: &Prepared) -> f64 {
    let Ok(traj) = model.simulate_lifted(&p.z0, &p.input, &p.t_grid) else {
        return DIVERGED_LOSS;
    };
    let n = p.t_grid.len() * p.obs.len();
    let mut sum = 0.0;
    for (k, &row) in model.lifting.output_rows().iter().enumerate() {
        for (i, z) in traj.iter().enumerate() {
            let e = z[row] - p.obs[k][i];
            sum += e * e;
        }
    }
    sum / n as f64
}

/// Sum over traces of the per-trace MSE.
pub fn dataset_loss(model: &SurrogateModel, dataset: &[Trace], stride: usize) -> Result<f64> {
    let mut total = 0.0;
    for trace in dataset {
        total += trace_loss(model, &prepare(&model.lifting, trace, stride)?);
    }
    Ok(total)
}

/// Loss and gradient with respect to the MLP parameters, by reverse-mode
/// differentiation through the RK4 unroll (stages recomputed backward from
/// the stored step states).
pub fn loss_gradient(
    model: &SurrogateModel,
    dataset: &[Trace],
    stride: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut grad = vec![0.0; model.mlp.n_params()];
    for trace in dataset {
        let p = prepare(&model.lifting, trace, stride)?;
        let (l, g) = trace_loss_gradient(model, &p);
        total += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((total, grad))
}

fn trace_loss_gradient(model: &SurrogateModel, p: &Prepared) -> (f64, Vec<f64>) {
    let n_params = model.mlp.n_params();
    let Ok(traj) = model.simulate_lifted(&p.z0, &p.input, &p.t_grid) else {
        return (DIVERGED_LOSS, vec![0.0; n_params]);
    };
    let dim = model.lifting.dim();
    let n = p.t_grid.len() * p.obs.len();
    let mut loss = 0.0;
    // dL/dz at each grid point from the MSE terms.
    let mut local = vec![vec![0.0; dim]; traj.len()];
    for (k, &row) in model.lifting.output_rows().iter().enumerate() {
        for (i, z) in traj.iter().enumerate() {
            let e = z[row] - p.obs[k][i];
            loss += e * e;
            local[i][row] = 2.0 * e / n as f64;
        }
    }
    loss /= n as f64;

    let mut grad = vec![0.0; n_params];
    // lambda = dL/dz_{k+1}, swept backward across steps.
    let mut lambda = local.last().unwrap().clone();
    for step in (0..traj.len() - 1).rev() {
        let t = p.t_grid[step];
        let h = p.t_grid[step + 1] - t;
        let u = p.input.value_at(t);
        let z = &traj[step];
        // Recompute the forward stages.
        let mut k1 = vec![0.0; dim];
        model.rhs(z, &u, &mut k1);
        let z2: Vec<f64> = z.iter().zip(&k1).map(|(a, b)| a + h / 2.0 * b).collect();
        let mut k2 = vec![0.0; dim];
        model.rhs(&z2, &u, &mut k2);
        let z3: Vec<f64> = z.iter().zip(&k2).map(|(a, b)| a + h / 2.0 * b).collect();
        let mut k3 = vec![0.0; dim];
        model.rhs(&z3, &u, &mut k3);
        let z4: Vec<f64> = z.iter().zip(&k3).map(|(a, b)| a + h * b).collect();

        // z_{k+1} = z + h/6 (k1 + 2 k2 + 2 k3 + k4); pull lambda back.
        let bar_k4: Vec<f64> = lambda.iter().map(|l| h / 6.0 * l).collect();
        let g4 = model.rhs_vjp(&z4, &u, &bar_k4, &mut grad);
        let bar_k3: Vec<f64> = lambda
            .iter()
            .zip(&g4)
            .map(|(l, g)| h / 3.0 * l + h * g)
            .collect();
        let g3 = model.rhs_vjp(&z3, &u, &bar_k3, &mut grad);
        let bar_k2: Vec<f64> = lambda
            .iter()
            .zip(&g3)
            .map(|(l, g)| h / 3.0 * l + h / 2.0 * g)
            .collect();
        let g2 = model.rhs_vjp(&z2, &u, &bar_k2, &mut grad);
        let bar_k1: Vec<f64> = lambda
            .iter()
            .zip(&g2)
            .map(|(l, g)| h / 6.0 * l + h / 2.0 * g)
            .collect();
        let g1 = model.rhs_vjp(z, &u, &bar_k1, &mut grad);

        for i in 0..dim {
            lambda[i] += g1[i] + g2[i] + g3[i] + g4[i] + local[step][i];
        }
    }
    (loss, grad)
}

/// Trains a fresh MLP on the dataset: seeded init, ADAM, then L-BFGS; the
/// parameter vector with the lowest recorded loss wins.
pub fn train(
    dataset: &[Trace],
    config: &TrainConfig,
    lifting: StateLifting,
    known: KnownDynamics,
) -> Result<SurrogateModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::TrainingFailed("empty dataset".into()));
    }
    let n_inputs = dataset[0].inputs.len();
    let mut sizes = vec![lifting.dim() + n_inputs];
    sizes.extend_from_slice(&HIDDEN_SIZES);
    sizes.push(lifting.n_outputs());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mlp = MlpVectorField::new_seeded(&sizes, &mut rng);
    let mut model = SurrogateModel::new(lifting, known, mlp);

    let prepared: Vec<Prepared> = dataset
        .iter()
        .map(|t| prepare(&model.lifting, t, config.solve_stride))
        .collect::<Result<_>>()?;
    let eval = |model: &SurrogateModel| -> (f64, Vec<f64>) {
        let mut total = 0.0;
        let mut grad = vec![0.0; model.mlp.n_params()];
        for p in &prepared {
            let (l, g) = trace_loss_gradient(model, p);
            total += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (total, grad)
    };

    let mut params = model.mlp.params();
    let mut best = (f64::INFINITY, params.clone());
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
        params.len(),
    );
    for _ in 0..config.adam_epochs {
        let (loss, grad) = eval(&model);
        if loss < best.0 {
            best = (loss, params.clone());
        }
        adam.step(&mut params, &grad);
        model.mlp.set_params(&params);
    }
    let out = lbfgs_minimize(&params, config.quasi_newton_iters, 1e-12, |p| {
        model.mlp.set_params(p);
        eval(&model)
    });
    if out.f < best.0 {
        best = (out.f, out.x);
    }
    if !best.0.is_finite() || best.0 >= DIVERGED_LOSS {
        return Err(Error::TrainingFailed(format!(
            "every evaluated parameter vector diverged (best loss {})",
            best.0
        )));
    }
    model.mlp.set_params(&best.1);
    Ok(model)
}

/// Versioned JSON model checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub known: String,
    pub model: SurrogateModel,
}

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

pub fn save_checkpoint(model: &SurrogateModel, seed: u64, path: &Path) -> Result<()> {
    let adam = AdamConfig::default();
    let ckpt = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        seed,
        adam_betas: (adam.beta1, adam.beta2),
        adam_eps: adam.eps,
        known: model.known.name().to_string(),
        model: model.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "checkpoint schema {} unsupported (expected {})",
            ckpt.schema_version, CHECKPOINT_SCHEMA_VERSION
        )));
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{integrate_rk4, uniform_grid};
    use crate::surrogate::lifting::build_lifting;

    /// dx/dt = -x + u, sampled at 0.01 s.
    fn synthetic_trace(u_val: f64, x0: f64, seconds: f64) -> Trace {
        let h = 0.01;
        let steps = (seconds / h).round() as usize;
        let grid = uniform_grid(h, steps);
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

    #[test]
    fn perfect_model_has_zero_loss() {
        // Data generated by the surrogate itself scores (numerically) zero.
        let lifting = build_lifting(&[1]);
        let mlp = MlpVectorField::zeros(&[2, 4, 1]);
        let model = SurrogateModel::new(lifting, KnownDynamics::NegState, mlp);
        let trace = synthetic_trace(0.0, 1.0, 2.0);
        let loss = dataset_loss(&model, &[trace], 10).unwrap();
        assert!(loss < 1e-10, "{loss}");
    }

    #[test]
    fn constant_offset_loss_is_mse() {
        let lifting = build_lifting(&[1]);
        let mlp = MlpVectorField::zeros(&[2, 4, 1]);
        let model = SurrogateModel::new(lifting, KnownDynamics::Zero, mlp);
        // Zero field from z0 = 1 predicts y = 1; observations are all 0.
        let h = 0.01;
        let grid = uniform_grid(h, 100);
        let trace = Trace {
            x0: vec![1.0],
            times: grid.clone(),
            inputs: vec![("u".into(), vec![0.0; grid.len()])],
            outputs: vec![("y".into(), {
                let mut y = vec![0.0; grid.len()];
                y[0] = 1.0; // z0 comes from the first sample
                y
            })],
        };
        let loss = dataset_loss(&model, &[trace], 10).unwrap();
        // 11 coarse points, prediction 1, target 0 except the first.
        assert!((loss - 10.0 / 11.0).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn loss_is_additive_over_traces() {
        let lifting = build_lifting(&[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = MlpVectorField::new_seeded(&[2, 4, 1], &mut rng);
        let model = SurrogateModel::new(lifting, KnownDynamics::Zero, mlp);
        let t1 = synthetic_trace(1.0, 0.0, 2.0);
        let t2 = synthetic_trace(-1.0, 0.5, 2.0);
        let l1 = dataset_loss(&model, &[t1.clone()], 10).unwrap();
        let l2 = dataset_loss(&model, &[t2.clone()], 10).unwrap();
        let both = dataset_loss(&model, &[t1, t2], 10).unwrap();
        assert!((both - (l1 + l2)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let lifting = build_lifting(&[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mlp = MlpVectorField::new_seeded(&[2, 5, 3, 1], &mut rng);
        let mut model = SurrogateModel::new(lifting, KnownDynamics::NegState, mlp);
        let trace = synthetic_trace(0.7, 0.2, 0.5);
        let (_, grad) = loss_gradient(&model, std::slice::from_ref(&trace), 5).unwrap();
        let p0 = model.mlp.params();
        let h = 1e-6;
        for i in (0..p0.len()).step_by(9) {
            let mut p = p0.clone();
            p[i] += h;
            model.mlp.set_params(&p);
            let fp = dataset_loss(&model, std::slice::from_ref(&trace), 5).unwrap();
            p[i] -= 2.0 * h;
            model.mlp.set_params(&p);
            let fm = dataset_loss(&model, std::slice::from_ref(&trace), 5).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / scale < 1e-4,
                "param {i}: fd {fd} vs adjoint {}",
                grad[i]
            );
            model.mlp.set_params(&p0);
        }
    }

    #[test]
    fn zero_gradient_on_reproduced_data() {
        let lifting = build_lifting(&[1]);
        let mlp = MlpVectorField::zeros(&[2, 4, 1]);
        let model = SurrogateModel::new(lifting, KnownDynamics::NegState, mlp);
        let trace = synthetic_trace(0.0, 1.0, 1.0);
        let (loss, grad) = loss_gradient(&model, &[trace], 10).unwrap();
        assert!(loss < 1e-10);
        assert!(grad.iter().all(|g| g.abs() < 1e-4), "{:?}", &grad[..4]);
    }

    #[test]
    fn gradient_is_additive_over_traces() {
        let lifting = build_lifting(&[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mlp = MlpVectorField::new_seeded(&[2, 6, 1], &mut rng);
        let model = SurrogateModel::new(lifting, KnownDynamics::Zero, mlp);
        let t1 = synthetic_trace(0.3, 0.1, 1.0);
        let t2 = synthetic_trace(-0.8, 0.9, 1.0);
        let (_, g1) = loss_gradient(&model, std::slice::from_ref(&t1), 10).unwrap();
        let (_, g2) = loss_gradient(&model, std::slice::from_ref(&t2), 10).unwrap();
        let (_, g12) = loss_gradient(&model, &[t1, t2], 10).unwrap();
        for i in 0..g12.len() {
            assert!((g12[i] - (g1[i] + g2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_prior_beats_cold_start() {
        let traces: Vec<Trace> = vec![synthetic_trace(0.0, 1.0, 3.0)];
        let lifting = build_lifting(&[1]);
        let hybrid = SurrogateModel::new(
            lifting.clone(),
            KnownDynamics::NegState,
            MlpVectorField::zeros(&[2, 16, 8, 1]),
        );
        let cold = SurrogateModel::new(
            lifting,
            KnownDynamics::Zero,
            MlpVectorField::zeros(&[2, 16, 8, 1]),
        );
        let lh = dataset_loss(&hybrid, &traces, 10).unwrap();
        let lc = dataset_loss(&cold, &traces, 10).unwrap();
        assert!(lh < lc, "hybrid {lh} vs cold {lc}");
    }

    #[test]
    fn training_fits_linear_system() {
        let traces = vec![
            synthetic_trace(1.0, 0.0, 5.0),
            synthetic_trace(-1.0, 0.0, 5.0),
            synthetic_trace(0.5, 1.0, 5.0),
        ];
        let cfg = TrainConfig {
            adam_epochs: 150,
            seed: 2,
            ..TrainConfig::default()
        };
        let model = train(&traces, &cfg, build_lifting(&[1]), KnownDynamics::Zero).unwrap();
        let loss = dataset_loss(&model, &traces, cfg.solve_stride).unwrap();
        assert!(loss < 1e-3, "final loss {loss}");
    }

    #[test]
    fn training_is_deterministic() {
        let traces = vec![synthetic_trace(0.4, 0.2, 2.0)];
        let cfg = TrainConfig {
            adam_epochs: 30,
            quasi_newton_iters: 5,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&traces, &cfg, build_lifting(&[1]), KnownDynamics::Zero).unwrap();
        let b = train(&traces, &cfg, build_lifting(&[1]), KnownDynamics::Zero).unwrap();
        assert_eq!(a.mlp.params(), b.mlp.params());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = std::env::temp_dir().join("falconn-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mlp = MlpVectorField::new_seeded(&[3, 16, 8, 2], &mut rng);
        let model = SurrogateModel::new(build_lifting(&[1, 1]), KnownDynamics::Zero, mlp);
        save_checkpoint(&model, 23, &path).unwrap();
        let ckpt = load_checkpoint(&path).unwrap();
        assert_eq!(ckpt.model.mlp.params(), model.mlp.params());
        assert_eq!(ckpt.model.lifting, model.lifting);
        assert_eq!(ckpt.seed, 23);
    }
}
