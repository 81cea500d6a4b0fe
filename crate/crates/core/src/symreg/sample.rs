//! Derivative data for distillation: lifted states and inputs visited by the
//! surrogate on the dataset, optionally padded with Gaussian-perturbed
//! points, with targets evaluated exactly on the surrogate field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::sim::{InputSignal, Trace};
use crate::surrogate::SurrogateModel;

#[derive(Debug, Clone)]
pub struct DerivativeSample {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// One ż target per driven row of the lifting.
    pub target: Vec<f64>,
}

/// Standard normal via Box-Muller (keeps the dependency footprint small).
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Samples (z, u, ż) at the surrogate's trajectory points over each trace
/// (at `stride` times the trace period), plus `n_extra` Gaussian-perturbed
/// points with per-dimension scale `perturb_scale` x the std of visited
/// values.
pub fn sample_derivatives(
    model: &SurrogateModel,
    dataset: &[Trace],
    stride: usize,
    n_extra: usize,
    perturb_scale: f64,
    seed: u64,
) -> Result<Vec<DerivativeSample>> {
    let mut points: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for trace in dataset {
        let z0 = model.augment_initial_state(trace)?;
        let n = (trace.len() - 1) / stride + 1;
        let t_grid: Vec<f64> = (0..n).map(|i| trace.times[i * stride]).collect();
        let input = InputSignal::new(trace.times.clone(), trace.inputs.clone())?;
        let traj = model.simulate_lifted(&z0, &input, &t_grid)?;
        for (z, &t) in traj.iter().zip(&t_grid) {
            points.push((z.clone(), input.value_at(t)));
        }
    }

    let dim = model.lifting.dim();
    let n_u = points.first().map_or(0, |(_, u)| u.len());
    let std_of = |sel: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> f64| {
        let mean = points.iter().map(|p| sel(p)).sum::<f64>() / points.len() as f64;
        let var = points.iter().map(|p| (sel(p) - mean).powi(2)).sum::<f64>()
            / points.len() as f64;
        var.sqrt()
    };
    let z_std: Vec<f64> = (0..dim).map(|i| std_of(&move |p| p.0[i])).collect();
    let u_std: Vec<f64> = (0..n_u).map(|j| std_of(&move |p| p.1[j])).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_count = points.len();
    for _ in 0..n_extra {
        let k = rng.gen_range(0..base_count);
        let (bz, bu) = &points[k];
        let z: Vec<f64> = bz
            .iter()
            .zip(&z_std)
            .map(|(v, s)| v + perturb_scale * s * normal(&mut rng))
            .collect();
        let u: Vec<f64> = bu
            .iter()
            .zip(&u_std)
            .map(|(v, s)| v + perturb_scale * s * normal(&mut rng))
            .collect();
        points.push((z, u));
    }

    Ok(points
        .into_iter()
        .map(|(z, u)| {
            let mut dz = vec![0.0; dim];
            model.rhs(&z, &u, &mut dz);
            let target = model
                .lifting
                .driven_rows()
                .iter()
                .map(|&r| dz[r])
                .collect();
            DerivativeSample { z, u, target }
        })
        .collect())
}
