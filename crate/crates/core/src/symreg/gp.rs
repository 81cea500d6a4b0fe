//! Genetic programming over expression trees: tournament selection, subtree
//! crossover, point mutation, subtree replacement, constant jitter, and
//! quasi-Newton constant refinement, maintaining a Pareto front of the best
//! candidate per complexity level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expr::{BinOp, ExprTree, UnaryOp};
use super::sample::DerivativeSample;
use crate::opt::lbfgs_minimize;

/// Fitness assigned when evaluation is flagged (guarded division,
/// non-finite value).
const PENALTY_MSE: f64 = 1e12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SrConfig {
    pub iterations: usize,
    pub population: usize,
    pub complexity_cap: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub const_opt_steps: usize,
    pub seed: u64,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            population: 50,
            complexity_cap: 30,
            tournament: 5,
            crossover_rate: 0.7,
            mutation_rate: 0.25,
            const_opt_steps: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub expr: ExprTree,
    pub complexity: usize,
    pub mse: f64,
}

/// Derivative MSE of `expr` against the row targets.
pub fn derivative_mse(expr: &ExprTree, samples: &[DerivativeSample], row: usize) -> f64 {
    let mut sum = 0.0;
    for s in samples {
        match expr.eval(&s.z, &s.u) {
            Some(v) => {
                let e = v - s.target[row];
                sum += e * e;
            }
            None => return PENALTY_MSE,
        }
    }
    let mse = sum / samples.len() as f64;
    if mse.is_finite() {
        mse.min(PENALTY_MSE)
    } else {
        PENALTY_MSE
    }
}

const UNARY_OPS: [UnaryOp; 3] = [UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos];
const BIN_OPS: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];

struct Gen<'a> {
    n_z: usize,
    n_u: usize,
    rng: &'a mut ChaCha8Rng,
}

impl Gen<'_> {
    fn terminal(&mut self) -> ExprTree {
        let n_vars = self.n_z + self.n_u;
        let pick = self.rng.gen_range(0..n_vars + 1);
        if pick < self.n_z {
            ExprTree::Z(pick)
        } else if pick < n_vars {
            ExprTree::U(pick - self.n_z)
        } else {
            ExprTree::Const(round3(self.rng.gen_range(-3.0..3.0)))
        }
    }

    fn grow(&mut self, depth: usize) -> ExprTree {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.terminal();
        }
        if self.rng.gen_bool(0.25) {
            let op = UNARY_OPS[self.rng.gen_range(0..UNARY_OPS.len())];
            ExprTree::Unary(op, Box::new(self.grow(depth - 1)))
        } else {
            let op = BIN_OPS[self.rng.gen_range(0..BIN_OPS.len())];
            ExprTree::Binary(
                op,
                Box::new(self.grow(depth - 1)),
                Box::new(self.grow(depth - 1)),
            )
        }
    }
}

/// Keeps initial constants on a coarse lattice; refinement supplies digits.
fn round3(v: f64) -> f64 {
    (v * 8.0).round() / 8.0
}

fn mutate(expr: &ExprTree, g: &mut Gen<'_>) -> ExprTree {
    let n = expr.complexity();
    let k = g.rng.gen_range(0..n);
    match g.rng.gen_range(0..3) {
        // Point mutation: swap an operator or terminal in place.
        0 => {
            let new = match expr.node(k) {
                ExprTree::Unary(_, a) => {
                    let op = UNARY_OPS[g.rng.gen_range(0..UNARY_OPS.len())];
                    ExprTree::Unary(op, a.clone())
                }
                ExprTree::Binary(_, a, b) => {
                    let op = BIN_OPS[g.rng.gen_range(0..BIN_OPS.len())];
                    ExprTree::Binary(op, a.clone(), b.clone())
                }
                _ => g.terminal(),
            };
            expr.with_node(k, &new)
        }
        // Subtree replacement.
        1 => {
            let new = g.grow(2);
            expr.with_node(k, &new)
        }
        // Constant jitter (falls back to point mutation without constants).
        _ => {
            let consts = expr.constants();
            if consts.is_empty() {
                let new = g.terminal();
                return expr.with_node(k, &new);
            }
            let mut vals = consts;
            let i = g.rng.gen_range(0..vals.len());
            vals[i] += g.rng.gen_range(-0.5..0.5) * (vals[i].abs() + 1.0) * 0.2;
            expr.with_constants(&vals)
        }
    }
}

fn crossover(a: &ExprTree, b: &ExprTree, rng: &mut ChaCha8Rng) -> ExprTree {
    let ka = rng.gen_range(0..a.complexity());
    let kb = rng.gen_range(0..b.complexity());
    a.with_node(ka, b.node(kb))
}

fn tournament<'p>(
    pop: &'p [(ExprTree, f64)],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> &'p ExprTree {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..size {
        let c = rng.gen_range(0..pop.len());
        if pop[c].1 < pop[best].1 {
            best = c;
        }
    }
    &pop[best].0
}

/// A few L-BFGS steps on the expression's constants against derivative MSE.
fn refine_constants(
    expr: &ExprTree,
    samples: &[DerivativeSample],
    row: usize,
    steps: usize,
) -> ExprTree {
    let c0 = expr.constants();
    if c0.is_empty() || steps == 0 {
        return expr.clone();
    }
    let objective = |c: &[f64]| {
        let e = expr.with_constants(c);
        let f = derivative_mse(&e, samples, row);
        // Central differences: the constant count is tiny.
        let mut g = vec![0.0; c.len()];
        for i in 0..c.len() {
            let h = 1e-5 * (1.0 + c[i].abs());
            let mut cp = c.to_vec();
            let mut cm = c.to_vec();
            cp[i] += h;
            cm[i] -= h;
            let fp = derivative_mse(&expr.with_constants(&cp), samples, row);
            let fm = derivative_mse(&expr.with_constants(&cm), samples, row);
            g[i] = (fp - fm) / (2.0 * h);
        }
        (f, g)
    };
    let out = lbfgs_minimize(&c0, steps, 1e-12, objective);
    let refined = expr.with_constants(&out.x);
    if derivative_mse(&refined, samples, row) < derivative_mse(expr, samples, row) {
        refined
    } else {
        expr.clone()
    }
}

/// Evolves one expression population per driven row and returns each row's
/// Pareto front: for every complexity level, the best candidate found, with
/// dominated levels pruned (MSE non-increasing in complexity).
pub fn evolve(samples: &[DerivativeSample], config: &SrConfig) -> Vec<Vec<Candidate>> {
    assert!(!samples.is_empty(), "need derivative samples");
    let n_rows = samples[0].target.len();
    let n_z = samples[0].z.len();
    let n_u = samples[0].u.len();
    (0..n_rows)
        .map(|row| evolve_row(samples, config, row, n_z, n_u))
        .collect()
}

fn evolve_row(
    samples: &[DerivativeSample],
    config: &SrConfig,
    row: usize,
    n_z: usize,
    n_u: usize,
) -> Vec<Candidate> {
    // Fixed per-row stream so rows are independent of each other.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x5eed_0000 + row as u64));
    let fitness = |e: &ExprTree| derivative_mse(e, samples, row);

    // Best-by-complexity archive.
    let mut archive: Vec<Option<Candidate>> = vec![None; config.complexity_cap + 1];
    let record = |expr: &ExprTree,
                      mse: f64,
                      archive: &mut Vec<Option<Candidate>>| {
        let c = expr.complexity();
        if c > config.complexity_cap || mse >= PENALTY_MSE {
            return;
        }
        let slot = &mut archive[c];
        if slot.as_ref().is_none_or(|b| mse < b.mse) {
            *slot = Some(Candidate {
                expr: expr.clone(),
                complexity: c,
                mse,
            });
        }
    };

    let mut pop: Vec<(ExprTree, f64)> = Vec::with_capacity(config.population);
    {
        let mut g = Gen {
            n_z,
            n_u,
            rng: &mut rng,
        };
        for i in 0..config.population {
            // Ramped depths for initial diversity.
            let depth = 1 + i % 4;
            let e = g.grow(depth);
            pop.push((e, 0.0));
        }
    }
    for p in &mut pop {
        p.1 = fitness(&p.0);
        record(&p.0, p.1, &mut archive);
    }

    for _gen in 0..config.iterations {
        let mut next = Vec::with_capacity(config.population);
        // Elitism: keep the single best individual.
        let best = pop
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .clone();
        next.push(best);
        while next.len() < config.population {
            let parent = tournament(&pop, config.tournament, &mut rng).clone();
            let roll: f64 = rng.gen();
            let child = if roll < config.crossover_rate {
                let other = tournament(&pop, config.tournament, &mut rng).clone();
                crossover(&parent, &other, &mut rng)
            } else if roll < config.crossover_rate + config.mutation_rate {
                let mut g = Gen {
                    n_z,
                    n_u,
                    rng: &mut rng,
                };
                mutate(&parent, &mut g)
            } else {
                parent.clone()
            };
            let child = if child.complexity() > config.complexity_cap {
                parent
            } else {
                child
            };
            let f = fitness(&child);
            record(&child, f, &mut archive);
            next.push((child, f));
        }
        pop = next;
    }

    // Refine constants of archive entries, re-record (refinement may move an
    // entry below a cheaper one), then prune to a proper Pareto front.
    let snapshot: Vec<Candidate> = archive.iter().flatten().cloned().collect();
    for cand in &snapshot {
        let refined = refine_constants(&cand.expr, samples, row, config.const_opt_steps);
        let mse = fitness(&refined);
        record(&refined, mse, &mut archive);
    }

    let mut front = Vec::new();
    let mut best_so_far = f64::INFINITY;
    for cand in archive.into_iter().flatten() {
        if cand.mse < best_so_far {
            best_so_far = cand.mse;
            front.push(cand);
        }
    }
    front
}
