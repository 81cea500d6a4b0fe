//! Shared test infrastructure: an independent brute-force robustness oracle
//! written directly from the recursive quantitative semantics, a Boolean
//! satisfaction checker, and a seeded random (formula, signal) generator.
//!
//! The oracle deliberately avoids the library's table-based evaluator: it
//! recurses over anchor indices and aggregates with plain loops.

#![allow(dead_code)]

use falconn_core::signal::{interval_indices, SampledSignal};
use falconn_core::stl::{Expr, Interval, Predicate, StlFormula};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Brute-force robustness, one clause per operator of the quantitative
/// semantics. Panics on horizon mismatch (the generator never produces one).
pub fn oracle_robustness(f: &StlFormula, s: &SampledSignal, t: usize) -> f64 {
    let times = s.times();
    match f {
        StlFormula::Pred(p) => eval_pred(p, s, t),
        StlFormula::NegPred(p) => -eval_pred(p, s, t),
        StlFormula::Not(g) => -oracle_robustness(g, s, t),
        StlFormula::And(fs) => fs
            .iter()
            .map(|g| oracle_robustness(g, s, t))
            .fold(f64::INFINITY, f64::min),
        StlFormula::Or(fs) => fs
            .iter()
            .map(|g| oracle_robustness(g, s, t))
            .fold(f64::NEG_INFINITY, f64::max),
        StlFormula::Globally(iv, g) => {
            let mut v = f64::INFINITY;
            for j in interval_indices(times, times[t], iv.a, iv.b).unwrap() {
                v = v.min(oracle_robustness(g, s, j));
            }
            v
        }
        StlFormula::Finally(iv, g) => {
            let mut v = f64::NEG_INFINITY;
            for j in interval_indices(times, times[t], iv.a, iv.b).unwrap() {
                v = v.max(oracle_robustness(g, s, j));
            }
            v
        }
        StlFormula::Until(iv, l, r) => {
            let range = interval_indices(times, times[t], iv.a, iv.b).unwrap();
            let start = range.start;
            let mut best = f64::NEG_INFINITY;
            for j in range {
                let mut inner = oracle_robustness(r, s, j);
                for jj in start..=j {
                    inner = inner.min(oracle_robustness(l, s, jj));
                }
                best = best.max(inner);
            }
            best
        }
    }
}

fn eval_pred(p: &Predicate, s: &SampledSignal, t: usize) -> f64 {
    eval_expr(&p.expr, s, t)
}

fn eval_expr(e: &Expr, s: &SampledSignal, t: usize) -> f64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Chan(name) => s.value(s.channel_index(name).unwrap(), t),
        Expr::Add(a, b) => eval_expr(a, s, t) + eval_expr(b, s, t),
        Expr::Sub(a, b) => eval_expr(a, s, t) - eval_expr(b, s, t),
        Expr::Mul(a, b) => eval_expr(a, s, t) * eval_expr(b, s, t),
        Expr::Div(a, b) => eval_expr(a, s, t) / eval_expr(b, s, t),
        Expr::Neg(a) => -eval_expr(a, s, t),
        Expr::Abs(a) => eval_expr(a, s, t).abs(),
    }
}

/// Boolean satisfaction checker written from the qualitative semantics.
pub fn oracle_satisfies(f: &StlFormula, s: &SampledSignal, t: usize) -> bool {
    let times = s.times();
    match f {
        StlFormula::Pred(p) => eval_pred(p, s, t) > 0.0,
        StlFormula::NegPred(p) => !(eval_pred(p, s, t) > 0.0),
        StlFormula::Not(g) => !oracle_satisfies(g, s, t),
        StlFormula::And(fs) => fs.iter().all(|g| oracle_satisfies(g, s, t)),
        StlFormula::Or(fs) => fs.iter().any(|g| oracle_satisfies(g, s, t)),
        StlFormula::Globally(iv, g) => interval_indices(times, times[t], iv.a, iv.b)
            .unwrap()
            .all(|j| oracle_satisfies(g, s, j)),
        StlFormula::Finally(iv, g) => interval_indices(times, times[t], iv.a, iv.b)
            .unwrap()
            .any(|j| oracle_satisfies(g, s, j)),
        StlFormula::Until(iv, l, r) => {
            let range = interval_indices(times, times[t], iv.a, iv.b).unwrap();
            let start = range.start;
            for j in range {
                if oracle_satisfies(r, s, j)
                    && (start..=j).all(|jj| oracle_satisfies(l, s, jj))
                {
                    return true;
                }
            }
            false
        }
    }
}

/// Upper bound on |smooth(k) - exact| at anchor `t`: each soft aggregation
/// of arity m contributes at most ln(m)/k, compounding additively across
/// nesting levels. Also returns the worst-case (depth, max arity).
pub fn lse_bound(f: &StlFormula, s: &SampledSignal, t: usize, k: f64) -> f64 {
    let times = s.times();
    match f {
        StlFormula::Pred(_) | StlFormula::NegPred(_) => 0.0,
        StlFormula::Not(g) => lse_bound(g, s, t, k),
        StlFormula::And(fs) | StlFormula::Or(fs) => {
            let child = fs
                .iter()
                .map(|g| lse_bound(g, s, t, k))
                .fold(0.0, f64::max);
            child + (fs.len() as f64).ln() / k
        }
        StlFormula::Globally(iv, g) | StlFormula::Finally(iv, g) => {
            let range = interval_indices(times, times[t], iv.a, iv.b).unwrap();
            let m = range.len() as f64;
            let child = range.map(|j| lse_bound(g, s, j, k)).fold(0.0, f64::max);
            child + m.ln() / k
        }
        StlFormula::Until(iv, l, r) => {
            let range = interval_indices(times, times[t], iv.a, iv.b).unwrap();
            let start = range.start;
            let m_outer = range.len() as f64;
            let mut worst: f64 = 0.0;
            for j in range.clone() {
                let arity = (j - start + 2) as f64;
                let mut child = lse_bound(r, s, j, k);
                for jj in start..=j {
                    child = child.max(lse_bound(l, s, jj, k));
                }
                worst = worst.max(child + arity.ln() / k);
            }
            worst + m_outer.ln() / k
        }
    }
}

/// Number of nested min/max aggregation layers and the largest arity any
/// aggregation takes over `s` anchored at index 0.
pub fn depth_and_max_arity(f: &StlFormula, s: &SampledSignal, t: usize) -> (usize, usize) {
    let times = s.times();
    match f {
        StlFormula::Pred(_) | StlFormula::NegPred(_) => (0, 1),
        StlFormula::Not(g) => depth_and_max_arity(g, s, t),
        StlFormula::And(fs) | StlFormula::Or(fs) => {
            let (d, m) = fs
                .iter()
                .map(|g| depth_and_max_arity(g, s, t))
                .fold((0, 1), |(da, ma), (d, m)| (da.max(d), ma.max(m)));
            (d + 1, m.max(fs.len()))
        }
        StlFormula::Globally(iv, g) | StlFormula::Finally(iv, g) => {
            let range = interval_indices(times, times[t], iv.a, iv.b).unwrap();
            let arity = range.len();
            let (d, m) = range
                .map(|j| depth_and_max_arity(g, s, j))
                .fold((0, 1), |(da, ma), (d, m)| (da.max(d), ma.max(m)));
            (d + 1, m.max(arity))
        }
        StlFormula::Until(iv, l, r) => {
            let range = interval_indices(times, times[t], iv.a, iv.b).unwrap();
            let outer = range.len();
            let start = range.start;
            let mut d = 0;
            let mut m = outer;
            for j in range.clone() {
                m = m.max(j - start + 2);
                let (dj, mj) = depth_and_max_arity(r, s, j);
                d = d.max(dj);
                m = m.max(mj);
                for jj in start..=j {
                    let (dl, ml) = depth_and_max_arity(l, s, jj);
                    d = d.max(dl);
                    m = m.max(ml);
                }
            }
            (d + 2, m)
        }
    }
}

/// Random signal on a uniform grid plus a random formula whose horizon fits
/// the signal at anchor 0. Intervals are aligned to the sample grid.
pub struct RandomInstance {
    pub formula: StlFormula,
    pub signal: SampledSignal,
}

pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(8..=30usize);
    let dt = 0.5;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let channels = vec![
        (
            "y".to_string(),
            (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        ),
        (
            "u".to_string(),
            (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        ),
    ];
    let signal = SampledSignal::new(times, channels).unwrap();
    let horizon_budget = ((n - 1) as f64) * dt;
    let formula = random_formula(&mut rng, 3, horizon_budget, dt);
    RandomInstance { formula, signal }
}

fn random_formula(rng: &mut ChaCha8Rng, depth: usize, budget: f64, dt: f64) -> StlFormula {
    let choice = if depth == 0 || budget < dt {
        rng.gen_range(0..2)
    } else {
        rng.gen_range(0..7)
    };
    match choice {
        0 | 1 => {
            let ch = if rng.gen_bool(0.5) { "y" } else { "u" };
            let c = rng.gen_range(-1.5..1.5);
            let scale = rng.gen_range(0.5..2.0);
            let expr = Expr::sub(
                Expr::Mul(
                    Box::new(Expr::Const(scale)),
                    Box::new(Expr::Chan(ch.into())),
                ),
                Expr::Const(c),
            );
            let pred = Predicate::new(expr);
            if choice == 0 {
                StlFormula::Pred(pred)
            } else {
                StlFormula::NegPred(pred)
            }
        }
        2 => StlFormula::And(vec![
            random_formula(rng, depth - 1, budget, dt),
            random_formula(rng, depth - 1, budget, dt),
        ]),
        3 => StlFormula::Or(vec![
            random_formula(rng, depth - 1, budget, dt),
            random_formula(rng, depth - 1, budget, dt),
        ]),
        4 | 5 => {
            let max_steps = (budget / dt).floor() as usize;
            let a_steps = rng.gen_range(0..=max_steps.min(4));
            let b_steps = rng.gen_range(a_steps..=max_steps.min(a_steps + 6));
            let iv = Interval::new(a_steps as f64 * dt, b_steps as f64 * dt).unwrap();
            let child = random_formula(rng, depth - 1, budget - iv.b, dt);
            if choice == 4 {
                StlFormula::Globally(iv, Box::new(child))
            } else {
                StlFormula::Finally(iv, Box::new(child))
            }
        }
        _ => {
            let max_steps = (budget / dt).floor() as usize;
            let a_steps = rng.gen_range(0..=max_steps.min(3));
            let b_steps = rng.gen_range(a_steps..=max_steps.min(a_steps + 5));
            let iv = Interval::new(a_steps as f64 * dt, b_steps as f64 * dt).unwrap();
            let l = random_formula(rng, depth - 1, budget - iv.b, dt);
            let r = random_formula(rng, depth - 1, budget - iv.b, dt);
            StlFormula::Until(iv, Box::new(l), Box::new(r))
        }
    }
}
