//! Scalar arithmetic expressions over signal channels, used as the left-hand
//! side of canonical `expr > 0` predicates.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::SampledSignal;

/// Smoothing constant for `abs` in smooth mode: `abs(x) ~ sqrt(x^2 + EPS)`.
pub const ABS_SMOOTH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Chan(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(lhs), Box::new(rhs))
    }

    /// Exact evaluation at sample `t_index` (true `abs`).
    pub fn eval(&self, s: &SampledSignal, t_index: usize) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Chan(name) => s.value(s.channel_index(name)?, t_index),
            Expr::Add(a, b) => a.eval(s, t_index)? + b.eval(s, t_index)?,
            Expr::Sub(a, b) => a.eval(s, t_index)? - b.eval(s, t_index)?,
            Expr::Mul(a, b) => a.eval(s, t_index)? * b.eval(s, t_index)?,
            Expr::Div(a, b) => a.eval(s, t_index)? / b.eval(s, t_index)?,
            Expr::Neg(a) => -a.eval(s, t_index)?,
            Expr::Abs(a) => a.eval(s, t_index)?.abs(),
        })
    }

    /// Smooth evaluation with partial derivatives w.r.t. the channel values
    /// at `t_index`. `abs` is softened to `sqrt(x^2 + eps)` so the result is
    /// differentiable everywhere.
    pub fn eval_smooth_grad(
        &self,
        s: &SampledSignal,
        t_index: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let n = s.num_channels();
        match self {
            Expr::Const(c) => Ok((*c, vec![0.0; n])),
            Expr::Chan(name) => {
                let idx = s.channel_index(name)?;
                let mut g = vec![0.0; n];
                g[idx] = 1.0;
                Ok((s.value(idx, t_index), g))
            }
            Expr::Add(a, b) => {
                let (va, mut ga) = a.eval_smooth_grad(s, t_index)?;
                let (vb, gb) = b.eval_smooth_grad(s, t_index)?;
                for (x, y) in ga.iter_mut().zip(&gb) {
                    *x += y;
                }
                Ok((va + vb, ga))
            }
            Expr::Sub(a, b) => {
                let (va, mut ga) = a.eval_smooth_grad(s, t_index)?;
                let (vb, gb) = b.eval_smooth_grad(s, t_index)?;
                for (x, y) in ga.iter_mut().zip(&gb) {
                    *x -= y;
                }
                Ok((va - vb, ga))
            }
            Expr::Mul(a, b) => {
                let (va, ga) = a.eval_smooth_grad(s, t_index)?;
                let (vb, gb) = b.eval_smooth_grad(s, t_index)?;
                let g = ga
                    .iter()
                    .zip(&gb)
                    .map(|(x, y)| x * vb + y * va)
                    .collect();
                Ok((va * vb, g))
            }
            Expr::Div(a, b) => {
                let (va, ga) = a.eval_smooth_grad(s, t_index)?;
                let (vb, gb) = b.eval_smooth_grad(s, t_index)?;
                let g = ga
                    .iter()
                    .zip(&gb)
                    .map(|(x, y)| (x * vb - y * va) / (vb * vb))
                    .collect();
                Ok((va / vb, g))
            }
            Expr::Neg(a) => {
                let (va, mut ga) = a.eval_smooth_grad(s, t_index)?;
                for x in ga.iter_mut() {
                    *x = -*x;
                }
                Ok((-va, ga))
            }
            Expr::Abs(a) => {
                let (va, mut ga) = a.eval_smooth_grad(s, t_index)?;
                let v = (va * va + ABS_SMOOTH_EPS).sqrt();
                let d = va / v;
                for x in ga.iter_mut() {
                    *x *= d;
                }
                Ok((v, ga))
            }
        }
    }

    /// Channels referenced by the expression, for early validation.
    pub fn channels(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Chan(name) => {
                if !out.iter().any(|n| n == name) {
                    out.push(name.clone());
                }
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.channels(out);
                b.channels(out);
            }
            Expr::Neg(a) | Expr::Abs(a) => a.channels(out),
        }
    }
}
