//! Exact quantitative robustness with true min/max aggregation.
//!
//! Each subformula is evaluated bottom-up into a table of robustness values
//! over all sample indices; entries whose window leaves the trace are NaN.

use crate::error::{Error, Result};
use crate::signal::{interval_indices, SampledSignal};
use crate::stl::formula::StlFormula;

/// Exact robustness of `f` on `s` anchored at sample `t_index`.
pub fn robustness_exact(f: &StlFormula, s: &SampledSignal, t_index: usize) -> Result<f64> {
    if t_index >= s.len() {
        return Err(Error::InvalidSignal(format!(
            "anchor index {t_index} out of range for {} samples",
            s.len()
        )));
    }
    let t = s.times()[t_index];
    let end = s.end_time();
    let horizon = f.horizon();
    check_horizon(horizon, t, s)?;
    let table = eval_table(f, s)?;
    match table[t_index] {
        v if v.is_nan() => Err(Error::HorizonExceeded { horizon, t, end }),
        v => Ok(v),
    }
}

/// Requires `t + horizon` to lie inside the trace (up to half-step
/// tolerance); window entries past that point would silently truncate.
pub(crate) fn check_horizon(horizon: f64, t: f64, s: &SampledSignal) -> Result<()> {
    let end = s.end_time();
    let n = s.len();
    let tol = if n > 1 {
        0.5 * (end - s.times()[n - 2]) + 1e-9 * (1.0 + end.abs())
    } else {
        0.0
    };
    if t + horizon > end + tol {
        Err(Error::HorizonExceeded { horizon, t, end })
    } else {
        Ok(())
    }
}

/// Robustness of `f` at every sample index; NaN where the window of some
/// temporal operator has no sample or leaves the trace.
pub fn eval_table(f: &StlFormula, s: &SampledSignal) -> Result<Vec<f64>> {
    let n = s.len();
    let times = s.times();
    Ok(match f {
        StlFormula::Pred(p) => (0..n)
            .map(|i| p.expr.eval(s, i))
            .collect::<Result<Vec<_>>>()?,
        StlFormula::NegPred(p) => (0..n)
            .map(|i| p.expr.eval(s, i).map(|v| -v))
            .collect::<Result<Vec<_>>>()?,
        StlFormula::Not(g) => eval_table(g, s)?.into_iter().map(|v| -v).collect(),
        StlFormula::And(fs) => combine(fs, s, f64::min)?,
        StlFormula::Or(fs) => combine(fs, s, f64::max)?,
        StlFormula::Globally(iv, g) => window(&eval_table(g, s)?, times, iv.a, iv.b, f64::min),
        StlFormula::Finally(iv, g) => window(&eval_table(g, s)?, times, iv.a, iv.b, f64::max),
        StlFormula::Until(iv, l, r) => {
            let lt = eval_table(l, s)?;
            let rt = eval_table(r, s)?;
            (0..n)
                .map(|i| match interval_indices(times, times[i], iv.a, iv.b) {
                    Err(_) => f64::NAN,
                    Ok(range) => {
                        let mut best = f64::NAN;
                        let mut run_min = f64::INFINITY;
                        for j in range {
                            run_min = strict_min(run_min, lt[j]);
                            let v = strict_min(rt[j], run_min);
                            best = strict_max_or_first(best, v);
                        }
                        best
                    }
                })
                .collect()
        }
    })
}

fn combine(
    fs: &[StlFormula],
    s: &SampledSignal,
    op: fn(f64, f64) -> f64,
) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    for f in fs {
        let t = eval_table(f, s)?;
        acc = Some(match acc {
            None => t,
            Some(a) => a
                .into_iter()
                .zip(t)
                .map(|(x, y)| strict_binop(x, y, op))
                .collect(),
        });
    }
    Ok(acc.unwrap_or_default())
}

fn window(
    child: &[f64],
    times: &[f64],
    a: f64,
    b: f64,
    op: fn(f64, f64) -> f64,
) -> Vec<f64> {
    (0..times.len())
        .map(|i| match interval_indices(times, times[i], a, b) {
            Err(_) => f64::NAN,
            Ok(range) => {
                let mut acc = f64::NAN;
                for j in range {
                    acc = if acc.is_nan() {
                        child[j]
                    } else {
                        strict_binop(acc, child[j], op)
                    };
                }
                acc
            }
        })
        .collect()
}

// f64::min/max discard NaN; these propagate it so "horizon exceeded"
// is not silently swallowed.
fn strict_binop(a: f64, b: f64, op: fn(f64, f64) -> f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        op(a, b)
    }
}

fn strict_min(a: f64, b: f64) -> f64 {
    strict_binop(a, b, f64::min)
}

fn strict_max_or_first(acc: f64, v: f64) -> f64 {
    if v.is_nan() {
        f64::NAN
    } else if acc.is_nan() {
        v
    } else {
        acc.max(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_formula;

    fn sig(times: Vec<f64>, y: Vec<f64>) -> SampledSignal {
        SampledSignal::new(times, vec![("y".into(), y)]).unwrap()
    }

    #[test]
    fn constant_signal() {
        let s = sig(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]);
        let f = parse_formula("y > 0").unwrap();
        assert_eq!(robustness_exact(&f, &s, 0).unwrap(), 1.0);
        assert_eq!(robustness_exact(&f, &s, 2).unwrap(), 1.0);
    }

    #[test]
    fn globally_takes_min() {
        let s = sig(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        let f = parse_formula("G[0,2](y < 2.5)").unwrap();
        assert_eq!(robustness_exact(&f, &s, 0).unwrap(), -0.5);
    }

    #[test]
    fn finally_takes_max() {
        let s = sig(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        let f = parse_formula("F[0,2](y > 2.5)").unwrap();
        assert_eq!(robustness_exact(&f, &s, 0).unwrap(), 0.5);
    }

    #[test]
    fn horizon_exceeding_trace_is_an_error() {
        let s = sig(vec![0.0, 1.0], vec![1.0, 1.0]);
        let f = parse_formula("G[0,5](y > 0)").unwrap();
        assert!(matches!(
            robustness_exact(&f, &s, 0),
            Err(Error::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn unknown_channel_is_an_error() {
        let s = sig(vec![0.0, 1.0], vec![1.0, 1.0]);
        let f = parse_formula("z > 0").unwrap();
        assert!(matches!(
            robustness_exact(&f, &s, 0),
            Err(Error::UnknownChannel(_))
        ));
    }

    #[test]
    fn until_matches_hand_evaluation() {
        // y = [1, 2, 3] at t = [0, 1, 2]; (y > 0) U[0,2] (y > 2.5):
        // max over t' of min(rho2(t'), min_{t'' in [t, t']} rho1)
        //   t'=0: min(-1.5, 1) = -1.5
        //   t'=1: min(-0.5, 1) = -0.5
        //   t'=2: min(0.5, 1)  = 0.5
        let s = sig(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        let f = parse_formula("(y > 0) U[0,2] (y > 2.5)").unwrap();
        assert_eq!(robustness_exact(&f, &s, 0).unwrap(), 0.5);
    }
}
