//! Smoothed quantitative robustness: every min/max of the exact semantics is
//! replaced by its log-sum-exp soft form, making the value differentiable in
//! all channel samples. The analytic gradient is exact for the smooth value.

use crate::error::{Error, Result};
use crate::signal::{interval_indices, SampledSignal};
use crate::stl::formula::StlFormula;

/// Smoothed robustness value with its gradient w.r.t. every channel sample.
#[derive(Debug, Clone)]
pub struct RobustnessResult {
    pub value: f64,
    /// Smoothing parameter used for the evaluation.
    pub k: f64,
    /// One gradient sequence per channel, aligned with the signal's channel
    /// order; entry `[c][t]` is the partial w.r.t. sample `t` of channel `c`.
    pub gradient: Vec<Vec<f64>>,
}

/// `(1/k) log sum exp(k a_i)`, max-shifted against overflow.
pub fn smooth_max(values: &[f64], k: f64) -> f64 {
    lse_max(values, k).0
}

/// `-(1/k) log sum exp(-k a_i)`.
pub fn smooth_min(values: &[f64], k: f64) -> f64 {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    -smooth_max(&negated, k)
}

/// Soft max with the softmax weights (the partials w.r.t. each input).
fn lse_max(values: &[f64], k: f64) -> (f64, Vec<f64>) {
    debug_assert!(k > 0.0);
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| ((v - m) * k).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let value = m + sum.ln() / k;
    let weights = exps.into_iter().map(|e| e / sum).collect();
    (value, weights)
}

fn lse_min(values: &[f64], k: f64) -> (f64, Vec<f64>) {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let (v, w) = lse_max(&negated, k);
    (-v, w)
}

#[derive(Clone)]
struct Entry {
    v: f64,
    /// Dense gradient, flattened `[channel][time]`.
    g: Vec<f64>,
}

type Table = Vec<Option<Entry>>;

/// Smoothed robustness of `f` on `s` anchored at sample `t_index`, with the
/// exact gradient of the smooth value.
pub fn robustness_smooth(
    f: &StlFormula,
    s: &SampledSignal,
    t_index: usize,
    k: f64,
) -> Result<RobustnessResult> {
    if !(k > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "smoothing parameter k must be positive, got {k}"
        )));
    }
    if t_index >= s.len() {
        return Err(Error::InvalidSignal(format!(
            "anchor index {t_index} out of range"
        )));
    }
    crate::stl::robustness::check_horizon(f.horizon(), s.times()[t_index], s)?;
    let table = smooth_table(f, s, k)?;
    let entry = table
        .get(t_index)
        .ok_or_else(|| {
            Error::InvalidSignal(format!("anchor index {t_index} out of range"))
        })?
        .as_ref()
        .ok_or(Error::HorizonExceeded {
            horizon: f.horizon(),
            t: s.times()[t_index],
            end: s.end_time(),
        })?;
    let n_t = s.len();
    let gradient = (0..s.num_channels())
        .map(|c| entry.g[c * n_t..(c + 1) * n_t].to_vec())
        .collect();
    Ok(RobustnessResult {
        value: entry.v,
        k,
        gradient,
    })
}

fn smooth_table(f: &StlFormula, s: &SampledSignal, k: f64) -> Result<Table> {
    let n = s.len();
    let size = n * s.num_channels();
    let times = s.times();
    Ok(match f {
        StlFormula::Pred(p) => (0..n)
            .map(|i| {
                let (v, per_chan) = p.expr.eval_smooth_grad(s, i)?;
                let mut g = vec![0.0; size];
                for (c, d) in per_chan.iter().enumerate() {
                    g[c * n + i] = *d;
                }
                Ok(Some(Entry { v, g }))
            })
            .collect::<Result<Table>>()?,
        StlFormula::NegPred(p) => negate_table(smooth_table(
            &StlFormula::Pred(p.clone()),
            s,
            k,
        )?),
        StlFormula::Not(g) => negate_table(smooth_table(g, s, k)?),
        StlFormula::And(fs) => pointwise(fs, s, k, lse_min)?,
        StlFormula::Or(fs) => pointwise(fs, s, k, lse_max)?,
        StlFormula::Globally(iv, g) => {
            windowed(&smooth_table(g, s, k)?, times, iv.a, iv.b, size, k, lse_min)
        }
        StlFormula::Finally(iv, g) => {
            windowed(&smooth_table(g, s, k)?, times, iv.a, iv.b, size, k, lse_max)
        }
        StlFormula::Until(iv, l, r) => {
            let lt = smooth_table(l, s, k)?;
            let rt = smooth_table(r, s, k)?;
            (0..n)
                .map(|i| {
                    let range = match interval_indices(times, times[i], iv.a, iv.b) {
                        Err(_) => return None,
                        Ok(r) => r,
                    };
                    let start = range.start;
                    let mut inner: Vec<Entry> = Vec::with_capacity(range.len());
                    for j in range {
                        // soft-min over [rho_r(j), rho_l(start..=j)]
                        let mut parts: Vec<&Entry> = Vec::with_capacity(j - start + 2);
                        parts.push(rt[j].as_ref()?);
                        for jj in start..=j {
                            parts.push(lt[jj].as_ref()?);
                        }
                        inner.push(blend(&parts, k, lse_min, size));
                    }
                    let refs: Vec<&Entry> = inner.iter().collect();
                    Some(blend(&refs, k, lse_max, size))
                })
                .collect()
        }
    })
}

fn negate_table(t: Table) -> Table {
    t.into_iter()
        .map(|e| {
            e.map(|mut e| {
                e.v = -e.v;
                e.g.iter_mut().for_each(|x| *x = -*x);
                e
            })
        })
        .collect()
}

/// Soft aggregation of entries; gradient is the weight-blend of the parts'
/// gradients.
fn blend(
    parts: &[&Entry],
    k: f64,
    agg: fn(&[f64], f64) -> (f64, Vec<f64>),
    size: usize,
) -> Entry {
    let values: Vec<f64> = parts.iter().map(|e| e.v).collect();
    let (v, w) = agg(&values, k);
    let mut g = vec![0.0; size];
    for (e, wi) in parts.iter().zip(&w) {
        for (gi, ei) in g.iter_mut().zip(&e.g) {
            *gi += wi * ei;
        }
    }
    Entry { v, g }
}

fn pointwise(
    fs: &[StlFormula],
    s: &SampledSignal,
    k: f64,
    agg: fn(&[f64], f64) -> (f64, Vec<f64>),
) -> Result<Table> {
    let tables: Vec<Table> = fs
        .iter()
        .map(|f| smooth_table(f, s, k))
        .collect::<Result<_>>()?;
    let size = s.len() * s.num_channels();
    Ok((0..s.len())
        .map(|i| {
            let parts: Option<Vec<&Entry>> =
                tables.iter().map(|t| t[i].as_ref()).collect();
            parts.map(|p| blend(&p, k, agg, size))
        })
        .collect())
}

fn windowed(
    child: &Table,
    times: &[f64],
    a: f64,
    b: f64,
    size: usize,
    k: f64,
    agg: fn(&[f64], f64) -> (f64, Vec<f64>),
) -> Table {
    (0..times.len())
        .map(|i| {
            let range = match interval_indices(times, times[i], a, b) {
                Err(_) => return None,
                Ok(r) => r,
            };
            let parts: Option<Vec<&Entry>> = range.map(|j| child[j].as_ref()).collect();
            parts.map(|p| blend(&p, k, agg, size))
        })
        .collect()
}

/// Compares the analytic smooth gradient against central finite differences
/// (step `1e-6` scaled by sample magnitude) and returns the worst relative
/// error across all (channel, time) pairs.
pub fn robustness_gradient_check(
    f: &StlFormula,
    s: &SampledSignal,
    t_index: usize,
    k: f64,
) -> Result<f64> {
    let base = robustness_smooth(f, s, t_index, k)?;
    let names: Vec<String> = s.channel_names().map(String::from).collect();
    let times = s.times().to_vec();
    let mut worst: f64 = 0.0;
    for (c, name) in names.iter().enumerate() {
        let orig = s.channel(name)?.to_vec();
        for t in 0..s.len() {
            let h = 1e-6 * orig[t].abs().max(1.0);
            let eval_at = |x: f64| -> Result<f64> {
                let mut chans: Vec<(String, Vec<f64>)> = names
                    .iter()
                    .map(|n| Ok((n.clone(), s.channel(n)?.to_vec())))
                    .collect::<Result<_>>()?;
                chans[c].1[t] = x;
                let sig = SampledSignal::new(times.clone(), chans)?;
                Ok(robustness_smooth(f, &sig, t_index, k)?.value)
            };
            let fd = (eval_at(orig[t] + h)? - eval_at(orig[t] - h)?) / (2.0 * h);
            let analytic = base.gradient[c][t];
            // Entries this small are dominated by finite-difference
            // round-off, not by the analytic gradient.
            let scale = fd.abs().max(analytic.abs());
            if scale > 1e-6 {
                worst = worst.max((analytic - fd).abs() / scale);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{parse_formula, robustness_exact};

    #[test]
    fn lse_closed_forms() {
        // max over [0, 0] with k=2 -> ln(2)/2
        let v = smooth_max(&[0.0, 0.0], 2.0);
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-12);
        // min over [1, 1] with k=2 -> 1 - ln(2)/2
        let v = smooth_min(&[1.0, 1.0], 2.0);
        assert!((v - (1.0 - 0.5 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn overflow_guard() {
        let v = smooth_max(&[1e4, -1e4], 2.0);
        assert!((v - 1e4).abs() < 1e-9);
    }

    #[test]
    fn converges_to_exact_with_k() {
        let s = SampledSignal::new(
            vec![0.0, 1.0, 2.0],
            vec![("y".into(), vec![1.0, 2.0, 3.0])],
        )
        .unwrap();
        let f = parse_formula("G[0,2](y < 2.5)").unwrap();
        let exact = robustness_exact(&f, &s, 0).unwrap();
        assert_eq!(exact, -0.5);
        for k in [2.0, 8.0, 64.0] {
            let r = robustness_smooth(&f, &s, 0, k).unwrap();
            assert!((r.value - exact).abs() <= 3f64.ln() / k + 1e-12);
        }
    }

    #[test]
    fn atomic_gradient_is_exact() {
        let s = SampledSignal::new(
            vec![0.0, 1.0],
            vec![("y".into(), vec![0.3, 0.7])],
        )
        .unwrap();
        let f = parse_formula("y > 0").unwrap();
        let err = robustness_gradient_check(&f, &s, 0, 2.0).unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn nested_gradient_matches_finite_differences() {
        let s = SampledSignal::new(
            (0..20).map(|i| i as f64 * 0.5).collect(),
            vec![(
                "y".into(),
                (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.3).collect(),
            )],
        )
        .unwrap();
        let f = parse_formula("G[0,5] F[0,3] (y > 0.1)").unwrap();
        let err = robustness_gradient_check(&f, &s, 0, 2.0).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn exact_mode_has_no_gradient_by_construction() {
        // robustness_exact returns a bare value; only the smooth entry point
        // produces a RobustnessResult with gradients.
        let s = SampledSignal::new(vec![0.0], vec![("y".into(), vec![1.0])]).unwrap();
        let f = parse_formula("y > 0").unwrap();
        let r = robustness_smooth(&f, &s, 0, 2.0).unwrap();
        assert_eq!(r.gradient.len(), 1);
        assert_eq!(r.gradient[0].len(), 1);
    }
}
