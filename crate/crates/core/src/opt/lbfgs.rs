//! Limited-memory BFGS with backtracking line search, plus a projected
//! variant for box constraints.

const MEMORY: usize = 10;
const CURV_MIN: f64 = 1e-10;
const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const BACKTRACK: f64 = 0.5;
const MAX_LINE_STEPS: usize = 40;

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ProjectedOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Infinity norm of the projected gradient at the final iterate.
    pub proj_grad_norm: f64,
    pub iterations: usize,
}

struct History {
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    rho: Vec<f64>,
}

impl History {
    fn new() -> Self {
        Self {
            s: Vec::new(),
            y: Vec::new(),
            rho: Vec::new(),
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if sy <= CURV_MIN {
            return false;
        }
        if self.s.len() == MEMORY {
            self.s.remove(0);
            self.y.remove(0);
            self.rho.remove(0);
        }
        self.rho.push(1.0 / sy);
        self.s.push(s);
        self.y.push(y);
        true
    }

    /// Two-loop recursion; returns the descent direction -H g.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let m = self.s.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            axpy(-alpha[i], &self.y[i], &mut q);
        }
        if m > 0 {
            let y = &self.y[m - 1];
            let gamma = 1.0 / (self.rho[m - 1] * dot(y, y));
            for v in &mut q {
                *v *= gamma;
            }
        }
        for i in 0..m {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            axpy(alpha[i] - beta, &self.s[i], &mut q);
        }
        for v in &mut q {
            *v = -*v;
        }
        q
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Unconstrained L-BFGS. `func` returns (objective, gradient).
pub fn lbfgs_minimize<F>(x0: &[f64], max_iters: usize, tol: f64, mut func: F) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = func(&x);
    let mut hist = History::new();
    let mut iters = 0;
    for _ in 0..max_iters {
        let gnorm = inf_norm(&g);
        if gnorm <= tol || !f.is_finite() {
            break;
        }
        let mut dir = hist.direction(&g);
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Fall back to steepest descent if the model is not descent.
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        // Weak-Wolfe line search by bisection: backtrack on the Armijo
        // condition, expand on the curvature condition. Guarantees the
        // accepted step has positive curvature (s.y > 0) when it satisfies
        // both, keeping the quasi-Newton model well posed.
        let mut step_lo = 0.0_f64;
        let mut step_hi = f64::INFINITY;
        let mut step = 1.0;
        let mut accepted = None;
        let mut last_armijo = None;
        for _ in 0..MAX_LINE_STEPS {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = func(&xt);
            if !ft.is_finite() || ft > f + ARMIJO_C1 * step * slope {
                step_hi = step;
            } else if dot(&gt, &dir) < WOLFE_C2 * slope {
                last_armijo = Some((xt, ft, gt));
                step_lo = step;
            } else {
                accepted = Some((xt, ft, gt));
                break;
            }
            step = if step_hi.is_finite() {
                0.5 * (step_lo + step_hi)
            } else {
                2.0 * step
            };
        }
        // If curvature never held within budget, keep the best Armijo point.
        let Some((xt, ft, gt)) = accepted.or(last_armijo) else { break };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        hist.push(s, y);
        x = xt;
        f = ft;
        g = gt;
        iters += 1;
    }
    LbfgsOutcome {
        grad_norm: inf_norm(&g),
        x,
        f,
        iterations: iters,
    }
}

fn clamp_to(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo)
        .zip(hi)
        .map(|((xi, l), h)| xi.clamp(*l, *h))
        .collect()
}

fn projected_grad_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..x.len() {
        let step = (x[i] - g[i]).clamp(lo[i], hi[i]) - x[i];
        m = m.max(step.abs());
    }
    m
}

/// L-BFGS with box constraints, using gradient projection: directions are
/// computed on the free variables (active bound coordinates zeroed) and the
/// trial point is projected back onto the box along the line search.
pub fn projected_lbfgs<F>(
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iters: usize,
    tol: f64,
    mut func: F,
) -> ProjectedOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = clamp_to(x0, lo, hi);
    let (mut f, mut g) = func(&x);
    let mut hist = History::new();
    let mut iters = 0;
    for _ in 0..max_iters {
        let pg = projected_grad_norm(&x, &g, lo, hi);
        if pg <= tol || !f.is_finite() {
            break;
        }
        // Zero gradient components pushing against an active bound.
        let active_eps = 1e-12;
        let gm: Vec<f64> = (0..x.len())
            .map(|i| {
                let at_lo = x[i] - lo[i] <= active_eps && g[i] > 0.0;
                let at_hi = hi[i] - x[i] <= active_eps && g[i] < 0.0;
                if at_lo || at_hi {
                    0.0
                } else {
                    g[i]
                }
            })
            .collect();
        let mut dir = hist.direction(&gm);
        for i in 0..dir.len() {
            if gm[i] == 0.0 && g[i] != 0.0 {
                dir[i] = 0.0;
            }
        }
        if dot(&gm, &dir) >= 0.0 {
            dir = gm.iter().map(|v| -v).collect();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_LINE_STEPS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let xt = clamp_to(&trial, lo, hi);
            let slope: f64 = (0..x.len()).map(|i| g[i] * (xt[i] - x[i])).sum();
            if slope >= 0.0 {
                step *= BACKTRACK;
                continue;
            }
            let (ft, gt) = func(&xt);
            if ft.is_finite() && ft <= f + ARMIJO_C1 * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            step *= BACKTRACK;
        }
        let Some((xt, ft, gt)) = accepted else { break };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        hist.push(s, y);
        x = xt;
        f = ft;
        g = gt;
        iters += 1;
    }
    ProjectedOutcome {
        proj_grad_norm: projected_grad_norm(&x, &g, lo, hi),
        x,
        f,
        iterations: iters,
    }
}
