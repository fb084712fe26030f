//! Projected limited-memory BFGS for box-constrained minimization.
//!
//! Variables sitting on a bound with the gradient pushing outward are held
//! fixed; the two-loop recursion runs on the remaining free variables. Steps
//! that stay inside the box use a strong-Wolfe line search, steps that would
//! leave it use projected backtracking.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsbOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub pgtol: f64,
    /// Stop when the relative objective reduction of an iteration falls below this.
    pub ftol: f64,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self { memory: 10, max_iters: 200, pgtol: 1e-8, ftol: 1e7 * f64::EPSILON }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ProjectedGradient,
    RelativeReduction,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct LbfgsbResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl LbfgsbResult {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::ProjectedGradient | Termination::RelativeReduction)
    }
}

struct Problem<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Problem<'_, F> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
        self.evaluations += 1;
        (self.f)(x, g)
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `f` writes the gradient into its second argument and returns the value.
pub fn minimize<F>(f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LbfgsbOptions) -> LbfgsbResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    let mut prob = Problem { f, lower, upper, evaluations: 0 };
    let mut x = x0.to_vec();
    prob.project(&mut x);
    let mut g = vec![0.0; n];
    let mut fx = prob.eval(&x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return LbfgsbResult { x, f: fx, iterations: 0, evaluations: prob.evaluations, termination: Termination::NonFinite };
    }
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if projected_gradient_norm(&x, &g, lower, upper) <= opts.pgtol {
            termination = Termination::ProjectedGradient;
            break;
        }
        iterations += 1;
        for i in 0..n {
            let at_lower = x[i] <= lower[i] && g[i] > 0.0;
            let at_upper = x[i] >= upper[i] && g[i] < 0.0;
            free[i] = !(at_lower || at_upper) && lower[i] < upper[i];
        }
        direction(&g, &free, &memory, &mut d);
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            memory.clear();
            direction(&g, &free, &memory, &mut d);
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                termination = Termination::ProjectedGradient;
                break;
            }
        }
        let t0 = if memory.is_empty() { (1.0 / norm_inf(&d)).min(1.0) } else { 1.0 };
        let t_box = max_feasible_step(&x, &d, lower, upper);
        let accepted = if t_box >= t0 {
            wolfe_search(&mut prob, &x, fx, &g, &d, slope, t0, t_box, &mut x_new, &mut g_new)
        } else {
            projected_backtracking(&mut prob, &x, fx, &g, &d, t0, &mut x_new, &mut g_new)
        };
        let Some(f_new) = accepted else {
            if memory.is_empty() {
                termination = Termination::LineSearchFailed;
                break;
            }
            memory.clear();
            continue;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > f64::EPSILON * yy && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let reduction = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if reduction <= opts.ftol {
            termination = Termination::RelativeReduction;
            break;
        }
    }
    LbfgsbResult { x, f: fx, iterations, evaluations: prob.evaluations, termination }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE)
}

/// Infinity norm of `x − P(x − g)`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| (xi - (xi - gi).clamp(*lo, *hi)).abs())
        .fold(0.0, f64::max)
}

fn direction(g: &[f64], free: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, d: &mut [f64]) {
    let restrict = |v: &[f64], w: &[f64]| -> f64 {
        v.iter().zip(w).zip(free).filter(|(_, f)| **f).map(|((a, b), _)| a * b).sum()
    };
    for ((di, gi), fi) in d.iter_mut().zip(g).zip(free) {
        *di = if *fi { -gi } else { 0.0 };
    }
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, _) in memory.iter().rev() {
        let sy = restrict(s, y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = restrict(s, d) / sy;
        for ((di, yi), fi) in d.iter_mut().zip(y).zip(free) {
            if *fi {
                *di -= a * yi;
            }
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let sy = restrict(s, y);
        let yy = restrict(y, y);
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            d.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, _), a) in memory.iter().zip(alphas.iter().rev()) {
        let sy = restrict(s, y);
        if sy <= 0.0 {
            continue;
        }
        let b = restrict(y, d) / sy;
        for ((di, si), fi) in d.iter_mut().zip(s).zip(free) {
            if *fi {
                *di += (a - b) * si;
            }
        }
    }
}

fn max_feasible_step(x: &[f64], d: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut t = f64::INFINITY;
    for i in 0..x.len() {
        if d[i] > 0.0 {
            t = t.min((upper[i] - x[i]) / d[i]);
        } else if d[i] < 0.0 {
            t = t.min((lower[i] - x[i]) / d[i]);
        }
    }
    t.max(0.0)
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

#[allow(clippy::too_many_arguments)]
fn wolfe_search<F: FnMut(&[f64], &mut [f64]) -> f64>(
    prob: &mut Problem<'_, F>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    slope0: f64,
    t_init: f64,
    t_max: f64,
    x_out: &mut [f64],
    g_out: &mut [f64],
) -> Option<f64> {
    let n = x.len();
    let mut eval = |t: f64, xo: &mut [f64], go: &mut [f64], prob: &mut Problem<'_, F>| -> (f64, f64) {
        for i in 0..n {
            xo[i] = x[i] + t * d[i];
        }
        prob.project(xo);
        let f = prob.eval(xo, go);
        let s: f64 = go.iter().zip(d).map(|(a, b)| a * b).sum();
        (f, s)
    };
    let _ = g0;
    let mut t_prev = 0.0;
    let mut f_prev = f0;
    let mut s_prev = slope0;
    let mut t = t_init.min(t_max);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..20 {
        let (f, s) = eval(t, x_out, g_out, prob);
        if !f.is_finite() {
            t = 0.5 * (t_prev + t);
            continue;
        }
        if f > f0 + C1 * t * slope0 || (i > 0 && f >= f_prev) {
            return zoom(prob, &mut eval, (t_prev, f_prev, s_prev), (t, f, s), f0, slope0, x_out, g_out, best);
        }
        best = Some((t, f));
        if s.abs() <= -C2 * slope0 {
            return Some(f);
        }
        if s >= 0.0 {
            return zoom(prob, &mut eval, (t, f, s), (t_prev, f_prev, s_prev), f0, slope0, x_out, g_out, best);
        }
        if t >= t_max {
            return Some(f);
        }
        t_prev = t;
        f_prev = f;
        s_prev = s;
        t = (2.0 * t).min(t_max);
    }
    let (t, _) = best?;
    let (f, _) = eval(t, x_out, g_out, prob);
    Some(f)
}

#[allow(clippy::too_many_arguments)]
fn zoom<F, E>(
    prob: &mut Problem<'_, F>,
    eval: &mut E,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    f0: f64,
    slope0: f64,
    x_out: &mut [f64],
    g_out: &mut [f64],
    mut best: Option<(f64, f64)>,
) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    E: FnMut(f64, &mut [f64], &mut [f64], &mut Problem<'_, F>) -> (f64, f64),
{
    for _ in 0..30 {
        let (a, b) = if lo.0 < hi.0 { (lo, hi) } else { (hi, lo) };
        let width = b.0 - a.0;
        if width <= 1e-16 * b.0.abs().max(1.0) {
            break;
        }
        // Minimizer of the quadratic through (a.f, a.slope, b.f), kept away from the ends.
        let denom = 2.0 * (b.1 - a.1 - a.2 * width);
        let mut t = if denom > 0.0 { a.0 - a.2 * width * width / denom } else { a.0 + 0.5 * width };
        if !(t > a.0 + 0.1 * width && t < b.0 - 0.1 * width) {
            t = a.0 + 0.5 * width;
        }
        let (f, s) = eval(t, x_out, g_out, prob);
        if !f.is_finite() || f > f0 + C1 * t * slope0 || f >= lo.1 {
            hi = (t, f, s);
        } else {
            if best.is_none_or(|(_, fb)| f < fb) {
                best = Some((t, f));
            }
            if s.abs() <= -C2 * slope0 {
                return Some(f);
            }
            if s * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (t, f, s);
        }
    }
    let (t, _) = best?;
    let (f, _) = eval(t, x_out, g_out, prob);
    Some(f)
}

#[allow(clippy::too_many_arguments)]
fn projected_backtracking<F: FnMut(&[f64], &mut [f64]) -> f64>(
    prob: &mut Problem<'_, F>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    t_init: f64,
    x_out: &mut [f64],
    g_out: &mut [f64],
) -> Option<f64> {
    let n = x.len();
    let mut t = t_init;
    for _ in 0..40 {
        for i in 0..n {
            x_out[i] = x[i] + t * d[i];
        }
        prob.project(x_out);
        let decrease: f64 = g0.iter().zip(x_out.iter().zip(x)).map(|(g, (a, b))| g * (a - b)).sum();
        if decrease < 0.0 {
            let f = prob.eval(x_out, g_out);
            if f.is_finite() && f <= f0 + C1 * decrease {
                return Some(f);
            }
        }
        t *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let opts = LbfgsbOptions { ftol: 0.0, max_iters: 500, ..Default::default() };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn active_bound() {
        // Minimum of the unconstrained problem at (1, 1) lies outside the box.
        let r = minimize(rosenbrock, &[0.0, 0.0], &[-2.0, -2.0], &[0.5, 2.0], &LbfgsbOptions::default());
        assert!((r.x[0] - 0.5).abs() < 1e-9);
        assert!((r.x[1] - 0.25).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn quadratic_with_bounds_converges_on_projected_gradient() {
        let c = [0.3, -4.0, 7.0];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..3 {
                g[i] = 2.0 * (i as f64 + 1.0) * (x[i] - c[i]);
                v += (i as f64 + 1.0) * (x[i] - c[i]).powi(2);
            }
            v
        };
        let opts = LbfgsbOptions { ftol: 0.0, ..Default::default() };
        let r = minimize(f, &[0.5, 0.5, 0.5], &[0.0; 3], &[1.0; 3], &opts);
        assert_eq!(r.termination, Termination::ProjectedGradient);
        assert!((r.x[0] - 0.3).abs() < 1e-8);
        assert_eq!(r.x[1], 0.0);
        assert_eq!(r.x[2], 1.0);
    }

    #[test]
    fn start_outside_box_is_projected() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            x[0] * x[0]
        };
        let r = minimize(f, &[10.0], &[1.0], &[3.0], &LbfgsbOptions::default());
        assert_eq!(r.x, vec![1.0]);
    }
}
