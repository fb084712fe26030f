use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::optimize::lbfgsb::{self, LbfgsbOptions};
use crate::qmc;
use crate::seeding;

/// A differentiable function to maximize.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<T: Acquisition + ?Sized> Objective for T {
    fn dim(&self) -> usize {
        Acquisition::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        Acquisition::value(self, x)
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        Acquisition::value_and_gradient(self, x, grad)
    }
}

/// Adapts a closure returning the value and writing the gradient.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim];
        (self.f)(x, &mut g)
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundedBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("every box dimension needs lo < hi".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| v >= lo && v <= hi)
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.lower).zip(&self.upper).map(|((v, lo), hi)| lo + v * (hi - lo)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub n_restarts: usize,
    pub n_raw: usize,
    pub max_iters: usize,
    /// Vectorization hint only; results do not depend on it.
    pub batch_limit: usize,
    /// Vectorization hint only; results do not depend on it.
    pub raw_batch_limit: usize,
    pub nonnegative_objective: bool,
    pub convergence_tol: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            n_restarts: 10,
            n_raw: 256,
            max_iters: 200,
            batch_limit: 4,
            raw_batch_limit: 1 << 17,
            nonnegative_objective: true,
            convergence_tol: 1e-8,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 || self.n_raw == 0 || self.max_iters == 0 || self.batch_limit == 0 || self.raw_batch_limit == 0 {
            return Err(Error::InvalidArgument("optimizer counts must be at least 1".into()));
        }
        if self.n_restarts > self.n_raw {
            return Err(Error::InvalidArgument("n_restarts cannot exceed n_raw".into()));
        }
        Ok(())
    }

    pub(crate) fn lbfgs(&self) -> LbfgsbOptions {
        LbfgsbOptions { max_iters: self.max_iters, pgtol: self.convergence_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Set when every local ascent failed and the raw scan's best was returned.
    pub warning: Option<String>,
}

/// Indices of `n` restart candidates chosen by Boltzmann sampling.
///
/// Nonnegative mode keeps candidates above `1e-4·max` (relaxing the
/// threshold tenfold until at least `n` survive) and samples with weights
/// `exp(v / max)`; otherwise weights are `exp((v − mean) / sd)`. Identical
/// values are sampled uniformly. The best candidate is always included.
pub fn boltzmann_indices<R: Rng>(values: &[f64], n: usize, rng: &mut R, nonnegative: bool) -> Vec<usize> {
    let total = values.len();
    if n >= total {
        return (0..total).collect();
    }
    let best = crate::acquisition::argmax(values);
    let max = values[best];
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut pool: Vec<usize> = (0..total).collect();
    let weights: Vec<f64> = if max == min || !max.is_finite() {
        vec![1.0; total]
    } else if nonnegative && max > 0.0 {
        let mut threshold = 1e-4 * max;
        for _ in 0..300 {
            let count = values.iter().filter(|v| **v >= threshold).count();
            if count >= n {
                break;
            }
            threshold *= 0.1;
        }
        pool.retain(|&i| values[i] >= threshold);
        if pool.len() < n {
            pool = (0..total).collect();
        }
        pool.iter().map(|&i| (values[i] / max).exp()).collect()
    } else {
        let mean = values.iter().sum::<f64>() / total as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total as f64).sqrt();
        values.iter().map(|v| ((v - mean) / sd).exp()).collect()
    };
    // The best candidate takes one slot; the rest are drawn from the others.
    let others: Vec<usize> = (0..pool.len()).filter(|&i| pool[i] != best).collect();
    let mut chosen = vec![best];
    chosen.extend(
        index::sample_weighted(rng, others.len(), |k| weights[others[k]], n - 1)
            .expect("weights are finite and positive")
            .into_iter()
            .map(|k| pool[others[k]]),
    );
    chosen
}

/// Restart locations chosen by Boltzmann sampling; see [`boltzmann_indices`].
pub fn boltzmann_restarts<R: Rng>(candidates: &[Vec<f64>], values: &[f64], n: usize, rng: &mut R, nonnegative: bool) -> Vec<Vec<f64>> {
    boltzmann_indices(values, n, rng, nonnegative).into_iter().map(|i| candidates[i].clone()).collect()
}

/// Bounded ascent of `objective` from `start`.
pub fn local_maximize<O: Objective + ?Sized>(objective: &O, start: &[f64], bounds: &BoundedBox, options: &LbfgsbOptions) -> (Vec<f64>, f64) {
    let res = lbfgsb::minimize(
        |x, g| {
            let v = objective.value_and_gradient(x, g);
            g.iter_mut().for_each(|gi| *gi = -*gi);
            -v
        },
        start,
        bounds.lower(),
        bounds.upper(),
        options,
    );
    (res.x, -res.f)
}

/// Raw Sobol' scan, Boltzmann restarts, bounded quasi-Newton ascent from
/// each, best of all.
pub fn multistart_maximize<O: Objective + ?Sized>(objective: &O, bounds: &BoundedBox, cfg: &OptimizeConfig, rng: &mut seeding::Rng) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    let d = bounds.dim();
    if objective.dim() != d {
        return Err(Error::DimensionMismatch { expected: objective.dim(), got: d });
    }
    let raw_seed: u64 = rng.random();
    let raw: Vec<Vec<f64>> = qmc::sobol(d, cfg.n_raw, raw_seed, true)?.iter_rows().map(|u| bounds.from_unit(u)).collect();
    let values: Vec<f64> = raw
        .par_chunks(cfg.raw_batch_limit)
        .flat_map_iter(|chunk| chunk.iter().map(|x| objective.value(x)).collect::<Vec<_>>())
        .collect();
    let clean: Vec<f64> = values.iter().map(|v| if v.is_finite() { *v } else { f64::NEG_INFINITY }).collect();
    let starts = boltzmann_restarts(&raw, &sanitize(&clean), cfg.n_restarts, rng, cfg.nonnegative_objective);
    let options = cfg.lbfgs();
    let results: Vec<(Vec<f64>, f64)> = starts.par_iter().map(|s| local_maximize(objective, s, bounds, &options)).collect();
    Ok(pick_best(raw, clean, results))
}

// Boltzmann weights need finite values; failed evaluations rank last.
fn sanitize(values: &[f64]) -> Vec<f64> {
    let finite_min = values.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let floor = if finite_min.is_finite() { finite_min } else { 0.0 };
    values.iter().map(|v| if v.is_finite() { *v } else { floor }).collect()
}

pub(crate) fn pick_best(raw: Vec<Vec<f64>>, raw_values: Vec<f64>, results: Vec<(Vec<f64>, f64)>) -> OptimizeOutcome {
    let raw_best = crate::acquisition::argmax(&raw_values);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, v) in results {
        if v.is_finite() && best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    match best {
        Some((x, v)) if v >= raw_values[raw_best] => OptimizeOutcome { point: x, value: v, warning: None },
        Some(_) => OptimizeOutcome { point: raw[raw_best].clone(), value: raw_values[raw_best], warning: None },
        None => OptimizeOutcome {
            point: raw[raw_best].clone(),
            value: raw_values[raw_best],
            warning: Some("all local ascents failed; returning the best raw sample".into()),
        },
    }
}
