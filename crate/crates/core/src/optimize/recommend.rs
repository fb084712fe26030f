use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::SurrogateModel;
use crate::optimize::multistart::{boltzmann_indices, local_maximize, pick_best, BoundedBox, Objective, OptimizeConfig, OptimizeOutcome};
use crate::qmc;
use crate::seeding;

/// A smooth function of the joint point (x, y, u) to be maximized over x
/// and y: a posterior mean, or a true objective when computing reference
/// optima.
pub trait Surface: Sync {
    fn dim(&self) -> usize;
    fn value(&self, q: &[f64]) -> f64;
    fn value_with_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;

    /// Values at every combination of the given x, y and u points, laid out
    /// as `[(ix·n_u + iu)·n_y + iy]`.
    fn grid_values(&self, xs: &[Vec<f64>], ys: &[Vec<f64>], us: &[Vec<f64>]) -> Vec<f64> {
        xs.par_iter()
            .flat_map_iter(|x| {
                let mut q = vec![0.0; self.dim()];
                q[..x.len()].copy_from_slice(x);
                let mut out = Vec::with_capacity(us.len() * ys.len());
                for u in us {
                    q[self.dim() - u.len()..].copy_from_slice(u);
                    for y in ys {
                        q[x.len()..x.len() + y.len()].copy_from_slice(y);
                        out.push(self.value(&q));
                    }
                }
                out
            })
            .collect()
    }
}

impl Surface for SurrogateModel {
    fn dim(&self) -> usize {
        SurrogateModel::dim(self)
    }

    fn value(&self, q: &[f64]) -> f64 {
        self.posterior_mean(q)
    }

    fn value_with_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.posterior_mean_with_grad(q, grad)
    }
}

/// Raw Sobol' sample size per space: 32 up to two dimensions, 128 beyond.
pub fn raw_sample_size(dim: usize) -> usize {
    if dim <= 2 {
        32
    } else {
        128
    }
}

/// Extracts the fixed design x* and the policy y*(u) from a surface.
pub struct Recommender<'a, S: Surface + ?Sized> {
    surface: &'a S,
    x_box: BoundedBox,
    y_box: BoundedBox,
    cfg: OptimizeConfig,
    raw_sizes: (usize, usize),
}

impl<'a, S: Surface + ?Sized> Recommender<'a, S> {
    pub fn new(surface: &'a S, x_box: BoundedBox, y_box: BoundedBox, cfg: OptimizeConfig) -> Result<Self> {
        cfg.validate()?;
        if x_box.dim() + y_box.dim() > surface.dim() {
            return Err(Error::DimensionMismatch { expected: surface.dim(), got: x_box.dim() + y_box.dim() });
        }
        let raw_sizes = (raw_sample_size(x_box.dim()), raw_sample_size(y_box.dim()));
        Ok(Self { surface, x_box, y_box, cfg, raw_sizes })
    }

    /// Unit boxes for x and y, with u taking the remaining coordinates.
    pub fn unit(surface: &'a S, dx: usize, dy: usize, cfg: OptimizeConfig) -> Result<Self> {
        Self::new(surface, BoundedBox::unit(dx), BoundedBox::unit(dy), cfg)
    }

    /// Overrides the raw Sobol' sample sizes for the x and y spaces.
    pub fn with_raw_sizes(mut self, n_x: usize, n_y: usize) -> Self {
        self.raw_sizes = (n_x.max(1), n_y.max(1));
        self
    }

    fn du(&self) -> usize {
        self.surface.dim() - self.x_box.dim() - self.y_box.dim()
    }

    fn check_u(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.du() {
            return Err(Error::DimensionMismatch { expected: self.du(), got: u.len() });
        }
        Ok(())
    }

    fn raw(&self, bx: &BoundedBox, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if bx.dim() == 0 {
            return Ok(vec![Vec::new()]);
        }
        Ok(qmc::sobol(bx.dim(), n, seed, true)?.iter_rows().map(|r| bx.from_unit(r)).collect())
    }

    /// One-shot maximization of the averaged surface over
    /// (x, y¹, …, y^N), one y per environmental sample. The returned point
    /// is the x-part of the best run; its value is the averaged surface.
    pub fn fixed_design(&self, u_rec: &[Vec<f64>], rng: &mut seeding::Rng) -> Result<OptimizeOutcome> {
        if u_rec.is_empty() {
            return Err(Error::InvalidArgument("recommendation needs at least one environmental sample".into()));
        }
        for u in u_rec {
            self.check_u(u)?;
        }
        let (dx, dy) = (self.x_box.dim(), self.y_box.dim());
        let x_raw = self.raw(&self.x_box, self.raw_sizes.0, rng.random())?;
        let y_raw = self.raw(&self.y_box, self.raw_sizes.1, rng.random())?;

        // Best raw y for every (x, u) pair, and the per-x score.
        let grid = self.surface.grid_values(&x_raw, &y_raw, u_rec);
        let pairings: Vec<(Vec<usize>, f64)> = grid
            .chunks(u_rec.len() * y_raw.len())
            .map(|block| {
                let best: Vec<usize> = block.chunks(y_raw.len()).map(crate::acquisition::argmax).collect();
                let score = best.iter().enumerate().map(|(i, &j)| block[i * y_raw.len() + j]).sum::<f64>();
                (best, score / u_rec.len() as f64)
            })
            .collect();
        let scores: Vec<f64> = pairings.iter().map(|p| p.1).collect();
        let starts = boltzmann_indices(&scores, self.cfg.n_restarts.min(x_raw.len()), rng, false);

        let objective = OneShot { surface: self.surface, u_rec, dx, dy };
        let mut lower = self.x_box.lower().to_vec();
        let mut upper = self.x_box.upper().to_vec();
        for _ in u_rec {
            lower.extend_from_slice(self.y_box.lower());
            upper.extend_from_slice(self.y_box.upper());
        }
        let flat_box = BoundedBox::new(lower, upper)?;
        let flat_start = |r: usize| {
            let mut v = x_raw[r].clone();
            for &j in &pairings[r].0 {
                v.extend_from_slice(&y_raw[j]);
            }
            v
        };
        let options = self.cfg.lbfgs();
        let results: Vec<(Vec<f64>, f64)> =
            starts.par_iter().map(|&r| local_maximize(&objective, &flat_start(r), &flat_box, &options)).collect();
        let raw_flat: Vec<Vec<f64>> = (0..x_raw.len()).map(flat_start).collect();
        let mut best = pick_best(raw_flat, scores, results);
        best.point.truncate(dx);
        Ok(best)
    }

    /// Single-start ascent of y ↦ surface(x, y, u) from the best of the raw
    /// Sobol' samples.
    pub fn policy(&self, x: &[f64], u: &[f64], seed: u64) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.x_box.dim() {
            return Err(Error::DimensionMismatch { expected: self.x_box.dim(), got: x.len() });
        }
        self.check_u(u)?;
        let y_raw = self.raw(&self.y_box, self.raw_sizes.1, seed)?;
        let objective = Section { surface: self.surface, x, u };
        let vals: Vec<f64> = y_raw.iter().map(|y| Objective::value(&objective, y)).collect();
        let start = &y_raw[crate::acquisition::argmax(&vals)];
        let (y, v) = local_maximize(&objective, start, &self.y_box, &self.cfg.lbfgs());
        let best_raw = vals[crate::acquisition::argmax(&vals)];
        if v.is_finite() && v >= best_raw {
            Ok((y, v))
        } else {
            Ok((start.clone(), best_raw))
        }
    }

    /// [`Recommender::policy`] at every environmental sample, in parallel.
    pub fn policies(&self, x: &[f64], us: &[Vec<f64>], seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
        us.par_iter().map(|u| self.policy(x, u, seed)).collect()
    }
}

struct OneShot<'s, S: Surface + ?Sized> {
    surface: &'s S,
    u_rec: &'s [Vec<f64>],
    dx: usize,
    dy: usize,
}

impl<S: Surface + ?Sized> OneShot<'_, S> {
    fn point(&self, v: &[f64], i: usize, q: &mut [f64]) {
        let (dx, dy) = (self.dx, self.dy);
        q[..dx].copy_from_slice(&v[..dx]);
        q[dx..dx + dy].copy_from_slice(&v[dx + i * dy..dx + (i + 1) * dy]);
        q[dx + dy..].copy_from_slice(&self.u_rec[i]);
    }
}

impl<S: Surface + ?Sized> Objective for OneShot<'_, S> {
    fn dim(&self) -> usize {
        self.dx + self.u_rec.len() * self.dy
    }

    fn value(&self, v: &[f64]) -> f64 {
        let mut q = vec![0.0; self.surface.dim()];
        let mut total = 0.0;
        for i in 0..self.u_rec.len() {
            self.point(v, i, &mut q);
            total += self.surface.value(&q);
        }
        total / self.u_rec.len() as f64
    }

    fn value_and_gradient(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let (dx, dy) = (self.dx, self.dy);
        let n = self.u_rec.len() as f64;
        let mut q = vec![0.0; self.surface.dim()];
        let mut g = vec![0.0; self.surface.dim()];
        grad.iter_mut().for_each(|gi| *gi = 0.0);
        let mut total = 0.0;
        for i in 0..self.u_rec.len() {
            self.point(v, i, &mut q);
            total += self.surface.value_with_grad(&q, &mut g);
            for k in 0..dx {
                grad[k] += g[k] / n;
            }
            for k in 0..dy {
                grad[dx + i * dy + k] = g[dx + k] / n;
            }
        }
        total / n
    }
}

struct Section<'s, S: Surface + ?Sized> {
    surface: &'s S,
    x: &'s [f64],
    u: &'s [f64],
}

impl<S: Surface + ?Sized> Section<'_, S> {
    fn point(&self, y: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.surface.dim());
        q.extend_from_slice(self.x);
        q.extend_from_slice(y);
        q.extend_from_slice(self.u);
        q
    }
}

impl<S: Surface + ?Sized> Objective for Section<'_, S> {
    fn dim(&self) -> usize {
        self.surface.dim() - self.x.len() - self.u.len()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.surface.value(&self.point(y))
    }

    fn value_and_gradient(&self, y: &[f64], grad: &mut [f64]) -> f64 {
        let q = self.point(y);
        let mut g = vec![0.0; q.len()];
        let v = self.surface.value_with_grad(&q, &mut g);
        grad.copy_from_slice(&g[self.x.len()..self.x.len() + grad.len()]);
        v
    }
}

/// One-shot fixed-design recommendation on the unit cube; `dx` leading
/// coordinates are x, the u-dimension is read from `u_rec`.
pub fn recommend_fixed_design(model: &SurrogateModel, dx: usize, u_rec: &[Vec<f64>], cfg: &OptimizeConfig, rng: &mut seeding::Rng) -> Result<OptimizeOutcome> {
    let du = u_rec.first().map_or(0, Vec::len);
    let dy = model.dim().checked_sub(dx + du).ok_or(Error::DimensionMismatch { expected: model.dim(), got: dx + du })?;
    Recommender::unit(model, dx, dy, cfg.clone())?.fixed_design(u_rec, rng)
}

/// Policy y*(u) at a fixed design on the unit cube.
pub fn recommend_policy(model: &SurrogateModel, x: &[f64], u: &[f64], cfg: &OptimizeConfig, seed: u64) -> Result<Vec<f64>> {
    let dy = model.dim().checked_sub(x.len() + u.len()).ok_or(Error::DimensionMismatch { expected: model.dim(), got: x.len() + u.len() })?;
    Ok(Recommender::unit(model, x.len(), dy, cfg.clone())?.policy(x, u, seed)?.0)
}
