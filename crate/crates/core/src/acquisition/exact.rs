use crate::acquisition::{expected_max_increment, Acquisition, AcqContext, JointGrid};
use crate::error::{Error, Result};
use crate::gp::{CrossCache, SurrogateModel};

/// `E[max_i (A_i + B_i Z)] − max_i A_i`, where `A_i` and `B_i` average the
/// posterior mean and fantasy slope over the environment sample for the
/// `i`-th candidate.
///
/// Pinned points are indexed `i·N_u + k`.
pub struct AveragedKg<'a> {
    model: &'a SurrogateModel,
    cache: CrossCache,
    n_groups: usize,
    n_u: usize,
    intercepts: Vec<f64>,
}

impl<'a> AveragedKg<'a> {
    fn from_cache(model: &'a SurrogateModel, cache: CrossCache, n_groups: usize, n_u: usize) -> Self {
        let m = cache.means();
        let intercepts = (0..n_groups).map(|i| m[i * n_u..(i + 1) * n_u].iter().sum::<f64>() / n_u as f64).collect();
        Self { model, cache, n_groups, n_u, intercepts }
    }

    /// Alternating step with the policy frozen at `ĝ(u') = argmax_{y'} μⁿ(x̂, y', u')`.
    pub fn alternating_fix(model: &'a SurrogateModel, ctx: &AcqContext) -> Result<Self> {
        let grid = JointGrid::build(model, ctx)?;
        let (x_hat, _) = grid.inner();
        let policy: Vec<usize> = (0..grid.n_u).map(|k| grid.best_y(x_hat, k)).collect();
        let indices: Vec<usize> =
            (0..grid.n_x).flat_map(|i| policy.iter().enumerate().map(move |(k, &j)| (i, k, j))).map(|(i, k, j)| grid.index(i, k, j)).collect();
        let cache = grid.cache.select(&indices);
        Ok(Self::from_cache(model, cache, grid.n_x, grid.n_u))
    }

    /// Stage two of the two-step method, on a model over 𝕏 × 𝕌.
    pub fn two_step_stage2(model_xu: &'a SurrogateModel, ctx: &AcqContext) -> Result<Self> {
        let (n_x, n_u) = (ctx.x_disc.len(), ctx.u_mc.len());
        if n_x == 0 || n_u == 0 {
            return Err(Error::InvalidArgument("discretizations must be nonempty".into()));
        }
        let d = ctx.x_disc[0].len() + ctx.u_mc[0].len();
        if d != model_xu.dim() {
            return Err(Error::DimensionMismatch { expected: model_xu.dim(), got: d });
        }
        let mut points = Vec::with_capacity(n_x * n_u * d);
        for x in &ctx.x_disc {
            for u in &ctx.u_mc {
                points.extend_from_slice(x);
                points.extend_from_slice(u);
            }
        }
        let cache = model_xu.cross_cache_from_flat(points);
        Ok(Self::from_cache(model_xu, cache, n_x, n_u))
    }

    /// Environment-averaged posterior means `A_i`.
    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    fn averaged_slopes(&self, slopes: &[f64]) -> Vec<f64> {
        (0..self.n_groups).map(|i| slopes[i * self.n_u..(i + 1) * self.n_u].iter().sum::<f64>() / self.n_u as f64).collect()
    }
}

impl Acquisition for AveragedKg<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, point: &[f64]) -> f64 {
        let fs = self.model.fantasy_slopes(&self.cache, point);
        if fs.is_degenerate() {
            return 0.0;
        }
        expected_max_increment(&self.intercepts, &self.averaged_slopes(fs.slopes()), None)
    }

    fn value_and_gradient(&self, point: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let fs = self.model.fantasy_slopes(&self.cache, point);
        if fs.is_degenerate() {
            return 0.0;
        }
        let b = self.averaged_slopes(fs.slopes());
        let mut w = vec![0.0; self.n_groups];
        let value = expected_max_increment(&self.intercepts, &b, Some(&mut w));
        let mut beta = vec![0.0; self.cache.len()];
        for (i, wi) in w.iter().enumerate() {
            for bk in &mut beta[i * self.n_u..(i + 1) * self.n_u] {
                *bk = wi / self.n_u as f64;
            }
        }
        grad.copy_from_slice(&self.model.fantasy_slopes_gradient(&self.cache, &fs, &beta));
        value
    }
}

/// `(1/N_u) Σ_k (E[max_j (m_kj + c_kj Z)] − max_j m_kj)`: one affine family
/// over the adjustable discretization per environment sample.
///
/// Pinned points are indexed `k·N_y + j`.
pub struct PerEnvironmentKg<'a> {
    model: &'a SurrogateModel,
    cache: CrossCache,
    n_u: usize,
    n_y: usize,
}

impl<'a> PerEnvironmentKg<'a> {
    /// Alternating step that adjusts the policy at fixed `x̂`.
    pub fn alternating_adjust(model: &'a SurrogateModel, ctx: &AcqContext) -> Result<Self> {
        let grid = JointGrid::build(model, ctx)?;
        let (x_hat, _) = grid.inner();
        let indices: Vec<usize> = (0..grid.n_u).flat_map(|k| (0..grid.n_y).map(move |j| (k, j))).map(|(k, j)| grid.index(x_hat, k, j)).collect();
        let cache = grid.cache.select(&indices);
        Ok(Self { model, cache, n_u: grid.n_u, n_y: grid.n_y })
    }

    /// Stage one of the two-step method, on a model over 𝕐 × 𝕌. With
    /// `x_fixed` the adjustable points are first projected onto the feasible
    /// set for that design.
    pub fn two_step_stage1(model_yu: &'a SurrogateModel, ctx: &AcqContext, x_fixed: Option<&[f64]>) -> Result<Self> {
        let (n_y, n_u) = (ctx.y_disc.len(), ctx.u_mc.len());
        if n_y == 0 || n_u == 0 {
            return Err(Error::InvalidArgument("discretizations must be nonempty".into()));
        }
        let d = ctx.y_disc[0].len() + ctx.u_mc[0].len();
        if d != model_yu.dim() {
            return Err(Error::DimensionMismatch { expected: model_yu.dim(), got: d });
        }
        let ys: Vec<Vec<f64>> = match x_fixed {
            Some(x) => ctx.y_disc.iter().map(|y| ctx.project(x, y)).collect(),
            None => ctx.y_disc.clone(),
        };
        let mut points = Vec::with_capacity(n_y * n_u * d);
        for u in &ctx.u_mc {
            for y in &ys {
                points.extend_from_slice(y);
                points.extend_from_slice(u);
            }
        }
        let cache = model_yu.cross_cache_from_flat(points);
        Ok(Self { model: model_yu, cache, n_u, n_y })
    }
}

impl Acquisition for PerEnvironmentKg<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, point: &[f64]) -> f64 {
        let fs = self.model.fantasy_slopes(&self.cache, point);
        if fs.is_degenerate() {
            return 0.0;
        }
        let m = self.cache.means();
        let c = fs.slopes();
        let ny = self.n_y;
        (0..self.n_u).map(|k| expected_max_increment(&m[k * ny..(k + 1) * ny], &c[k * ny..(k + 1) * ny], None)).sum::<f64>()
            / self.n_u as f64
    }

    fn value_and_gradient(&self, point: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let fs = self.model.fantasy_slopes(&self.cache, point);
        if fs.is_degenerate() {
            return 0.0;
        }
        let m = self.cache.means();
        let c = fs.slopes();
        let ny = self.n_y;
        let mut beta = vec![0.0; self.cache.len()];
        let mut total = 0.0;
        for k in 0..self.n_u {
            let r = k * ny..(k + 1) * ny;
            total += expected_max_increment(&m[r.clone()], &c[r.clone()], Some(&mut beta[r]));
        }
        let scale = 1.0 / self.n_u as f64;
        beta.iter_mut().for_each(|b| *b *= scale);
        grad.copy_from_slice(&self.model.fantasy_slopes_gradient(&self.cache, &fs, &beta));
        total * scale
    }
}
