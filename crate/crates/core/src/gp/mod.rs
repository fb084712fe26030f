//! Gaussian-process surrogate: Matérn-5/2 ARD kernel, constant mean,
//! exact posterior, one-step fantasy updates and MAP fitting.
//!
//! Inputs live in the unit cube (see [`Dataset`]); the model works on
//! standardized observations internally and reports means and covariances in
//! raw observation units.

mod fit;
mod kernel;

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub use fit::{fit_map, gamma_logpdf, FitOptions, FitOutcome, GammaPrior, MeanMode, Priors};
pub use kernel::{kernel_matern52, Matern52};

const MAX_JITTER_FACTOR: f64 = 1e-4;
const MIN_JITTER_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
    pub noise_variance: f64,
    pub mean_const: f64,
}

impl Hyperparameters {
    pub fn new(lengthscales: Vec<f64>, outputscale: f64, noise_variance: f64, mean_const: f64) -> Self {
        Self { lengthscales, outputscale, noise_variance, mean_const }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lengthscales.iter().all(|l| l.is_finite() && *l > 0.0)
            && self.outputscale.is_finite()
            && self.outputscale > 0.0
            && self.noise_variance.is_finite()
            && self.noise_variance >= 0.0
            && self.mean_const.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// Affine map between standardized and raw observations: `raw = shift + scale · std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputTransform {
    pub shift: f64,
    pub scale: f64,
}

impl OutputTransform {
    pub const IDENTITY: Self = Self { shift: 0.0, scale: 1.0 };

    /// Zero mean and unit sample variance; falls back to unit scale for
    /// fewer than two points or constant data.
    pub fn standardizing(observations: &[f64]) -> Self {
        let n = observations.len();
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = observations.iter().sum::<f64>() / n as f64;
        let scale = if n < 2 {
            1.0
        } else {
            let var = observations.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if sd > 1e-12 * mean.abs().max(1.0) {
                sd
            } else {
                1.0
            }
        };
        Self { shift: mean, scale }
    }

    pub fn to_std(&self, raw: f64) -> f64 {
        (raw - self.shift) / self.scale
    }

    pub fn to_raw(&self, std: f64) -> f64 {
        self.shift + self.scale * std
    }
}

/// Training data with normalized inputs and raw observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    observations: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    transform: OutputTransform,
}

impl Dataset {
    /// Inputs already in the unit cube; observations standardized.
    pub fn new(inputs: Vec<Vec<f64>>, observations: Vec<f64>, dim: usize) -> Result<Self> {
        Self::normalized(inputs, observations, vec![(0.0, 1.0); dim])
    }

    /// Raw inputs mapped into the unit cube through `bounds`.
    pub fn from_raw(raw_inputs: &[Vec<f64>], observations: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("every bound needs lo < hi".into()));
        }
        let inputs = raw_inputs
            .iter()
            .map(|x| x.iter().zip(&bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect())
            .collect();
        Self::normalized(inputs, observations, bounds)
    }

    fn normalized(inputs: Vec<Vec<f64>>, observations: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if inputs.len() != observations.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), got: observations.len() });
        }
        let dim = bounds.len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let transform = OutputTransform::standardizing(&observations);
        Ok(Self { inputs, observations, bounds, transform })
    }

    pub fn with_transform(mut self, transform: OutputTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn push(&mut self, input: Vec<f64>, observation: f64) -> Result<()> {
        if input.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: input.len() });
        }
        self.inputs.push(input);
        self.observations.push(observation);
        Ok(())
    }

    /// Recomputes the standardizing output transform from the current data.
    pub fn restandardize(&mut self) {
        self.transform = OutputTransform::standardizing(&self.observations);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn transform(&self) -> OutputTransform {
        self.transform
    }

    pub fn standardized_observations(&self) -> Vec<f64> {
        self.observations.iter().map(|v| self.transform.to_std(*v)).collect()
    }

    pub fn to_raw_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.bounds).map(|(v, (lo, hi))| lo + v * (hi - lo)).collect()
    }
}

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

/// A conditioned GP. Immutable once built; all queries take `&self`.
#[derive(Debug)]
pub struct SurrogateModel {
    id: u64,
    hp: Hyperparameters,
    kernel: Matern52,
    dim: usize,
    x: Vec<f64>,
    n: usize,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    transform: OutputTransform,
    jitter: f64,
    kernel_evals: AtomicU64,
    dataset: Dataset,
}

impl Clone for SurrogateModel {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            hp: self.hp.clone(),
            kernel: self.kernel.clone(),
            dim: self.dim,
            x: self.x.clone(),
            n: self.n,
            chol: self.chol.clone(),
            alpha: self.alpha.clone(),
            transform: self.transform,
            jitter: self.jitter,
            kernel_evals: AtomicU64::new(self.kernel_evals.load(Ordering::Relaxed)),
            dataset: self.dataset.clone(),
        }
    }
}

pub(crate) fn factorize(mut k: DMatrix<f64>, base_noise: f64, outputscale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mut jitter = MIN_JITTER_FACTOR * outputscale;
    let mut added = 0.0;
    loop {
        let delta = base_noise + jitter - added;
        for i in 0..n {
            k[(i, i)] += delta;
        }
        added = base_noise + jitter;
        if let Some(c) = Cholesky::new(k.clone()) {
            return Ok((c, jitter));
        }
        if jitter >= MAX_JITTER_FACTOR * outputscale * (1.0 - 1e-12) {
            return Err(Error::Factorization { n, jitter });
        }
        jitter *= 10.0;
    }
}

impl SurrogateModel {
    pub fn new(dataset: &Dataset, hp: Hyperparameters) -> Result<Self> {
        hp.validate()?;
        let dim = dataset.dim();
        if hp.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: hp.dim() });
        }
        let kernel = Matern52::new(&hp.lengthscales, hp.outputscale);
        let n = dataset.len();
        let x: Vec<f64> = dataset.inputs().iter().flatten().copied().collect();
        let transform = dataset.transform();
        let (chol, alpha, jitter) = if n == 0 {
            (None, DVector::zeros(0), MIN_JITTER_FACTOR * hp.outputscale)
        } else {
            let mut k = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = kernel.eval(&x[i * dim..(i + 1) * dim], &x[j * dim..(j + 1) * dim]);
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            let (chol, jitter) = factorize(k, hp.noise_variance, hp.outputscale)?;
            let r = DVector::from_iterator(n, dataset.observations().iter().map(|v| transform.to_std(*v) - hp.mean_const));
            let alpha = chol.solve(&r);
            (Some(chol), alpha, jitter)
        };
        let model = Self {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            hp,
            kernel,
            dim,
            x,
            n,
            chol,
            alpha,
            transform,
            jitter,
            kernel_evals: AtomicU64::new((n * (n + 1) / 2) as u64),
            dataset: dataset.clone(),
        };
        Ok(model)
    }

    /// The same hyperparameters and output transform, conditioned on one
    /// more observation.
    pub fn condition_on(&self, input: Vec<f64>, observation: f64) -> Result<Self> {
        let mut data = self.dataset.clone();
        data.push(input, observation)?;
        SurrogateModel::new(&data, self.hp.clone())
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    pub fn kernel(&self) -> &Matern52 {
        &self.kernel
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_train(&self) -> usize {
        self.n
    }

    pub fn transform(&self) -> OutputTransform {
        self.transform
    }

    /// Diagonal jitter actually added on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Noise variance plus jitter, in standardized units.
    pub fn effective_noise(&self) -> f64 {
        self.hp.noise_variance + self.jitter
    }

    /// Number of kernel evaluations performed by this model so far.
    pub fn kernel_evaluations(&self) -> u64 {
        self.kernel_evals.load(Ordering::Relaxed)
    }

    fn count(&self, k: usize) {
        self.kernel_evals.fetch_add(k as u64, Ordering::Relaxed);
    }

    /// Representer weights: the standardized posterior mean is
    /// `mean_const + Σⱼ αⱼ k(q, xⱼ)`.
    pub(crate) fn alpha(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    pub(crate) fn train_point(&self, j: usize) -> &[f64] {
        &self.x[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn train_cov(&self, q: &[f64]) -> DVector<f64> {
        self.count(self.n);
        DVector::from_iterator(self.n, (0..self.n).map(|j| self.kernel.eval(q, self.train_point(j))))
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got: q.len() })
        }
    }

    fn std_mean_from_cov(&self, kq: &[f64]) -> f64 {
        self.hp.mean_const + dot(kq, self.alpha.as_slice())
    }

    /// Posterior mean in raw units.
    pub fn posterior_mean(&self, q: &[f64]) -> f64 {
        let kq = self.train_cov(q);
        self.transform.to_raw(self.std_mean_from_cov(kq.as_slice()))
    }

    /// Posterior mean in raw units and its gradient with respect to `q`.
    pub fn posterior_mean_with_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut m = self.hp.mean_const;
        for j in 0..self.n {
            m += self.alpha[j] * self.kernel.accumulate_grad(q, self.train_point(j), self.alpha[j], grad);
        }
        self.count(self.n);
        for g in grad.iter_mut() {
            *g *= self.transform.scale;
        }
        self.transform.to_raw(m)
    }

    /// Latent posterior variance kⁿ(q, q) in raw units.
    pub fn posterior_variance(&self, q: &[f64]) -> f64 {
        let prior = self.kernel.outputscale();
        let var = match &self.chol {
            None => prior,
            Some(c) => {
                let v = c.l_dirty().solve_lower_triangular(&self.train_cov(q)).expect("triangular factor is nonsingular");
                prior - v.dot(&v)
            }
        };
        var.max(0.0) * self.transform.scale * self.transform.scale
    }

    /// Posterior means and covariance matrix at `queries`, in raw units.
    pub fn posterior(&self, queries: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        if queries.is_empty() {
            return Err(Error::InvalidArgument("posterior needs at least one query".into()));
        }
        for q in queries {
            self.check_dim(q)?;
        }
        let m = queries.len();
        let b = self.transform.scale;
        let mut cov = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = self.kernel.eval(&queries[i], &queries[j]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        self.count(m * (m + 1) / 2);
        let mut means = Vec::with_capacity(m);
        if let Some(c) = &self.chol {
            let mut kxq = DMatrix::zeros(self.n, m);
            for (i, q) in queries.iter().enumerate() {
                let kq = self.train_cov(q);
                means.push(self.transform.to_raw(self.std_mean_from_cov(kq.as_slice())));
                kxq.set_column(i, &kq);
            }
            let v = c.l_dirty().solve_lower_triangular(&kxq).expect("triangular factor is nonsingular");
            cov -= v.transpose() * v;
        } else {
            means.extend(queries.iter().map(|_| self.transform.to_raw(self.hp.mean_const)));
        }
        cov *= b * b;
        Ok((means, cov))
    }

    /// Mean after one more observation at `xt`, drawn as
    /// `v = μⁿ(xt) + z·sqrt(kⁿ(xt, xt) + σ²)`.
    pub fn fantasy_mean(&self, xt: &[f64], z: f64, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_dim(xt)?;
        for q in queries {
            self.check_dim(q)?;
        }
        let f = self.fantasy_at(xt);
        Ok(queries
            .iter()
            .map(|q| {
                let kq = self.train_cov(q);
                let mean = self.transform.to_raw(self.std_mean_from_cov(kq.as_slice()));
                self.count(1);
                let kn = self.kernel.eval(q, xt) - dot(kq.as_slice(), f.w.as_slice());
                mean + f.slope_from_kn(kn) * z
            })
            .collect())
    }

    fn fantasy_at(&self, xt: &[f64]) -> FantasyPoint {
        let kx = self.train_cov(xt);
        let w = match &self.chol {
            Some(c) => c.solve(&kx),
            None => DVector::zeros(0),
        };
        let var = (self.kernel.outputscale() - kx.dot(&w)).max(0.0) + self.effective_noise();
        let degenerate = var <= 10.0 * self.jitter;
        self.count(1);
        FantasyPoint { w, kx, sqrt_var: var.sqrt(), degenerate, scale: self.transform.scale }
    }

    /// Pins a discretization and caches its cross-covariance with the training inputs.
    pub fn attach_cross_cache(&self, points: &[Vec<f64>]) -> Result<CrossCache> {
        for p in points {
            self.check_dim(p)?;
        }
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        Ok(self.cross_cache_from_flat(flat))
    }

    pub(crate) fn cross_cache_from_flat(&self, points: Vec<f64>) -> CrossCache {
        let d = self.dim;
        let m = points.len() / d.max(1);
        let n = self.n;
        let mut k_px = vec![0.0; m * n];
        let mut means = Vec::with_capacity(m);
        for i in 0..m {
            let p = &points[i * d..(i + 1) * d];
            let row = &mut k_px[i * n..(i + 1) * n];
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.kernel.eval(p, self.train_point(j));
            }
            means.push(self.transform.to_raw(self.std_mean_from_cov(row)));
        }
        self.count(m * n);
        CrossCache { model_id: self.id, dim: d, n, points, k_px, means }
    }

    /// Fantasy slopes `∂μ^{n+1}(p)/∂z` for every pinned point `p` of `cache`.
    pub fn fantasy_slopes(&self, cache: &CrossCache, xt: &[f64]) -> FantasySlopes {
        assert_eq!(cache.model_id, self.id, "cross cache belongs to a different model");
        let f = self.fantasy_at(xt);
        let m = cache.len();
        let mut slopes = vec![0.0; m];
        if !f.degenerate {
            let factor = f.scale / f.sqrt_var;
            let n = self.n;
            let d = self.dim;
            for (i, s) in slopes.iter_mut().enumerate() {
                let p = &cache.points[i * d..(i + 1) * d];
                let mut kn = self.kernel.eval(p, xt);
                if n > 0 {
                    kn -= dot(&cache.k_px[i * n..(i + 1) * n], f.w.as_slice());
                }
                *s = factor * kn;
            }
            self.count(m);
        }
        FantasySlopes { slopes, point: f, xt: xt.to_vec() }
    }

    /// Gradient with respect to the fantasy location of `Σ_p β_p · slope_p`.
    pub fn fantasy_slopes_gradient(&self, cache: &CrossCache, fs: &FantasySlopes, beta: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = self.n;
        let mut grad = vec![0.0; d];
        let f = &fs.point;
        if f.degenerate {
            return grad;
        }
        let xt = &fs.xt;
        let mut sum_kn = 0.0;
        let mut q = vec![0.0; n];
        let mut gk = vec![0.0; d];
        let inv_scale = f.sqrt_var / f.scale;
        for (i, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let p = &cache.points[i * d..(i + 1) * d];
            self.kernel.accumulate_grad(xt, p, b, &mut gk);
            sum_kn += b * fs.slopes[i] * inv_scale;
            if n > 0 {
                for (qj, kj) in q.iter_mut().zip(&cache.k_px[i * n..(i + 1) * n]) {
                    *qj += b * kj;
                }
            }
        }
        let v = f.sqrt_var * f.sqrt_var;
        let mut grad_v = vec![0.0; d];
        if let Some(c) = &self.chol {
            let t = c.solve(&DVector::from_vec(q));
            let mut gj = vec![0.0; d];
            for j in 0..n {
                self.kernel.eval_with_grad(xt, self.train_point(j), &mut gj);
                for k in 0..d {
                    gk[k] -= t[j] * gj[k];
                    grad_v[k] -= 2.0 * f.w[j] * gj[k];
                }
            }
            self.count(n);
        }
        let s = f.scale;
        for k in 0..d {
            grad[k] = s * (gk[k] / f.sqrt_var - sum_kn * grad_v[k] / (2.0 * v * f.sqrt_var));
        }
        grad
    }
}

#[derive(Debug, Clone)]
struct FantasyPoint {
    w: DVector<f64>,
    #[allow(dead_code)]
    kx: DVector<f64>,
    sqrt_var: f64,
    degenerate: bool,
    scale: f64,
}

impl FantasyPoint {
    fn slope_from_kn(&self, kn: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            self.scale * kn / self.sqrt_var
        }
    }
}

/// Slopes of the fantasy mean at every pinned point, in raw units per unit `z`.
#[derive(Debug, Clone)]
pub struct FantasySlopes {
    slopes: Vec<f64>,
    point: FantasyPoint,
    xt: Vec<f64>,
}

impl FantasySlopes {
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// True when the predictive variance at the fantasy location is at the
    /// jitter floor; all slopes are then exactly zero.
    pub fn is_degenerate(&self) -> bool {
        self.point.degenerate
    }

    /// Predictive standard deviation of the fantasy observation in raw units.
    pub fn predictive_sd(&self) -> f64 {
        self.point.sqrt_var * self.point.scale
    }
}

/// Cross-covariance between a pinned discretization and the training inputs.
#[derive(Debug, Clone)]
pub struct CrossCache {
    model_id: u64,
    dim: usize,
    n: usize,
    points: Vec<f64>,
    k_px: Vec<f64>,
    means: Vec<f64>,
}

impl CrossCache {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Posterior means (raw units) at all pinned points.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Posterior mean at pinned point `index`.
    pub fn posterior_mean(&self, index: usize) -> Result<f64> {
        self.means.get(index).copied().ok_or(Error::NotInDiscretization { index })
    }

    /// Sub-cache over the given pinned points, without recomputation.
    pub fn select(&self, indices: &[usize]) -> CrossCache {
        let d = self.dim;
        let n = self.n;
        let mut points = Vec::with_capacity(indices.len() * d);
        let mut k_px = Vec::with_capacity(indices.len() * n);
        let mut means = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            k_px.extend_from_slice(&self.k_px[i * n..(i + 1) * n]);
            means.push(self.means[i]);
        }
        CrossCache { model_id: self.model_id, dim: d, n, points, k_px, means }
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
