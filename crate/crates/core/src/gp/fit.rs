use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{factorize, Dataset, Hyperparameters, Matern52};
use crate::optimize::lbfgsb::{self, LbfgsbOptions};
use crate::seeding;

/// Gamma distribution with shape `alpha` and rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(Self { alpha, beta })
        } else {
            Err(Error::InvalidArgument(format!("gamma prior needs alpha, beta > 0 (got {alpha}, {beta})")))
        }
    }

    pub fn mode(&self) -> f64 {
        ((self.alpha - 1.0) / self.beta).max(0.0)
    }
}

/// `α ln β − ln Γ(α) + (α − 1) ln z − β z`; `−∞` for `z ≤ 0`.
pub fn gamma_logpdf(prior: &GammaPrior, z: f64) -> f64 {
    if !(z > 0.0) {
        return f64::NEG_INFINITY;
    }
    prior.alpha * prior.beta.ln() - libm::lgamma(prior.alpha) + (prior.alpha - 1.0) * z.ln() - prior.beta * z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    pub lengthscale: GammaPrior,
    pub outputscale: GammaPrior,
    pub noise: GammaPrior,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            lengthscale: GammaPrior { alpha: 3.0, beta: 10.0 },
            outputscale: GammaPrior { alpha: 2.0, beta: 0.15 },
            noise: GammaPrior { alpha: 1.1, beta: 0.05 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanMode {
    /// Generalized-least-squares estimate under a flat prior.
    Fit,
    /// Held at the given value (standardized units).
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub fix_noise: bool,
    pub mean: MeanMode,
    pub seed: u64,
    pub starts: usize,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { fix_noise: false, mean: MeanMode::Fit, seed: 0, starts: 4, max_iters: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub hyperparameters: Hyperparameters,
    pub log_posterior: f64,
    pub converged: bool,
}

pub const FIXED_NOISE: f64 = 1e-8;
const LOG_LENGTHSCALE_BOUNDS: (f64, f64) = (-6.907_755_278_982_137, 6.907_755_278_982_137);
const LOG_OUTPUTSCALE_BOUNDS: (f64, f64) = (-6.907_755_278_982_137, 6.907_755_278_982_137);
const LOG_NOISE_BOUNDS: (f64, f64) = (-13.815_510_557_964_274, 2.302_585_092_994_046);

struct Objective<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    priors: &'a Priors,
    fix_noise: bool,
    mean: MeanMode,
    dim: usize,
}

struct Evaluation {
    neg_log_posterior: f64,
    mean: f64,
}

impl Objective<'_> {
    fn unpack(&self, theta: &[f64]) -> (Vec<f64>, f64, f64) {
        let ls = theta[..self.dim].iter().map(|v| v.exp()).collect();
        let s = theta[self.dim].exp();
        let noise = if self.fix_noise { FIXED_NOISE } else { theta[self.dim + 1].exp() };
        (ls, s, noise)
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> Evaluation {
        let n = self.y.len();
        let d = self.dim;
        let (ls, s, noise) = self.unpack(theta);
        let kernel = Matern52::new(&ls, s);
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.eval(&self.x[i], &self.x[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let kk = k.clone();
        let Ok((chol, _)) = factorize(k, noise, s) else {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return Evaluation { neg_log_posterior: f64::INFINITY, mean: 0.0 };
        };
        let kinv = chol.inverse();
        let y = DVector::from_column_slice(self.y);
        let mean = match self.mean {
            MeanMode::Fixed(m) => m,
            MeanMode::Fit => {
                let row_sums: DVector<f64> = kinv.column_sum();
                let denom = row_sums.sum();
                if denom > 0.0 {
                    row_sums.dot(&y) / denom
                } else {
                    0.0
                }
            }
        };
        let r = y.add_scalar(-mean);
        let alpha = &kinv * &r;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut log_post = -0.5 * r.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

        // d log ML / dθ = ½ Σ_ij W_ij ∂K_ij/∂θ with W = ααᵀ − K⁻¹.
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut dl = vec![0.0; d];
        let mut trace_w = 0.0;
        let mut ws = 0.0;
        for i in 0..n {
            let wii = alpha[i] * alpha[i] - kinv[(i, i)];
            trace_w += wii;
            ws += wii * kk[(i, i)];
            for j in 0..i {
                let wij = alpha[i] * alpha[j] - kinv[(i, j)];
                kernel.log_lengthscale_grad(&self.x[i], &self.x[j], &mut dl);
                for (g, v) in grad[..d].iter_mut().zip(&dl) {
                    *g += wij * v;
                }
                ws += 2.0 * wij * kk[(i, j)];
            }
        }
        grad[d] = 0.5 * ws;
        if !self.fix_noise {
            grad[d + 1] = 0.5 * noise * trace_w;
        }

        for (k, l) in ls.iter().enumerate() {
            log_post += gamma_logpdf(&self.priors.lengthscale, *l);
            grad[k] += (self.priors.lengthscale.alpha - 1.0) - self.priors.lengthscale.beta * l;
        }
        log_post += gamma_logpdf(&self.priors.outputscale, s);
        grad[d] += (self.priors.outputscale.alpha - 1.0) - self.priors.outputscale.beta * s;
        if !self.fix_noise {
            log_post += gamma_logpdf(&self.priors.noise, noise);
            grad[d + 1] += (self.priors.noise.alpha - 1.0) - self.priors.noise.beta * noise;
        }
        grad.iter_mut().for_each(|g| *g = -*g);
        Evaluation { neg_log_posterior: -log_post, mean }
    }
}

/// Maximum-a-posteriori hyperparameters for the standardized observations of `dataset`.
///
/// Optimization runs over log-parameters inside fixed bounds from the prior
/// modes plus seeded perturbations; the best start wins. Never fails once
/// the inputs are valid: if no start reaches a finite objective the prior
/// modes are returned with `converged = false`.
pub fn fit_map(dataset: &Dataset, priors: &Priors, options: &FitOptions) -> Result<FitOutcome> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument("fit_map needs at least two observations".into()));
    }
    let dim = dataset.dim();
    let y = dataset.standardized_observations();
    let objective = Objective { x: dataset.inputs(), y: &y, priors, fix_noise: options.fix_noise, mean: options.mean, dim };
    let np = dim + if options.fix_noise { 1 } else { 2 };
    let mut lower = vec![LOG_LENGTHSCALE_BOUNDS.0; dim];
    let mut upper = vec![LOG_LENGTHSCALE_BOUNDS.1; dim];
    lower.push(LOG_OUTPUTSCALE_BOUNDS.0);
    upper.push(LOG_OUTPUTSCALE_BOUNDS.1);
    if !options.fix_noise {
        lower.push(LOG_NOISE_BOUNDS.0);
        upper.push(LOG_NOISE_BOUNDS.1);
    }
    let mut mode = vec![priors.lengthscale.mode().max(1e-3).ln(); dim];
    mode.push(priors.outputscale.mode().max(1e-3).ln());
    if !options.fix_noise {
        mode.push(priors.noise.mode().max(1e-6).ln());
    }
    for i in 0..np {
        mode[i] = mode[i].clamp(lower[i], upper[i]);
    }

    let mut rng = seeding::rng(seeding::mix(options.seed, seeding::tag("fit_map")));
    let mut starts = vec![mode.clone()];
    for _ in 1..options.starts.max(1) {
        starts.push(
            (0..np)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (mode[i] + z).clamp(lower[i], upper[i])
                })
                .collect(),
        );
    }

    let opts = LbfgsbOptions { max_iters: options.max_iters, ..Default::default() };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for start in &starts {
        let res = lbfgsb::minimize(|t, g| objective.evaluate(t, g).neg_log_posterior, start, &lower, &upper, &opts);
        if res.f.is_finite() && best.as_ref().is_none_or(|(_, f, _)| res.f < *f) {
            best = Some((res.x.clone(), res.f, res.converged()));
        }
    }
    let (theta, f, converged) = best.unwrap_or((mode, f64::INFINITY, false));
    if !converged {
        log::warn!("MAP hyperparameter fit did not converge (objective {f})");
    }
    let mut scratch = vec![0.0; np];
    let eval = objective.evaluate(&theta, &mut scratch);
    let (ls, s, noise) = objective.unpack(&theta);
    Ok(FitOutcome {
        hyperparameters: Hyperparameters::new(ls, s, noise, eval.mean),
        log_posterior: -eval.neg_log_posterior,
        converged: converged && f.is_finite(),
    })
}
