use crate::error::{Error, Result};
use crate::gp::Hyperparameters;

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 kernel with one lengthscale per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Matern52 {
    inv_sq_lengthscales: Vec<f64>,
    outputscale: f64,
}

impl Matern52 {
    pub fn new(lengthscales: &[f64], outputscale: f64) -> Self {
        Self {
            inv_sq_lengthscales: lengthscales.iter().map(|l| 1.0 / (l * l)).collect(),
            outputscale,
        }
    }

    pub fn dim(&self) -> usize {
        self.inv_sq_lengthscales.len()
    }

    pub fn outputscale(&self) -> f64 {
        self.outputscale
    }

    pub fn inv_sq_lengthscales(&self) -> &[f64] {
        &self.inv_sq_lengthscales
    }

    #[inline]
    pub fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((x, y), w) in a.iter().zip(b).zip(&self.inv_sq_lengthscales) {
            let d = x - y;
            r2 += d * d * w;
        }
        r2
    }

    /// Kernel value as a function of the scaled squared distance.
    #[inline]
    pub fn from_sq_dist(&self, r2: f64) -> f64 {
        let sr = SQRT5 * r2.sqrt();
        self.outputscale * (1.0 + sr + 5.0 / 3.0 * r2) * (-sr).exp()
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.from_sq_dist(self.scaled_sq_dist(a, b))
    }

    /// Writes `∂k(a, b)/∂a` into `grad` and returns `k(a, b)`.
    #[inline]
    pub fn eval_with_grad(&self, a: &[f64], b: &[f64], grad: &mut [f64]) -> f64 {
        let r2 = self.scaled_sq_dist(a, b);
        let sr = SQRT5 * r2.sqrt();
        let e = (-sr).exp();
        let common = -5.0 / 3.0 * self.outputscale * (1.0 + sr) * e;
        for (((g, x), y), w) in grad.iter_mut().zip(a).zip(b).zip(&self.inv_sq_lengthscales) {
            *g = common * (x - y) * w;
        }
        self.outputscale * (1.0 + sr + 5.0 / 3.0 * r2) * e
    }

    /// Adds `scale · ∂k(a, b)/∂a` to `acc` and returns `k(a, b)`.
    #[inline]
    pub fn accumulate_grad(&self, a: &[f64], b: &[f64], scale: f64, acc: &mut [f64]) -> f64 {
        let r2 = self.scaled_sq_dist(a, b);
        let sr = SQRT5 * r2.sqrt();
        let e = (-sr).exp();
        let common = -5.0 / 3.0 * self.outputscale * (1.0 + sr) * e * scale;
        for (((g, x), y), w) in acc.iter_mut().zip(a).zip(b).zip(&self.inv_sq_lengthscales) {
            *g += common * (x - y) * w;
        }
        self.outputscale * (1.0 + sr + 5.0 / 3.0 * r2) * e
    }

    /// `∂k/∂log ℓ_k = s·(5/3)(1 + √5 r)e^{−√5 r}·(Δ_k/ℓ_k)²`, written into `out`.
    pub fn log_lengthscale_grad(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let r2 = self.scaled_sq_dist(a, b);
        let sr = SQRT5 * r2.sqrt();
        let common = 5.0 / 3.0 * self.outputscale * (1.0 + sr) * (-sr).exp();
        for (((o, x), y), w) in out.iter_mut().zip(a).zip(b).zip(&self.inv_sq_lengthscales) {
            let d = x - y;
            *o = common * d * d * w;
        }
    }
}

/// Matérn-5/2 covariance between two points under `hp`.
pub fn kernel_matern52(hp: &Hyperparameters, a: &[f64], b: &[f64]) -> Result<f64> {
    let d = hp.lengthscales.len();
    for p in [a, b] {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
    }
    Ok(Matern52::new(&hp.lengthscales, hp.outputscale).eval(a, b))
}
