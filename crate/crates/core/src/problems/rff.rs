use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

/// Parameters of a random-Fourier-feature GP sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RffSpec {
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
    pub n_features: usize,
    pub seed: u64,
}

/// One approximate sample path of a zero-mean Matérn-5/2 GP on the unit
/// cube: `sqrt(2s/m) Σⱼ wⱼ cos(ωⱼ·x + bⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffFunction {
    dim: usize,
    omega: Vec<f64>,
    phase: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
}

impl RffFunction {
    /// Spectral frequencies follow the multivariate Student-t with five
    /// degrees of freedom: `ω = z / (ℓ·sqrt(g/5))`, one `g ~ χ²(5)` per
    /// feature.
    pub fn sample(spec: &RffSpec) -> Result<Self> {
        if spec.n_features == 0 {
            return Err(Error::InvalidArgument("n_features must be at least 1".into()));
        }
        if spec.lengthscales.is_empty() || spec.lengthscales.iter().any(|l| !(*l > 0.0)) || !(spec.outputscale > 0.0) {
            return Err(Error::InvalidArgument("lengthscales and outputscale must be positive".into()));
        }
        let dim = spec.lengthscales.len();
        let m = spec.n_features;
        let mut rng = seeding::rng(seeding::mix(spec.seed, seeding::tag("rff")));
        let chi = ChiSquared::new(5.0).expect("valid degrees of freedom");
        let mut omega = Vec::with_capacity(m * dim);
        for _ in 0..m {
            let g: f64 = chi.sample(&mut rng);
            let t = (g / 5.0).sqrt();
            for l in &spec.lengthscales {
                let z: f64 = StandardNormal.sample(&mut rng);
                omega.push(z / (l * t));
            }
        }
        let phase = (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let weights = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(Self { dim, omega, phase, weights, scale: (2.0 * spec.outputscale / m as f64).sqrt() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            let om = &self.omega[j * self.dim..(j + 1) * self.dim];
            let arg: f64 = om.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.phase[j];
            total += w * arg.cos();
        }
        self.scale * total
    }

    pub fn eval_with_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            let om = &self.omega[j * self.dim..(j + 1) * self.dim];
            let arg: f64 = om.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.phase[j];
            let (s, c) = arg.sin_cos();
            total += w * c;
            for (g, o) in grad.iter_mut().zip(om) {
                *g -= self.scale * w * s * o;
            }
        }
        self.scale * total
    }

    /// Unit phasors `exp(i·ω_j[range]·p)` for each point, with the random
    /// phase folded into the first block.
    fn phasors(&self, points: &[Vec<f64>], offset: usize, with_phase: bool) -> (Vec<f64>, Vec<f64>) {
        let m = self.weights.len();
        let mut re = Vec::with_capacity(points.len() * m);
        let mut im = Vec::with_capacity(points.len() * m);
        for p in points {
            for j in 0..m {
                let om = &self.omega[j * self.dim + offset..j * self.dim + offset + p.len()];
                let mut arg: f64 = om.iter().zip(p).map(|(a, b)| a * b).sum();
                if with_phase {
                    arg += self.phase[j];
                }
                let (s, c) = arg.sin_cos();
                re.push(c);
                im.push(s);
            }
        }
        (re, im)
    }

    /// Values on the product grid `xs × ys × us` (coordinates in that order),
    /// laid out as `[(ix·n_u + iu)·n_y + iy]`. Each term factorizes as a
    /// product of per-block phasors, so the grid costs one complex
    /// multiply-add per feature and point.
    pub fn grid_values(&self, xs: &[Vec<f64>], ys: &[Vec<f64>], us: &[Vec<f64>]) -> Vec<f64> {
        let m = self.weights.len();
        let dx = xs.first().map_or(0, Vec::len);
        let dy = ys.first().map_or(0, Vec::len);
        let (xr, xi) = self.phasors(xs, 0, true);
        let (yr, yi) = self.phasors(ys, dx, false);
        let (ur, ui) = self.phasors(us, dx + dy, false);
        let mut out = Vec::with_capacity(xs.len() * us.len() * ys.len());
        let (mut ar, mut ai) = (vec![0.0; m], vec![0.0; m]);
        for a in 0..xs.len() {
            for b in 0..us.len() {
                for j in 0..m {
                    let (pr, pi) = (xr[a * m + j], xi[a * m + j]);
                    let (qr, qi) = (ur[b * m + j], ui[b * m + j]);
                    ar[j] = self.weights[j] * (pr * qr - pi * qi);
                    ai[j] = self.weights[j] * (pr * qi + pi * qr);
                }
                for c in 0..ys.len() {
                    let (er, ei) = (&yr[c * m..(c + 1) * m], &yi[c * m..(c + 1) * m]);
                    let mut total = 0.0;
                    for j in 0..m {
                        total += ar[j] * er[j] - ai[j] * ei[j];
                    }
                    out.push(self.scale * total);
                }
            }
        }
        out
    }
}
