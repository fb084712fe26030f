use crate::acquisition::{Acquisition, AcqContext, JointGrid};
use crate::error::Result;
use crate::gp::SurrogateModel;

/// qMC joint knowledge gradient over `X_disc × Y_disc × U_MC`.
pub struct JointKg<'a> {
    model: &'a SurrogateModel,
    grid: JointGrid,
    z: Vec<f64>,
    baseline: f64,
    x_hat: usize,
}

struct Sweep {
    best: Vec<f64>,
    best_i: Vec<usize>,
}

impl<'a> JointKg<'a> {
    pub fn new(model: &'a SurrogateModel, ctx: &AcqContext) -> Result<Self> {
        let grid = JointGrid::build(model, ctx)?;
        let (x_hat, baseline) = grid.inner();
        Ok(Self { model, grid, z: ctx.z_base.clone(), baseline, x_hat })
    }

    /// The constant second term: the current inner value.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn x_hat_index(&self) -> usize {
        self.x_hat
    }

    fn sweep(&self, slopes: &[f64]) -> Sweep {
        let g = &self.grid;
        let m = g.cache.means();
        let nv = self.z.len();
        let mut best = vec![f64::NEG_INFINITY; nv];
        let mut best_i = vec![0usize; nv];
        let mut s = vec![0.0; nv];
        let mut acc = vec![0.0; nv];
        for i in 0..g.n_x {
            s.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..g.n_u {
                acc.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
                let base = g.index(i, k, 0);
                for j in 0..g.n_y {
                    let (mj, cj) = (m[base + j], slopes[base + j]);
                    for (a, z) in acc.iter_mut().zip(&self.z) {
                        *a = a.max(mj + cj * z);
                    }
                }
                for (sv, a) in s.iter_mut().zip(&acc) {
                    *sv += a;
                }
            }
            for l in 0..nv {
                let v = s[l] / g.n_u as f64;
                if v > best[l] {
                    best[l] = v;
                    best_i[l] = i;
                }
            }
        }
        Sweep { best, best_i }
    }

    fn value_from(&self, sweep: &Sweep) -> f64 {
        sweep.best.iter().map(|b| b - self.baseline).sum::<f64>() / self.z.len() as f64
    }
}

impl Acquisition for JointKg<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, point: &[f64]) -> f64 {
        let fs = self.model.fantasy_slopes(&self.grid.cache, point);
        if fs.is_degenerate() {
            return 0.0;
        }
        self.value_from(&self.sweep(fs.slopes()))
    }

    fn value_and_gradient(&self, point: &[f64], grad: &mut [f64]) -> f64 {
        let fs = self.model.fantasy_slopes(&self.grid.cache, point);
        grad.iter_mut().for_each(|g| *g = 0.0);
        if fs.is_degenerate() {
            return 0.0;
        }
        let slopes = fs.slopes();
        let sweep = self.sweep(slopes);
        let g = &self.grid;
        let m = g.cache.means();
        let nv = self.z.len();
        let mut beta = vec![0.0; m.len()];
        let weight = 1.0 / (nv as f64 * g.n_u as f64);
        for (l, &z) in self.z.iter().enumerate() {
            let i = sweep.best_i[l];
            for k in 0..g.n_u {
                let base = g.index(i, k, 0);
                let mut jb = 0;
                let mut vb = f64::NEG_INFINITY;
                for j in 0..g.n_y {
                    let v = m[base + j] + slopes[base + j] * z;
                    if v > vb {
                        vb = v;
                        jb = j;
                    }
                }
                beta[base + jb] += z * weight;
            }
        }
        let gr = self.model.fantasy_slopes_gradient(&g.cache, &fs, &beta);
        grad.copy_from_slice(&gr);
        self.value_from(&sweep)
    }
}
