use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::qmc;
use crate::seeding;

/// Maps an adjustable point `y` onto the feasible set for fixed design `x`
/// (in normalized coordinates), in place.
pub type Projection = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Distribution of the environmental variable in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSampler {
    /// Uniform on the unit box of dimension `dim`.
    Uniform { dim: usize },
    /// Independent normals, one `(mean, sd)` per coordinate.
    Normal { params: Vec<(f64, f64)> },
}

impl EnvSampler {
    pub fn dim(&self) -> usize {
        match self {
            EnvSampler::Uniform { dim } => *dim,
            EnvSampler::Normal { params } => params.len(),
        }
    }

    /// `n` scrambled Sobol' (uniform) or normal-Sobol' (normal) points.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        match self {
            EnvSampler::Uniform { dim } => Ok(qmc::sobol(*dim, n, seed, true)?.to_rows()),
            EnvSampler::Normal { params } => {
                let z = qmc::normal_sobol(params.len(), n, seed, true)?;
                Ok(z.iter_rows().map(|r| r.iter().zip(params).map(|(z, (m, s))| m + s * z).collect()).collect())
            }
        }
    }
}

/// Sizes of the per-iteration discretizations and qMC sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcqSizes {
    pub n_x: usize,
    pub n_y: usize,
    pub n_u: usize,
    pub n_v: usize,
}

impl Default for AcqSizes {
    fn default() -> Self {
        Self { n_x: 20, n_y: 20, n_u: 64, n_v: 64 }
    }
}

/// One iteration's discretizations of 𝕏 and 𝕐, environmental sample and
/// standard-normal base samples.
#[derive(Clone)]
pub struct AcqContext {
    pub x_disc: Vec<Vec<f64>>,
    pub y_disc: Vec<Vec<f64>>,
    pub u_mc: Vec<Vec<f64>>,
    pub z_base: Vec<f64>,
    projection: Option<Projection>,
}

impl fmt::Debug for AcqContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AcqContext")
            .field("n_x", &self.x_disc.len())
            .field("n_y", &self.y_disc.len())
            .field("n_u", &self.u_mc.len())
            .field("n_v", &self.z_base.len())
            .field("projected", &self.projection.is_some())
            .finish()
    }
}

impl AcqContext {
    pub fn new(x_disc: Vec<Vec<f64>>, y_disc: Vec<Vec<f64>>, u_mc: Vec<Vec<f64>>, z_base: Vec<f64>) -> Result<Self> {
        for (name, n) in [("N_u", u_mc.len()), ("N_v", z_base.len())] {
            if !n.is_power_of_two() {
                return Err(Error::InvalidArgument(format!("{name} must be a power of two, got {n}")));
            }
        }
        for (name, set) in [("X_disc", &x_disc), ("Y_disc", &y_disc), ("U_MC", &u_mc)] {
            let d = set.first().map_or(0, Vec::len);
            if set.iter().any(|p| p.len() != d) {
                return Err(Error::InvalidArgument(format!("{name} points have inconsistent dimensions")));
            }
        }
        Ok(Self { x_disc, y_disc, u_mc, z_base, projection: None })
    }

    /// Fresh randomized context: Latin hypercubes on the unit boxes of 𝕏 and
    /// 𝕐, a scrambled qMC sample of 𝕌, and normal-Sobol' base samples.
    pub fn generate(dx: usize, dy: usize, env: &EnvSampler, sizes: AcqSizes, seed: u64) -> Result<Self> {
        let lhc = |d: usize, n: usize, tag: &str| -> Result<Vec<Vec<f64>>> {
            if d == 0 {
                Ok(vec![Vec::new(); n.min(1)])
            } else {
                Ok(qmc::latin_hypercube(d, n, seeding::mix(seed, seeding::tag(tag)))?.to_rows())
            }
        };
        let x_disc = lhc(dx, sizes.n_x, "x_disc")?;
        let y_disc = lhc(dy, sizes.n_y, "y_disc")?;
        let u_mc = env.sample(sizes.n_u, seeding::mix(seed, seeding::tag("u_mc")))?;
        let z_base = qmc::normal_sobol(1, sizes.n_v, seeding::mix(seed, seeding::tag("z_base")), true)?.values().to_vec();
        Self::new(x_disc, y_disc, u_mc, z_base)
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn projection(&self) -> Option<&Projection> {
        self.projection.as_ref()
    }

    /// `y` projected onto the feasible set for `x` (identity without a projection).
    pub fn project(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        if let Some(p) = &self.projection {
            p(x, &mut out);
        }
        out
    }
}
