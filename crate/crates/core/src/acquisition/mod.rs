//! Knowledge-gradient acquisition functions.
//!
//! Each acquisition is built once per iteration from a fitted model and an
//! [`AcqContext`]; construction pins the discretization and caches its
//! cross-covariance with the training data, after which evaluating the value
//! and gradient at a candidate point only costs one fantasy-slope pass.
//!
//! - [`JointKg`]: qMC average over fantasy base samples of the two-stage
//!   inner value.
//! - [`AveragedKg`]: one affine family over 𝕏 of environment-averaged
//!   fantasy means (alternating "fix" step, two-step stage 2).
//! - [`PerEnvironmentKg`]: one affine family over 𝕐 per environment sample,
//!   averaged (alternating "adjust" step, two-step stage 1).

mod affine;
mod context;
mod exact;
mod joint;

use crate::error::{Error, Result};
use crate::gp::{CrossCache, SurrogateModel};

pub use affine::{expected_max_affine, AffineFamily};
pub use context::{AcqContext, AcqSizes, EnvSampler, Projection};
pub use exact::{AveragedKg, PerEnvironmentKg};
pub use joint::JointKg;

pub(crate) use affine::expected_max_increment;

/// Which knowledge gradient to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcquisitionKind {
    Joint,
    AltFix,
    AltAdj,
    TwoStepStage1,
    TwoStepStage2,
}

/// A deterministic function of the query point once built.
pub trait Acquisition: Sync {
    fn dim(&self) -> usize;

    fn value(&self, point: &[f64]) -> f64;

    /// Value and gradient with the inner argmax sets held fixed.
    fn value_and_gradient(&self, point: &[f64], grad: &mut [f64]) -> f64;
}

/// Maximizer over `X_disc` of the environment-averaged best posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerValue {
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

/// `max_{x'} (1/N_u) Σ_{u'} max_{y'} μⁿ(x', y', u')` over the context's sets;
/// ties go to the lowest index.
pub fn inner_value(model: &SurrogateModel, ctx: &AcqContext) -> Result<InnerValue> {
    let grid = JointGrid::build(model, ctx)?;
    let (index, value) = grid.inner();
    Ok(InnerValue { index, point: ctx.x_disc[index].clone(), value })
}

/// `X_disc × Y_disc × U_MC` pinned against the model, indexed `(i·N_u + k)·N_y + j`.
pub(crate) struct JointGrid {
    cache: CrossCache,
    n_x: usize,
    n_y: usize,
    n_u: usize,
}

impl JointGrid {
    fn build(model: &SurrogateModel, ctx: &AcqContext) -> Result<Self> {
        let (n_x, n_y, n_u) = (ctx.x_disc.len(), ctx.y_disc.len(), ctx.u_mc.len());
        if n_x == 0 || n_y == 0 || n_u == 0 {
            return Err(Error::InvalidArgument("discretizations must be nonempty".into()));
        }
        let d = ctx.x_disc[0].len() + ctx.y_disc[0].len() + ctx.u_mc[0].len();
        if d != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: d });
        }
        let mut points = Vec::with_capacity(n_x * n_y * n_u * d);
        let projected: Vec<Vec<Vec<f64>>> =
            ctx.x_disc.iter().map(|x| ctx.y_disc.iter().map(|y| ctx.project(x, y)).collect()).collect();
        for (x, ys) in ctx.x_disc.iter().zip(&projected) {
            for u in &ctx.u_mc {
                for y in ys {
                    points.extend_from_slice(x);
                    points.extend_from_slice(y);
                    points.extend_from_slice(u);
                }
            }
        }
        Ok(Self { cache: model.cross_cache_from_flat(points), n_x, n_y, n_u })
    }

    fn index(&self, i: usize, k: usize, j: usize) -> usize {
        (i * self.n_u + k) * self.n_y + j
    }

    /// `(x̂ index, value)` of the inner problem.
    fn inner(&self) -> (usize, f64) {
        let m = self.cache.means();
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.n_x {
            let mut s = 0.0;
            for k in 0..self.n_u {
                let base = self.index(i, k, 0);
                s += m[base..base + self.n_y].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            let v = s / self.n_u as f64;
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// Lowest-index maximizer over `Y_disc` of the posterior mean at `(x_i, ·, u_k)`.
    fn best_y(&self, i: usize, k: usize) -> usize {
        let m = self.cache.means();
        let base = self.index(i, k, 0);
        argmax(&m[base..base + self.n_y])
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Builds the requested acquisition on the joint space.
pub fn build_acquisition<'a>(kind: AcquisitionKind, model: &'a SurrogateModel, ctx: &AcqContext) -> Result<Box<dyn Acquisition + 'a>> {
    Ok(match kind {
        AcquisitionKind::Joint => Box::new(JointKg::new(model, ctx)?),
        AcquisitionKind::AltFix => Box::new(AveragedKg::alternating_fix(model, ctx)?),
        AcquisitionKind::AltAdj => Box::new(PerEnvironmentKg::alternating_adjust(model, ctx)?),
        AcquisitionKind::TwoStepStage1 => Box::new(PerEnvironmentKg::two_step_stage1(model, ctx, None)?),
        AcquisitionKind::TwoStepStage2 => Box::new(AveragedKg::two_step_stage2(model, ctx)?),
    })
}

/// Joint knowledge gradient at `point`.
pub fn acq_joint_kg(model: &SurrogateModel, point: &[f64], ctx: &AcqContext) -> Result<f64> {
    Ok(JointKg::new(model, ctx)?.value(point))
}

/// Alternating knowledge gradient, fixed-policy step, at `point`.
pub fn acq_alt_fix(model: &SurrogateModel, point: &[f64], ctx: &AcqContext) -> Result<f64> {
    Ok(AveragedKg::alternating_fix(model, ctx)?.value(point))
}

/// Alternating knowledge gradient, adjustable step, at `point`.
pub fn acq_alt_adj(model: &SurrogateModel, point: &[f64], ctx: &AcqContext) -> Result<f64> {
    Ok(PerEnvironmentKg::alternating_adjust(model, ctx)?.value(point))
}

/// Two-step knowledge gradient, stage 1, on a model over 𝕐 × 𝕌.
pub fn acq_twostep_stage1(model_yu: &SurrogateModel, point: &[f64], ctx: &AcqContext) -> Result<f64> {
    Ok(PerEnvironmentKg::two_step_stage1(model_yu, ctx, None)?.value(point))
}

/// Two-step knowledge gradient, stage 2, on a model over 𝕏 × 𝕌.
pub fn acq_twostep_stage2(model_xu: &SurrogateModel, point: &[f64], ctx: &AcqContext) -> Result<f64> {
    Ok(AveragedKg::two_step_stage2(model_xu, ctx)?.value(point))
}

/// Gradient of `acq` at `point`.
pub fn acq_gradient(acq: &dyn Acquisition, point: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; acq.dim()];
    acq.value_and_gradient(point, &mut g);
    g
}

#[cfg(test)]
mod tests;
