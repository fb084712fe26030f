//! Benchmark problems: GP sample paths via random Fourier features, the
//! optical table, and the supply-chain simulator.
//!
//! Every problem is presented to the optimizer on a normalized joint space
//! (x, y, u): x and y live in the unit cube, u in the unit cube for
//! uniform environments and in standardized demand units for the supply
//! chain. The objective is always maximized; the supply chain reports
//! negated cost.

mod optical;
mod rff;
mod supply_chain;

use std::sync::OnceLock;

pub use optical::{
    optical_table_ratio, OpticalTable, DAMPING_RANGE, FREQUENCY_RANGE_HZ, SPRING_RANGE, SPRING_STEP1, TOTAL_MASS,
};
pub use rff::{RffFunction, RffSpec};
pub use supply_chain::{
    exhaustive_best_y, exhaustive_policy, exhaustive_recommendation, optimal_expected_cost, oracle_cost, simulate,
    soy_levels, supply_chain_cost, ExhaustiveRecommendation, SupplyChainSpace, SupplyDecision, DEMAND_MEAN, DEMAND_SD,
    POLICY_PAIRS, SOY_MAX, SOY_STEP,
};

use crate::acquisition::EnvSampler;
use crate::error::{Error, Result};
use crate::optimize::{BoundedBox, OptimizeConfig, Recommender, Surface};
use crate::qmc;
use crate::seeding;

/// Size of the fixed environmental sample used for regret.
pub const REGRET_SAMPLES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub u: usize,
}

impl Dims {
    pub fn new(x: usize, y: usize, u: usize) -> Self {
        Self { x, y, u }
    }

    pub fn total(&self) -> usize {
        self.x + self.y + self.u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Rff(RffFunction),
    Optical(OpticalTable),
    SupplyChain,
}

/// Problem parameters as they appear in an experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// `gp-{dx}-{dy}-{du}`, `gp-short-{x|y|u}`, `optical-table` or
    /// `supply-chain`.
    pub id: String,
    /// Per-space lengthscales (x, y, u) overriding the family default.
    pub lengthscales: Option<[f64; 3]>,
    pub outputscale: f64,
    pub n_features: usize,
    pub noise_sd: f64,
}

impl ProblemSpec {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), lengthscales: None, outputscale: 10.0, n_features: 1024, noise_sd: 0.0 }
    }
}

/// The optimum of a problem on its regret sample: the best fixed design
/// and the average over scenarios of the best objective at that design.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug)]
pub struct Problem {
    id: String,
    dims: Dims,
    family: Family,
    noise_sd: f64,
    x_step1: Vec<f64>,
    seed: u64,
    scenarios: OnceLock<Vec<Vec<f64>>>,
    reference: OnceLock<Reference>,
}

/// Parses a GP family id into dimensions and per-space lengthscales.
fn gp_family(id: &str) -> Option<(Dims, [f64; 3])> {
    let rest = id.strip_prefix("gp-")?;
    if let Some(which) = rest.strip_prefix("short-") {
        let ls = match which {
            "x" => [0.1, 2.0, 2.0],
            "y" => [2.0, 0.1, 2.0],
            "u" => [2.0, 2.0, 0.1],
            _ => return None,
        };
        return Some((Dims::new(1, 1, 1), ls));
    }
    let parts: Vec<usize> = rest.split('-').map(|p| p.parse().ok()).collect::<Option<_>>()?;
    match parts[..] {
        [x, y, u] if x >= 1 && y >= 1 && u >= 1 => Some((Dims::new(x, y, u), [0.4; 3])),
        _ => None,
    }
}

/// Whether `id` names a registered problem family.
pub fn is_registered(id: &str) -> bool {
    matches!(id, "optical-table" | "supply-chain") || gp_family(id).is_some()
}

impl Problem {
    /// Builds the problem instance for one replicate seed.
    pub fn build(spec: &ProblemSpec, seed: u64) -> Result<Self> {
        if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument("noise_sd must be finite and nonnegative".into()));
        }
        let (dims, family, x_step1) = match spec.id.as_str() {
            "optical-table" => {
                (Dims::new(1, 1, 1), Family::Optical(OpticalTable::default()), vec![OpticalTable::normalized_spring(SPRING_STEP1)])
            }
            "supply-chain" => (
                Dims::new(SupplyChainSpace::DX, SupplyChainSpace::DY, SupplyChainSpace::DU),
                Family::SupplyChain,
                vec![0.5],
            ),
            id => {
                let (dims, default_ls) = gp_family(id).ok_or_else(|| Error::UnknownProblem(id.to_string()))?;
                let ls = spec.lengthscales.unwrap_or(default_ls);
                let lengthscales = [(ls[0], dims.x), (ls[1], dims.y), (ls[2], dims.u)]
                    .iter()
                    .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
                    .collect();
                let rff = RffFunction::sample(&RffSpec {
                    lengthscales,
                    outputscale: spec.outputscale,
                    n_features: spec.n_features,
                    seed: seeding::substream(seed, 0, "problem"),
                })?;
                (dims, Family::Rff(rff), vec![0.5; dims.x])
            }
        };
        Ok(Self {
            id: spec.id.clone(),
            dims,
            family,
            noise_sd: spec.noise_sd,
            x_step1,
            seed,
            scenarios: OnceLock::new(),
            reference: OnceLock::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fixed design used by the first phase of the two-step strategies.
    pub fn x_step1(&self) -> &[f64] {
        &self.x_step1
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.family, Family::SupplyChain)
    }

    /// Whether the objective is a cost (reported unnegated).
    pub fn is_cost(&self) -> bool {
        self.is_discrete()
    }

    /// Distribution of the normalized environmental variables.
    pub fn env(&self) -> EnvSampler {
        match self.family {
            Family::SupplyChain => EnvSampler::Normal { params: vec![SupplyChainSpace::normalized_demand(); self.dims.u] },
            _ => EnvSampler::Uniform { dim: self.dims.u },
        }
    }

    /// Search box of the normalized joint space. Normal environments are
    /// bounded by their 1% and 99% quantiles.
    pub fn joint_box(&self) -> BoundedBox {
        let mut lower = vec![0.0; self.dims.x + self.dims.y];
        let mut upper = vec![1.0; self.dims.x + self.dims.y];
        let (lo, hi) = self.u_bounds();
        lower.extend(std::iter::repeat_n(lo, self.dims.u));
        upper.extend(std::iter::repeat_n(hi, self.dims.u));
        BoundedBox::new(lower, upper).expect("problem boxes are nondegenerate")
    }

    /// Per-coordinate bounds of the normalized environment.
    pub fn u_bounds(&self) -> (f64, f64) {
        match self.family {
            Family::SupplyChain => {
                let (m, sd) = SupplyChainSpace::normalized_demand();
                let z = qmc::normal_icdf(0.99).expect("valid probability");
                (m - z * sd, m + z * sd)
            }
            _ => (0.0, 1.0),
        }
    }

    /// Maps a normalized joint point to the nearest feasible one; the
    /// identity for continuous problems.
    pub fn snap(&self, q: &[f64]) -> Vec<f64> {
        match self.family {
            Family::SupplyChain => {
                let d = SupplyChainSpace::snap(q[0], &q[1..4]);
                let mut out = vec![SupplyChainSpace::norm_x(d.x as f64)];
                out.extend(SupplyChainSpace::normalize_y(&d));
                out.extend_from_slice(&q[4..]);
                out
            }
            _ => q.to_vec(),
        }
    }

    /// The supply-chain decision encoded by a normalized joint point.
    pub fn decision(&self, q: &[f64]) -> Option<SupplyDecision> {
        matches!(self.family, Family::SupplyChain).then(|| SupplyChainSpace::snap(q[0], &q[1..4]))
    }

    /// Whether a normalized joint point is exactly feasible.
    pub fn is_feasible(&self, q: &[f64]) -> bool {
        q.len() == self.dims.total()
            && match self.family {
                Family::SupplyChain => {
                    let snapped = self.snap(q);
                    snapped.iter().zip(q).all(|(a, b)| (a - b).abs() < 1e-12) && self.decision(q).is_some_and(|d| d.is_feasible())
                }
                _ => q[..self.dims.x + self.dims.y].iter().all(|v| (0.0..=1.0).contains(v)),
            }
    }

    /// Noiseless objective at a normalized joint point (maximized).
    /// Supply-chain points are snapped to the feasible grid first.
    pub fn evaluate(&self, q: &[f64]) -> f64 {
        match &self.family {
            Family::Rff(f) => f.eval(q),
            Family::Optical(t) => t.eval(q),
            Family::SupplyChain => {
                let d = SupplyChainSpace::snap(q[0], &q[1..4]);
                let u: Vec<f64> = q[4..].iter().map(|v| SupplyChainSpace::raw_u(*v)).collect();
                -simulate(&d, &u)
            }
        }
    }

    /// Fixed design in the problem's physical units.
    pub fn physical_x(&self, x: &[f64]) -> Vec<f64> {
        match &self.family {
            Family::Rff(_) => x.to_vec(),
            Family::Optical(t) => vec![t.to_physical(&[x[0], 0.0, 0.0])[0]],
            Family::SupplyChain => vec![SupplyChainSpace::snap(x[0], &[0.0, 0.0, 0.0]).x as f64],
        }
    }

    /// Normalized environmental sample of size [`REGRET_SAMPLES`], fixed
    /// per problem seed, on which regret is measured.
    pub fn regret_scenarios(&self) -> &[Vec<f64>] {
        self.scenarios.get_or_init(|| {
            self.env().sample(REGRET_SAMPLES, seeding::substream(self.seed, 0, "regret-u")).expect("valid environment")
        })
    }

    /// Cached reference optimum on the regret sample.
    pub fn reference(&self) -> &Reference {
        self.reference.get_or_init(|| self.compute_reference(&reference_config()))
    }

    /// Reference optimum with an explicit optimizer configuration.
    pub fn compute_reference(&self, cfg: &OptimizeConfig) -> Reference {
        let scenarios = self.regret_scenarios();
        match self.family {
            Family::SupplyChain => {
                let raw: Vec<Vec<f64>> =
                    scenarios.iter().map(|u| u.iter().map(|v| SupplyChainSpace::raw_u(*v)).collect()).collect();
                let (x, cost) = optimal_expected_cost(&raw);
                Reference { x: vec![SupplyChainSpace::norm_x(x as f64)], value: -cost }
            }
            _ => {
                let truth = TrueSurface(self);
                let rec = Recommender::unit(&truth, self.dims.x, self.dims.y, cfg.clone())
                    .expect("valid configuration")
                    .with_raw_sizes(cfg.n_raw, crate::optimize::raw_sample_size(self.dims.y));
                let mut rng = seeding::rng(seeding::substream(self.seed, 0, "reference"));
                let out = rec.fixed_design(scenarios, &mut rng).expect("reference optimization");
                let value = self.best_response_value(&out.point, cfg);
                Reference { x: out.point, value: value.max(out.value) }
            }
        }
    }

    /// Average over the regret sample of max_y h(x, y, u), with y
    /// optimized per scenario by multistart on the true function.
    pub fn best_response_value(&self, x: &[f64], cfg: &OptimizeConfig) -> f64 {
        let truth = TrueSurface(self);
        let scenarios = self.regret_scenarios();
        let mut total = 0.0;
        for (j, u) in scenarios.iter().enumerate() {
            let section = crate::optimize::FnObjective::new(self.dims.y, |y: &[f64], g: &mut [f64]| {
                let mut q = x.to_vec();
                q.extend_from_slice(y);
                q.extend_from_slice(u);
                let mut gq = vec![0.0; q.len()];
                let v = truth.value_with_grad(&q, &mut gq);
                g.copy_from_slice(&gq[x.len()..x.len() + y.len()]);
                v
            });
            let small = OptimizeConfig { n_raw: 64, n_restarts: 4, nonnegative_objective: false, ..cfg.clone() };
            let mut rng = seeding::rng(seeding::substream(self.seed, j as u64, "reference-y"));
            let out = crate::optimize::multistart_maximize(&section, &BoundedBox::unit(self.dims.y), &small, &mut rng)
                .expect("valid configuration");
            total += out.value;
        }
        total / scenarios.len() as f64
    }
}

/// Optimizer settings for reference optima: 256 raw points, 20 restarts.
pub fn reference_config() -> OptimizeConfig {
    OptimizeConfig { n_restarts: 20, n_raw: 256, nonnegative_objective: false, ..OptimizeConfig::default() }
}

/// The true objective of a continuous problem as a differentiable surface.
pub struct TrueSurface<'p>(pub &'p Problem);

impl Surface for TrueSurface<'_> {
    fn dim(&self) -> usize {
        self.0.dims.total()
    }

    fn value(&self, q: &[f64]) -> f64 {
        self.0.evaluate(q)
    }

    fn value_with_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        match &self.0.family {
            Family::Rff(f) => f.eval_with_grad(q, grad),
            Family::Optical(t) => t.eval_with_grad(q, grad),
            Family::SupplyChain => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                self.0.evaluate(q)
            }
        }
    }

    fn grid_values(&self, xs: &[Vec<f64>], ys: &[Vec<f64>], us: &[Vec<f64>]) -> Vec<f64> {
        match &self.0.family {
            Family::Rff(f) => f.grid_values(xs, ys, us),
            _ => {
                let mut out = Vec::with_capacity(xs.len() * ys.len() * us.len());
                for x in xs {
                    for u in us {
                        for y in ys {
                            let q: Vec<f64> = x.iter().chain(y).chain(u).copied().collect();
                            out.push(self.0.evaluate(&q));
                        }
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry() {
        for id in ["gp-2-2-2", "gp-4-1-1", "gp-1-4-1", "gp-1-1-4", "gp-short-x", "gp-short-u", "optical-table", "supply-chain"] {
            assert!(is_registered(id), "{id}");
            let p = Problem::build(&ProblemSpec { n_features: 16, ..ProblemSpec::new(id) }, 1).unwrap();
            assert_eq!(p.id(), id);
            assert_eq!(p.x_step1().len(), p.dims().x);
        }
        for id in ["gp-0-1-1", "gp-1-1", "gp-short-z", "branin"] {
            assert!(!is_registered(id));
            assert!(matches!(Problem::build(&ProblemSpec::new(id), 1), Err(Error::UnknownProblem(_))));
        }
        let p = Problem::build(&ProblemSpec::new("supply-chain"), 0).unwrap();
        assert_eq!(p.dims().total(), 8);
        let (lo, hi) = p.u_bounds();
        assert!((lo - (0.5 - 2.326_347_874 * 0.5)).abs() < 1e-6 && (hi - (0.5 + 2.326_347_874 * 0.5)).abs() < 1e-6);
    }

    #[test]
    fn supply_chain_snap_and_evaluate() {
        let p = Problem::build(&ProblemSpec::new("supply-chain"), 0).unwrap();
        let q = [0.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5];
        assert!(p.is_feasible(&q));
        assert_eq!(p.evaluate(&q), -60000.0);
        let rough = [0.30001, 0.9, 0.5, 0.9, 0.4, 0.4, 0.6, 0.6];
        assert!(!p.is_feasible(&rough));
        assert!(p.is_feasible(&p.snap(&rough)));
        assert_eq!(p.physical_x(&[0.5]), vec![2500.0]);
    }

    #[test]
    fn regret_scenarios_are_fixed_per_seed() {
        let spec = ProblemSpec { n_features: 8, ..ProblemSpec::new("gp-1-1-1") };
        let a = Problem::build(&spec, 3).unwrap();
        let b = Problem::build(&spec, 3).unwrap();
        assert_eq!(a.regret_scenarios(), b.regret_scenarios());
        assert_eq!(a.regret_scenarios().len(), REGRET_SAMPLES);
        assert_eq!(a.evaluate(&[0.1, 0.2, 0.3]), b.evaluate(&[0.1, 0.2, 0.3]));
    }
}
