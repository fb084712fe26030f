use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::SurrogateModel;

pub const SOY_MAX: u32 = 5000;
pub const SOY_STEP: u32 = 20;
pub const DEMAND_MEAN: f64 = 150.0;
pub const DEMAND_SD: f64 = 10.0;
pub const WEEKS: usize = 4;

/// The ten admissible raw-chemical (s, S) ordering policies.
pub const POLICY_PAIRS: [(u32, u32); 10] =
    [(100, 200), (100, 300), (100, 400), (100, 500), (200, 300), (200, 400), (200, 500), (300, 400), (300, 500), (400, 500)];

/// A feasible here-and-now plus wait-and-see decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SupplyDecision {
    pub x: u32,
    pub y1: u32,
    pub s: u32,
    pub big_s: u32,
}

impl SupplyDecision {
    pub fn is_feasible(&self) -> bool {
        self.x <= SOY_MAX && self.x % SOY_STEP == 0 && self.y1 <= self.x / SOY_STEP && POLICY_PAIRS.contains(&(self.s, self.big_s))
    }
}

/// Total cost of one four-week simulation. Inputs must be feasible.
pub fn supply_chain_cost(x: f64, y1: f64, s: f64, big_s: f64, u: &[f64]) -> Result<f64> {
    let as_int = |v: f64| (v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64).then_some(v as u32);
    let decision = match (as_int(x), as_int(y1), as_int(s), as_int(big_s)) {
        (Some(x), Some(y1), Some(s), Some(big_s)) => SupplyDecision { x, y1, s, big_s },
        _ => return Err(Error::Infeasible(format!("non-integer decision ({x}, {y1}, {s}, {big_s})"))),
    };
    if !decision.is_feasible() {
        return Err(Error::Infeasible(format!("{decision:?}")));
    }
    if u.len() != WEEKS {
        return Err(Error::DimensionMismatch { expected: WEEKS, got: u.len() });
    }
    Ok(simulate(&decision, u))
}

/// The simulation itself, without feasibility checks.
pub fn simulate(d: &SupplyDecision, u: &[f64]) -> f64 {
    let (s, big_s, y1) = (d.s as f64, d.big_s as f64, d.y1 as f64);
    let mut soy = d.x as f64;
    let mut r = 100.0;
    let mut cost = 10.0 * soy;
    let mut w = 0.0;
    for &demand in u.iter().take(WEEKS) {
        for _ in 0..5 {
            if r < s {
                cost += 5.0 * (big_s - r);
                r = big_s;
            }
            let made = y1.min(soy).min(r);
            soy -= made;
            r -= made;
            w += made;
        }
        if w >= demand {
            w -= demand;
            cost += 5.0 * w;
        } else {
            cost += 100.0 * (demand - w);
            w = 0.0;
        }
    }
    cost
}

/// Every feasible x.
pub fn soy_levels() -> impl Iterator<Item = u32> {
    (0..=SOY_MAX / SOY_STEP).map(|i| i * SOY_STEP)
}

/// Best wait-and-see decision at fixed x under `value` (maximized),
/// scanning y₁ ascending and then the policy pairs in order. The first of
/// equal values wins.
pub fn exhaustive_best_y(mut value: impl FnMut(u32, u32, u32) -> f64, x: u32) -> SupplyDecision {
    let mut best = (f64::NEG_INFINITY, SupplyDecision { x, y1: 0, s: POLICY_PAIRS[0].0, big_s: POLICY_PAIRS[0].1 });
    for y1 in 0..=x / SOY_STEP {
        for &(s, big_s) in &POLICY_PAIRS {
            let v = value(y1, s, big_s);
            if v > best.0 {
                best = (v, SupplyDecision { x, y1, s, big_s });
            }
        }
    }
    best.1
}

/// Coordinate map between decisions and the model's normalized space
/// (x, y₁, s, S−s, u₁..u₄). Demand is normalized by the box one standard
/// deviation either side of its mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupplyChainSpace;

impl SupplyChainSpace {
    pub const DX: usize = 1;
    pub const DY: usize = 3;
    pub const DU: usize = WEEKS;

    pub fn norm_x(x: f64) -> f64 {
        x / SOY_MAX as f64
    }

    pub fn norm_y1(y1: f64) -> f64 {
        y1 / (SOY_MAX / SOY_STEP) as f64
    }

    pub fn norm_s(s: f64) -> f64 {
        (s - 100.0) / 300.0
    }

    pub fn norm_gap(gap: f64) -> f64 {
        (gap - 100.0) / 300.0
    }

    pub fn norm_u(u: f64) -> f64 {
        (u - (DEMAND_MEAN - DEMAND_SD)) / (2.0 * DEMAND_SD)
    }

    pub fn raw_u(un: f64) -> f64 {
        DEMAND_MEAN - DEMAND_SD + 2.0 * DEMAND_SD * un
    }

    /// Mean and sd of one normalized demand coordinate.
    pub fn normalized_demand() -> (f64, f64) {
        (Self::norm_u(DEMAND_MEAN), DEMAND_SD / (2.0 * DEMAND_SD))
    }

    pub fn normalize_y(d: &SupplyDecision) -> [f64; 3] {
        [Self::norm_y1(d.y1 as f64), Self::norm_s(d.s as f64), Self::norm_gap((d.big_s - d.s) as f64)]
    }

    pub fn normalize(d: &SupplyDecision, u: &[f64]) -> Vec<f64> {
        let mut q = vec![Self::norm_x(d.x as f64)];
        q.extend(Self::normalize_y(d));
        q.extend(u.iter().map(|v| Self::norm_u(*v)));
        q
    }

    /// Rounds normalized (x, y₁, s, S−s) to the nearest feasible decision:
    /// x to the nearest multiple of 20, then y₁ to the nearest integer in
    /// [0, x/20], then s and S−s to admissible hundreds.
    pub fn snap(xn: f64, yn: &[f64]) -> SupplyDecision {
        let x = ((xn * SOY_MAX as f64 / SOY_STEP as f64).round().clamp(0.0, (SOY_MAX / SOY_STEP) as f64) as u32) * SOY_STEP;
        let y1 = (yn[0] * (SOY_MAX / SOY_STEP) as f64).round().clamp(0.0, (x / SOY_STEP) as f64) as u32;
        let s = ((100.0 + 300.0 * yn[1]) / 100.0).round().clamp(1.0, 4.0) as u32 * 100;
        let gap = ((100.0 + 300.0 * yn[2]) / 100.0).round().clamp(1.0, ((500 - s) / 100) as f64) as u32 * 100;
        SupplyDecision { x, y1, s, big_s: s + gap }
    }

    /// Continuous relaxation of the coupling constraints in normalized
    /// coordinates: y₁ ≤ x and s + (S−s) ≤ 500.
    pub fn relaxed_feasible(xn: f64, yn: &[f64]) -> bool {
        yn[0] <= xn + 1e-12 && yn[1] + yn[2] <= 1.0 + 1e-12
    }

    /// Clips a normalized y into the relaxed feasible set for `xn`.
    pub fn project_y(xn: f64, yn: &mut [f64]) {
        yn[0] = yn[0].min(xn);
        yn[2] = yn[2].min(1.0 - yn[1]);
    }
}

/// Expected cost of a fixed design with the best decision per demand
/// scenario chosen with hindsight, by exhaustive search.
pub fn oracle_cost(x: u32, scenarios: &[Vec<f64>]) -> f64 {
    let total: f64 = scenarios
        .par_iter()
        .map(|u| {
            let d = exhaustive_best_y(|y1, s, big_s| -simulate(&SupplyDecision { x, y1, s, big_s }, u), x);
            simulate(&d, u)
        })
        .sum();
    total / scenarios.len() as f64
}

/// The two-stage optimum min_x E_u[min_y cost] over the full discrete
/// grid, returning (x*, expected cost).
pub fn optimal_expected_cost(scenarios: &[Vec<f64>]) -> (u32, f64) {
    let costs: Vec<(u32, f64)> = soy_levels().collect::<Vec<_>>().into_par_iter().map(|x| (x, oracle_cost(x, scenarios))).collect();
    costs.into_iter().fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Model-based recommendation by exhaustive search: the x maximizing the
/// averaged best posterior mean over the scenarios, with the per-scenario
/// best decisions at that x.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveRecommendation {
    pub x: u32,
    pub policy: Vec<SupplyDecision>,
    pub value: f64,
}

/// Posterior mean on the discrete grid with the scaled squared distance
/// split into per-block pieces that are precomputed once.
struct BlockMean<'m> {
    model: &'m SurrogateModel,
    n: usize,
}

impl BlockMean<'_> {
    fn partial(&self, coords: &[(usize, f64)]) -> Vec<f64> {
        let w = self.model.kernel().inv_sq_lengthscales();
        (0..self.n)
            .map(|j| {
                let t = self.model.train_point(j);
                coords.iter().map(|&(i, v)| (v - t[i]).powi(2) * w[i]).sum()
            })
            .collect()
    }

    fn std_mean(&self, parts: [&[f64]; 4]) -> f64 {
        let kernel = self.model.kernel();
        let alpha = self.model.alpha();
        let mut m = self.model.hyperparameters().mean_const;
        for j in 0..self.n {
            m += alpha[j] * kernel.from_sq_dist(parts[0][j] + parts[1][j] + parts[2][j] + parts[3][j]);
        }
        m
    }
}

/// Exhaustive recommendation from a model over the normalized supply-chain
/// space; `scenarios` are raw demand vectors.
pub fn exhaustive_recommendation(model: &SurrogateModel, scenarios: &[Vec<f64>]) -> Result<ExhaustiveRecommendation> {
    let dim = SupplyChainSpace::DX + SupplyChainSpace::DY + SupplyChainSpace::DU;
    if model.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: model.dim() });
    }
    if scenarios.is_empty() {
        return Err(Error::InvalidArgument("at least one demand scenario is required".into()));
    }
    let bm = BlockMean { model, n: model.n_train() };
    let u_parts: Vec<Vec<f64>> = scenarios
        .iter()
        .map(|u| bm.partial(&u.iter().enumerate().map(|(i, v)| (4 + i, SupplyChainSpace::norm_u(*v))).collect::<Vec<_>>()))
        .collect();
    let y1_parts: Vec<Vec<f64>> =
        (0..=SOY_MAX / SOY_STEP).map(|y1| bm.partial(&[(1, SupplyChainSpace::norm_y1(y1 as f64))])).collect();
    let pair_parts: Vec<Vec<f64>> = POLICY_PAIRS
        .iter()
        .map(|&(s, big_s)| bm.partial(&[(2, SupplyChainSpace::norm_s(s as f64)), (3, SupplyChainSpace::norm_gap((big_s - s) as f64))]))
        .collect();

    let best_at = |x: u32, x_part: &[f64], u_part: &[f64]| -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for y1 in 0..=(x / SOY_STEP) as usize {
            for (p, pp) in pair_parts.iter().enumerate() {
                let v = bm.std_mean([x_part, u_part, &y1_parts[y1], pp]);
                if v > best.2 {
                    best = (y1, p, v);
                }
            }
        }
        best
    };

    let per_x: Vec<f64> = soy_levels()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| {
            let xp = bm.partial(&[(0, SupplyChainSpace::norm_x(x as f64))]);
            u_parts.iter().map(|up| best_at(x, &xp, up).2).sum::<f64>() / scenarios.len() as f64
        })
        .collect();
    let xi = crate::acquisition::argmax(&per_x);
    let x = xi as u32 * SOY_STEP;
    let xp = bm.partial(&[(0, SupplyChainSpace::norm_x(x as f64))]);
    let policy = u_parts
        .iter()
        .map(|up| {
            let (y1, p, _) = best_at(x, &xp, up);
            SupplyDecision { x, y1: y1 as u32, s: POLICY_PAIRS[p].0, big_s: POLICY_PAIRS[p].1 }
        })
        .collect();
    Ok(ExhaustiveRecommendation { x, policy, value: model.transform().to_raw(per_x[xi]) })
}

/// Best posterior-mean decision per scenario at a fixed x; used to freeze
/// the first-phase policy of the two-step strategies.
pub fn exhaustive_policy(model_yu: &SurrogateModel, x: u32, scenario_norm: &[f64]) -> SupplyDecision {
    let mut q = vec![0.0; SupplyChainSpace::DY + scenario_norm.len()];
    q[SupplyChainSpace::DY..].copy_from_slice(scenario_norm);
    exhaustive_best_y(
        |y1, s, big_s| {
            q[..3].copy_from_slice(&SupplyChainSpace::normalize_y(&SupplyDecision { x, y1, s, big_s }));
            model_yu.posterior_mean(&q)
        },
        x,
    )
}
