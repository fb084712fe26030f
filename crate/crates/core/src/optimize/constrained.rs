use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimize::multistart::{boltzmann_indices, local_maximize, BoundedBox, Objective, OptimizeConfig};
use crate::problems::{SupplyChainSpace, POLICY_PAIRS};
use crate::qmc::SobolSequence;

/// Where the supply-chain acquisition lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupplyLayout {
    /// (x, y₁, s, S−s, u₁..u₄), all normalized.
    Joint,
    /// (y₁, s, S−s, u₁..u₄) with the design held at a normalized `x`.
    AtDesign(f64),
}

impl SupplyLayout {
    fn has_x(&self) -> bool {
        matches!(self, SupplyLayout::Joint)
    }

    fn offset(&self) -> usize {
        usize::from(self.has_x())
    }
}

/// A feasible, rounded proposal and the acquisition value of the continuous
/// optimum it was rounded from.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyProposal {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Free variables of one restart: (x, t, u) or (t, u), with y₁ = t·x so that
/// the coupling constraint y₁ ≤ x becomes the box t ∈ [0, 1].
struct Reparameterized<'a, O: Objective + ?Sized> {
    acq: &'a O,
    layout: SupplyLayout,
    pair: (f64, f64),
}

impl<O: Objective + ?Sized> Reparameterized<'_, O> {
    fn design(&self, v: &[f64]) -> f64 {
        match self.layout {
            SupplyLayout::Joint => v[0],
            SupplyLayout::AtDesign(x) => x,
        }
    }

    fn point(&self, v: &[f64]) -> Vec<f64> {
        let o = self.layout.offset();
        let x = self.design(v);
        let mut q = Vec::with_capacity(self.acq.dim());
        if self.layout.has_x() {
            q.push(x);
        }
        q.extend([v[o] * x, self.pair.0, self.pair.1]);
        q.extend_from_slice(&v[o + 1..]);
        q
    }
}

impl<O: Objective + ?Sized> Objective for Reparameterized<'_, O> {
    fn dim(&self) -> usize {
        self.acq.dim() - 2 - self.layout.offset()
    }

    fn value(&self, v: &[f64]) -> f64 {
        self.acq.value(&self.point(v))
    }

    fn value_and_gradient(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let o = self.layout.offset();
        let q = self.point(v);
        let mut g = vec![0.0; q.len()];
        let val = self.acq.value_and_gradient(&q, &mut g);
        let x = self.design(v);
        let gy = g[o];
        if self.layout.has_x() {
            grad[0] = g[0] + v[o] * gy;
        }
        grad[o] = x * gy;
        grad[o + 1..].copy_from_slice(&g[o + 3..]);
        val
    }
}

/// Proposal for the supply chain: feasible raw samples of (x, y₁, u) by
/// rejection from a Sobol' stream, crossed with the ten (s, S) pairs;
/// Boltzmann restarts; bounded ascent with (s, S) fixed and y₁ ≤ x kept
/// through y₁ = t·x; then rounding of x to a multiple of 20 and y₁ to an
/// integer in [0, x/20].
pub fn constrained_propose_supply_chain<O: Objective + ?Sized>(
    acq: &O,
    layout: SupplyLayout,
    u_bounds: (f64, f64),
    cfg: &OptimizeConfig,
    rng: &mut crate::seeding::Rng,
) -> Result<SupplyProposal> {
    cfg.validate()?;
    let du = acq.dim().checked_sub(3 + layout.offset()).filter(|d| *d > 0).ok_or(Error::DimensionMismatch {
        expected: 3 + layout.offset() + 1,
        got: acq.dim(),
    })?;
    let n_base = cfg.n_raw.div_ceil(POLICY_PAIRS.len()).max(1);
    let free_dim = layout.offset() + 1 + du;
    let mut lower = vec![0.0; layout.offset() + 1];
    let mut upper = vec![1.0; layout.offset() + 1];
    lower.extend(std::iter::repeat_n(u_bounds.0, du));
    upper.extend(std::iter::repeat_n(u_bounds.1, du));
    let free_box = BoundedBox::new(lower, upper)?;

    // Raw (x, y₁, u) samples satisfying y₁ ≤ x, stored as free variables.
    let mut stream = SobolSequence::new(free_dim, rng.random(), true)?;
    let mut buf = vec![0.0; free_dim];
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(n_base);
    for _ in 0..64 * n_base {
        if raw.len() == n_base {
            break;
        }
        stream.next_into(&mut buf);
        let mut v = free_box.from_unit(&buf);
        let o = layout.offset();
        let x = match layout {
            SupplyLayout::Joint => v[0],
            SupplyLayout::AtDesign(x) => x,
        };
        if v[o] <= x {
            v[o] = if x > 0.0 { v[o] / x } else { 0.0 };
            raw.push(v);
        }
    }
    while raw.len() < n_base {
        let unit: Vec<f64> = (0..free_dim).map(|_| rng.random()).collect();
        raw.push(free_box.from_unit(&unit));
    }

    let pairs: Vec<(f64, f64)> = POLICY_PAIRS
        .iter()
        .map(|&(s, big_s)| (SupplyChainSpace::norm_s(s as f64), SupplyChainSpace::norm_gap((big_s - s) as f64)))
        .collect();
    let candidates: Vec<(usize, usize)> = (0..raw.len()).flat_map(|r| (0..pairs.len()).map(move |p| (r, p))).collect();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|&(r, p)| {
            let v = Reparameterized { acq, layout, pair: pairs[p] }.value(&raw[r]);
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let finite_min = values.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = values.iter().map(|v| if v.is_finite() { *v } else { finite_min.min(0.0) }).collect();
    let starts = boltzmann_indices(&weights, cfg.n_restarts.min(candidates.len()), rng, cfg.nonnegative_objective);
    let options = cfg.lbfgs();
    let results: Vec<(usize, Vec<f64>, f64)> = starts
        .par_iter()
        .map(|&c| {
            let (r, p) = candidates[c];
            let (v, val) = local_maximize(&Reparameterized { acq, layout, pair: pairs[p] }, &raw[r], &free_box, &options);
            (p, v, val)
        })
        .collect();

    let raw_best = crate::acquisition::argmax(&values);
    let (mut pair, mut free, mut value) = (candidates[raw_best].1, raw[candidates[raw_best].0].clone(), values[raw_best]);
    for (p, v, val) in results {
        if val.is_finite() && val > value {
            (pair, free, value) = (p, v, val);
        }
    }
    let q = Reparameterized { acq, layout, pair: pairs[pair] }.point(&free);
    Ok(SupplyProposal { point: round_supply_point(&q, layout), value })
}

/// Rounds a relaxed supply-chain point onto the feasible grid, leaving the
/// environmental coordinates untouched.
pub fn round_supply_point(q: &[f64], layout: SupplyLayout) -> Vec<f64> {
    let o = layout.offset();
    let x = match layout {
        SupplyLayout::Joint => q[0],
        SupplyLayout::AtDesign(x) => x,
    };
    let d = SupplyChainSpace::snap(x, &q[o..o + 3]);
    let mut out = Vec::with_capacity(q.len());
    if layout.has_x() {
        out.push(SupplyChainSpace::norm_x(d.x as f64));
    }
    out.extend(SupplyChainSpace::normalize_y(&d));
    out.extend_from_slice(&q[o + 3..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::FnObjective;
    use crate::problems::SupplyDecision;
    use crate::seeding;

    fn decode(q: &[f64], layout: SupplyLayout) -> SupplyDecision {
        match layout {
            SupplyLayout::Joint => SupplyChainSpace::snap(q[0], &q[1..4]),
            SupplyLayout::AtDesign(x) => SupplyChainSpace::snap(x, &q[0..3]),
        }
    }

    #[test]
    fn proposals_are_feasible_and_improve_on_raw() {
        // Favors large y₁ relative to x, so the coupling constraint binds.
        let acq = FnObjective::new(8, |q: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|v| *v = 0.0);
            g[0] = -0.6;
            g[1] = 1.0;
            g[2] = -0.1;
            g[3] = -0.2;
            g[4] = 0.05;
            q[1] - 0.6 * q[0] - 0.1 * q[2] - 0.2 * q[3] + 0.05 * q[4]
        });
        for seed in 0..5 {
            let out = constrained_propose_supply_chain(&acq, SupplyLayout::Joint, (-0.66, 1.66), &OptimizeConfig::default(), &mut seeding::rng(seed)).unwrap();
            let d = decode(&out.point, SupplyLayout::Joint);
            assert!(d.is_feasible(), "{d:?}");
            assert_eq!(SupplyChainSpace::normalize(&d, &[150.0; 4])[..4], out.point[..4]);
            assert!(out.value >= 0.39, "{}", out.value);
            assert_eq!(d.x, 5000);
            assert_eq!(d.y1, 250);
            assert_eq!((d.s, d.big_s), (100, 200));
        }
    }

    #[test]
    fn fixed_design_layout_and_zero_design() {
        let acq = FnObjective::new(7, |q: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|v| *v = 0.0);
            g[0] = 1.0;
            q[0]
        });
        let out = constrained_propose_supply_chain(&acq, SupplyLayout::AtDesign(0.5), (0.0, 1.0), &OptimizeConfig::default(), &mut seeding::rng(1)).unwrap();
        assert_eq!(out.point.len(), 7);
        assert_eq!(decode(&out.point, SupplyLayout::AtDesign(0.5)).y1, 125);
        let rounded = round_supply_point(&[0.001, 0.9, 0.1, 0.1, 0.5, 0.5, 0.5, 0.5], SupplyLayout::Joint);
        assert_eq!(rounded[..2], [0.0, 0.0]);
    }
}
