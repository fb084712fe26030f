use crate::acquisition::EnvSampler;
use crate::error::Result;
use crate::problems::{Problem, SupplyChainSpace};
use crate::qmc::{self, SobolSequence};
use crate::seeding;

/// Which coordinates a model or design covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subspace {
    /// (x, y, u).
    Joint,
    /// (y, u) with x held at the first-phase design.
    AdjustableEnv,
    /// (x, u); y follows a frozen policy.
    FixedEnv,
}

impl Subspace {
    /// Dimensions of the (design part, environment) of this subspace.
    pub fn parts(&self, problem: &Problem) -> (usize, usize) {
        let d = problem.dims();
        let lead = match self {
            Subspace::Joint => d.x + d.y,
            Subspace::AdjustableEnv => d.y,
            Subspace::FixedEnv => d.x,
        };
        (lead, d.u)
    }

    pub fn dim(&self, problem: &Problem) -> usize {
        let (a, b) = self.parts(problem);
        a + b
    }
}

/// Scrambled Sobol' points on a subspace: the unit cube for x and y, the
/// environment's own distribution for u. For normal environments the
/// design and environment parts come from independent streams. Infeasible
/// supply-chain points are skipped and the rest snapped to the grid.
pub struct DesignStream<'p> {
    problem: &'p Problem,
    space: Subspace,
    joint: SobolSequence,
    env: Option<(SobolSequence, Vec<(f64, f64)>)>,
    lead: usize,
    du: usize,
}

impl<'p> DesignStream<'p> {
    pub fn new(problem: &'p Problem, space: Subspace, seed: u64) -> Result<Self> {
        let (lead, du) = space.parts(problem);
        let (joint, env) = match problem.env() {
            EnvSampler::Uniform { .. } => (SobolSequence::new(lead + du, seed, true)?, None),
            EnvSampler::Normal { params } => (
                SobolSequence::new(lead, seed, true)?,
                Some((SobolSequence::new(du, seeding::mix(seed, seeding::tag("normal-u")), true)?, params)),
            ),
        };
        Ok(Self { problem, space, joint, env, lead, du })
    }

    fn draw(&mut self) -> Vec<f64> {
        let mut q = vec![0.0; self.joint.dim()];
        self.joint.next_into(&mut q);
        if let Some((stream, params)) = &mut self.env {
            let mut u = vec![0.0; self.du];
            stream.next_into(&mut u);
            for (v, (m, s)) in u.iter().zip(params.iter()) {
                let p = v.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
                q.push(m + s * qmc::normal_icdf(p).expect("clamped into (0, 1)"));
            }
        }
        debug_assert_eq!(q.len(), self.lead + self.du);
        q
    }

    /// The next feasible point, in subspace coordinates.
    pub fn next_point(&mut self) -> Vec<f64> {
        if !self.problem.is_discrete() {
            return self.draw();
        }
        let x_fixed = self.problem.x_step1()[0];
        for _ in 0..10_000 {
            let q = self.draw();
            match self.space {
                Subspace::Joint if SupplyChainSpace::relaxed_feasible(q[0], &q[1..4]) => return self.problem.snap(&q),
                Subspace::AdjustableEnv if SupplyChainSpace::relaxed_feasible(x_fixed, &q[0..3]) => {
                    let mut full = vec![x_fixed];
                    full.extend_from_slice(&q);
                    return self.problem.snap(&full)[1..].to_vec();
                }
                Subspace::FixedEnv => {
                    let mut out = vec![SupplyChainSpace::norm_x(SupplyChainSpace::snap(q[0], &[0.0; 3]).x as f64)];
                    out.extend_from_slice(&q[1..]);
                    return out;
                }
                _ => {}
            }
        }
        unreachable!("the relaxed feasible set has positive volume")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemSpec;

    #[test]
    fn uniform_designs_match_the_joint_sobol_stream() {
        let p = Problem::build(&ProblemSpec { n_features: 8, ..ProblemSpec::new("gp-1-1-1") }, 0).unwrap();
        let mut s = DesignStream::new(&p, Subspace::Joint, 9).unwrap();
        let pts: Vec<Vec<f64>> = (0..8).map(|_| s.next_point()).collect();
        assert_eq!(pts, qmc::sobol(3, 8, 9, true).unwrap().to_rows());
    }

    #[test]
    fn supply_chain_designs_are_feasible() {
        let p = Problem::build(&ProblemSpec::new("supply-chain"), 0).unwrap();
        let mut s = DesignStream::new(&p, Subspace::Joint, 1).unwrap();
        for _ in 0..64 {
            assert!(p.is_feasible(&s.next_point()));
        }
        let mut s = DesignStream::new(&p, Subspace::AdjustableEnv, 2).unwrap();
        for _ in 0..16 {
            let mut q = vec![0.5];
            q.extend(s.next_point());
            assert!(p.is_feasible(&q));
        }
        let mut s = DesignStream::new(&p, Subspace::FixedEnv, 3).unwrap();
        assert_eq!(s.next_point().len(), 5);
    }
}
