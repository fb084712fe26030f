//! Full optimization runs: joint, alternating and two-step knowledge
//! gradient, the Sobol' random-sampling baselines, recommendation
//! extraction and simple-regret estimation.
//!
//! All coordinates are normalized (see [`crate::problems`]). Every random
//! choice draws from its own substream of `(seed, index, purpose)`, so two
//! strategies run with the same seed share their initial design and their
//! observation noise, and extra instrumentation never changes a proposal.

mod design;

use std::sync::Arc;
use std::time::Instant;

pub use design::{DesignStream, Subspace};

use crate::acquisition::{build_acquisition, AcqContext, AcqSizes, AcquisitionKind, AveragedKg, PerEnvironmentKg, Projection};
use crate::error::{Error, Result};
use crate::gp::{fit_map, Dataset, FitOptions, Hyperparameters, MeanMode, Priors, SurrogateModel};
use crate::optimize::{
    constrained_propose_supply_chain, multistart_maximize, BoundedBox, Objective, OptimizeConfig, Recommender, SupplyLayout,
};
use crate::problems::{
    exhaustive_best_y, exhaustive_policy, exhaustive_recommendation, oracle_cost, Problem, SupplyChainSpace,
    SupplyDecision,
};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    JointKg,
    AlternatingKg,
    TwoStepKg,
    JointRandom,
    TwoStepRandom,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::JointKg, Strategy::AlternatingKg, Strategy::TwoStepKg, Strategy::JointRandom, Strategy::TwoStepRandom];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::JointKg => "jKG",
            Strategy::AlternatingKg => "aKG",
            Strategy::TwoStepKg => "2sKG",
            Strategy::JointRandom => "jRS",
            Strategy::TwoStepRandom => "2sRS",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name().eq_ignore_ascii_case(name))
    }

    pub fn is_two_step(&self) -> bool {
        matches!(self, Strategy::TwoStepKg | Strategy::TwoStepRandom)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

/// Evaluation budgets, acquisition sizes and optimizer settings of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetConfig {
    pub n_init: usize,
    pub n_total: usize,
    pub n_init_step1: usize,
    pub n_total_step1: usize,
    pub n_init_step2: usize,
    pub n_total_step2: usize,
    pub sizes: AcqSizes,
    pub n_u_rec: usize,
    pub acq_optimizer: OptimizeConfig,
    pub rec_optimizer: OptimizeConfig,
    /// Regret is estimated after the initial design, every this many
    /// proposals, and at the end of each phase.
    pub checkpoint_every: usize,
    pub fit_starts: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_total: 100,
            n_init_step1: 10,
            n_total_step1: 50,
            n_init_step2: 10,
            n_total_step2: 50,
            sizes: AcqSizes::default(),
            n_u_rec: 128,
            acq_optimizer: OptimizeConfig::default(),
            rec_optimizer: OptimizeConfig { nonnegative_objective: false, ..OptimizeConfig::default() },
            checkpoint_every: 5,
            fit_starts: 4,
        }
    }
}

impl BudgetConfig {
    /// Initial designs and budgets used for a problem family in the
    /// experiments: 50/400 (two-step 50/200 per phase) for six-dimensional
    /// GP samples, 10/100 (10/50) for three-dimensional ones, 6/100 (6/50)
    /// for the optical table, and 20/100 (20/50) for the supply chain.
    pub fn for_problem(problem: &Problem) -> Self {
        let (n_init, n_total, n_phase_init, n_phase_total) = match problem.id() {
            "optical-table" => (6, 100, 6, 50),
            "supply-chain" => (20, 100, 20, 50),
            _ if problem.dims().total() >= 6 => (50, 400, 50, 200),
            _ => (10, 100, 10, 50),
        };
        // Exhaustive supply-chain recommendations are costly; score them less often.
        let checkpoint_every = if problem.is_discrete() { 20 } else { 5 };
        Self {
            n_init,
            n_total,
            checkpoint_every,
            n_init_step1: n_phase_init,
            n_total_step1: n_phase_total,
            n_init_step2: n_phase_init,
            n_total_step2: n_phase_total,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, n0, nt) in [
            ("", self.n_init, self.n_total),
            ("_step1", self.n_init_step1, self.n_total_step1),
            ("_step2", self.n_init_step2, self.n_total_step2),
        ] {
            if n0 < 2 {
                return bad(format!("n_init{name} must be at least 2, got {n0}"));
            }
            if n0 > nt {
                return bad(format!("n_init{name} ({n0}) exceeds n_total{name} ({nt})"));
            }
        }
        for (name, n) in [("n_u", self.sizes.n_u), ("n_v", self.sizes.n_v), ("n_u_rec", self.n_u_rec)] {
            if !n.is_power_of_two() {
                return bad(format!("{name} must be a power of two, got {n}"));
            }
        }
        if self.sizes.n_x == 0 || self.sizes.n_y == 0 {
            return bad("n_x and n_y must be at least 1".into());
        }
        if self.checkpoint_every == 0 || self.fit_starts == 0 {
            return bad("checkpoint_every and fit_starts must be at least 1".into());
        }
        self.acq_optimizer.validate()?;
        self.rec_optimizer.validate()
    }

    /// Evaluations a strategy consumes.
    pub fn evaluations(&self, strategy: Strategy) -> usize {
        if strategy.is_two_step() {
            self.n_total_step1 + self.n_total_step2
        } else {
            self.n_total
        }
    }
}

/// How an evaluated point was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    Initial,
    Acquisition(AcquisitionKind),
    Sobol,
}

/// One expensive evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    /// 1-based count of evaluations consumed, including this one.
    pub index: usize,
    /// 0 for single-phase strategies, 1 or 2 for the two-step phases.
    pub step: u8,
    pub kind: ProposalKind,
    /// Full normalized joint point (x, y, u) that was evaluated.
    pub point: Vec<f64>,
    pub observation: f64,
    /// Acquisition value at the proposal, when one was optimized.
    pub acq_value: Option<f64>,
    pub wall_time: f64,
}

/// Quality of a recommendation on the problem's regret sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretEstimate {
    /// Average noiseless objective of the recommendation.
    pub value: f64,
    /// Reference value minus `value`.
    pub regret: f64,
    /// Average cost (cost problems only).
    pub cost: Option<f64>,
    /// Average cost at the recommended design with hindsight-optimal
    /// wait-and-see decisions (cost problems only).
    pub oracle_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub evaluations_used: usize,
    /// Proposals made so far, excluding initial designs.
    pub iteration: usize,
    pub step: u8,
    /// Normalized recommended design.
    pub x: Vec<f64>,
    /// Recommended design in physical units.
    pub physical_x: Vec<f64>,
    /// Normalized adjustable decisions for each regret scenario.
    pub policy: Vec<Vec<f64>>,
    pub estimate: RegretEstimate,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub strategy: Strategy,
    pub problem: String,
    pub seed: u64,
    pub records: Vec<EvaluationRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub warnings: Vec<String>,
}

impl RunHistory {
    pub fn evaluations(&self) -> usize {
        self.records.len()
    }

    pub fn final_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

/// Scores a recommendation: `policy[j]` is the adjustable decision for the
/// `j`-th regret scenario.
pub fn estimate_simple_regret(problem: &Problem, x: &[f64], policy: &[Vec<f64>]) -> Result<RegretEstimate> {
    let scenarios = problem.regret_scenarios();
    if policy.len() != scenarios.len() {
        return Err(Error::DimensionMismatch { expected: scenarios.len(), got: policy.len() });
    }
    let dims = problem.dims();
    if x.len() != dims.x || policy.iter().any(|y| y.len() != dims.y) {
        return Err(Error::DimensionMismatch { expected: dims.x + dims.y, got: x.len() + policy.first().map_or(0, Vec::len) });
    }
    let value = scenarios
        .iter()
        .zip(policy)
        .map(|(u, y)| {
            let q: Vec<f64> = x.iter().chain(y).chain(u).copied().collect();
            problem.evaluate(&q)
        })
        .sum::<f64>()
        / scenarios.len() as f64;
    let regret = problem.reference().value - value;
    let (cost, oracle) = if problem.is_cost() {
        let design = SupplyChainSpace::snap(x[0], &[0.0; 3]).x;
        let raw: Vec<Vec<f64>> = scenarios.iter().map(|u| u.iter().map(|v| SupplyChainSpace::raw_u(*v)).collect()).collect();
        (Some(-value), Some(oracle_cost(design, &raw)))
    } else {
        (None, None)
    };
    Ok(RegretEstimate { value, regret, cost, oracle_cost: oracle })
}

/// Runs one strategy on one problem instance.
pub fn run(strategy: Strategy, problem: &Problem, budget: &BudgetConfig, seed: u64) -> Result<RunHistory> {
    budget.validate()?;
    let mut runner = Runner::new(strategy, problem, budget, seed);
    match strategy {
        Strategy::JointKg | Strategy::AlternatingKg | Strategy::JointRandom => runner.single_phase()?,
        Strategy::TwoStepKg | Strategy::TwoStepRandom => runner.two_phase()?,
    }
    Ok(runner.finish())
}

pub fn run_joint(problem: &Problem, budget: &BudgetConfig, seed: u64) -> Result<RunHistory> {
    run(Strategy::JointKg, problem, budget, seed)
}

pub fn run_alternating(problem: &Problem, budget: &BudgetConfig, seed: u64) -> Result<RunHistory> {
    run(Strategy::AlternatingKg, problem, budget, seed)
}

pub fn run_twostep(problem: &Problem, budget: &BudgetConfig, seed: u64) -> Result<RunHistory> {
    run(Strategy::TwoStepKg, problem, budget, seed)
}

/// Sobol' baseline: `two_step` selects the two-phase variant.
pub fn run_random(problem: &Problem, budget: &BudgetConfig, seed: u64, two_step: bool) -> Result<RunHistory> {
    run(if two_step { Strategy::TwoStepRandom } else { Strategy::JointRandom }, problem, budget, seed)
}

/// Training data in subspace coordinates.
#[derive(Default)]
struct Data {
    inputs: Vec<Vec<f64>>,
    observations: Vec<f64>,
}

struct Runner<'a> {
    strategy: Strategy,
    problem: &'a Problem,
    budget: &'a BudgetConfig,
    seed: u64,
    start: Instant,
    records: Vec<EvaluationRecord>,
    checkpoints: Vec<Checkpoint>,
    warnings: Vec<String>,
    rec_u: Vec<Vec<f64>>,
}

impl<'a> Runner<'a> {
    fn new(strategy: Strategy, problem: &'a Problem, budget: &'a BudgetConfig, seed: u64) -> Self {
        let rec_u = problem.env().sample(budget.n_u_rec, seeding::substream(seed, 0, "rec-u")).expect("valid environment");
        Self {
            strategy,
            problem,
            budget,
            seed,
            start: Instant::now(),
            records: Vec::new(),
            checkpoints: Vec::new(),
            warnings: Vec::new(),
            rec_u,
        }
    }

    fn finish(self) -> RunHistory {
        RunHistory {
            strategy: self.strategy,
            problem: self.problem.id().to_string(),
            seed: self.seed,
            records: self.records,
            checkpoints: self.checkpoints,
            warnings: self.warnings,
        }
    }

    fn sub(&self, index: usize, purpose: &str) -> u64 {
        seeding::substream(self.seed, index as u64, purpose)
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{} {} seed {}: {msg}", self.problem.id(), self.strategy, self.seed);
        self.warnings.push(msg);
    }

    /// Evaluates a full joint point with observation noise and records it.
    fn observe(&mut self, point: Vec<f64>, step: u8, kind: ProposalKind, acq_value: Option<f64>) -> f64 {
        let index = self.records.len() + 1;
        let mut v = self.problem.evaluate(&point);
        if self.problem.noise_sd() > 0.0 {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut seeding::rng(self.sub(index, "noise")));
            v += self.problem.noise_sd() * z;
        }
        self.records.push(EvaluationRecord { index, step, kind, point, observation: v, acq_value, wall_time: self.elapsed() });
        v
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// MAP fit on the data; falls back to the prior modes if fitting fails.
    fn fit(&mut self, data: &Data) -> Result<SurrogateModel> {
        let dim = data.inputs[0].len();
        let dataset = Dataset::new(data.inputs.clone(), data.observations.clone(), dim)?;
        let options = FitOptions {
            fix_noise: self.problem.noise_sd() == 0.0,
            mean: MeanMode::Fit,
            seed: self.sub(data.inputs.len(), "fit"),
            starts: self.budget.fit_starts,
            ..FitOptions::default()
        };
        let priors = Priors::default();
        match fit_map(&dataset, &priors, &options).and_then(|f| SurrogateModel::new(&dataset, f.hyperparameters)) {
            Ok(model) => Ok(model),
            Err(e) => {
                self.warn(format!("MAP fit failed ({e}); using prior modes"));
                let noise = if options.fix_noise { 1e-8 } else { priors.noise.mode() };
                let hp = Hyperparameters::new(vec![priors.lengthscale.mode(); dim], priors.outputscale.mode(), noise, 0.0);
                SurrogateModel::new(&dataset, hp)
            }
        }
    }

    fn context(&self, space: Subspace, index: usize) -> Result<AcqContext> {
        let dims = self.problem.dims();
        let (dx, dy) = match space {
            Subspace::Joint => (dims.x, dims.y),
            Subspace::AdjustableEnv => (0, dims.y),
            Subspace::FixedEnv => (dims.x, 0),
        };
        let ctx = AcqContext::generate(dx, dy, &self.problem.env(), self.budget.sizes, self.sub(index, "acq-context"))?;
        Ok(if self.problem.is_discrete() {
            let projection: Projection = Arc::new(|x: &[f64], y: &mut [f64]| {
                if let (Some(&xn), true) = (x.first(), y.len() == 3) {
                    SupplyChainSpace::project_y(xn, y);
                }
            });
            ctx.with_projection(projection)
        } else {
            ctx
        })
    }

    /// Search box of a subspace in normalized coordinates.
    fn subspace_box(&self, space: Subspace) -> BoundedBox {
        let (lead, du) = space.parts(self.problem);
        let (lo, hi) = self.problem.u_bounds();
        let mut lower = vec![0.0; lead];
        let mut upper = vec![1.0; lead];
        lower.extend(std::iter::repeat_n(lo, du));
        upper.extend(std::iter::repeat_n(hi, du));
        BoundedBox::new(lower, upper).expect("nondegenerate box")
    }

    /// Maximizes an acquisition over a subspace and returns the (feasible)
    /// proposal in subspace coordinates with its acquisition value.
    fn maximize<O: Objective + ?Sized>(&mut self, acq: &O, space: Subspace, index: usize) -> Result<(Vec<f64>, f64)> {
        let mut rng = seeding::rng(self.sub(index, "acq-optimize"));
        let cfg = &self.budget.acq_optimizer;
        if self.problem.is_discrete() {
            let layout = match space {
                Subspace::Joint => Some(SupplyLayout::Joint),
                Subspace::AdjustableEnv => Some(SupplyLayout::AtDesign(self.problem.x_step1()[0])),
                Subspace::FixedEnv => None,
            };
            if let Some(layout) = layout {
                let p = constrained_propose_supply_chain(acq, layout, self.problem.u_bounds(), cfg, &mut rng)?;
                return Ok((p.point, p.value));
            }
        }
        let out = multistart_maximize(acq, &self.subspace_box(space), cfg, &mut rng)?;
        if let Some(w) = out.warning {
            self.warn(w);
        }
        let mut point = out.point;
        if self.problem.is_discrete() {
            point[0] = SupplyChainSpace::norm_x(SupplyChainSpace::snap(point[0], &[0.0; 3]).x as f64);
        }
        Ok((point, out.value))
    }

    fn checkpoint(&mut self, step: u8, x: Vec<f64>, policy: Vec<Vec<f64>>) -> Result<()> {
        let estimate = estimate_simple_regret(self.problem, &x, &policy)?;
        let evaluations_used = self.records.len();
        let iteration = self.records.iter().filter(|r| r.kind != ProposalKind::Initial).count();
        self.checkpoints.push(Checkpoint {
            evaluations_used,
            iteration,
            step,
            physical_x: self.problem.physical_x(&x),
            x,
            policy,
            estimate,
            wall_time: self.elapsed(),
        });
        Ok(())
    }

    fn is_checkpoint(&self, proposals: usize, remaining: usize) -> bool {
        remaining == 0 || proposals % self.budget.checkpoint_every == 0
    }

    /// Recommendation from a joint model: x* by one-shot (or exhaustive)
    /// optimization, and y* per regret scenario.
    fn recommend_joint(&mut self, model: &SurrogateModel, index: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let scenarios = self.problem.regret_scenarios();
        if self.problem.is_discrete() {
            let raw: Vec<Vec<f64>> = self.rec_u.iter().map(|u| u.iter().map(|v| SupplyChainSpace::raw_u(*v)).collect()).collect();
            let rec = exhaustive_recommendation(model, &raw)?;
            let policy = scenarios
                .iter()
                .map(|u| {
                    let d = exhaustive_best_y(
                        |y1, s, big_s| {
                            let mut q = vec![SupplyChainSpace::norm_x(rec.x as f64)];
                            q.extend(SupplyChainSpace::normalize_y(&SupplyDecision { x: rec.x, y1, s, big_s }));
                            q.extend_from_slice(u);
                            model.posterior_mean(&q)
                        },
                        rec.x,
                    );
                    SupplyChainSpace::normalize_y(&d).to_vec()
                })
                .collect();
            return Ok((vec![SupplyChainSpace::norm_x(rec.x as f64)], policy));
        }
        let dims = self.problem.dims();
        let rec = Recommender::unit(model, dims.x, dims.y, self.budget.rec_optimizer.clone())?;
        let mut rng = seeding::rng(self.sub(index, "recommend"));
        let out = rec.fixed_design(&self.rec_u, &mut rng)?;
        if let Some(w) = out.warning {
            self.warn(w);
        }
        let policy = rec.policies(&out.point, scenarios, self.sub(index, "policy"))?.into_iter().map(|p| p.0).collect();
        Ok((out.point, policy))
    }

    fn single_phase(&mut self) -> Result<()> {
        let b = self.budget;
        let mut design = DesignStream::new(self.problem, Subspace::Joint, self.sub(0, "initial-design"))?;
        let mut data = Data::default();
        for _ in 0..b.n_init {
            let q = design.next_point();
            let v = self.observe(q.clone(), 0, ProposalKind::Initial, None);
            data.inputs.push(q);
            data.observations.push(v);
        }
        let mut model = self.fit(&data)?;
        let (x, policy) = self.recommend_joint(&model, data.inputs.len())?;
        self.checkpoint(0, x, policy)?;
        for n in b.n_init..b.n_total {
            let (q, kind, acq_value) = match self.strategy {
                Strategy::JointRandom => (design.next_point(), ProposalKind::Sobol, None),
                _ => {
                    let kind = match self.strategy {
                        Strategy::AlternatingKg if (n - b.n_init) % 2 == 0 => AcquisitionKind::AltFix,
                        Strategy::AlternatingKg => AcquisitionKind::AltAdj,
                        _ => AcquisitionKind::Joint,
                    };
                    let ctx = self.context(Subspace::Joint, n)?;
                    let acq = build_acquisition(kind, &model, &ctx)?;
                    let (q, val) = self.maximize(acq.as_ref(), Subspace::Joint, n)?;
                    (q, ProposalKind::Acquisition(kind), Some(val))
                }
            };
            let v = self.observe(q.clone(), 0, kind, acq_value);
            data.inputs.push(q);
            data.observations.push(v);
            let proposals = n + 1 - b.n_init;
            let needs_model = self.strategy != Strategy::JointRandom || self.is_checkpoint(proposals, b.n_total - n - 1);
            if needs_model {
                model = self.fit(&data)?;
            }
            if self.is_checkpoint(proposals, b.n_total - n - 1) {
                let (x, policy) = self.recommend_joint(&model, data.inputs.len())?;
                self.checkpoint(0, x, policy)?;
            }
        }
        Ok(())
    }

    /// Policy ĝ(u) from a (y, u) model, at the first-phase design.
    fn adjustable_policy(&self, model_yu: &SurrogateModel, us: &[Vec<f64>], index: usize) -> Result<Vec<Vec<f64>>> {
        let x_fixed = self.problem.x_step1();
        if self.problem.is_discrete() {
            let x = SupplyChainSpace::snap(x_fixed[0], &[0.0; 3]).x;
            return Ok(us.iter().map(|u| SupplyChainSpace::normalize_y(&exhaustive_policy(model_yu, x, u)).to_vec()).collect());
        }
        let rec = Recommender::new(model_yu, BoundedBox::unit(0), BoundedBox::unit(self.problem.dims().y), self.budget.rec_optimizer.clone())?;
        Ok(rec.policies(&[], us, self.sub(index, "policy"))?.into_iter().map(|p| p.0).collect())
    }

    /// A frozen first-phase decision applied at design `x`: supply-chain
    /// production is clipped to what `x` allows.
    fn frozen_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        if self.problem.is_discrete() {
            let d = SupplyChainSpace::snap(x[0], y);
            SupplyChainSpace::normalize_y(&d).to_vec()
        } else {
            y.to_vec()
        }
    }

    fn two_phase(&mut self) -> Result<()> {
        let b = self.budget;
        let random = self.strategy == Strategy::TwoStepRandom;
        let x_fixed = self.problem.x_step1().to_vec();
        let dx = self.problem.dims().x;
        let scenarios = self.problem.regret_scenarios().to_vec();

        // Phase one: optimize the policy at the fixed design.
        let mut design = DesignStream::new(self.problem, Subspace::AdjustableEnv, self.sub(0, "initial-design-1"))?;
        let mut data = Data::default();
        let full = |x: &[f64], yu: &[f64]| -> Vec<f64> { x.iter().chain(yu).copied().collect() };
        for _ in 0..b.n_init_step1 {
            let q = design.next_point();
            let v = self.observe(full(&x_fixed, &q), 1, ProposalKind::Initial, None);
            data.inputs.push(q);
            data.observations.push(v);
        }
        let mut model = self.fit(&data)?;
        let policy = self.adjustable_policy(&model, &scenarios, self.records.len())?;
        self.checkpoint(1, x_fixed.clone(), policy)?;
        for n in b.n_init_step1..b.n_total_step1 {
            let index = self.records.len();
            let (q, kind, acq_value) = if random {
                (design.next_point(), ProposalKind::Sobol, None)
            } else {
                let ctx = self.context(Subspace::AdjustableEnv, index)?;
                let acq = PerEnvironmentKg::two_step_stage1(&model, &ctx, Some(&x_fixed))?;
                let (q, val) = self.maximize(&acq, Subspace::AdjustableEnv, index)?;
                (q, ProposalKind::Acquisition(AcquisitionKind::TwoStepStage1), Some(val))
            };
            let v = self.observe(full(&x_fixed, &q), 1, kind, acq_value);
            data.inputs.push(q);
            data.observations.push(v);
            let proposals = n + 1 - b.n_init_step1;
            let at_checkpoint = self.is_checkpoint(proposals, b.n_total_step1 - n - 1);
            if !random || at_checkpoint {
                model = self.fit(&data)?;
            }
            if at_checkpoint {
                let policy = self.adjustable_policy(&model, &scenarios, self.records.len())?;
                self.checkpoint(1, x_fixed.clone(), policy)?;
            }
        }
        let model_yu = model;
        let frozen_index = self.records.len();
        let frozen_scenarios = self.adjustable_policy(&model_yu, &scenarios, frozen_index)?;

        // Phase two: optimize the design with the policy frozen.
        let mut design = DesignStream::new(self.problem, Subspace::FixedEnv, self.sub(0, "initial-design-2"))?;
        let mut data = Data::default();
        let evaluate_xu = |runner: &mut Self, xu: &[f64], kind: ProposalKind, acq_value: Option<f64>| -> Result<f64> {
            let (x, u) = xu.split_at(dx);
            let g = runner.adjustable_policy(&model_yu, &[u.to_vec()], frozen_index)?.remove(0);
            let y = runner.frozen_y(x, &g);
            let q: Vec<f64> = x.iter().chain(&y).chain(u).copied().collect();
            Ok(runner.observe(q, 2, kind, acq_value))
        };
        for _ in 0..b.n_init_step2 {
            let q = design.next_point();
            let v = evaluate_xu(self, &q, ProposalKind::Initial, None)?;
            data.inputs.push(q);
            data.observations.push(v);
        }
        let mut model = self.fit(&data)?;
        let x = self.recommend_design(&model, self.records.len())?;
        let policy = frozen_scenarios.iter().map(|g| self.frozen_y(&x, g)).collect();
        self.checkpoint(2, x, policy)?;
        for n in b.n_init_step2..b.n_total_step2 {
            let index = self.records.len();
            let (q, kind, acq_value) = if random {
                (design.next_point(), ProposalKind::Sobol, None)
            } else {
                let ctx = self.context(Subspace::FixedEnv, index)?;
                let acq = AveragedKg::two_step_stage2(&model, &ctx)?;
                let (q, val) = self.maximize(&acq, Subspace::FixedEnv, index)?;
                (q, ProposalKind::Acquisition(AcquisitionKind::TwoStepStage2), Some(val))
            };
            let v = evaluate_xu(self, &q, kind, acq_value)?;
            data.inputs.push(q);
            data.observations.push(v);
            let proposals = n + 1 - b.n_init_step2;
            let at_checkpoint = self.is_checkpoint(proposals, b.n_total_step2 - n - 1);
            if !random || at_checkpoint {
                model = self.fit(&data)?;
            }
            if at_checkpoint {
                let x = self.recommend_design(&model, self.records.len())?;
                let policy = frozen_scenarios.iter().map(|g| self.frozen_y(&x, g)).collect();
                self.checkpoint(2, x, policy)?;
            }
        }
        Ok(())
    }

    /// x* maximizing the environment-averaged posterior mean of an (x, u)
    /// model.
    fn recommend_design(&mut self, model_xu: &SurrogateModel, index: usize) -> Result<Vec<f64>> {
        if self.problem.is_discrete() {
            let values: Vec<f64> = crate::problems::soy_levels()
                .map(|x| {
                    let xn = SupplyChainSpace::norm_x(x as f64);
                    self.rec_u
                        .iter()
                        .map(|u| {
                            let q: Vec<f64> = std::iter::once(xn).chain(u.iter().copied()).collect();
                            model_xu.posterior_mean(&q)
                        })
                        .sum::<f64>()
                })
                .collect();
            let best = crate::acquisition::argmax(&values);
            let x = crate::problems::soy_levels().nth(best).expect("index within levels");
            return Ok(vec![SupplyChainSpace::norm_x(x as f64)]);
        }
        let rec = Recommender::new(model_xu, BoundedBox::unit(self.problem.dims().x), BoundedBox::unit(0), self.budget.rec_optimizer.clone())?;
        let mut rng = seeding::rng(self.sub(index, "recommend"));
        let out = rec.fixed_design(&self.rec_u, &mut rng)?;
        if let Some(w) = out.warning {
            self.warn(w);
        }
        Ok(out.point)
    }
}
