//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run everything with `cargo test --test acceptance`, or a subset with
//! `cargo test --test acceptance -- 1 4 5`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use twostage_bo::acquisition::{
    expected_max_affine, Acquisition, AcqContext, AcqSizes, AffineFamily, AveragedKg, EnvSampler, JointKg, PerEnvironmentKg,
};
use twostage_bo::driver::{run, BudgetConfig, Checkpoint, ProposalKind, RunHistory, Strategy};
use twostage_bo::gp::{fit_map, Dataset, FitOptions, Hyperparameters, Priors, SurrogateModel};
use twostage_bo::optimize::{multistart_maximize, BoundedBox, OptimizeConfig};
use twostage_bo::problems::{
    optical_table_ratio, supply_chain_cost, Problem, ProblemSpec, SupplyChainSpace, SupplyDecision, POLICY_PAIRS, TOTAL_MASS,
};
use twostage_bo::{qmc, seeding};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Fixtures

/// Data from a smooth random function; hyperparameters drawn at random.
fn random_model(dim: usize, n: usize, rng: &mut seeding::Rng) -> SurrogateModel {
    let freq: Vec<f64> = (0..dim).map(|_| rng.random_range(1.0..6.0)).collect();
    let phase: f64 = rng.random_range(0.0..6.0);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
    let obs = inputs.iter().map(|x| x.iter().zip(&freq).map(|(v, f)| (f * v + phase).sin()).sum::<f64>()).collect();
    let data = Dataset::new(inputs, obs, dim).unwrap();
    let ls = (0..dim).map(|_| rng.random_range(0.15..0.8)).collect();
    let noise = [1e-6, 1e-3, 0.05][rng.random_range(0..3)];
    let hp = Hyperparameters::new(ls, rng.random_range(0.5..2.0), noise, rng.random_range(-0.3..0.3));
    SurrogateModel::new(&data, hp).unwrap()
}

fn context(dx: usize, dy: usize, du: usize, sizes: AcqSizes, seed: u64) -> AcqContext {
    AcqContext::generate(dx, dy, &EnvSampler::Uniform { dim: du }, sizes, seed).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Joint,
    AltFix,
    AltAdj,
    Stage1,
    Stage2,
}

const KINDS: [Kind; 5] = [Kind::Joint, Kind::AltFix, Kind::AltAdj, Kind::Stage1, Kind::Stage2];

/// Model input dimension of an acquisition over an (x, y, u) split.
fn model_dims(kind: Kind, (dx, dy, du): (usize, usize, usize)) -> (usize, usize, usize) {
    match kind {
        Kind::Stage1 => (0, dy, du),
        Kind::Stage2 => (dx, 0, du),
        _ => (dx, dy, du),
    }
}

fn build<'a>(kind: Kind, model: &'a SurrogateModel, ctx: &AcqContext) -> Box<dyn Acquisition + 'a> {
    match kind {
        Kind::Joint => Box::new(JointKg::new(model, ctx).unwrap()),
        Kind::AltFix => Box::new(AveragedKg::alternating_fix(model, ctx).unwrap()),
        Kind::AltAdj => Box::new(PerEnvironmentKg::alternating_adjust(model, ctx).unwrap()),
        Kind::Stage1 => Box::new(PerEnvironmentKg::two_step_stage1(model, ctx, None).unwrap()),
        Kind::Stage2 => Box::new(AveragedKg::two_step_stage2(model, ctx).unwrap()),
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// 1. Exact expectation

fn criterion_1() -> Outcome {
    let abs = expected_max_affine(&AffineFamily::new(vec![0.0, 0.0], vec![1.0, -1.0]).unwrap());
    let clip = expected_max_affine(&AffineFamily::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap());
    let e_abs = (abs - 0.7978845608028654).abs();
    let e_clip = (clip - 1.0833154705876864).abs();
    let analytic_ok = e_abs <= 1e-9 && e_clip <= 1e-9;

    let draws = 1_000_000;
    let results: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|f| {
            let mut rng = seeding::rng(seeding::substream(1, f, "family"));
            let m = rng.random_range(2..12);
            let a: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let exact = expected_max_affine(&AffineFamily::new(a.clone(), b.clone()).unwrap());
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = a.iter().zip(&b).map(|(ai, bi)| ai + bi * z).fold(f64::NEG_INFINITY, f64::max);
                s += v;
                s2 += v * v;
            }
            let mean = s / draws as f64;
            let se = ((s2 / draws as f64 - mean * mean) / (draws as f64 - 1.0)).sqrt();
            ((exact - mean).abs(), se)
        })
        .collect();
    let within = results.iter().filter(|(d, se)| *d <= 3.0 * se).count();
    let worst = results.iter().map(|(d, se)| d / se).fold(0.0, f64::max);
    outcome(
        analytic_ok && within == 100,
        format!("E|Z| err {e_abs:.1e}, Phi(1)+phi(1) err {e_clip:.1e}; {within}/100 families within 3 SE (max {worst:.2} SE)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Nonnegativity

/// Values of jKG with each base sample alone, whose mean is the jKG value.
fn joint_kg_per_sample(model: &SurrogateModel, ctx: &AcqContext, point: &[f64]) -> Vec<f64> {
    ctx.z_base
        .iter()
        .map(|&z| {
            let single = AcqContext::new(ctx.x_disc.clone(), ctx.y_disc.clone(), ctx.u_mc.clone(), vec![z]).unwrap();
            JointKg::new(model, &single).unwrap().value(point)
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let fixtures = 1000u64;
    let results: Vec<(f64, f64, f64)> = (0..fixtures)
        .into_par_iter()
        .map(|f| {
            let mut rng = seeding::rng(seeding::substream(2, f, "fixture"));
            let split = (rng.random_range(1..3), rng.random_range(1..3), rng.random_range(1..3));
            let n = rng.random_range(0..9);
            let sizes = AcqSizes { n_x: rng.random_range(1..7), n_y: rng.random_range(1..7), n_u: 4, n_v: 16 };
            let mut worst_exact = f64::INFINITY;
            let mut joint = (f64::INFINITY, 0.0);
            for kind in KINDS {
                let (dx, dy, du) = model_dims(kind, split);
                let model = random_model(dx + dy + du, n, &mut rng);
                let ctx = context(dx, dy, du, sizes, rng.random());
                let point: Vec<f64> = (0..dx + dy + du).map(|_| rng.random()).collect();
                let v = build(kind, &model, &ctx).value(&point);
                if kind == Kind::Joint {
                    let (_, se) = mean_se(&joint_kg_per_sample(&model, &ctx, &point));
                    joint = (v, se);
                } else {
                    worst_exact = worst_exact.min(v);
                }
            }
            (worst_exact, joint.0, joint.1)
        })
        .collect();
    let exact_min = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let exact_ok = results.iter().all(|r| r.0 >= -1e-10);
    let joint_fail = results.iter().filter(|r| r.1 < -5.0 * r.2).count();
    let joint_min = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    outcome(
        exact_ok && joint_fail == 0,
        format!(
            "{fixtures} fixtures: min exact-variant value {exact_min:.2e} (tol -1e-10); min jKG {joint_min:.2e}, {joint_fail} below -5 SE"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Brute-force oracles

/// Posterior means at `points` after observing `v` at `xt`, from two full
/// refits (the posterior mean is affine in the new observation).
fn refit_affine(model: &SurrogateModel, xt: &[f64], points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, f64) {
    let t = model.transform();
    let sd = ((model.posterior_variance(xt) / t.scale.powi(2)) + model.effective_noise()).sqrt() * t.scale;
    let mu = model.posterior_mean(xt);
    let m0 = model.condition_on(xt.to_vec(), mu).unwrap();
    let m1 = model.condition_on(xt.to_vec(), mu + sd).unwrap();
    let base: Vec<f64> = points.iter().map(|p| m0.posterior_mean(p)).collect();
    let slope: Vec<f64> = points.iter().zip(&base).map(|(p, b)| m1.posterior_mean(p) - b).collect();
    (base, slope, sd)
}

fn join(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Exhaustive inner value of an acquisition for given posterior means over
/// the full grid `[(i·N_u + k)·N_y + j]`, with the policy `g` frozen for
/// the fixed-policy variant.
fn inner(kind: Kind, m: &[f64], n: (usize, usize, usize), x_hat: usize, g: &[usize]) -> f64 {
    let (nx, nu, ny) = n;
    let at = |i: usize, k: usize, j: usize| m[(i * nu + k) * ny + j];
    let best_y = |i: usize, k: usize| (0..ny).map(|j| at(i, k, j)).fold(f64::NEG_INFINITY, f64::max);
    match kind {
        Kind::Joint | Kind::Stage2 | Kind::Stage1 => {
            (0..nx).map(|i| (0..nu).map(|k| best_y(i, k)).sum::<f64>() / nu as f64).fold(f64::NEG_INFINITY, f64::max)
        }
        Kind::AltFix => (0..nx).map(|i| (0..nu).map(|k| at(i, k, g[k])).sum::<f64>() / nu as f64).fold(f64::NEG_INFINITY, f64::max),
        Kind::AltAdj => (0..nu).map(|k| best_y(x_hat, k)).sum::<f64>() / nu as f64,
    }
}

fn oracle_case(kind: Kind, seed: u64) -> (f64, f64, f64) {
    let mut rng = seeding::rng(seeding::substream(3, seed, "oracle"));
    let (dx, dy, du) = model_dims(kind, (1, 1, 1));
    let n = rng.random_range(0..4);
    let model = random_model(dx + dy + du, n, &mut rng);
    let n_v = if kind == Kind::Joint { 1 << 14 } else { 4 };
    let ctx = context(dx, dy, du, AcqSizes { n_x: 4, n_y: 4, n_u: 4, n_v }, rng.random());
    let point: Vec<f64> = (0..dx + dy + du).map(|_| rng.random()).collect();
    let value = build(kind, &model, &ctx).value(&point);

    let (nx, nu, ny) = (ctx.x_disc.len(), ctx.u_mc.len(), ctx.y_disc.len());
    let mut grid = Vec::new();
    for x in &ctx.x_disc {
        for u in &ctx.u_mc {
            for y in &ctx.y_disc {
                grid.push(join(&[x, y, u]));
            }
        }
    }
    let now: Vec<f64> = grid.iter().map(|p| model.posterior_mean(p)).collect();
    let (x_hat, _) = (0..nx)
        .map(|i| (i, (0..nu).map(|k| (0..ny).map(|j| now[(i * nu + k) * ny + j]).fold(f64::NEG_INFINITY, f64::max)).sum::<f64>()))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let g: Vec<usize> = (0..nu)
        .map(|k| {
            let row = &now[(x_hat * nu + k) * ny..(x_hat * nu + k + 1) * ny];
            (0..ny).fold(0, |b, j| if row[j] > row[b] { j } else { b })
        })
        .collect();
    let baseline = inner(kind, &now, (nx, nu, ny), x_hat, &g);
    let (base, slope, _) = refit_affine(&model, &point, &grid);
    let draws = 1_000_000;
    let mut m = vec![0.0; grid.len()];
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        for ((mi, b), c) in m.iter_mut().zip(&base).zip(&slope) {
            *mi = b + c * z;
        }
        let v = inner(kind, &m, (nx, nu, ny), x_hat, &g) - baseline;
        s += v;
        s2 += v * v;
    }
    let mean = s / draws as f64;
    let se = ((s2 / draws as f64 - mean * mean) / (draws as f64 - 1.0)).max(0.0).sqrt();
    (value, mean, se)
}

fn criterion_3() -> Outcome {
    let cases: Vec<(Kind, u64)> = KINDS.iter().flat_map(|&k| (0..6u64).map(move |s| (k, s))).collect();
    let results: Vec<(Kind, f64, f64, f64)> = cases
        .par_iter()
        .map(|&(kind, seed)| {
            let (v, m, se) = oracle_case(kind, seed);
            (kind, v, m, se)
        })
        .collect();
    // Degenerate cases (zero fantasy variance) have a zero oracle SE.
    let ok = |&(_, v, m, se): &(Kind, f64, f64, f64)| (v - m).abs() <= 3.0 * se + 1e-12;
    let passed = results.iter().filter(|r| ok(r)).count();
    let failed: Vec<String> = results.iter().filter(|r| !ok(r)).map(|r| format!("{:?} {:.4} vs {:.4}±{:.1e}", r.0, r.1, r.2, r.3)).collect();

    let mut worst_refit: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = seeding::rng(seeding::substream(3, seed, "refit"));
        let dim = rng.random_range(1..4);
        let model = random_model(dim, rng.random_range(0..4), &mut rng);
        let xt: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
        let z: f64 = StandardNormal.sample(&mut rng);
        let queries: Vec<Vec<f64>> = (0..8).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
        let fantasy = model.fantasy_mean(&xt, z, &queries).unwrap();
        let t = model.transform();
        let sd = ((model.posterior_variance(&xt) / t.scale.powi(2)) + model.effective_noise()).sqrt() * t.scale;
        let refit = model.condition_on(xt.clone(), model.posterior_mean(&xt) + z * sd).unwrap();
        for (q, f) in queries.iter().zip(&fantasy) {
            worst_refit = worst_refit.max((refit.posterior_mean(q) - f).abs());
        }
    }
    outcome(
        passed == results.len() && worst_refit <= 1e-8,
        format!(
            "{passed}/{} acquisition fixtures within 3 SE of 1e6-draw oracles{}; fantasy vs refit max err {worst_refit:.1e}",
            results.len(),
            if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Gradients

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative error of an analytic gradient against central differences, or
/// `None` where one-sided differences disagree (an argmax set changes
/// within the stencil).
fn gradient_check(f: &dyn Fn(&[f64]) -> f64, grad: &[f64], x: &[f64]) -> Option<f64> {
    let h = 1e-5;
    let f0 = f(x);
    let mut central = vec![0.0; x.len()];
    for d in 0..x.len() {
        let mut p = x.to_vec();
        p[d] += h;
        let fp = f(&p);
        p[d] -= 2.0 * h;
        let fm = f(&p);
        let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
        if (fwd - bwd).abs() > 1e-2 * (fwd.abs() + bwd.abs()) + 1e-6 {
            return None;
        }
        central[d] = (fp - fm) / (2.0 * h);
    }
    let diff: Vec<f64> = grad.iter().zip(&central).map(|(a, b)| a - b).collect();
    let scale = norm(&central).max(norm(grad));
    Some(if scale < 1e-9 { 0.0 } else { norm(&diff) / scale })
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let labels = ["posterior mean", "jKG", "aKG-fix", "aKG-adj", "2sKG-1", "2sKG-2"];
    for (which, label) in labels.iter().enumerate() {
        let results: Vec<Option<f64>> = (0..200u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeding::rng(seeding::substream(4, i, label));
                let sizes = AcqSizes { n_x: 5, n_y: 5, n_u: 4, n_v: 16 };
                let (dx, dy, du) = if which == 0 { (2, 1, 1) } else { model_dims(KINDS[which - 1], (2, 1, 1)) };
                let d = dx + dy + du;
                let model = random_model(d, rng.random_range(3..10), &mut rng);
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.02..0.98)).collect();
                let mut g = vec![0.0; d];
                if which == 0 {
                    model.posterior_mean_with_grad(&x, &mut g);
                    gradient_check(&|p| model.posterior_mean(p), &g, &x)
                } else {
                    let ctx = context(dx, dy, du, sizes, rng.random());
                    let acq = build(KINDS[which - 1], &model, &ctx);
                    acq.value_and_gradient(&x, &mut g);
                    gradient_check(&|p| acq.value(p), &g, &x)
                }
            })
            .collect();
        let stable: Vec<f64> = results.iter().flatten().copied().collect();
        let good = stable.iter().filter(|e| **e <= 1e-3).count();
        let frac = good as f64 / stable.len().max(1) as f64;
        pass &= frac >= 0.95 && stable.len() >= 100;
        lines.push(format!("{label} {good}/{} ({:.1}%)", stable.len(), 100.0 * frac));
    }
    outcome(pass, format!("rel err <= 1e-3 at stable points: {}", lines.join(", ")))
}

// ---------------------------------------------------------------------------
// 5. Simulators

/// Steady-state amplitude of the table under unit floor vibration, by RK4
/// integration of m·x'' = −4k(x − z) − c(x' − z'), z = sin ωt, followed by
/// projection onto sin and cos over whole periods.
fn ode_ratio(k: f64, c: f64, omega: f64, m: f64) -> f64 {
    let accel = |t: f64, x: f64, v: f64| (-4.0 * k * (x - (omega * t).sin()) - c * (v - omega * (omega * t).cos())) / m;
    let rk4 = |t: f64, x: f64, v: f64, h: f64| {
        let (k1x, k1v) = (v, accel(t, x, v));
        let (k2x, k2v) = (v + 0.5 * h * k1v, accel(t + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v));
        let (k3x, k3v) = (v + 0.5 * h * k2v, accel(t + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v));
        let (k4x, k4v) = (v + h * k3v, accel(t + h, x + h * k3x, v + h * k3v));
        (x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))
    };
    let period = std::f64::consts::TAU / omega;
    let dt = (period / 200.0).min(5e-4);
    // Transients decay at least as fast as exp(−c t / 2m).
    let settle = 24.0 * m / c;
    let (mut t, mut x, mut v) = (0.0, 0.0, 0.0);
    while t < settle {
        (x, v) = rk4(t, x, v, dt);
        t += dt;
    }
    let periods = (1.0 / period).ceil().max(2.0);
    let n = ((periods * period) / dt).ceil() as usize;
    let h = periods * period / n as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..n {
        let ti = t + i as f64 * h;
        // The rectangle rule is spectrally accurate on a periodic integrand.
        a += x * (omega * ti).sin();
        b += x * (omega * ti).cos();
        (x, v) = rk4(ti, x, v, h);
    }
    2.0 * (a * a + b * b).sqrt() / n as f64
}

fn criterion_5() -> Outcome {
    let traced = [
        supply_chain_cost(0.0, 0.0, 100.0, 500.0, &[0.0; 4]).unwrap(),
        supply_chain_cost(0.0, 0.0, 100.0, 200.0, &[150.0; 4]).unwrap(),
        supply_chain_cost(20.0, 1.0, 100.0, 200.0, &[0.0; 4]).unwrap(),
    ];
    let sc_detail = format!("supply chain {} / {} / {}", traced[0], traced[1], traced[2]);
    let sc_ok = traced == [0.0, 60000.0, 955.0];

    let grid: Vec<(f64, f64, f64)> = (0..10)
        .flat_map(|i| (0..10).flat_map(move |j| (0..10).map(move |l| (i, j, l))))
        .map(|(i, j, l)| {
            let k = (12.0 + 38.0 * i as f64 / 9.0) * 1e3;
            let c = (1.0 + 9.0 * j as f64 / 9.0) * 1e3;
            let f = 10f64.powf(2.0 * l as f64 / 9.0);
            (k, c, std::f64::consts::TAU * f)
        })
        .collect();
    let errors: Vec<f64> = grid
        .par_iter()
        .map(|&(k, c, w)| {
            let closed = optical_table_ratio(k, c, w, TOTAL_MASS);
            (closed - ode_ratio(k, c, w, TOTAL_MASS)).abs() / closed
        })
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    outcome(sc_ok && worst <= 1e-3, format!("{sc_detail} (want 0 / 60000 / 955); optical ODE max rel err {worst:.1e} over 1000 points"))
}

// ---------------------------------------------------------------------------
// 6-8. Regret studies

const SEEDS: u64 = 20;

fn regret_budget(problem: &Problem, n_total: usize, n_step: usize) -> BudgetConfig {
    let mut b = BudgetConfig::for_problem(problem);
    b.n_init = 10;
    b.n_total = n_total;
    b.n_init_step1 = 10;
    b.n_total_step1 = n_step;
    b.n_init_step2 = 10;
    b.n_total_step2 = n_total - n_step;
    b
}

/// Regret at the first and last checkpoint of each run, per seed.
fn regret_study(spec: &ProblemSpec, strategies: &[Strategy]) -> Vec<Vec<(f64, f64)>> {
    let per_seed: Vec<Vec<(f64, f64)>> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let problem = Problem::build(spec, seed).unwrap();
            let budget = regret_budget(&problem, 60, 30);
            strategies
                .iter()
                .map(|&s| {
                    let h = run(s, &problem, &budget, seed).unwrap();
                    (h.checkpoints[0].estimate.regret, h.final_checkpoint().unwrap().estimate.regret)
                })
                .collect()
        })
        .collect();
    (0..strategies.len()).map(|i| per_seed.iter().map(|r| r[i]).collect()).collect()
}

/// One-sided paired t statistic and p-value for `a` having lower values than `b`.
fn paired_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let (mean, se) = mean_se(&d);
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).unwrap();
    (t, 1.0 - dist.cdf(t))
}

fn criterion_6() -> Outcome {
    let strategies = [Strategy::JointKg, Strategy::AlternatingKg, Strategy::TwoStepKg, Strategy::JointRandom];
    let res = regret_study(&ProblemSpec::new("gp-1-1-1"), &strategies);
    let last = |i: usize| res[i].iter().map(|r| r.1).collect::<Vec<_>>();
    let (t_j, p_j) = paired_test(&last(0), &last(3));
    let (t_a, p_a) = paired_test(&last(1), &last(3));
    let mut pass = p_j < 0.05 && p_a < 0.05;
    let mut trend = Vec::new();
    for (i, s) in strategies.iter().enumerate().take(3) {
        let first = res[i].iter().map(|r| r.0).sum::<f64>() / SEEDS as f64;
        let final_ = res[i].iter().map(|r| r.1).sum::<f64>() / SEEDS as f64;
        pass &= final_ < first;
        trend.push(format!("{s} {first:.3}->{final_:.3}"));
    }
    let rs = last(3).iter().sum::<f64>() / SEEDS as f64;
    outcome(
        pass,
        format!(
            "jKG vs jRS t={t_j:.2} p={p_j:.4}; aKG vs jRS t={t_a:.2} p={p_a:.4}; mean regret n0->n_tot: {}; jRS final {rs:.3}",
            trend.join(", ")
        ),
    )
}

fn step_regrets(h: &RunHistory, at: &[usize]) -> Vec<f64> {
    at.iter()
        .map(|&n| {
            let c: &Checkpoint = h.checkpoints.iter().find(|c| c.evaluations_used == n).expect("checkpoint at evaluation count");
            c.estimate.regret
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let spec = ProblemSpec { lengthscales: Some([0.2, 0.4, 0.4]), ..ProblemSpec::new("gp-2-1-1") };
    let (n0, n1) = (10, 30);
    let decreases: Vec<(f64, f64)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let problem = Problem::build(&spec, seed).unwrap();
            let mut b = regret_budget(&problem, n1, n1);
            b.n_total_step2 = b.n_init_step2;
            let joint = step_regrets(&run(Strategy::JointKg, &problem, &b, seed).unwrap(), &[n0, n1]);
            let two = run(Strategy::TwoStepKg, &problem, &b, seed).unwrap();
            let step1 = step_regrets(&two, &[n0, n1]);
            (joint[0] - joint[1], step1[0] - step1[1])
        })
        .collect();
    let dj = decreases.iter().map(|d| d.0).sum::<f64>() / SEEDS as f64;
    let d2 = decreases.iter().map(|d| d.1).sum::<f64>() / SEEDS as f64;
    outcome(
        d2 < 0.2 * dj,
        format!("mean regret decrease over evaluations {n0}..{n1}: jKG {dj:.3}, 2sKG step 1 {d2:.3} (ratio {:.3}, need < 0.2)", d2 / dj),
    )
}

fn criterion_8() -> Outcome {
    let spec = ProblemSpec { noise_sd: 2.0, ..ProblemSpec::new("gp-1-1-1") };
    let res = regret_study(&spec, &[Strategy::JointKg, Strategy::JointRandom]);
    let last = |i: usize| res[i].iter().map(|r| r.1).collect::<Vec<_>>();
    let (t, p) = paired_test(&last(0), &last(1));
    let mean = |i: usize| last(i).iter().sum::<f64>() / SEEDS as f64;
    outcome(p < 0.05, format!("sigma=2: jKG final {:.3} vs jRS {:.3}, t={t:.2} p={p:.4}", mean(0), mean(1)))
}

// ---------------------------------------------------------------------------
// 9. Timing

fn criterion_9() -> Outcome {
    let problem = Problem::build(&ProblemSpec::new("gp-2-2-2"), 0).unwrap();
    let inputs = qmc::sobol(6, 200, 9, true).unwrap().to_rows();
    let obs = inputs.iter().map(|q| problem.evaluate(q)).collect();
    let data = Dataset::new(inputs, obs, 6).unwrap();
    let fit = fit_map(&data, &Priors::default(), &FitOptions { fix_noise: true, ..FitOptions::default() }).unwrap();
    let model = SurrogateModel::new(&data, fit.hyperparameters).unwrap();
    let mut times: Vec<f64> = (0..5u64)
        .map(|rep| {
            let ctx = AcqContext::generate(2, 2, &problem.env(), AcqSizes::default(), rep).unwrap();
            let start = Instant::now();
            let acq = JointKg::new(&model, &ctx).unwrap();
            multistart_maximize(&acq, &BoundedBox::unit(6), &OptimizeConfig::default(), &mut seeding::rng(rep)).unwrap();
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let median = times[2];
    outcome(median <= 60.0, format!("median jKG optimization {median:.1}s over 5 repetitions (range {:.1}-{:.1}s)", times[0], times[4]))
}

// ---------------------------------------------------------------------------
// 10. Supply-chain feasibility

/// Decodes a normalized (x, y1, s, S−s) point; `None` unless every
/// coordinate sits exactly on the admissible grid.
fn admissible(xn: f64, y: &[f64]) -> Option<SupplyDecision> {
    let on_int = |v: f64| ((v - v.round()).abs() <= 1e-6).then_some(v.round());
    let x = on_int(xn * 5000.0)?;
    let y1 = on_int(y[0] * 250.0)?;
    let s = on_int(y[1] * 300.0 + 100.0)?;
    let big_s = on_int(s + y[2] * 300.0 + 100.0)?;
    let pair_ok = POLICY_PAIRS.iter().any(|&(a, b)| a as f64 == s && b as f64 == big_s);
    let ok = x >= 0.0 && x <= 5000.0 && x % 20.0 == 0.0 && y1 >= 0.0 && y1 <= x / 20.0 && pair_ok;
    ok.then_some(SupplyDecision { x: x as u32, y1: y1 as u32, s: s as u32, big_s: big_s as u32 })
}

fn criterion_10() -> Outcome {
    let probe = SupplyDecision { x: 2000, y1: 37, s: 200, big_s: 500 };
    let decoded = admissible(SupplyChainSpace::norm_x(2000.0), &SupplyChainSpace::normalize_y(&probe));
    if decoded != Some(probe) {
        return outcome(false, "decoder does not invert the normalization");
    }
    let problem = Problem::build(&ProblemSpec::new("supply-chain"), 0).unwrap();
    let budget = BudgetConfig::for_problem(&problem);
    let h = run(Strategy::JointKg, &problem, &budget, 0).unwrap();
    let mut violations = 0;
    let mut checked = 0;
    for r in &h.records {
        checked += 1;
        violations += admissible(r.point[0], &r.point[1..4]).is_none() as usize;
    }
    let proposals = h.records.iter().filter(|r| r.kind != ProposalKind::Initial).count();
    for c in &h.checkpoints {
        for y in &c.policy {
            checked += 1;
            violations += admissible(c.x[0], y).is_none() as usize;
        }
    }
    outcome(
        violations == 0 && h.evaluations() == budget.n_total,
        format!(
            "{} evaluations ({proposals} proposals), {} recommendations; {violations} violations in {checked} decisions",
            h.evaluations(),
            h.checkpoints.len()
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "exact expectation", criterion_1),
        (2, "nonnegativity", criterion_2),
        (3, "oracle equivalence", criterion_3),
        (4, "gradients", criterion_4),
        (5, "simulator ground truth", criterion_5),
        (6, "regret ordering", criterion_6),
        (7, "two-step pathology", criterion_7),
        (8, "noise robustness", criterion_8),
        (9, "performance envelope", criterion_9),
        (10, "supply-chain feasibility", criterion_10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        failures += !o.pass as usize;
        println!(
            "criterion {n:>2} {:<26} {}  [{:.0}s] {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
