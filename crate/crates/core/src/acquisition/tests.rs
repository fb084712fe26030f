use super::*;
use crate::gp::{Dataset, Hyperparameters, OutputTransform};
use rand::Rng;

fn model_111(n: usize, seed: u64, noise: f64) -> SurrogateModel {
    let mut rng = crate::seeding::rng(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
    let ys = xs.iter().map(|x| (5.0 * x[0]).sin() * (3.0 * x[1] - x[2]).cos()).collect();
    let data = Dataset::new(xs, ys, 3).unwrap();
    SurrogateModel::new(&data, Hyperparameters::new(vec![0.5, 0.4, 0.6], 1.0, noise, 0.0)).unwrap()
}

fn ctx(n_x: usize, n_y: usize, n_u: usize, n_v: usize, seed: u64) -> AcqContext {
    AcqContext::generate(1, 1, &EnvSampler::Uniform { dim: 1 }, AcqSizes { n_x, n_y, n_u, n_v }, seed).unwrap()
}

#[test]
fn inner_value_on_flat_prior() {
    let data = Dataset::new(vec![], vec![], 3).unwrap().with_transform(OutputTransform { shift: 0.0, scale: 1.0 });
    let m = SurrogateModel::new(&data, Hyperparameters::new(vec![0.3; 3], 1.0, 1e-8, 0.25)).unwrap();
    let iv = inner_value(&m, &ctx(5, 4, 2, 4, 0)).unwrap();
    assert_eq!(iv.index, 0);
    assert_eq!(iv.value, 0.25);
}

#[test]
fn inner_value_matches_double_loop_and_grows_with_y() {
    let m = model_111(2, 1, 1e-8);
    let c = ctx(4, 5, 1, 2, 3);
    let iv = inner_value(&m, &c).unwrap();
    let mut best = f64::NEG_INFINITY;
    for x in &c.x_disc {
        let mut v = f64::NEG_INFINITY;
        for y in &c.y_disc {
            v = v.max(m.posterior_mean(&[x[0], y[0], c.u_mc[0][0]]));
        }
        best = best.max(v);
    }
    assert!((iv.value - best).abs() < 1e-14);
    let mut bigger = c.clone();
    bigger.y_disc.push(vec![0.123]);
    bigger.y_disc.push(vec![0.987]);
    assert!(inner_value(&m, &bigger).unwrap().value >= iv.value);
}

#[test]
fn joint_kg_vanishes_at_noiseless_training_point() {
    let m = model_111(6, 2, 0.0);
    let c = ctx(5, 5, 4, 16, 4);
    let x0 = m.dataset().inputs()[3].clone();
    let v = acq_joint_kg(&m, &x0, &c).unwrap();
    assert!(v.abs() <= 1e-10, "{v}");
}

#[test]
fn joint_kg_with_singletons_is_a_martingale() {
    let m = model_111(5, 3, 1e-8);
    let c = ctx(1, 1, 4, 1 << 10, 5);
    let v = acq_joint_kg(&m, &[0.3, 0.6, 0.2], &c).unwrap();
    assert!(v.abs() <= 1e-2, "{v}");
}

#[test]
fn exact_variants_with_singletons_are_zero() {
    let m = model_111(5, 4, 1e-8);
    let p = [0.3, 0.6, 0.2];
    assert_eq!(acq_alt_fix(&m, &p, &ctx(1, 6, 4, 4, 6)).unwrap(), 0.0);
    assert_eq!(acq_alt_adj(&m, &p, &ctx(6, 1, 4, 4, 6)).unwrap(), 0.0);
}

#[test]
fn zero_cross_covariance_gives_zero() {
    let data = Dataset::new(vec![vec![0.1, 0.1, 0.1], vec![0.2, 0.3, 0.1]], vec![0.0, 1.0], 3).unwrap();
    let m = SurrogateModel::new(&data, Hyperparameters::new(vec![1e-3; 3], 1.0, 1e-8, 0.0)).unwrap();
    let c = ctx(5, 5, 4, 4, 7);
    // Far from every discretization point relative to the lengthscale.
    let p = [0.9999, 0.9999, 0.9999];
    let cov_exists = c.x_disc.iter().any(|x| (x[0] - p[0]).abs() < 0.05);
    assert!(!cov_exists);
    assert_eq!(acq_alt_fix(&m, &p, &c).unwrap(), 0.0);
    assert_eq!(acq_alt_adj(&m, &p, &c).unwrap(), 0.0);
}

#[test]
fn stage2_with_one_environment_is_discrete_kg() {
    let mut rng = crate::seeding::rng(8);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random(), rng.random()]).collect();
    let ys = xs.iter().map(|x| x[0] - x[1] * x[1]).collect();
    let m = SurrogateModel::new(&Dataset::new(xs, ys, 2).unwrap(), Hyperparameters::new(vec![0.3, 0.5], 1.0, 1e-4, 0.0)).unwrap();
    let mut c = AcqContext::generate(1, 1, &EnvSampler::Uniform { dim: 1 }, AcqSizes { n_x: 8, n_y: 1, n_u: 1, n_v: 1 }, 9).unwrap();
    c.y_disc.clear();
    c.y_disc.push(vec![]);
    let p = [0.45, 0.3];
    let v = acq_twostep_stage2(&m, &p, &c).unwrap();
    // Classic discrete KG over the points (x_i, u).
    let pts: Vec<Vec<f64>> = c.x_disc.iter().map(|x| vec![x[0], c.u_mc[0][0]]).collect();
    let a: Vec<f64> = pts.iter().map(|q| m.posterior_mean(q)).collect();
    let eps = 1e-3;
    let b: Vec<f64> = pts
        .iter()
        .map(|q| {
            let up = m.fantasy_mean(&p, eps, &[q.clone()]).unwrap()[0];
            let dn = m.fantasy_mean(&p, -eps, &[q.clone()]).unwrap()[0];
            (up - dn) / (2.0 * eps)
        })
        .collect();
    let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kg = expected_max_affine(&AffineFamily::new(a, b).unwrap()) - top;
    assert!((v - kg).abs() < 1e-12, "{v} vs {kg}");
}

#[test]
fn flat_prior_joint_gradient_vanishes() {
    let data = Dataset::new(vec![], vec![], 3).unwrap();
    // Very long lengthscales: every prior sample path is flat.
    let m = SurrogateModel::new(&data, Hyperparameters::new(vec![1e4; 3], 1.0, 1e-8, 0.0)).unwrap();
    let kg = JointKg::new(&m, &ctx(5, 5, 4, 8, 10)).unwrap();
    let g = acq_gradient(&kg, &[0.4, 0.5, 0.6]);
    assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6);
}

#[test]
fn gradients_match_finite_differences() {
    let m = model_111(7, 11, 1e-6);
    let c = ctx(6, 6, 4, 8, 12);
    let acqs: Vec<Box<dyn Acquisition>> = vec![
        Box::new(JointKg::new(&m, &c).unwrap()),
        Box::new(AveragedKg::alternating_fix(&m, &c).unwrap()),
        Box::new(PerEnvironmentKg::alternating_adjust(&m, &c).unwrap()),
    ];
    let mut rng = crate::seeding::rng(13);
    for acq in &acqs {
        let mut good = 0;
        for _ in 0..20 {
            let p: Vec<f64> = (0..3).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect();
            let g = acq_gradient(acq.as_ref(), &p);
            let mut ok = true;
            for i in 0..3 {
                let h = 1e-5;
                let mut a = p.clone();
                let mut b = p.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (acq.value(&a) - acq.value(&b)) / (2.0 * h);
                ok &= (fd - g[i]).abs() <= 1e-3 * fd.abs().max(1e-4);
            }
            good += usize::from(ok);
        }
        assert!(good >= 17, "{good}/20");
    }
}

#[test]
fn context_validation() {
    assert!(AcqContext::new(vec![vec![0.0]], vec![vec![0.0]], vec![vec![0.0]; 3], vec![0.0]).is_err());
    assert!(AcqContext::new(vec![vec![0.0]], vec![vec![0.0]], vec![vec![0.0]; 2], vec![0.0; 6]).is_err());
    let m = model_111(3, 1, 1e-8);
    let bad = AcqContext::generate(2, 1, &EnvSampler::Uniform { dim: 1 }, AcqSizes { n_x: 2, n_y: 2, n_u: 2, n_v: 2 }, 0).unwrap();
    assert!(JointKg::new(&m, &bad).is_err());
}
