use twostage_bo::optimize::{boltzmann_indices, multistart_maximize, BoundedBox, FnObjective, OptimizeConfig};
use twostage_bo::seeding;

#[test]
fn boltzmann_inclusion_rises_with_rank() {
    // Values spread evenly over (0, 1]; candidate i has rank i.
    let values: Vec<f64> = (1..=256).map(|i| i as f64 / 256.0).collect();
    let mut counts = vec![0usize; 256];
    let mut rng = seeding::rng(42);
    for _ in 0..10_000 {
        for i in boltzmann_indices(&values, 10, &mut rng, true) {
            counts[i] += 1;
        }
    }
    assert_eq!(counts[255], 10_000, "the best candidate is always included");

    // Single ranks differ by well under the sampling noise, so compare
    // blocks of 32 consecutive ranks.
    let blocks: Vec<usize> = counts[..255].chunks(32).map(|c| c.iter().sum::<usize>() * 32 / c.len()).collect();
    for w in blocks.windows(2) {
        assert!(w[1] > w[0], "block inclusion counts not increasing: {blocks:?}");
    }
    let (lo, hi) = (counts[..32].iter().sum::<usize>() as f64, counts[223..255].iter().sum::<usize>() as f64);
    assert!(hi / lo > 2.0 && hi / lo < 3.2, "top/bottom ratio {} should be near e", hi / lo);
}

#[test]
fn boltzmann_zscore_mode_prefers_high_values() {
    let values: Vec<f64> = (0..64).map(|i| -50.0 + i as f64).collect();
    let mut counts = vec![0usize; 64];
    let mut rng = seeding::rng(3);
    for _ in 0..4000 {
        for i in boltzmann_indices(&values, 5, &mut rng, false) {
            counts[i] += 1;
        }
    }
    let low: usize = counts[..16].iter().sum();
    let high: usize = counts[47..63].iter().sum();
    assert!(high > 5 * low, "low {low}, high {high}");
}

fn branin(x1: f64, x2: f64) -> f64 {
    let (a, b, c) = (1.0, 5.1 / (4.0 * std::f64::consts::PI.powi(2)), 5.0 / std::f64::consts::PI);
    let (r, s, t) = (6.0, 10.0, 1.0 / (8.0 * std::f64::consts::PI));
    a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
}

fn branin_grad(x1: f64, x2: f64) -> [f64; 2] {
    let (b, c) = (5.1 / (4.0 * std::f64::consts::PI.powi(2)), 5.0 / std::f64::consts::PI);
    let t = 1.0 / (8.0 * std::f64::consts::PI);
    let inner = x2 - b * x1 * x1 + c * x1 - 6.0;
    [2.0 * inner * (c - 2.0 * b * x1) - 10.0 * (1.0 - t) * x1.sin(), 2.0 * inner]
}

#[test]
fn multistart_matches_dense_grid_on_branin() {
    // Negated Branin on the unit square mapped to [-5, 10] × [0, 15].
    let objective = FnObjective::new(2, |q: &[f64], g: &mut [f64]| {
        let (x1, x2) = (-5.0 + 15.0 * q[0], 15.0 * q[1]);
        let d = branin_grad(x1, x2);
        g[0] = -15.0 * d[0];
        g[1] = -15.0 * d[1];
        -branin(x1, x2)
    });

    let n = 1000;
    let mut grid_best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            grid_best = grid_best.max(-branin(-5.0 + 15.0 * a, 15.0 * b));
        }
    }

    let cfg = OptimizeConfig { nonnegative_objective: false, ..OptimizeConfig::default() };
    let mut rng = seeding::rng(7);
    let out = multistart_maximize(&objective, &BoundedBox::unit(2), &cfg, &mut rng).unwrap();
    assert!((out.value - grid_best).abs() <= 1e-3, "multistart {} vs grid {grid_best}", out.value);
    assert!(out.value >= grid_best - 1e-9);
    assert!((out.value + 0.397_887_357_729_738).abs() < 1e-6);
}
