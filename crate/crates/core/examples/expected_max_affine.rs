//! Exact `E[max_i (a_i + b_i Z)]` for a standard normal `Z`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use twostage_bo::acquisition::{expected_max_affine, AffineFamily};

fn main() -> twostage_bo::Result<()> {
    // E|Z| = sqrt(2/π).
    let abs = AffineFamily::new(vec![0.0, 0.0], vec![1.0, -1.0])?;
    println!("E|Z|         {:.12} (sqrt(2/pi) = {:.12})", expected_max_affine(&abs), (2.0 / std::f64::consts::PI).sqrt());

    let a = vec![0.3, -0.1, 0.0, 0.5, 0.2];
    let b = vec![-1.2, 0.4, 1.0, 0.0, 0.4];
    let fam = AffineFamily::new(a.clone(), b.clone())?;
    let exact = expected_max_affine(&fam);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 200_000;
    let mc = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            a.iter().zip(&b).map(|(ai, bi)| ai + bi * z).fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / n as f64;
    println!("five lines   exact {exact:.6}, Monte Carlo {mc:.6}");
    Ok(())
}
