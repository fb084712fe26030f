//! Scrambled Sobol' points, normal qMC draws and Latin hypercube designs.
//!
//! ```text
//! cargo run --example qmc_designs
//! ```

use twostage_bo::qmc::{latin_hypercube, normal_sobol, sobol, SobolSequence};

fn main() -> twostage_bo::Result<()> {
    let plain = sobol(2, 8, 0, false)?;
    println!("unscrambled Sobol' (2-d, first 8 points):");
    for row in plain.iter_rows() {
        println!("  {:.4} {:.4}", row[0], row[1]);
    }

    // Scrambling keeps the stratification but randomizes the point set.
    let scrambled = sobol(2, 1024, 7, true)?;
    let mean: f64 = scrambled.column(0).iter().sum::<f64>() / 1024.0;
    println!("scrambled column mean over 1024 points: {mean:.6}");

    // A stream continues where it left off.
    let mut stream = SobolSequence::new(3, 11, true)?;
    let first = stream.take_matrix(4);
    let next = stream.take_matrix(4);
    println!("stream rows 0 and 4: {:?} {:?}", first.row(0), next.row(0));

    let z = normal_sobol(1, 4096, 3, true)?;
    let m = z.values().iter().sum::<f64>() / 4096.0;
    let v = z.values().iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4095.0;
    println!("normal qMC: mean {m:+.5}, variance {v:.5}");

    let lhs = latin_hypercube(3, 5, 1)?;
    println!("Latin hypercube, one point per fifth in each column:");
    for row in lhs.iter_rows() {
        println!("  {:?}", row.iter().map(|x| (x * 5.0).floor() as u8).collect::<Vec<_>>());
    }
    Ok(())
}
