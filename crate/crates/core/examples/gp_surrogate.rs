//! Fit a Matérn-5/2 surrogate by MAP and inspect its posterior.
//!
//! The fantasy mean after a hypothetical observation at `x̃` is affine in
//! the standard-normal draw `z`; conditioning on the same observation gives
//! the same mean.

use twostage_bo::gp::{fit_map, Dataset, FitOptions, Priors, SurrogateModel};

fn main() -> twostage_bo::Result<()> {
    let f = |x: f64| (6.0 * x).sin() + 0.3 * x;
    let xs = [0.05, 0.2, 0.35, 0.6, 0.75, 0.95];
    let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let data = Dataset::new(inputs, xs.iter().map(|&x| f(x)).collect(), 1)?;

    let fit = fit_map(&data, &Priors::default(), &FitOptions::default())?;
    let hp = &fit.hyperparameters;
    println!(
        "MAP: lengthscale {:.3}, outputscale {:.3}, noise {:.2e} (log posterior {:.2})",
        hp.lengthscales[0], hp.outputscale, hp.noise_variance, fit.log_posterior
    );
    let model = SurrogateModel::new(&data, hp.clone())?;

    println!("   x    truth    mean      sd");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let sd = model.posterior_variance(&[x]).sqrt();
        println!("{x:4.1} {:8.3} {:8.3} {sd:7.3}", f(x), model.posterior_mean(&[x]));
    }

    let xt = [0.48];
    let z = 1.5;
    let queries = vec![vec![0.4], vec![0.5]];
    let fantasy = model.fantasy_mean(&xt, z, &queries)?;
    let t = model.transform();
    let sd = ((model.posterior_variance(&xt) / t.scale.powi(2)) + model.effective_noise()).sqrt() * t.scale;
    let refit = model.condition_on(xt.to_vec(), model.posterior_mean(&xt) + z * sd)?;
    for (q, m) in queries.iter().zip(&fantasy) {
        println!("fantasy mean at {:.1}: {m:.6}, refit: {:.6}", q[0], refit.posterior_mean(q));
    }
    Ok(())
}
