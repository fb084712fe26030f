//! The five knowledge gradients on one surrogate, then a multistart
//! maximization of the joint one.

use twostage_bo::acquisition::{build_acquisition, AcqContext, AcqSizes, AcquisitionKind, EnvSampler};
use twostage_bo::gp::{Dataset, Hyperparameters, SurrogateModel};
use twostage_bo::optimize::{multistart_maximize, BoundedBox, OptimizeConfig};
use twostage_bo::seeding;

fn main() -> twostage_bo::Result<()> {
    // Joint space (x, y, u), one dimension each.
    let f = |p: &[f64]| (3.0 * p[0]).sin() + (4.0 * p[1] * p[2]).cos() - (p[1] - 0.5).powi(2);
    let inputs: Vec<Vec<f64>> = twostage_bo::qmc::sobol(3, 12, 5, true)?.to_rows();
    let obs = inputs.iter().map(|p| f(p)).collect();
    let data = Dataset::new(inputs, obs, 3)?;
    let model = SurrogateModel::new(&data, Hyperparameters::new(vec![0.4; 3], 1.0, 1e-4, 0.0))?;

    let sizes = AcqSizes { n_x: 10, n_y: 10, n_u: 16, n_v: 32 };
    let ctx = AcqContext::generate(1, 1, &EnvSampler::Uniform { dim: 1 }, sizes, 3)?;
    let point = [0.3, 0.6, 0.2];
    for kind in [AcquisitionKind::Joint, AcquisitionKind::AltFix, AcquisitionKind::AltAdj] {
        let acq = build_acquisition(kind, &model, &ctx)?;
        println!("{kind:?} at {point:?}: {:.5}", acq.value(&point));
    }

    // The two-step acquisitions live on their own subspaces: (y, u) for the
    // first step and (x, u) for the second.
    let drop = |i: usize| -> twostage_bo::Result<SurrogateModel> {
        let inputs = data.inputs().iter().map(|p| p.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect()).collect();
        let d = Dataset::new(inputs, data.observations().to_vec(), 2)?;
        SurrogateModel::new(&d, Hyperparameters::new(vec![0.4; 2], 1.0, 1e-4, 0.0))
    };
    let (m_yu, m_xu) = (drop(0)?, drop(1)?);
    let ctx_yu = AcqContext::generate(0, 1, &EnvSampler::Uniform { dim: 1 }, sizes, 3)?;
    let ctx_xu = AcqContext::generate(1, 0, &EnvSampler::Uniform { dim: 1 }, sizes, 3)?;
    let s1 = build_acquisition(AcquisitionKind::TwoStepStage1, &m_yu, &ctx_yu)?;
    let s2 = build_acquisition(AcquisitionKind::TwoStepStage2, &m_xu, &ctx_xu)?;
    println!("TwoStepStage1 at [0.6, 0.2]: {:.5}", s1.value(&[0.6, 0.2]));
    println!("TwoStepStage2 at [0.3, 0.2]: {:.5}", s2.value(&[0.3, 0.2]));

    let jkg = build_acquisition(AcquisitionKind::Joint, &model, &ctx)?;
    let cfg = OptimizeConfig { n_restarts: 5, n_raw: 128, ..OptimizeConfig::default() };
    let mut rng = seeding::rng(11);
    let best = multistart_maximize(jkg.as_ref(), &BoundedBox::unit(3), &cfg, &mut rng)?;
    println!("jKG maximizer {:.3?} with value {:.5}", best.point, best.value);
    Ok(())
}
