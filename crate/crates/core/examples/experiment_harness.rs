//! A tiny benchmark: run two strategies over three replicates, summarize
//! and plot. Re-running skips cells already on disk.

use twostage_bo::driver::Strategy;
use twostage_bo::experiment::{plot_regret, read_results, run_experiment, summarize, write_summary_file, ExperimentConfig, PlotStyle};
use twostage_bo::problems::ProblemSpec;

fn main() -> twostage_bo::Result<()> {
    let mut cfg = ExperimentConfig::new(ProblemSpec::new("gp-short-u"), vec![Strategy::AlternatingKg, Strategy::JointRandom])?;
    cfg.replicates = 3;
    cfg.budget.n_init = 4;
    cfg.budget.n_total = 10;
    cfg.budget.checkpoint_every = 2;
    cfg.output_dir = "harness-demo".into();

    let root = std::env::temp_dir().join("twostage-bo-examples");
    let outcome = run_experiment(&cfg, 1, &root)?;
    println!("computed {} cells into {}", outcome.computed.len(), outcome.output_dir.display());

    let summary = summarize(&read_results(&outcome.results_path)?);
    write_summary_file(&outcome.output_dir.join("summary.csv"), &summary)?;
    for row in summary.iter().filter(|r| r.evaluations_used == 10) {
        println!("{:5} final regret {:.4} ± {:.4}", row.strategy, row.mean, row.se);
    }
    let plot = outcome.output_dir.join("regret.svg");
    plot_regret(&summary, &plot, &PlotStyle { log_y: true, ..PlotStyle::default() })?;
    println!("plot written to {}", plot.display());
    Ok(())
}
