//! The two-step strategy: first learn the adjustable policy at a fixed
//! design, then choose the design with that policy frozen.

use twostage_bo::driver::{run, BudgetConfig, Strategy};
use twostage_bo::problems::{Problem, ProblemSpec};

fn main() -> twostage_bo::Result<()> {
    let problem = Problem::build(&ProblemSpec::new("gp-1-1-1"), 1)?;
    let mut budget = BudgetConfig::for_problem(&problem);
    budget.n_init_step1 = 5;
    budget.n_total_step1 = 10;
    budget.n_init_step2 = 5;
    budget.n_total_step2 = 10;
    budget.checkpoint_every = 5;

    let history = run(Strategy::TwoStepKg, &problem, &budget, 1)?;
    println!("first-step design {:?}", problem.x_step1());
    for c in &history.checkpoints {
        println!("step {} after {:2} evaluations: x = {:.3?}, regret {:.4}", c.step, c.evaluations_used, c.x, c.estimate.regret);
    }
    for w in &history.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
