//! Joint knowledge gradient against random search on a GP sample path
//! with one design, one adjustable and one environmental dimension.

use twostage_bo::driver::{run, BudgetConfig, Strategy};
use twostage_bo::problems::{Problem, ProblemSpec};

fn main() -> twostage_bo::Result<()> {
    let problem = Problem::build(&ProblemSpec::new("gp-1-1-1"), 0)?;
    let mut budget = BudgetConfig::for_problem(&problem);
    budget.n_init = 6;
    budget.n_total = 18;
    budget.checkpoint_every = 4;

    println!("reference value {:.4} at x = {:.3?}", problem.reference().value, problem.reference().x);
    for strategy in [Strategy::JointKg, Strategy::JointRandom] {
        let history = run(strategy, &problem, &budget, 0)?;
        println!("{strategy}:");
        for c in &history.checkpoints {
            println!("  {:3} evaluations  x = {:.3?}  regret {:.4}", c.evaluations_used, c.x, c.estimate.regret);
        }
    }
    Ok(())
}
