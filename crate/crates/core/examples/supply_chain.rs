//! Soybean supply chain: the simulated cost, the exhaustive hindsight
//! optimum and the normalized encoding used by the optimizers.

use twostage_bo::problems::{optimal_expected_cost, supply_chain_cost, Problem, ProblemSpec, SupplyChainSpace, SupplyDecision};

fn main() -> twostage_bo::Result<()> {
    let demand = [150.0; 4];
    for (x, y1, s, big_s) in [(0.0, 0.0, 100.0, 500.0), (2000.0, 40.0, 100.0, 300.0), (5000.0, 250.0, 400.0, 500.0)] {
        println!("x={x:5} y1={y1:4} (s,S)=({s},{big_s})  cost {:.1}", supply_chain_cost(x, y1, s, big_s, &demand)?);
    }

    let problem = Problem::build(&ProblemSpec::new("supply-chain"), 0)?;
    // Scenarios are stored normalized; the simulator wants units of demand.
    let scenarios: Vec<Vec<f64>> =
        problem.regret_scenarios().iter().map(|u| u.iter().map(|v| SupplyChainSpace::raw_u(*v)).collect()).collect();
    let (x_star, cost) = optimal_expected_cost(&scenarios);
    println!("{} demand scenarios; best soy contract {x_star} with expected cost {cost:.1}", scenarios.len());

    let d = SupplyDecision { x: 2000, y1: 40, s: 100, big_s: 300 };
    let q = SupplyChainSpace::normalize(&d, &demand);
    println!("reference value {:.1}", problem.reference().value);
    println!("normalized {:.3?}, feasible {}, value {:.1}", q, problem.is_feasible(&q), problem.evaluate(&q));
    Ok(())
}
