//! Vibration isolation of an optical table: the transmissibility ratio and
//! the normalized problem built on it.

use twostage_bo::problems::{optical_table_ratio, Problem, ProblemSpec, TOTAL_MASS};

fn main() -> twostage_bo::Result<()> {
    // Spring stiffness in N/m, damping in N·s/m, excitation in rad/s.
    println!("   f [Hz]   ratio (k=31e3, c=5e3)");
    for hz in [1.0, 3.0, 10.0, 30.0, 100.0] {
        let omega = 2.0 * std::f64::consts::PI * hz;
        println!("{hz:8.1}   {:.5}", optical_table_ratio(31e3, 5e3, omega, TOTAL_MASS));
    }

    let problem = Problem::build(&ProblemSpec::new("optical-table"), 0)?;
    let d = problem.dims();
    println!("dims x={} y={} u={}, first-step design {:?}", d.x, d.y, d.u, problem.x_step1());
    let q = [0.5, 0.5, 0.5];
    println!("objective at the centre {:.5} (physical x {:?})", problem.evaluate(&q), problem.physical_x(&q[..1]));
    Ok(())
}
