//! PALM (no inertia) against the inertial variants on the same starting
//! point, reporting how many iterations each needs to reach a target value.
//!
//! `cargo run --release --example palm_vs_ipalm`

use ipalm::blockmodel::Problem;
use ipalm::config::{RunConfig, ScheduleChoice};
use ipalm::problems::NmfProblem;
use ipalm::solver::run_from;
use ipalm::synth::nmf_instance;

fn main() -> ipalm::error::Result<()> {
    let inst = nmf_instance(50, 80, 5, 10, 11)?;
    let problem = NmfProblem::new(inst.a, 5, 10)?;
    let x0 = problem.initial_point(11)?;
    let target = 1e-12 * problem.eval_objective(&x0);

    let settings = [
        ("PALM", ScheduleChoice::StaticNonconvex, 0.0),
        ("static-nc 0.3", ScheduleChoice::StaticNonconvex, 0.3),
        ("static-c 0.45", ScheduleChoice::StaticConvex, 0.45),
        ("dynamic", ScheduleChoice::Dynamic, 0.0),
    ];
    println!("target F <= {target:.3e}");
    for (label, schedule, inertia) in settings {
        let cfg = RunConfig {
            schedule,
            iters: 5000,
            tol: 0.0,
            ..Default::default()
        }
        .with_inertia(inertia);
        let sol = run_from(&problem, x0.clone(), &cfg)?;
        let hit = sol.trace.rows.iter().find(|r| r.objective <= target).map(|r| r.k);
        let last = sol.trace.last().unwrap().objective;
        match hit {
            Some(k) => println!("{label:<14} reached target at k = {k:<5} final F = {last:.3e}"),
            None => println!("{label:<14} missed target           final F = {last:.3e}"),
        }
    }
    Ok(())
}
