//! Objective values at fixed iteration counts for several inertial settings,
//! run in parallel.
//!
//! `cargo run --release --example schedule_sweep`

use ipalm::config::RunConfig;
use ipalm::harness::{checkpoint_values, parse_grid, run_sweep, write_checkpoint_table};
use ipalm::problems::NmfProblem;
use ipalm::synth::nmf_instance;

fn main() -> ipalm::error::Result<()> {
    let inst = nmf_instance(30, 40, 3, 4, 0)?;
    let problem = NmfProblem::new(inst.a, 3, 4)?;
    let checkpoints = [10, 50, 200, 1000];
    let base = RunConfig {
        iters: 1000,
        tol: 0.0,
        jobs: 4,
        ..Default::default()
    };
    let grid = parse_grid("0,0.2,0.4,0.2/0.6,dynamic")?;
    let cells = run_sweep(&problem, &base, &grid)?;
    let rows: Vec<_> = cells
        .iter()
        .map(|cell| {
            let values = match &cell.solution {
                Ok(sol) => checkpoint_values(&sol.trace, &checkpoints),
                Err(e) => {
                    eprintln!("{}: {e}", cell.setting);
                    vec![None; checkpoints.len()]
                }
            };
            (cell.setting.to_string(), values, cell.seconds)
        })
        .collect();
    write_checkpoint_table(std::io::stdout().lock(), &checkpoints, &rows)?;
    Ok(())
}
