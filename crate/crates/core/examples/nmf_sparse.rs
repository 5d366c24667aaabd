//! Sparse NMF on a synthetic instance with a planted sparse basis.
//!
//! `cargo run --release --example nmf_sparse`

use ndarray::Ix2;

use ipalm::config::{RunConfig, ScheduleChoice};
use ipalm::problems::NmfProblem;
use ipalm::solver::run;
use ipalm::synth::{column_nnz, nmf_instance};

fn main() -> ipalm::error::Result<()> {
    let inst = nmf_instance(40, 60, 4, 5, 3)?;
    let problem = NmfProblem::new(inst.a.clone(), 4, 5)?;
    let cfg = RunConfig {
        schedule: ScheduleChoice::StaticConvex,
        iters: 3000,
        tol: 1e-10,
        seed: 3,
        ..Default::default()
    }
    .with_inertia(0.4);
    let sol = run(&problem, &cfg)?;

    let b = sol.x.block(0).view().into_dimensionality::<Ix2>().unwrap().to_owned();
    let c = sol.x.block(1).view().into_dimensionality::<Ix2>().unwrap().to_owned();
    let residual = (&inst.a - &b.dot(&c)).mapv(|v| v * v).sum().sqrt();
    let scale = inst.a.mapv(|v| v * v).sum().sqrt();
    println!("iterations      {}", sol.trace.iterations());
    println!("relative error  {:.3e}", residual / scale);
    println!("nonzeros per basis column {:?} (limit 5)", column_nnz(&b));
    Ok(())
}
