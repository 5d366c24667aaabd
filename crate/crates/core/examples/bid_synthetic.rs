//! Blind deconvolution of a blurred piecewise-constant image; compares the
//! recovered kernel with the one used to blur.
//!
//! `cargo run --release --example bid_synthetic [out_dir]`

use std::path::PathBuf;

use ndarray::Ix2;

use ipalm::config::RunConfig;
use ipalm::io::{write_kernel_pgm, write_pgm};
use ipalm::problems::{BidParams, BidProblem};
use ipalm::solver::run_from;
use ipalm::synth::bid_instance;

fn main() -> ipalm::error::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bid_out".into()));
    std::fs::create_dir_all(&out)?;

    let inst = bid_instance(64, 7, 0.8, 0)?;
    let problem = BidProblem::new(
        inst.f.clone(),
        BidParams {
            kernel_shape: (7, 7),
            ..Default::default()
        },
    )?;
    let x0 = problem.default_init();
    let err = |k: &ndarray::ArrayD<f64>| -> f64 {
        k.iter().zip(inst.kernel_true.iter()).map(|(a, b)| (a - b).abs()).sum()
    };
    let before = err(x0.block(1));

    let cfg = RunConfig {
        iters: 1000,
        ..Default::default()
    }
    .with_inertia(0.4);
    let sol = run_from(&problem, x0, &cfg)?;
    let after = err(sol.x.block(1));
    println!("kernel l1 error: {before:.4} -> {after:.4e} after {} iterations", sol.trace.iterations());

    let u = sol.x.block(0).view().into_dimensionality::<Ix2>().unwrap();
    let k = sol.x.block(1).view().into_dimensionality::<Ix2>().unwrap();
    write_pgm(&out.join("observed.pgm"), inst.f.view())?;
    write_pgm(&out.join("restored.pgm"), u)?;
    write_kernel_pgm(&out.join("kernel.pgm"), k)?;
    write_kernel_pgm(&out.join("kernel_true.pgm"), inst.kernel_true.view())?;
    println!("images written to {}", out.display());
    Ok(())
}
