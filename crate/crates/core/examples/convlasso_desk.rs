//! Learns a small convolutional dictionary on a synthetic texture and writes
//! the filters as a mosaic.
//!
//! `cargo run --release --example convlasso_desk [out_dir]`

use std::path::PathBuf;

use ipalm::config::{RunConfig, ScheduleChoice};
use ipalm::io::{filter_mosaic, write_pgm, write_sparsity_report};
use ipalm::problems::{ConvLassoParams, ConvLassoProblem};
use ipalm::solver::run;
use ipalm::synth::texture_image;

fn main() -> ipalm::error::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "convlasso_out".into()));
    std::fs::create_dir_all(&out)?;

    let problem = ConvLassoProblem::new(
        texture_image(32, 32, 1),
        ConvLassoParams {
            filters: 8,
            size: 5,
            lambda: 0.2,
            sigma: None,
        },
    )?;
    let cfg = RunConfig {
        schedule: ScheduleChoice::Dynamic,
        iters: 500,
        seed: 1,
        ..Default::default()
    };
    let sol = run(&problem, &cfg)?;
    let first = sol.trace.rows[0].objective;
    let last = sol.trace.last().unwrap().objective;
    println!("objective {first:.4} -> {last:.4} in {} iterations", sol.trace.iterations());

    let (filters, coeffs) = problem.full_stacks(&sol.x)?;
    write_pgm(&out.join("dictionary.pgm"), filter_mosaic(filters.view()).view())?;
    write_sparsity_report(&out.join("sparsity.csv"), coeffs.view())?;
    for (j, v) in coeffs.outer_iter().enumerate().skip(1) {
        let nnz = v.iter().filter(|x| **x != 0.0).count();
        println!("filter {j}: {:5.1}% nonzero coefficients", 100.0 * nnz as f64 / v.len() as f64);
    }
    Ok(())
}
