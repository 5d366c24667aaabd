//! Runs the numerical checks (proximal inequality, step-rule identities,
//! sufficient decrease, gradients) and prints a summary per check.
//!
//! `cargo run --release --example verify_battery [seed]`

use ipalm::harness::run_verify_battery;

fn main() -> ipalm::error::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let battery = run_verify_battery(seed, 1000, 10_000)?;
    for report in &battery.reports {
        let failures = report.failures().count();
        println!("{:<22} {:>5} rows  {failures} failures", report.check, report.rows.len());
        if let Some(summary) = report.rows.last() {
            println!("    {}", summary.detail);
        }
    }
    std::process::exit(if battery.passed() { 0 } else { 1 });
}
