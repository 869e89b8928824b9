//! Runs the cross-check matrix and prints one line per check.
//!
//!     cargo run --release --example verify_matrix -- [tiny|default]

use std::time::Instant;

use hsps::verify::{run, MatrixSize, VerifyOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let size: MatrixSize = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("tiny")
        .parse()?;
    let start = Instant::now();
    let report = run(&VerifyOptions {
        size,
        ..Default::default()
    })?;
    for c in &report.checks {
        println!(
            "{:<48} {:>4} configs  max {:>10.3e}  tol {:>8.1e}  {}",
            c.name,
            c.configs,
            c.max_deviation,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
        if !c.passed {
            println!("    worst: {}", c.worst);
        }
    }
    println!("{size} matrix in {:.2?}", start.elapsed());
    if !report.passed() {
        std::process::exit(3);
    }
    Ok(())
}
