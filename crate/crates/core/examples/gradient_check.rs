//! Runs the finite-difference gradient suite and prints one line per check.
//!
//! cargo run --release --example gradient_check -- [seed]

use posecontrast::gradcheck::{run_gradcheck, GradcheckConfig};

fn main() -> posecontrast::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let start = std::time::Instant::now();
    let report = run_gradcheck(&GradcheckConfig { seed, ..Default::default() })?;
    println!("{report}");
    println!("elapsed: {:.2}s", start.elapsed().as_secs_f64());
    Ok(())
}
