//! Sweeps the contrastive temperature and writes the results as CSV.
//!
//! cargo run --release --example temperature_sweep -- [epochs] [out_csv]

use posecontrast::pipeline::{sweep, sweep_csv, write_bytes, EvalOptions, TrainConfig};
use posecontrast::synthdata::{generate_dataset, RendererConfig, SplitSpec};

fn main() -> posecontrast::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let out = args.next().unwrap_or_else(|| "target/temperature_sweep.csv".into());

    let dataset = generate_dataset(&RendererConfig::default(), &SplitSpec::default())?;
    let base = TrainConfig { epochs, ..Default::default() };
    let values: Vec<String> = ["0.05", "0.1", "0.5", "1.0"].iter().map(|s| s.to_string()).collect();
    let rows = sweep(&dataset, "tau", &values, &base, EvalOptions::default())?;
    for row in &rows {
        for (scope, report) in row.scopes() {
            println!(
                "tau={:<5} {scope:<7} Acc30 {:.3}  MedErr {:6.2}",
                row.value, report.mean_acc30, report.mean_mederr_deg
            );
        }
    }
    write_bytes(std::path::Path::new(&out), &sweep_csv(&rows, None)?)?;
    println!("wrote {out}");
    Ok(())
}
