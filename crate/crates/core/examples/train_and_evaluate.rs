//! Trains an angle-only model and a PoseNCE model on the default synthetic
//! benchmark and prints validation metrics for seen and unseen classes.
//!
//! cargo run --release --example train_and_evaluate -- [epochs] [seed]

use std::time::Instant;

use posecontrast::pipeline::{evaluate, train, ClassFilter, EvalOptions, TrainConfig};
use posecontrast::synthdata::{generate_dataset, RendererConfig, Split, SplitSpec};

fn main() -> posecontrast::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(15);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let renderer = RendererConfig { master_seed: seed, ..Default::default() };
    let dataset = generate_dataset(&renderer, &SplitSpec::default())?;

    for (name, kappa) in [("angle only", 0.0), ("angle + PoseNCE", 1.0)] {
        let mut cfg = TrainConfig { epochs, seed, ..Default::default() };
        cfg.total.kappa = kappa;
        let start = Instant::now();
        let outcome = train(&dataset, &cfg)?;
        let last = outcome.log.last().expect("at least one epoch");
        println!(
            "== {name}: {epochs} epochs in {:.1}s, final angle loss {:.4}, contrastive {:.4}",
            start.elapsed().as_secs_f64(),
            last.angle_loss,
            last.contrastive_loss
        );
        for filter in [ClassFilter::Seen, ClassFilter::Unseen] {
            let report = evaluate(&outcome.params, &dataset, Split::Val, &filter, EvalOptions::default())?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}
