//! Trains a PoseNCE model on the seen classes, then fine-tunes it with K
//! labelled samples of each unseen class and compares unseen-class metrics.
//!
//! cargo run --release --example fewshot_finetune -- [shots] [epochs] [seed]

use posecontrast::pipeline::{evaluate, finetune_fewshot, train, ClassFilter, EvalOptions, TrainConfig};
use posecontrast::synthdata::{generate_dataset, RendererConfig, Split, SplitSpec};

fn main() -> posecontrast::Result<()> {
    let mut args = std::env::args().skip(1);
    let shots = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(15);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let renderer = RendererConfig { master_seed: seed, ..Default::default() };
    let split = SplitSpec { support_per_unseen: shots.max(1), ..Default::default() };
    let dataset = generate_dataset(&renderer, &split)?;
    let cfg = TrainConfig { epochs, seed, ..Default::default() };
    let base = train(&dataset, &cfg)?.params;
    let opts = EvalOptions::default();
    let before = evaluate(&base, &dataset, Split::Val, &ClassFilter::Unseen, opts)?;
    print!("no-shot:\n{}", before.summary());

    let tuned = finetune_fewshot(&base, &dataset, shots, &split.unseen_classes, &cfg)?;
    println!("fine-tuned on {} samples: {}", tuned.shot_ids.len(), tuned.shot_ids.join(", "));
    let after = evaluate(&tuned.params, &dataset, Split::Val, &ClassFilter::Unseen, opts)?;
    print!("{shots}-shot:\n{}", after.summary());
    let seen = evaluate(&tuned.params, &dataset, Split::Val, &ClassFilter::Seen, opts)?;
    println!("seen classes after fine-tuning: Acc30 {:.3}, MedErr {:.2}", seen.mean_acc30, seen.mean_mederr_deg);
    Ok(())
}
