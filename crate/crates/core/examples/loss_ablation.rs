//! Compares the angle loss alone, angle + PoseNCE and angle + InfoNCE on the
//! default synthetic benchmark over several seeds, then fine-tunes the
//! PoseNCE model on 10 shots of each unseen class.
//!
//! cargo run --release --example loss_ablation -- [num_seeds] [epochs] [first_seed]

use posecontrast::losses::{ContrastiveConfig, WeightMode};
use posecontrast::pipeline::{evaluate, finetune_fewshot, lower_median, train, ClassFilter, EvalOptions, TrainConfig};
use posecontrast::synthdata::{generate_dataset, RendererConfig, Split, SplitSpec};

fn main() -> posecontrast::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(15);
    let first: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let variants: [(&str, f64, ContrastiveConfig); 3] = [
        ("angle only", 0.0, ContrastiveConfig::default()),
        ("angle + PoseNCE(linear)", 1.0, ContrastiveConfig::default()),
        (
            "angle + InfoNCE",
            1.0,
            ContrastiveConfig { weight_mode: WeightMode::ConstantOne, include_positive_in_denominator: true, tau: 0.5 },
        ),
    ];
    let mut mederr = vec![Vec::new(); variants.len()];
    let (mut before, mut after) = (Vec::new(), Vec::new());
    let opts = EvalOptions::default();

    for seed in first..first + seeds {
        let renderer = RendererConfig { master_seed: seed, ..Default::default() };
        let split = SplitSpec { support_per_unseen: 10, ..Default::default() };
        let dataset = generate_dataset(&renderer, &split)?;
        for (v, (name, kappa, contrastive)) in variants.iter().enumerate() {
            let mut cfg = TrainConfig { epochs, seed, contrastive: *contrastive, ..Default::default() };
            cfg.total.kappa = *kappa;
            let params = train(&dataset, &cfg)?.params;
            let unseen = evaluate(&params, &dataset, Split::Val, &ClassFilter::Unseen, opts)?;
            let seen = evaluate(&params, &dataset, Split::Val, &ClassFilter::Seen, opts)?;
            println!(
                "seed {seed} {name:<24} seen Acc30={:.3} MedErr={:6.2}  unseen Acc30={:.3} MedErr={:6.2}",
                seen.mean_acc30, seen.mean_mederr_deg, unseen.mean_acc30, unseen.mean_mederr_deg
            );
            mederr[v].push(unseen.mean_mederr_deg);
            if v == 1 {
                let tuned = finetune_fewshot(&params, &dataset, 10, &split.unseen_classes, &cfg)?.params;
                let t = evaluate(&tuned, &dataset, Split::Val, &ClassFilter::Unseen, opts)?;
                println!("seed {seed} {:<24} unseen Acc30 {:.3} -> {:.3}", "10-shot fine-tune", unseen.mean_acc30, t.mean_acc30);
                before.push(unseen.mean_acc30);
                after.push(t.mean_acc30);
            }
        }
    }
    println!("median unseen MedErr over {seeds} seeds:");
    for ((name, ..), errs) in variants.iter().zip(&mederr) {
        println!("  {name:<24} {:.2}°", lower_median(errs));
    }
    println!("median unseen Acc30: no-shot {:.3}, 10-shot {:.3}", lower_median(&before), lower_median(&after));
    Ok(())
}
