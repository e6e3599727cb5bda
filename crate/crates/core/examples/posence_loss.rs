//! Evaluates PoseNCE under each weight mode next to InfoNCE on one random
//! batch, and shows that a negative sharing the query's pose has no effect.
//!
//! cargo run --example posence_loss -- [seed]

use posecontrast::gradcheck::{random_contrast_batch, random_unit_vector};
use posecontrast::losses::{info_nce, pose_nce, pose_weights, ContrastBatch, ContrastiveConfig, WeightMode};
use posecontrast::rng;

fn main() -> posecontrast::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let mut r = rng::stream(seed, "example/posence", 0);
    let (n, dim) = (8, 16);
    let batch = random_contrast_batch(&mut r, n, dim);

    println!("InfoNCE (tau 0.5): {:.6}", info_nce(&batch, 0, 0.5)?.0);
    for mode in WeightMode::ALL {
        let cfg = ContrastiveConfig { weight_mode: mode, ..Default::default() };
        let weights: Vec<String> = pose_weights(&batch, 0, &cfg).iter().map(|w| format!("{w:.2}")).collect();
        println!("PoseNCE {:<13} {:>10.6}  weights [{}]", format!("{mode:?}"), pose_nce(&batch, 0, &cfg)?.0, weights.join(" "));
    }
    let reduced = ContrastiveConfig { weight_mode: WeightMode::ConstantOne, include_positive_in_denominator: true, tau: 0.5 };
    println!("PoseNCE constant_one + positive: {:.6}", pose_nce(&batch, 0, &reduced)?.0);

    let mut query = batch.query().to_vec();
    let mut key = batch.key().to_vec();
    let mut poses = batch.poses().to_vec();
    query.extend(random_unit_vector(&mut r, dim));
    key.extend(random_unit_vector(&mut r, dim));
    poses.push(poses[0]);
    let bigger = ContrastBatch::new(query, key, dim, poses)?;
    let cfg = ContrastiveConfig::default();
    println!(
        "query 0 loss with and without a same-pose negative: {:.12} / {:.12}",
        pose_nce(&batch, 0, &cfg)?.0,
        pose_nce(&bigger, 0, &cfg)?.0
    );
    Ok(())
}
