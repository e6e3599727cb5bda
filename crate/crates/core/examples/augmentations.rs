//! Shows how pose-variant augmentation changes labels and how the two
//! contrastive views of a sample differ.
//!
//! cargo run --example augmentations

use posecontrast::geometry::geodesic_delta;
use posecontrast::rng;
use posecontrast::synthdata::{batch_augment, contrast_views, generate_dataset, AugmentationConfig, Renderer, RendererConfig, SplitSpec};

fn main() -> posecontrast::Result<()> {
    let renderer_cfg = RendererConfig::default();
    let dataset = generate_dataset(&renderer_cfg, &SplitSpec { train_count: 64, val_count: 16, ..Default::default() })?;
    let renderer = Renderer::new(&renderer_cfg)?;
    let records: Vec<_> = dataset.records.iter().take(6).collect();
    let cfg = AugmentationConfig::default();
    let mut r = rng::stream(0, "example/augment", 0);
    let batch = batch_augment(&renderer, &records, &cfg, &mut r)?;

    println!("{:<12} {:>30} {:>30} {:>9}", "id", "stored (az, el, in)", "augmented (az, el, in)", "moved");
    for (rec, pose) in records.iter().zip(&batch.poses) {
        let fmt = |p: [f64; 3]| format!("({:7.1}, {:6.1}, {:6.1})", p[0], p[1], p[2]);
        println!(
            "{:<12} {:>30} {:>30} {:>8.1}°",
            rec.id,
            fmt(rec.pose.to_degrees()),
            fmt(pose.to_degrees()),
            geodesic_delta(&rec.pose.to_matrix(), &pose.to_matrix()).to_degrees()
        );
    }

    let views = contrast_views(&renderer, &batch, &cfg, &mut r)?;
    let d = batch.input_dim;
    for i in 0..batch.len() {
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let q = &views.query[i * d..(i + 1) * d];
        let k = &views.key[i * d..(i + 1) * d];
        println!("sample {i}: |query - render| {:.3}, |query - key| {:.3}", dist(q, batch.row(i)), dist(q, k));
    }
    Ok(())
}
