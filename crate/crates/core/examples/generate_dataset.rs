//! Generates a small benchmark, writes it as JSON lines and reads it back.
//!
//! cargo run --example generate_dataset -- [out_path] [seed]

use std::collections::BTreeMap;

use posecontrast::synthdata::{generate_dataset, Dataset, RendererConfig, Split, SplitSpec};

fn main() -> posecontrast::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "target/example_dataset.jsonl".into());
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let renderer = RendererConfig { master_seed: seed, ..Default::default() };
    let split = SplitSpec { train_count: 400, val_count: 100, support_per_unseen: 10, ..Default::default() };
    let dataset = generate_dataset(&renderer, &split)?;
    for w in &dataset.header.warnings {
        println!("warning: {w}");
    }
    dataset.write(std::path::Path::new(&out))?;
    let back = Dataset::read(std::path::Path::new(&out))?;
    assert_eq!(back.records, dataset.records);

    let mut counts: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    for r in &back.records {
        *counts.entry((r.class_id, r.split.name())).or_default() += 1;
    }
    println!("wrote {} records to {out}", back.records.len());
    for class in split.all_classes() {
        let train = counts.get(&(class, Split::Train.name())).unwrap_or(&0);
        let val = counts.get(&(class, Split::Val.name())).unwrap_or(&0);
        let tag = if split.is_unseen(class) { "unseen" } else { "seen" };
        println!("class {class} ({tag:<6}) group {}: train {train:>3}, val {val:>3}", renderer.geometry_group(class));
    }
    Ok(())
}
