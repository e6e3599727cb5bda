use rand::seq::SliceRandom;

use super::train::{check_input_dim, run_epoch, EpochLog, EpochPlan, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::rng;
use crate::synthdata::{Dataset, Renderer, SampleRecord, Split};

/// Picks `shots` training records per class, by seeded shuffle within each class.
pub fn select_shots<'a>(dataset: &'a Dataset, shots: usize, classes: &[usize], seed: u64) -> Result<Vec<&'a SampleRecord>> {
    let mut picked = Vec::with_capacity(shots * classes.len());
    for &class_id in classes {
        let mut pool: Vec<&SampleRecord> =
            dataset.records.iter().filter(|r| r.split == Split::Train && r.class_id == class_id).collect();
        if pool.len() < shots {
            return Err(Error::NotEnoughShots { class_id, available: pool.len(), requested: shots });
        }
        pool.shuffle(&mut rng::stream(seed, "finetune/shots", class_id as u64));
        picked.extend(pool.into_iter().take(shots));
    }
    Ok(picked)
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    /// Ids of the novel-class samples that entered fine-tuning.
    pub shot_ids: Vec<String>,
}

/// Continues training on the base training set plus `shots` labelled
/// samples per novel class, for `cfg.finetune_epochs` epochs at the decayed
/// learning rate. `shots == 0` returns the parameters unchanged.
pub fn finetune_fewshot(
    params: &ModelParams,
    dataset: &Dataset,
    shots: usize,
    novel_classes: &[usize],
    cfg: &TrainConfig,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    if params.arch != cfg.arch {
        return Err(Error::ShapeMismatch("checkpoint architecture differs from the configured one".into()));
    }
    let chosen = select_shots(dataset, shots, novel_classes, cfg.seed)?;
    let shot_ids = chosen.iter().map(|r| r.id.clone()).collect();
    let mut params = params.clone();
    if shots == 0 || novel_classes.is_empty() {
        return Ok(FinetuneOutcome { params, log: Vec::new(), shot_ids });
    }
    let renderer = Renderer::new(&dataset.header.renderer)?;
    check_input_dim(&renderer, &cfg.arch)?;

    let mut records = dataset.base_train_records();
    records.retain(|r| !novel_classes.contains(&r.class_id));
    records.extend(chosen);
    if records.len() < cfg.batch_size {
        return Err(Error::DatasetTooSmall { available: records.len(), batch_size: cfg.batch_size });
    }
    let settings = cfg.loss_settings();
    let decayed = |_: usize| 1.0;
    let mut log = Vec::with_capacity(cfg.finetune_epochs);
    for epoch in 0..cfg.finetune_epochs as u64 {
        let plan = EpochPlan { label: "finetune", epoch, progress: &decayed };
        log.push(run_epoch(&mut params, &renderer, &records, cfg, &settings, plan)?);
    }
    Ok(FinetuneOutcome { params, log, shot_ids })
}
