use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AngleHeadOutput, PoseLabel};
use crate::losses::{angle_loss, batch_contrastive_loss, total_loss, AngleLossConfig, ContrastBatch, ContrastiveConfig, TotalLossConfig};
use crate::nn::{adam_step, forward, Architecture, ModelParams, OptimizerConfig, ParamGrads, Tensor};
use crate::rng;
use crate::synthdata::{batch_augment, contrast_views, AugmentationConfig, Dataset, Renderer, SampleRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub angle: AngleLossConfig,
    pub contrastive: ContrastiveConfig,
    pub total: TotalLossConfig,
    pub augment: AugmentationConfig,
    pub arch: Architecture,
    /// Epochs of few-shot fine-tuning.
    pub finetune_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            angle: AngleLossConfig::default(),
            contrastive: ContrastiveConfig::default(),
            total: TotalLossConfig::default(),
            augment: AugmentationConfig::default(),
            arch: Architecture::default(),
            finetune_epochs: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be >= 2 (the contrastive loss needs negatives)".into()));
        }
        self.optimizer.validate()?;
        self.angle.validate()?;
        self.contrastive.validate()?;
        self.total.validate()?;
        self.augment.validate()?;
        self.arch.validate()
    }

    pub fn loss_settings(&self) -> LossSettings {
        LossSettings { angle: self.angle, contrastive: self.contrastive, total: self.total }
    }
}

/// The three loss configurations that make up the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSettings {
    pub angle: AngleLossConfig,
    pub contrastive: ContrastiveConfig,
    pub total: TotalLossConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub angle: f64,
    pub contrastive: f64,
    pub total: f64,
}

/// Objective on one batch and its gradient with respect to every parameter.
///
/// The angle loss (batch mean) supervises the query view; the contrastive
/// term pairs query and key embeddings and is skipped entirely when
/// `κ = 0`.
pub fn composite_loss(
    params: &ModelParams,
    query_inputs: &Tensor,
    key_inputs: &Tensor,
    poses: &[PoseLabel],
    settings: &LossSettings,
) -> Result<(LossParts, ParamGrads)> {
    let q_pass = forward(params, query_inputs)?;
    let n = q_pass.batch_size();
    if poses.len() != n {
        return Err(Error::ShapeMismatch(format!("{} poses for batch of {n}", poses.len())));
    }
    let scale = 1.0 / n as f64;
    let mut angle = 0.0;
    let mut head_grads: Vec<AngleHeadOutput> = Vec::with_capacity(n);
    for (i, pose) in poses.iter().enumerate() {
        let (l, mut g) = angle_loss(&q_pass.head(i), pose, &settings.angle)?;
        angle += l;
        for head in [&mut g.azimuth, &mut g.elevation, &mut g.inplane] {
            head.scores.iter_mut().chain(head.offsets.iter_mut()).for_each(|v| *v *= scale);
        }
        head_grads.push(g);
    }
    angle *= scale;

    if settings.total.kappa == 0.0 {
        let grads = q_pass.backward(None, &head_grads)?;
        return Ok((LossParts { angle, contrastive: 0.0, total: angle }, grads));
    }

    let k_pass = forward(params, key_inputs)?;
    if k_pass.batch_size() != n {
        return Err(Error::ShapeMismatch("query and key views differ in batch size".into()));
    }
    let dim = params.arch.feature_dim;
    let rotations = poses.iter().map(PoseLabel::to_matrix).collect();
    let batch = ContrastBatch::new(q_pass.embeddings().to_vec(), k_pass.embeddings().to_vec(), dim, rotations)?;
    let (contrastive, mut eg) = batch_contrastive_loss(&batch, &settings.contrastive)?;
    let kappa = settings.total.kappa;
    eg.query.iter_mut().chain(eg.key.iter_mut()).for_each(|v| *v *= kappa);

    let mut grads = q_pass.backward(Some(&eg.query), &head_grads)?;
    let zero_heads = vec![AngleHeadOutput::zeros(); n];
    grads.add_assign(&k_pass.backward(Some(&eg.key), &zero_heads)?);
    let total = total_loss(angle, contrastive, &settings.total);
    Ok((LossParts { angle, contrastive, total }, grads))
}

/// Per-epoch means of the loss components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u64,
    pub steps: u64,
    pub angle_loss: f64,
    pub contrastive_loss: f64,
    pub total_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Continue from these parameters (their `epochs_completed` is honoured).
    pub resume: Option<ModelParams>,
    /// Stop once this many epochs in total are complete.
    pub stop_after_epochs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(dataset, cfg, TrainOptions::default())
}

/// Trains on the seen-class training records.
///
/// Each batch is augmented with pose-variant transforms, rendered, split
/// into two pose-invariant views and fed to [`composite_loss`]; the
/// learning rate drops by 10× once `decay_point` of all steps are done. The
/// last partial batch of an epoch is dropped. All randomness is keyed by
/// `(seed, epoch)` or `(seed, step)`, so a resumed run replays exactly.
pub fn train_with(dataset: &Dataset, cfg: &TrainConfig, options: TrainOptions) -> Result<TrainOutcome> {
    cfg.validate()?;
    let renderer = Renderer::new(&dataset.header.renderer)?;
    check_input_dim(&renderer, &cfg.arch)?;
    let records = dataset.base_train_records();
    if records.len() < cfg.batch_size {
        return Err(Error::DatasetTooSmall { available: records.len(), batch_size: cfg.batch_size });
    }
    let mut params = match options.resume {
        Some(p) => {
            if p.arch != cfg.arch {
                return Err(Error::ShapeMismatch(format!(
                    "checkpoint architecture {:?} differs from configured {:?}",
                    p.arch, cfg.arch
                )));
            }
            p
        }
        None => ModelParams::init(&cfg.arch, cfg.seed)?,
    };
    let last_epoch = options.stop_after_epochs.map_or(cfg.epochs, |s| s.min(cfg.epochs));
    let batches_per_epoch = records.len() / cfg.batch_size;
    let total_steps = (cfg.epochs * batches_per_epoch) as f64;
    let settings = cfg.loss_settings();

    let mut log = Vec::new();
    for epoch in params.epochs_completed as usize..last_epoch {
        let progress = |b: usize| (epoch * batches_per_epoch + b) as f64 / total_steps;
        let entry = run_epoch(
            &mut params,
            &renderer,
            &records,
            cfg,
            &settings,
            EpochPlan { label: "train", epoch: epoch as u64, progress: &progress },
        )?;
        params.epochs_completed = epoch as u64 + 1;
        log.push(entry);
    }
    Ok(TrainOutcome { params, log })
}

pub(crate) struct EpochPlan<'a> {
    pub label: &'a str,
    pub epoch: u64,
    /// Fraction of training completed before batch `b`.
    pub progress: &'a dyn Fn(usize) -> f64,
}

pub(crate) fn run_epoch(
    params: &mut ModelParams,
    renderer: &Renderer,
    records: &[&SampleRecord],
    cfg: &TrainConfig,
    settings: &LossSettings,
    plan: EpochPlan<'_>,
) -> Result<EpochLog> {
    let mut order: Vec<&SampleRecord> = records.to_vec();
    order.shuffle(&mut rng::stream(cfg.seed, &format!("{}/shuffle", plan.label), plan.epoch));
    let mut sums = LossParts::default();
    let mut steps = 0u64;
    let mut lr = 0.0;
    for (b, chunk) in order.chunks_exact(cfg.batch_size).enumerate() {
        let step = params.step;
        let mut aug_rng = rng::stream(cfg.seed, &format!("{}/augment", plan.label), step);
        let batch = batch_augment(renderer, chunk, &cfg.augment, &mut aug_rng)?;
        let mut view_rng = rng::stream(cfg.seed, &format!("{}/views", plan.label), step);
        let views = contrast_views(renderer, &batch, &cfg.augment, &mut view_rng)?;
        let shape = vec![batch.len(), batch.input_dim];
        let q = Tensor::new(shape.clone(), views.query)?;
        let k = Tensor::new(shape, views.key)?;
        let (parts, grads) = composite_loss(params, &q, &k, &batch.poses, settings)?;
        if !parts.total.is_finite() {
            return Err(Error::NonFiniteLoss { step, angle: parts.angle, contrastive: parts.contrastive });
        }
        let progress = (plan.progress)(b);
        lr = cfg.optimizer.effective_lr(progress);
        adam_step(params, &grads, &cfg.optimizer, progress)?;
        sums.angle += parts.angle;
        sums.contrastive += parts.contrastive;
        sums.total += parts.total;
        steps += 1;
    }
    let denom = steps.max(1) as f64;
    Ok(EpochLog {
        epoch: plan.epoch + 1,
        steps,
        angle_loss: sums.angle / denom,
        contrastive_loss: sums.contrastive / denom,
        total_loss: sums.total / denom,
        learning_rate: lr,
    })
}

pub(crate) fn check_input_dim(renderer: &Renderer, arch: &Architecture) -> Result<()> {
    if renderer.input_dim() != arch.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "dataset renders {}-dim features but the model expects {}",
            renderer.input_dim(),
            arch.input_dim
        )));
    }
    Ok(())
}
