//! Angle loss, InfoNCE and the pose-weighted contrastive loss, each with its
//! exact gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{encode_angle, normalized_distance, AngleHeadOutput, AngleKind, PoseLabel, RotationMatrix};

/// Unit-norm tolerance for contrastive embeddings.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Denominators below this are treated as vanished.
pub const MIN_DENOMINATOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleLossConfig {
    /// Weight of the offset regression term.
    pub lambda: f64,
    pub smooth_l1_threshold: f64,
}

impl Default for AngleLossConfig {
    fn default() -> Self {
        Self { lambda: 1.0, smooth_l1_threshold: 1.0 }
    }
}

impl AngleLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.smooth_l1_threshold > 0.0 && self.smooth_l1_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "smooth_l1_threshold must be > 0, got {}",
                self.smooth_l1_threshold
            )));
        }
        Ok(())
    }
}

/// How a negative's normalized pose distance `d` becomes its weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Linear,
    Sqrt,
    Square,
    /// Every negative weighs 1, ignoring pose.
    ConstantOne,
}

impl WeightMode {
    pub const ALL: [WeightMode; 4] = [WeightMode::Linear, WeightMode::Sqrt, WeightMode::Square, WeightMode::ConstantOne];

    pub fn weight(self, d: f64) -> f64 {
        match self {
            WeightMode::Linear => d,
            WeightMode::Sqrt => d.sqrt(),
            WeightMode::Square => d * d,
            WeightMode::ConstantOne => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightMode::Linear => "linear",
            WeightMode::Sqrt => "sqrt",
            WeightMode::Square => "square",
            WeightMode::ConstantOne => "constant_one",
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown weight mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    /// Temperature.
    pub tau: f64,
    pub weight_mode: WeightMode,
    /// Give the positive key weight 1 in the denominator instead of 0.
    pub include_positive_in_denominator: bool,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self { tau: 0.5, weight_mode: WeightMode::Linear, include_positive_in_denominator: false }
    }
}

impl ContrastiveConfig {
    /// Plain InfoNCE: unit weights, positive in the denominator.
    pub fn info_nce(tau: f64) -> Self {
        Self { tau, weight_mode: WeightMode::ConstantOne, include_positive_in_denominator: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TotalLossConfig {
    /// Weight of the contrastive term.
    pub kappa: f64,
}

impl Default for TotalLossConfig {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

impl TotalLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidConfig(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

/// Query and key embeddings (row-major, `n × dim`) plus the pose of each sample.
///
/// Query `i` and key `i` are two views of the same sample and share its pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastBatch {
    query: Vec<f64>,
    key: Vec<f64>,
    dim: usize,
    poses: Vec<RotationMatrix>,
}

impl ContrastBatch {
    /// Validates shapes, `n >= 2`, finiteness and unit norm of every row.
    pub fn new(query: Vec<f64>, key: Vec<f64>, dim: usize, poses: Vec<RotationMatrix>) -> Result<Self> {
        let batch = Self::new_unchecked(query, key, dim, poses)?;
        for (name, rows) in [("query", &batch.query), ("key", &batch.key)] {
            for (i, row) in rows.chunks(dim).enumerate() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !norm.is_finite() {
                    return Err(Error::NonFinite(format!("{name} embedding {i}")));
                }
                if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    return Err(Error::ShapeMismatch(format!("{name} embedding {i} has norm {norm}, expected 1")));
                }
            }
        }
        Ok(batch)
    }

    /// Like [`ContrastBatch::new`] but skips the unit-norm check, so the
    /// losses can be probed off the unit sphere (finite differences).
    pub fn new_unchecked(query: Vec<f64>, key: Vec<f64>, dim: usize, poses: Vec<RotationMatrix>) -> Result<Self> {
        let n = poses.len();
        if dim == 0 || query.len() != n * dim || key.len() != n * dim {
            return Err(Error::ShapeMismatch(format!(
                "{n} poses, dim {dim}, but {} query and {} key values",
                query.len(),
                key.len()
            )));
        }
        if n < 2 {
            return Err(Error::ShapeMismatch(format!("contrastive batch needs at least 2 samples, got {n}")));
        }
        Ok(Self { query, key, dim, poses })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn query(&self) -> &[f64] {
        &self.query
    }

    pub fn key(&self) -> &[f64] {
        &self.key
    }

    pub fn query_mut(&mut self) -> &mut [f64] {
        &mut self.query
    }

    pub fn key_mut(&mut self) -> &mut [f64] {
        &mut self.key
    }

    pub fn poses(&self) -> &[RotationMatrix] {
        &self.poses
    }

    pub fn query_row(&self, i: usize) -> &[f64] {
        &self.query[i * self.dim..(i + 1) * self.dim]
    }

    pub fn key_row(&self, i: usize) -> &[f64] {
        &self.key[i * self.dim..(i + 1) * self.dim]
    }
}

/// Gradients of a contrastive loss, laid out like the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrads {
    pub query: Vec<f64>,
    pub key: Vec<f64>,
}

impl EmbeddingGrads {
    fn zeros(batch: &ContrastBatch) -> Self {
        Self { query: vec![0.0; batch.query.len()], key: vec![0.0; batch.key.len()] }
    }
}

pub fn smooth_l1(x: f64, threshold: f64) -> f64 {
    if x.abs() < threshold {
        0.5 * x * x / threshold
    } else {
        x.abs() - 0.5 * threshold
    }
}

/// Derivative of [`smooth_l1`] with respect to `x`.
pub fn smooth_l1_grad(x: f64, threshold: f64) -> f64 {
    if x.abs() < threshold {
        x / threshold
    } else {
        x.signum()
    }
}

/// Cross-entropy on the ground-truth bin plus `lambda`-weighted smooth-L1 on
/// that bin's offset, summed over the three angles.
///
/// Returns the loss and its gradient with respect to every score and every
/// (already squashed) offset.
pub fn angle_loss(out: &AngleHeadOutput, target: &PoseLabel, cfg: &AngleLossConfig) -> Result<(f64, AngleHeadOutput)> {
    out.validate()?;
    let mut grad = AngleHeadOutput::zeros();
    let mut loss = 0.0;
    for kind in AngleKind::ALL {
        let code = encode_angle(target.angle(kind), kind);
        let slot = kind.slot(code.bin);
        let head = out.head(kind);
        let g = grad.head_mut(kind);

        let max = head.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = head.scores.iter().map(|s| (s - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - head.scores[slot];
        for (gi, s) in g.scores.iter_mut().zip(&head.scores) {
            *gi = (s - log_z).exp();
        }
        g.scores[slot] -= 1.0;

        let residual = head.offsets[slot] - code.offset;
        loss += cfg.lambda * smooth_l1(residual, cfg.smooth_l1_threshold);
        g.offsets[slot] = cfg.lambda * smooth_l1_grad(residual, cfg.smooth_l1_threshold);
    }
    Ok((loss, grad))
}

/// InfoNCE for one query: unit weights with the positive in the denominator.
pub fn info_nce(batch: &ContrastBatch, query_index: usize, tau: f64) -> Result<(f64, EmbeddingGrads)> {
    let weights = vec![1.0; batch.len()];
    weighted_nce(batch, query_index, tau, &weights)
}

/// Pose-weighted contrastive loss for one query.
///
/// Negative `k` enters the denominator with weight `g(d(R_q, R_k))`; the
/// positive gets weight 0 unless `include_positive_in_denominator` is set.
/// Weights are constants with respect to the embeddings. Unlike InfoNCE the
/// loss can be negative.
pub fn pose_nce(batch: &ContrastBatch, query_index: usize, cfg: &ContrastiveConfig) -> Result<(f64, EmbeddingGrads)> {
    let weights = pose_weights(batch, query_index, cfg);
    weighted_nce(batch, query_index, cfg.tau, &weights)
}

/// Denominator weight of every key for the given query.
pub fn pose_weights(batch: &ContrastBatch, query_index: usize, cfg: &ContrastiveConfig) -> Vec<f64> {
    let rq = &batch.poses[query_index];
    batch
        .poses
        .iter()
        .enumerate()
        .map(|(k, rk)| {
            if k == query_index {
                if cfg.include_positive_in_denominator {
                    1.0
                } else {
                    0.0
                }
            } else {
                cfg.weight_mode.weight(normalized_distance(rq, rk))
            }
        })
        .collect()
}

/// `-s⁺ + log Σ_k w_k exp(s_k)` with `s_k = f_q·f_k / τ`.
fn weighted_nce(batch: &ContrastBatch, q: usize, tau: f64, weights: &[f64]) -> Result<(f64, EmbeddingGrads)> {
    let n = batch.len();
    if q >= n {
        return Err(Error::ShapeMismatch(format!("query index {q} out of range for batch of {n}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    let fq = batch.query_row(q);
    let logits: Vec<f64> = (0..n).map(|k| dot(fq, batch.key_row(k)) / tau).collect();

    let max = logits
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateDenominator { query: q });
    }
    let scaled: Vec<f64> = logits.iter().zip(weights).map(|(&s, &w)| w * (s - max).exp()).collect();
    let sum: f64 = scaled.iter().sum();
    let log_denominator = max + sum.ln();
    if !(log_denominator >= MIN_DENOMINATOR.ln()) {
        return Err(Error::DegenerateDenominator { query: q });
    }
    let loss = log_denominator - logits[q];

    // dL/ds_k = p_k - [k = q], p_k = w_k e^{s_k} / Σ
    let mut grads = EmbeddingGrads::zeros(batch);
    let dim = batch.dim;
    let gq = &mut grads.query[q * dim..(q + 1) * dim];
    for k in 0..n {
        let mut ds = scaled[k] / sum;
        if k == q {
            ds -= 1.0;
        }
        if ds == 0.0 {
            continue;
        }
        let c = ds / tau;
        let fk = batch.key_row(k);
        for (g, v) in gq.iter_mut().zip(fk) {
            *g += c * v;
        }
        for (g, v) in grads.key[k * dim..(k + 1) * dim].iter_mut().zip(fq) {
            *g += c * v;
        }
    }
    Ok((loss, grads))
}

/// Mean of [`pose_nce`] with every sample taking the query role once.
pub fn batch_contrastive_loss(batch: &ContrastBatch, cfg: &ContrastiveConfig) -> Result<(f64, EmbeddingGrads)> {
    let n = batch.len();
    let mut total = 0.0;
    let mut grads = EmbeddingGrads::zeros(batch);
    for q in 0..n {
        let (loss, g) = pose_nce(batch, q, cfg)?;
        total += loss;
        for (acc, v) in grads.query.iter_mut().zip(&g.query) {
            *acc += v;
        }
        for (acc, v) in grads.key.iter_mut().zip(&g.key) {
            *acc += v;
        }
    }
    let scale = 1.0 / n as f64;
    grads.query.iter_mut().for_each(|g| *g *= scale);
    grads.key.iter_mut().for_each(|g| *g *= scale);
    Ok((total * scale, grads))
}

/// `angle + κ · contrastive`.
pub fn total_loss(angle_part: f64, contrastive_part: f64, cfg: &TotalLossConfig) -> f64 {
    angle_part + cfg.kappa * contrastive_part
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euler_to_matrix, AngleHeadOutput};
    use std::f64::consts::PI;

    fn pose(a: f64) -> RotationMatrix {
        euler_to_matrix(&PoseLabel::new(a, 0.0, 0.0).unwrap())
    }

    #[test]
    fn smooth_l1_closed_forms() {
        assert_eq!(smooth_l1(0.0, 1.0), 0.0);
        assert_eq!(smooth_l1(0.5, 1.0), 0.125);
        assert_eq!(smooth_l1(2.0, 1.0), 1.5);
        assert_eq!(smooth_l1(-2.0, 1.0), 1.5);
        // continuity of value and slope at the threshold
        let t = 0.7;
        assert!((smooth_l1(t - 1e-12, t) - smooth_l1(t + 1e-12, t)).abs() < 1e-11);
        assert!((smooth_l1_grad(t - 1e-12, t) - smooth_l1_grad(t + 1e-12, t)).abs() < 1e-11);
    }

    #[test]
    fn angle_loss_on_matching_head_is_pure_cross_entropy() {
        let target = PoseLabel::new(0.4, -0.3, 0.1).unwrap();
        let head = AngleHeadOutput::one_hot(&target);
        let (loss, _) = angle_loss(&head, &target, &AngleLossConfig::default()).unwrap();
        let expected: f64 = AngleKind::ALL
            .iter()
            .map(|&k| {
                let p = head.head(k).probabilities();
                -p[head.head(k).argmax()].ln()
            })
            .sum();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn angle_loss_lambda_zero_drops_regression() {
        let target = PoseLabel::new(0.4, -0.3, 0.1).unwrap();
        let mut head = AngleHeadOutput::one_hot(&target);
        head.azimuth.offsets.iter_mut().for_each(|o| *o = 0.9);
        let cfg = AngleLossConfig { lambda: 0.0, ..Default::default() };
        let (with_bad_offsets, grad) = angle_loss(&head, &target, &cfg).unwrap();
        let (clean, _) = angle_loss(&AngleHeadOutput::one_hot(&target), &target, &cfg).unwrap();
        assert_eq!(with_bad_offsets, clean);
        assert!(grad.azimuth.offsets.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn info_nce_two_sample_closed_form() {
        let batch = ContrastBatch::new(vec![1.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 2, vec![pose(0.0), pose(1.0)])
            .unwrap();
        let (loss, _) = info_nce(&batch, 0, 0.5).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-14);
    }

    #[test]
    fn info_nce_identical_keys_is_log_n() {
        let n = 5;
        let q: Vec<f64> = (0..n).flat_map(|_| [0.6, 0.8]).collect();
        let k: Vec<f64> = (0..n).flat_map(|_| [0.0, 1.0]).collect();
        let poses = (0..n).map(|i| pose(i as f64 * 0.3)).collect();
        let batch = ContrastBatch::new(q, k, 2, poses).unwrap();
        let (loss, _) = info_nce(&batch, 2, 0.5).unwrap();
        assert!((loss - (n as f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn pose_nce_hand_computed_three_sample_case() {
        // query at identity; negative 1 at Δ = π (w = 1); negative 2 at Δ = 0
        let q = vec![1.0, 0.0, 0.6, 0.8, 0.0, 1.0];
        let k = vec![0.8, 0.6, 0.0, 1.0, 1.0, 0.0];
        let poses = vec![RotationMatrix::IDENTITY, pose(-PI), RotationMatrix::IDENTITY];
        let batch = ContrastBatch::new(q, k, 2, poses).unwrap();
        let cfg = ContrastiveConfig::default();
        let (loss, _) = pose_nce(&batch, 0, &cfg).unwrap();
        let s_pos: f64 = 0.8;
        let s_neg: f64 = 0.0;
        assert!((loss - (s_neg - s_pos) / cfg.tau).abs() < 1e-14);
    }

    #[test]
    fn pose_nce_reduces_to_info_nce() {
        let q = vec![1.0, 0.0, 0.6, 0.8, 0.0, 1.0];
        let k = vec![0.8, 0.6, 0.0, 1.0, 1.0, 0.0];
        let batch = ContrastBatch::new(q, k, 2, vec![pose(0.0), pose(1.0), pose(2.0)]).unwrap();
        let cfg = ContrastiveConfig::info_nce(0.5);
        for i in 0..3 {
            let (a, ga) = pose_nce(&batch, i, &cfg).unwrap();
            let (b, gb) = info_nce(&batch, i, 0.5).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert_eq!(ga, gb);
        }
    }

    #[test]
    fn all_negatives_at_query_pose_is_degenerate() {
        let q = vec![1.0, 0.0, 0.0, 1.0];
        let k = vec![1.0, 0.0, 0.0, 1.0];
        let batch = ContrastBatch::new(q, k, 2, vec![pose(0.3), pose(0.3)]).unwrap();
        let err = pose_nce(&batch, 0, &ContrastiveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { query: 0 }));
        assert!(batch_contrastive_loss(&batch, &ContrastiveConfig::default()).is_err());
    }

    #[test]
    fn batch_validation() {
        assert!(ContrastBatch::new(vec![1.0, 0.0], vec![1.0, 0.0], 2, vec![pose(0.0)]).is_err());
        assert!(ContrastBatch::new(vec![2.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0, 0.0], 2, vec![pose(0.0), pose(1.0)])
            .is_err());
        assert!(ContrastBatch::new(vec![1.0; 3], vec![1.0; 4], 2, vec![pose(0.0), pose(1.0)]).is_err());
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(total_loss(2.0, 0.5, &TotalLossConfig { kappa: 1.0 }), 2.5);
        assert_eq!(total_loss(2.0, 0.5, &TotalLossConfig { kappa: 0.0 }), 2.0);
    }

    #[test]
    fn weight_mode_parsing() {
        for m in WeightMode::ALL {
            assert_eq!(m.name().parse::<WeightMode>().unwrap(), m);
        }
        assert!("cubic".parse::<WeightMode>().is_err());
    }
}
