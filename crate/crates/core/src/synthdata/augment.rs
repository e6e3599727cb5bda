//! Pose-variant augmentation at batch creation and pose-invariant jitter at
//! contrast time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::SampleRecord;
use super::renderer::{gaussian, Renderer};
use crate::error::{Error, Result};
use crate::geometry::{flip_pose, rotate_inplane, PoseLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub flip_probability: f64,
    /// In-plane rotations are drawn from ±this many degrees.
    pub rotation_range_deg: f64,
    /// Std of the additive feature noise applied to each contrastive view.
    pub pose_invariant_noise: f64,
    /// Std of the nuisance-vector perturbation applied to each contrastive view.
    pub nuisance_jitter: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self { flip_probability: 0.5, rotation_range_deg: 15.0, pose_invariant_noise: 0.02, nuisance_jitter: 0.1 }
    }
}

impl AugmentationConfig {
    /// No augmentation of any kind.
    pub fn none() -> Self {
        Self { flip_probability: 0.0, rotation_range_deg: 0.0, pose_invariant_noise: 0.0, nuisance_jitter: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidConfig(format!("flip_probability {} not in [0, 1]", self.flip_probability)));
        }
        for (name, v) in [
            ("rotation_range_deg", self.rotation_range_deg),
            ("pose_invariant_noise", self.pose_invariant_noise),
            ("nuisance_jitter", self.nuisance_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rendered batch after pose-variant augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBatch {
    /// `len × input_dim`, row-major.
    pub features: Vec<f64>,
    pub poses: Vec<PoseLabel>,
    pub class_ids: Vec<usize>,
    pub input_dim: usize,
}

impl AugmentedBatch {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }
}

/// Label of an image that was optionally flipped, then rotated by `phi`.
pub fn apply_pose_variant(pose: &PoseLabel, flip: bool, phi: f64) -> Result<PoseLabel> {
    let p = if flip { flip_pose(pose) } else { *pose };
    rotate_inplane(&p, phi)
}

/// Flips each sample with probability `flip_probability`, rotates it in
/// plane by `φ ~ U(-range, range)`, then renders the transformed pose.
pub fn batch_augment(
    renderer: &Renderer,
    records: &[&SampleRecord],
    cfg: &AugmentationConfig,
    rng: &mut impl Rng,
) -> Result<AugmentedBatch> {
    cfg.validate()?;
    let range = cfg.rotation_range_deg.to_radians();
    let mut features = Vec::with_capacity(records.len() * renderer.input_dim());
    let mut poses = Vec::with_capacity(records.len());
    for rec in records {
        let flip = rng.random::<f64>() < cfg.flip_probability;
        let phi = if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 };
        let pose = apply_pose_variant(&rec.pose, flip, phi)?;
        features.extend(renderer.render(rec.class_id, &pose, rec.nuisance_seed)?);
        poses.push(pose);
    }
    Ok(AugmentedBatch {
        features,
        poses,
        class_ids: records.iter().map(|r| r.class_id).collect(),
        input_dim: renderer.input_dim(),
    })
}

/// Query and key views of a batch, `len × input_dim` each.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastViews {
    pub query: Vec<f64>,
    pub key: Vec<f64>,
}

/// Two independently jittered copies of every sample: the nuisance vector is
/// perturbed through the class's nuisance directions and Gaussian noise is
/// added. Poses are untouched.
pub fn contrast_views(
    renderer: &Renderer,
    batch: &AugmentedBatch,
    cfg: &AugmentationConfig,
    rng: &mut impl Rng,
) -> Result<ContrastViews> {
    cfg.validate()?;
    let nuisance_dim = renderer.config().nuisance_dim;
    let mut views = [batch.features.clone(), batch.features.clone()];
    for i in 0..batch.len() {
        for view in views.iter_mut() {
            let row = &mut view[i * batch.input_dim..(i + 1) * batch.input_dim];
            if cfg.nuisance_jitter > 0.0 {
                let dz = gaussian(rng, nuisance_dim, cfg.nuisance_jitter);
                let shift = renderer.nuisance_features(batch.class_ids[i], &dz)?;
                row.iter_mut().zip(&shift).for_each(|(x, s)| *x += s);
            }
            if cfg.pose_invariant_noise > 0.0 {
                let noise = gaussian(rng, batch.input_dim, cfg.pose_invariant_noise);
                row.iter_mut().zip(&noise).for_each(|(x, n)| *x += n);
            }
        }
    }
    let [query, key] = views;
    Ok(ContrastViews { query, key })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synthdata::{generate_dataset, RendererConfig, SplitSpec};

    fn setup() -> (Renderer, crate::synthdata::Dataset) {
        let cfg = RendererConfig::default();
        let split = SplitSpec { train_count: 16, val_count: 8, ..Default::default() };
        (Renderer::new(&cfg).unwrap(), generate_dataset(&cfg, &split).unwrap())
    }

    #[test]
    fn no_augmentation_reproduces_plain_renders() {
        let (renderer, data) = setup();
        let records: Vec<_> = data.records.iter().take(6).collect();
        let out = batch_augment(&renderer, &records, &AugmentationConfig::none(), &mut rng::stream(0, "t", 0)).unwrap();
        for (i, r) in records.iter().enumerate() {
            assert_eq!(out.poses[i], r.pose);
            assert_eq!(out.row(i), renderer.render(r.class_id, &r.pose, r.nuisance_seed).unwrap().as_slice());
        }
    }

    #[test]
    fn forced_flip_negates_azimuth_and_inplane() {
        let p = PoseLabel::from_degrees(30.0, 10.0, 5.0).unwrap();
        let f = apply_pose_variant(&p, true, 0.0).unwrap();
        let [a, e, i] = f.to_degrees();
        assert!((a + 30.0).abs() < 1e-12 && (e - 10.0).abs() < 1e-12 && (i + 5.0).abs() < 1e-12);

        let (renderer, data) = setup();
        let records: Vec<_> = data.records.iter().take(4).collect();
        let cfg = AugmentationConfig { flip_probability: 1.0, ..AugmentationConfig::none() };
        let out = batch_augment(&renderer, &records, &cfg, &mut rng::stream(0, "t", 0)).unwrap();
        for (i, r) in records.iter().enumerate() {
            assert_eq!(out.poses[i], flip_pose(&r.pose));
        }
    }

    #[test]
    fn forced_rotation_shifts_inplane_only() {
        let p = PoseLabel::from_degrees(30.0, 10.0, 5.0).unwrap();
        let r = apply_pose_variant(&p, false, 10f64.to_radians()).unwrap();
        assert_eq!(r.azimuth(), p.azimuth());
        assert_eq!(r.elevation(), p.elevation());
        assert!((r.inplane() - p.inplane() - 10f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn rotations_stay_in_range() {
        let (renderer, data) = setup();
        let records: Vec<_> = data.records.iter().collect();
        let cfg = AugmentationConfig { flip_probability: 0.0, ..Default::default() };
        let out = batch_augment(&renderer, &records, &cfg, &mut rng::stream(1, "t", 0)).unwrap();
        for (p, r) in out.poses.iter().zip(&records) {
            let d = crate::geometry::wrap_angle(p.inplane() - r.pose.inplane()).unwrap();
            assert!(d.abs() <= 15f64.to_radians() + 1e-12);
        }
    }

    #[test]
    fn views_without_jitter_equal_input() {
        let (renderer, data) = setup();
        let records: Vec<_> = data.records.iter().take(5).collect();
        let batch = batch_augment(&renderer, &records, &AugmentationConfig::none(), &mut rng::stream(0, "t", 0)).unwrap();
        let v = contrast_views(&renderer, &batch, &AugmentationConfig::none(), &mut rng::stream(0, "v", 0)).unwrap();
        assert_eq!(v.query, batch.features);
        assert_eq!(v.key, batch.features);
    }

    #[test]
    fn jittered_views_differ_and_are_reproducible() {
        let (renderer, data) = setup();
        let records: Vec<_> = data.records.iter().take(5).collect();
        let batch = batch_augment(&renderer, &records, &AugmentationConfig::none(), &mut rng::stream(0, "t", 0)).unwrap();
        let cfg = AugmentationConfig { pose_invariant_noise: 0.02, ..AugmentationConfig::none() };
        let a = contrast_views(&renderer, &batch, &cfg, &mut rng::stream(3, "v", 0)).unwrap();
        let b = contrast_views(&renderer, &batch, &cfg, &mut rng::stream(3, "v", 0)).unwrap();
        assert_ne!(a.query, a.key);
        assert_ne!(a.query, batch.features);
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config() {
        let bad = AugmentationConfig { flip_probability: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AugmentationConfig { rotation_range_deg: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
