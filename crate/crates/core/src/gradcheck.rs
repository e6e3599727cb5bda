//! Finite-difference verification of every analytic gradient in the crate.
//!
//! Each check draws random instances, perturbs one input coordinate at a time
//! and compares central differences against the analytic derivative. Two
//! metrics must both stay within tolerance:
//!
//! * per instance, `‖a - n‖ / max(‖a‖, ‖n‖)` over the probed coordinates,
//!   with step [`FD_STEP`];
//! * per coordinate, `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)` with the
//!   larger step [`COORDINATE_STEP`]. At `1e-6` the cancellation error of a
//!   single difference quotient on losses of magnitude ~10 is itself about
//!   `1e-9`, which would dominate small coordinates.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{AngleHead, AngleHeadOutput, PoseLabel, RotationMatrix};
use crate::losses::{
    angle_loss, batch_contrastive_loss, info_nce, pose_nce, AngleLossConfig, ContrastBatch, ContrastiveConfig,
    EmbeddingGrads, TotalLossConfig, WeightMode,
};
use crate::nn::{Architecture, ModelParams, Tensor};
use crate::pipeline::{composite_loss, LossSettings};
use crate::rng;

/// Central-difference step for the norm-wise metric.
pub const FD_STEP: f64 = 1e-6;
/// Central-difference step for the per-coordinate metric.
pub const COORDINATE_STEP: f64 = 1e-5;
/// Magnitude below which errors are measured in absolute rather than
/// relative terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;
pub const LOSS_TOLERANCE: f64 = 1e-6;
pub const MODEL_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Random instances per check.
    pub instances: usize,
    /// Coordinates probed per whole-model instance.
    pub model_coordinates: usize,
    pub model_batch: usize,
    /// Negates every analytic gradient before comparison, so that all
    /// checks must fail. Used to verify that the harness detects bugs.
    pub inject_sign_flip: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { seed: 0, instances: 100, model_coordinates: 5, model_batch: 4, inject_sign_flip: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub coordinates: usize,
    /// Worst norm-wise relative error over instances.
    pub max_rel_error: f64,
    /// Worst per-coordinate error (relative above the floor, absolute below).
    pub max_coordinate_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<24} instances={:<4} coords={:<6} max_rel_err={:.3e} tol={:.0e} max_coord_err={:.3e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.instances,
                c.coordinates,
                c.max_rel_error,
                c.tolerance,
                c.max_coordinate_error
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Norm-wise relative error of one instance's gradient vector.
pub fn vector_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Running maxima of the comparison metrics for one check.
struct Tally {
    name: String,
    tolerance: f64,
    flip: f64,
    instances: usize,
    coordinates: usize,
    worst: f64,
    worst_coordinate: f64,
    analytic: Vec<f64>,
    numeric: Vec<f64>,
}

impl Tally {
    fn new(name: impl Into<String>, tolerance: f64, cfg: &GradcheckConfig) -> Self {
        Self {
            name: name.into(),
            tolerance,
            flip: if cfg.inject_sign_flip { -1.0 } else { 1.0 },
            instances: 0,
            coordinates: 0,
            worst: 0.0,
            worst_coordinate: 0.0,
            analytic: Vec::new(),
            numeric: Vec::new(),
        }
    }

    fn compare(&mut self, analytic: f64, (numeric, coarse): (f64, f64)) {
        let a = self.flip * analytic;
        let e = relative_error(a, coarse);
        self.worst_coordinate = if e.is_nan() { f64::INFINITY } else { self.worst_coordinate.max(e) };
        self.analytic.push(a);
        self.numeric.push(numeric);
        self.coordinates += 1;
    }

    fn end_instance(&mut self) {
        let e = vector_relative_error(&self.analytic, &self.numeric);
        self.worst = if e.is_nan() { f64::INFINITY } else { self.worst.max(e) };
        self.analytic.clear();
        self.numeric.clear();
        self.instances += 1;
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            passed: self.worst <= self.tolerance && self.worst_coordinate <= self.tolerance,
            name: self.name,
            instances: self.instances,
            coordinates: self.coordinates,
            max_rel_error: self.worst,
            max_coordinate_error: self.worst_coordinate,
            tolerance: self.tolerance,
        }
    }
}

/// Central differences of `f` along coordinate `i` of `x` with steps
/// [`FD_STEP`] and [`COORDINATE_STEP`].
fn central_difference(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<(f64, f64)> {
    let orig = x[i];
    let mut quotient = |h: f64| -> Result<f64> {
        x[i] = orig + h;
        let plus = f(x)?;
        x[i] = orig - h;
        let minus = f(x)?;
        x[i] = orig;
        Ok((plus - minus) / (2.0 * h))
    };
    Ok((quotient(FD_STEP)?, quotient(COORDINATE_STEP)?))
}

pub fn random_pose(rng: &mut impl Rng) -> PoseLabel {
    let margin = 0.05;
    PoseLabel::new(
        rng.random_range(-PI..PI),
        rng.random_range(-PI / 2.0 + margin..PI / 2.0 - margin),
        rng.random_range(-PI..PI),
    )
    .expect("in range")
}

pub fn random_unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random batch of unit embeddings with distinct random poses.
pub fn random_contrast_batch(rng: &mut impl Rng, n: usize, dim: usize) -> ContrastBatch {
    let mut q = Vec::with_capacity(n * dim);
    let mut k = Vec::with_capacity(n * dim);
    for _ in 0..n {
        q.extend(random_unit_vector(rng, dim));
        k.extend(random_unit_vector(rng, dim));
    }
    let poses: Vec<RotationMatrix> = (0..n).map(|_| random_pose(rng).to_matrix()).collect();
    ContrastBatch::new(q, k, dim, poses).expect("unit rows")
}

fn head_values(h: &AngleHeadOutput) -> Vec<f64> {
    [&h.azimuth, &h.elevation, &h.inplane].iter().flat_map(|a| a.scores.iter().chain(&a.offsets).copied()).collect()
}

fn head_from_values(template: &AngleHeadOutput, v: &[f64]) -> AngleHeadOutput {
    let mut out = template.clone();
    let mut it = v.iter().copied();
    for a in [&mut out.azimuth, &mut out.elevation, &mut out.inplane] {
        let AngleHead { scores, offsets } = a;
        scores.iter_mut().chain(offsets.iter_mut()).for_each(|x| *x = it.next().expect("length"));
    }
    out
}

fn check_angle_loss(cfg: &GradcheckConfig) -> Result<CheckResult> {
    let mut tally = Tally::new("angle_loss", LOSS_TOLERANCE, cfg);
    let mut rng = rng::stream(cfg.seed, "gradcheck/angle_loss", 0);
    for _ in 0..cfg.instances {
        let pose = random_pose(&mut rng);
        let loss_cfg = AngleLossConfig {
            lambda: rng.random_range(0.1..3.0),
            smooth_l1_threshold: rng.random_range(0.2..2.0),
        };
        let mut head = AngleHeadOutput::zeros();
        for a in [&mut head.azimuth, &mut head.elevation, &mut head.inplane] {
            a.scores.iter_mut().for_each(|s| *s = rng.random_range(-3.0..3.0));
            a.offsets.iter_mut().for_each(|o| *o = rng.random_range(0.02..0.98));
        }
        let (_, grad) = angle_loss(&head, &pose, &loss_cfg)?;
        let analytic = head_values(&grad);
        let mut x = head_values(&head);
        for (i, &a) in analytic.iter().enumerate() {
            let n = central_difference(&mut x, i, |v| Ok(angle_loss(&head_from_values(&head, v), &pose, &loss_cfg)?.0))?;
            tally.compare(a, n);
        }
        tally.end_instance();
    }
    Ok(tally.finish())
}

/// Checks a loss of a contrast batch with respect to every query and key
/// coordinate. Perturbed embeddings leave the unit sphere, which the loss
/// functions accept through `ContrastBatch::new_unchecked`.
fn check_contrastive(
    name: &str,
    cfg: &GradcheckConfig,
    loss: impl Fn(&ContrastBatch) -> Result<(f64, EmbeddingGrads)>,
) -> Result<CheckResult> {
    let mut tally = Tally::new(name, LOSS_TOLERANCE, cfg);
    let mut rng = rng::stream(cfg.seed, &format!("gradcheck/{name}"), 0);
    for _ in 0..cfg.instances {
        let n = rng.random_range(2..=8);
        let dim = rng.random_range(2..=8);
        let batch = random_contrast_batch(&mut rng, n, dim);
        let (_, grads) = loss(&batch)?;
        let mut x: Vec<f64> = batch.query().iter().chain(batch.key()).copied().collect();
        let analytic: Vec<f64> = grads.query.iter().chain(&grads.key).copied().collect();
        for (i, &a) in analytic.iter().enumerate() {
            let num = central_difference(&mut x, i, |v| {
                let (q, k) = v.split_at(n * dim);
                let b = ContrastBatch::new_unchecked(q.to_vec(), k.to_vec(), dim, batch.poses().to_vec())?;
                Ok(loss(&b)?.0)
            })?;
            tally.compare(a, num);
        }
        tally.end_instance();
    }
    Ok(tally.finish())
}

fn check_whole_model(cfg: &GradcheckConfig) -> Result<CheckResult> {
    let mut tally = Tally::new("whole_model", MODEL_TOLERANCE, cfg);
    let arch = Architecture::default();
    let settings = LossSettings {
        angle: AngleLossConfig::default(),
        contrastive: ContrastiveConfig::default(),
        total: TotalLossConfig { kappa: 1.0 },
    };
    let mut rng = rng::stream(cfg.seed, "gradcheck/whole_model", 0);
    let batch = cfg.model_batch;
    for draw in 0..cfg.instances {
        let mut params = ModelParams::init(&arch, rng::derive_seed(cfg.seed, "gradcheck/model_init", draw as u64))?;
        for p in &mut params.params {
            if p.value.shape().len() == 1 {
                p.value.values_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
            }
        }
        let input = |rng: &mut rng::StreamRng| -> Result<Tensor> {
            Tensor::new(vec![batch, arch.input_dim], (0..batch * arch.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        };
        let q = input(&mut rng)?;
        let k = input(&mut rng)?;
        let poses: Vec<PoseLabel> = (0..batch).map(|_| random_pose(&mut rng)).collect();
        let (_, grads) = composite_loss(&params, &q, &k, &poses, &settings)?;
        let flat: Vec<f64> = grads.flat().collect();
        for _ in 0..cfg.model_coordinates {
            let idx = rng.random_range(0..params.num_scalars());
            let orig = *params.scalar_mut(idx);
            let mut eval = |delta: f64| -> Result<f64> {
                *params.scalar_mut(idx) = orig + delta;
                let l = composite_loss(&params, &q, &k, &poses, &settings)?.0.total;
                *params.scalar_mut(idx) = orig;
                Ok(l)
            };
            let mut quotient = |h: f64| -> Result<f64> { Ok((eval(h)? - eval(-h)?) / (2.0 * h)) };
            let numeric = (quotient(FD_STEP)?, quotient(COORDINATE_STEP)?);
            tally.compare(flat[idx], numeric);
        }
        tally.end_instance();
    }
    Ok(tally.finish())
}

/// Runs every check and collects the results.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut checks = vec![check_angle_loss(cfg)?];
    checks.push(check_contrastive("info_nce", cfg, |b| info_nce(b, 0, 0.5))?);
    for mode in WeightMode::ALL {
        let c = ContrastiveConfig { weight_mode: mode, ..Default::default() };
        checks.push(check_contrastive(&format!("pose_nce/{}", mode.name()), cfg, move |b| pose_nce(b, 0, &c))?);
    }
    let with_positive = ContrastiveConfig { include_positive_in_denominator: true, ..Default::default() };
    checks.push(check_contrastive("pose_nce/linear+positive", cfg, move |b| pose_nce(b, 0, &with_positive))?);
    let batch_cfg = ContrastiveConfig::default();
    checks.push(check_contrastive("batch_contrastive_loss", cfg, move |b| batch_contrastive_loss(b, &batch_cfg))?);
    checks.push(check_whole_model(cfg)?);
    Ok(GradcheckReport { checks })
}
