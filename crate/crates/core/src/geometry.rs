//! Viewpoint geometry: Euler poses, rotation matrices, the geodesic
//! rotation distance and the bin/offset angle codec.
//!
//! Conventions used throughout the crate:
//!
//! * `R = Rz(inplane) · Rx(-elevation) · Ry(azimuth)`, with `y` the world
//!   up-axis and `z` the camera optical axis.
//! * Azimuth and in-plane angles live in the half-open interval `[-π, π)`;
//!   `π` itself wraps to `-π`. Elevation is clamped to `[-π/2, π/2]`.
//! * Angles are split into bins of width [`BIN_WIDTH`] (15°): indices
//!   `-12..=11` for azimuth/in-plane, `-6..=5` for elevation.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of one angle bin, π/12 rad.
pub const BIN_WIDTH: f64 = PI / 12.0;

/// Tolerance used to decide that a matrix is a rotation.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Distance of the elevation from ±π/2 below which Euler extraction is refused.
pub const GIMBAL_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleKind {
    Azimuth,
    Elevation,
    Inplane,
}

impl AngleKind {
    pub const ALL: [AngleKind; 3] = [AngleKind::Azimuth, AngleKind::Elevation, AngleKind::Inplane];

    /// Inclusive range of legal bin indices.
    pub fn bin_range(self) -> (i32, i32) {
        match self {
            AngleKind::Azimuth | AngleKind::Inplane => (-12, 11),
            AngleKind::Elevation => (-6, 5),
        }
    }

    pub fn num_bins(self) -> usize {
        let (lo, hi) = self.bin_range();
        (hi - lo + 1) as usize
    }

    /// Vector position of a bin index inside a head output.
    pub fn slot(self, bin: i32) -> usize {
        (bin - self.bin_range().0) as usize
    }

    pub fn bin_at(self, slot: usize) -> i32 {
        self.bin_range().0 + slot as i32
    }

    /// Brings an angle into this kind's legal range (wrap or clamp).
    pub fn normalize(self, theta: f64) -> f64 {
        match self {
            AngleKind::Azimuth | AngleKind::Inplane => wrap_unchecked(theta),
            AngleKind::Elevation => theta.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite(format!("angle {theta}")));
    }
    Ok(wrap_unchecked(theta))
}

fn wrap_unchecked(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut w = (theta + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2π for inputs just below a multiple.
    if w >= PI {
        w -= two_pi;
    }
    if w < -PI {
        w = -PI;
    }
    w
}

/// Object viewpoint as azimuth, elevation and in-plane rotation (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseLabel {
    azimuth: f64,
    elevation: f64,
    inplane: f64,
}

impl PoseLabel {
    /// Wraps azimuth/in-plane and clamps elevation.
    pub fn new(azimuth: f64, elevation: f64, inplane: f64) -> Result<Self> {
        if !(azimuth.is_finite() && elevation.is_finite() && inplane.is_finite()) {
            return Err(Error::NonFinite(format!("pose ({azimuth}, {elevation}, {inplane})")));
        }
        Ok(Self {
            azimuth: wrap_unchecked(azimuth),
            elevation: elevation.clamp(-FRAC_PI_2, FRAC_PI_2),
            inplane: wrap_unchecked(inplane),
        })
    }

    pub fn from_degrees(azimuth: f64, elevation: f64, inplane: f64) -> Result<Self> {
        Self::new(azimuth.to_radians(), elevation.to_radians(), inplane.to_radians())
    }

    pub fn identity() -> Self {
        Self { azimuth: 0.0, elevation: 0.0, inplane: 0.0 }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn inplane(&self) -> f64 {
        self.inplane
    }

    pub fn angle(&self, kind: AngleKind) -> f64 {
        match kind {
            AngleKind::Azimuth => self.azimuth,
            AngleKind::Elevation => self.elevation,
            AngleKind::Inplane => self.inplane,
        }
    }

    pub fn to_degrees(&self) -> [f64; 3] {
        [self.azimuth.to_degrees(), self.elevation.to_degrees(), self.inplane.to_degrees()]
    }

    pub fn to_matrix(&self) -> RotationMatrix {
        euler_to_matrix(self)
    }
}

/// Row-major 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix([f64; 9]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    /// Accepts the matrix only if it is orthonormal with determinant +1.
    pub fn new(m: [f64; 9]) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rotation matrix entry".into()));
        }
        let r = RotationMatrix(m);
        let gram = r.transpose().mul(&r);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(i, j) - target).abs());
            }
        }
        if worst >= ORTHONORMAL_TOLERANCE {
            return Err(Error::NotOrthonormal(format!("|MᵀM - I|∞ = {worst:e}")));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::NotOrthonormal(format!("det = {det}")));
        }
        Ok(r)
    }

    pub fn as_array(&self) -> &[f64; 9] {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row * 3 + col]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotationMatrix([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[i * 3 + j] = (0..3).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        RotationMatrix(out)
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[4] + self.0[8]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }
}

/// `Rz(inplane) · Rx(-elevation) · Ry(azimuth)`.
pub fn euler_to_matrix(p: &PoseLabel) -> RotationMatrix {
    let (sa, ca) = p.azimuth.sin_cos();
    let (sb, cb) = p.elevation.sin_cos();
    let (sg, cg) = p.inplane.sin_cos();
    RotationMatrix([
        cg * ca + sg * sb * sa,
        -sg * cb,
        cg * sa - sg * sb * ca,
        sg * ca - cg * sb * sa,
        cg * cb,
        sg * sa + cg * sb * ca,
        -cb * sa,
        -sb,
        cb * ca,
    ])
}

/// Inverse of [`euler_to_matrix`] away from gimbal lock.
pub fn matrix_to_euler(r: &RotationMatrix) -> Result<PoseLabel> {
    let elevation = (-r.get(2, 1)).clamp(-1.0, 1.0).asin();
    if elevation.abs() >= FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(Error::GimbalLock { elevation });
    }
    let azimuth = (-r.get(2, 0)).atan2(r.get(2, 2));
    let inplane = (-r.get(0, 1)).atan2(r.get(1, 1));
    PoseLabel::new(azimuth, elevation, inplane)
}

/// Rotation angle of `RqᵀRk`, in `[0, π]`.
///
/// Evaluated as `atan2(sin Δ, cos Δ)` where `cos Δ = (tr(RqᵀRk) - 1)/2`
/// (clamped to `[-1, 1]`) and `sin Δ` is half the norm of the
/// antisymmetric part. This is the same angle as
/// `arccos((tr(RqᵀRk) - 1)/2)` but stays accurate near 0 and π, where the
/// arccos derivative blows up.
pub fn geodesic_delta(rq: &RotationMatrix, rk: &RotationMatrix) -> f64 {
    let rel = rq.transpose().mul(rk);
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let ax = rel.get(2, 1) - rel.get(1, 2);
    let ay = rel.get(0, 2) - rel.get(2, 0);
    let az = rel.get(1, 0) - rel.get(0, 1);
    let sin = 0.5 * (ax * ax + ay * ay + az * az).sqrt();
    sin.atan2(cos).clamp(0.0, PI)
}

/// `geodesic_delta / π`, in `[0, 1]`.
pub fn normalized_distance(rq: &RotationMatrix, rk: &RotationMatrix) -> f64 {
    (geodesic_delta(rq, rk) / PI).clamp(0.0, 1.0)
}

/// Pose label after a horizontal image flip: azimuth and in-plane change sign.
pub fn flip_pose(p: &PoseLabel) -> PoseLabel {
    PoseLabel {
        azimuth: wrap_unchecked(-p.azimuth),
        elevation: p.elevation,
        inplane: wrap_unchecked(-p.inplane),
    }
}

/// Pose label after rotating the image by `phi` radians.
pub fn rotate_inplane(p: &PoseLabel, phi: f64) -> Result<PoseLabel> {
    if !phi.is_finite() {
        return Err(Error::NonFinite(format!("rotation angle {phi}")));
    }
    Ok(PoseLabel { inplane: wrap_unchecked(p.inplane + phi), ..*p })
}

/// An angle as a discrete bin plus a fractional offset within it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinOffsetCode {
    pub kind: AngleKind,
    pub bin: i32,
    pub offset: f64,
}

impl BinOffsetCode {
    /// `(bin + offset) · B`, brought into the legal range of the angle kind.
    pub fn decode(&self) -> f64 {
        self.kind.normalize((self.bin as f64 + self.offset) * BIN_WIDTH)
    }
}

/// Encodes an angle (wrapped or clamped first) as bin index and offset.
pub fn encode_angle(theta: f64, kind: AngleKind) -> BinOffsetCode {
    let theta = kind.normalize(theta);
    let scaled = theta / BIN_WIDTH;
    let (lo, hi) = kind.bin_range();
    let bin = (scaled.floor() as i32).clamp(lo, hi);
    let offset = (scaled - bin as f64).clamp(0.0, 1.0);
    BinOffsetCode { kind, bin, offset }
}

/// Bin scores (pre-softmax) and squashed offsets for one angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHead {
    pub scores: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl AngleHead {
    pub fn zeros(kind: AngleKind) -> Self {
        Self { scores: vec![0.0; kind.num_bins()], offsets: vec![0.0; kind.num_bins()] }
    }

    /// Softmax of the bin scores.
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.scores)
    }

    /// Highest-scoring slot; ties go to the lowest slot.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate().skip(1) {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-angle outputs of the pose predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHeadOutput {
    pub azimuth: AngleHead,
    pub elevation: AngleHead,
    pub inplane: AngleHead,
}

impl AngleHeadOutput {
    pub fn zeros() -> Self {
        Self {
            azimuth: AngleHead::zeros(AngleKind::Azimuth),
            elevation: AngleHead::zeros(AngleKind::Elevation),
            inplane: AngleHead::zeros(AngleKind::Inplane),
        }
    }

    /// One-hot scores at each angle's encoded bin, with that bin's offset set
    /// from the code and every other offset at 0.5.
    pub fn one_hot(pose: &PoseLabel) -> Self {
        let mut out = Self::zeros();
        for kind in AngleKind::ALL {
            let code = encode_angle(pose.angle(kind), kind);
            let head = out.head_mut(kind);
            head.offsets.iter_mut().for_each(|o| *o = 0.5);
            let slot = kind.slot(code.bin);
            head.scores[slot] = 1.0;
            head.offsets[slot] = code.offset;
        }
        out
    }

    pub fn head(&self, kind: AngleKind) -> &AngleHead {
        match kind {
            AngleKind::Azimuth => &self.azimuth,
            AngleKind::Elevation => &self.elevation,
            AngleKind::Inplane => &self.inplane,
        }
    }

    pub fn head_mut(&mut self, kind: AngleKind) -> &mut AngleHead {
        match kind {
            AngleKind::Azimuth => &mut self.azimuth,
            AngleKind::Elevation => &mut self.elevation,
            AngleKind::Inplane => &mut self.inplane,
        }
    }

    /// Checks head sizes and that offsets lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for kind in AngleKind::ALL {
            let head = self.head(kind);
            let n = kind.num_bins();
            if head.scores.len() != n || head.offsets.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{kind:?} head has {}/{} entries, expected {n}",
                    head.scores.len(),
                    head.offsets.len()
                )));
            }
            if head.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite(format!("{kind:?} bin score")));
            }
            if head.offsets.iter().any(|o| !(0.0..=1.0).contains(o)) {
                return Err(Error::NonFinite(format!("{kind:?} offset outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Predicted pose: argmax bin plus that bin's offset, per angle.
pub fn decode_head(out: &AngleHeadOutput) -> PoseLabel {
    let angle = |kind: AngleKind| {
        let head = out.head(kind);
        let slot = head.argmax();
        BinOffsetCode { kind, bin: kind.bin_at(slot), offset: head.offsets[slot] }.decode()
    };
    PoseLabel {
        azimuth: angle(AngleKind::Azimuth),
        elevation: angle(AngleKind::Elevation),
        inplane: angle(AngleKind::Inplane),
    }
}
