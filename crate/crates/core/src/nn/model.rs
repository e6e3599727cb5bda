//! Encoder MLP and pose predictor heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, TapeGrads, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{AngleHead, AngleHeadOutput, AngleKind};
use crate::rng;

/// Width of the predictor output layer: scores and offsets for each angle.
pub const HEAD_WIDTH: usize = 2 * (24 + 12 + 24);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    /// Hidden widths of the encoder, before the feature layer.
    pub encoder_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub predictor_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { input_dim: 64, encoder_hidden: vec![128], feature_dim: 128, predictor_hidden: vec![128, 64] }
    }
}

impl Architecture {
    /// Default encoder with the 800-400-200 predictor.
    pub fn with_wide_predictor() -> Self {
        Self { predictor_hidden: vec![800, 400, 200], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.input_dim, self.feature_dim].into_iter().chain(self.encoder_hidden.iter().copied());
        if all.chain(self.predictor_hidden.iter().copied()).any(|d| d == 0) {
            return Err(Error::InvalidConfig(format!("architecture has a zero-width layer: {self:?}")));
        }
        Ok(())
    }

    fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.encoder_hidden);
        dims.push(self.feature_dim);
        dims
    }

    fn predictor_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.feature_dim];
        dims.extend(&self.predictor_hidden);
        dims.push(HEAD_WIDTH);
        dims
    }

    /// `(name, shape)` of every parameter tensor, in storage order.
    pub fn parameter_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut layout = Vec::new();
        for (prefix, dims) in [("encoder", self.encoder_dims()), ("predictor", self.predictor_dims())] {
            for (i, w) in dims.windows(2).enumerate() {
                layout.push((format!("{prefix}.{i}.weight"), vec![w[0], w[1]]));
                layout.push((format!("{prefix}.{i}.bias"), vec![w[1]]));
            }
        }
        layout
    }

    fn encoder_layers(&self) -> usize {
        self.encoder_hidden.len() + 1
    }
}

/// One named parameter tensor with its adaptive-moment state.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl Parameter {
    fn new(name: String, value: Tensor) -> Self {
        let n = value.len();
        Self { name, value, first_moment: vec![0.0; n], second_moment: vec![0.0; n] }
    }
}

/// Weights, biases and optimizer state of the whole model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub params: Vec<Parameter>,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Completed training epochs (used to resume).
    pub epochs_completed: u64,
    pub seed: u64,
}

/// Gradients for every parameter tensor, aligned with [`ModelParams::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads(pub Vec<Vec<f64>>);

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self(params.params.iter().map(|p| vec![0.0; p.value.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::stream(seed, "init", 0);
        let params = arch
            .parameter_layout()
            .into_iter()
            .map(|(name, shape)| {
                let values = if shape.len() == 2 {
                    let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                    (0..shape[0] * shape[1]).map(|_| rng.random_range(-bound..=bound)).collect()
                } else {
                    vec![0.0; shape[0]]
                };
                Ok(Parameter::new(name, Tensor::new(shape, values)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self { arch: arch.clone(), params, step: 0, epochs_completed: 0, seed })
    }

    /// All weights and biases set to zero.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        let mut p = Self::init(arch, 0)?;
        for param in &mut p.params {
            param.value.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(p)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Mutable access to the `index`-th scalar across all tensors.
    pub fn scalar_mut(&mut self, mut index: usize) -> &mut f64 {
        for p in &mut self.params {
            if index < p.value.len() {
                return &mut p.value.values_mut()[index];
            }
            index -= p.value.len();
        }
        panic!("scalar index out of range")
    }

    /// Checks tensor names and shapes against the architecture.
    pub fn check_layout(&self) -> Result<()> {
        let layout = self.arch.parameter_layout();
        if layout.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter tensors, architecture needs {}",
                self.params.len(),
                layout.len()
            )));
        }
        for ((name, shape), p) in layout.iter().zip(&self.params) {
            if name != &p.name || shape.as_slice() != p.value.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {} has shape {:?}, expected {name} {shape:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Recorded forward pass of a batch, ready for [`ForwardPass::backward`].
pub struct ForwardPass {
    tape: Tape,
    param_vars: Vec<Var>,
    embeddings: Var,
    scores: [Var; 3],
    offsets: [Var; 3],
    batch: usize,
}

impl ForwardPass {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// L2-normalized encoder outputs, `batch × feature_dim`, row-major.
    pub fn embeddings(&self) -> &[f64] {
        self.tape.value(self.embeddings).values()
    }

    /// `true` for rows whose encoder output had zero norm (left unnormalized).
    pub fn zero_norm_rows(&self) -> Vec<bool> {
        self.tape.zero_norm_rows(self.embeddings).unwrap_or_default()
    }

    pub fn heads(&self) -> Vec<AngleHeadOutput> {
        (0..self.batch).map(|i| self.head(i)).collect()
    }

    pub fn head(&self, i: usize) -> AngleHeadOutput {
        let pick = |k: usize| {
            let scores = self.tape.value(self.scores[k]).row(i).to_vec();
            let offsets = self.tape.value(self.offsets[k]).row(i).to_vec();
            AngleHead { scores, offsets }
        };
        AngleHeadOutput { azimuth: pick(0), elevation: pick(1), inplane: pick(2) }
    }

    /// Parameter gradients given the loss gradients at the outputs.
    ///
    /// `embedding_grad` is `batch × feature_dim` (or `None` when the loss does
    /// not touch the embeddings); `head_grads` has one entry per sample, with
    /// offset gradients taken with respect to the squashed offsets.
    pub fn backward(&self, embedding_grad: Option<&[f64]>, head_grads: &[AngleHeadOutput]) -> Result<ParamGrads> {
        if head_grads.len() != self.batch {
            return Err(Error::ShapeMismatch(format!(
                "{} head gradients for batch of {}",
                head_grads.len(),
                self.batch
            )));
        }
        let mut score_seeds: Vec<Vec<f64>> = Vec::with_capacity(3);
        let mut offset_seeds: Vec<Vec<f64>> = Vec::with_capacity(3);
        for kind in AngleKind::ALL {
            let n = kind.num_bins();
            let mut s = Vec::with_capacity(self.batch * n);
            let mut o = Vec::with_capacity(self.batch * n);
            for g in head_grads {
                let h = g.head(kind);
                if h.scores.len() != n || h.offsets.len() != n {
                    return Err(Error::ShapeMismatch(format!("{kind:?} head gradient has wrong length")));
                }
                s.extend(&h.scores);
                o.extend(&h.offsets);
            }
            score_seeds.push(s);
            offset_seeds.push(o);
        }
        let mut seeds: Vec<(Var, &[f64])> = Vec::with_capacity(7);
        for k in 0..3 {
            seeds.push((self.scores[k], &score_seeds[k]));
            seeds.push((self.offsets[k], &offset_seeds[k]));
        }
        if let Some(g) = embedding_grad {
            seeds.push((self.embeddings, g));
        }
        let mut grads: TapeGrads = self.tape.backward(&seeds)?;
        let out = self
            .param_vars
            .iter()
            .map(|&v| grads.take(v).unwrap_or_else(|| vec![0.0; self.tape.value(v).len()]))
            .collect();
        Ok(ParamGrads(out))
    }
}

/// Runs encoder and predictor on a `batch × input_dim` matrix.
///
/// Embeddings are the encoder outputs normalized per row; the predictor
/// reads the unnormalized encoder output. Offsets are squashed into (0, 1)
/// by the logistic function.
pub fn forward(params: &ModelParams, input: &Tensor) -> Result<ForwardPass> {
    let (batch, width) = input.dims2()?;
    if width != params.arch.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {width} columns, model expects {}",
            params.arch.input_dim
        )));
    }
    params.check_layout()?;
    let mut tape = Tape::new();
    let param_vars: Vec<Var> = params.params.iter().map(|p| tape.leaf(p.value.clone(), true)).collect();
    let mut h = tape.leaf(input.clone(), false);

    let n_layers = param_vars.len() / 2;
    let encoder_layers = params.arch.encoder_layers();
    let mut features = h;
    for layer in 0..n_layers {
        let z = tape.matmul(h, param_vars[2 * layer])?;
        let z = tape.add_bias(z, param_vars[2 * layer + 1])?;
        let last = layer + 1 == n_layers;
        h = if last { z } else { tape.tanh(z) };
        if layer + 1 == encoder_layers {
            features = h;
        }
    }
    let embeddings = tape.normalize_rows(features)?;

    let mut scores = Vec::with_capacity(3);
    let mut offsets = Vec::with_capacity(3);
    let mut col = 0;
    for kind in AngleKind::ALL {
        let n = kind.num_bins();
        scores.push(tape.columns(h, col, n)?);
        let raw = tape.columns(h, col + n, n)?;
        offsets.push(tape.sigmoid(raw));
        col += 2 * n;
    }
    Ok(ForwardPass {
        tape,
        param_vars,
        embeddings,
        scores: [scores[0], scores[1], scores[2]],
        offsets: [offsets[0], offsets[1], offsets[2]],
        batch,
    })
}
