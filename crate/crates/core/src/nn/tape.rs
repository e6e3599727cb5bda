//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! Operations are recorded on a [`Tape`] in execution order; [`Tape::backward`]
//! walks the tape in reverse and accumulates gradients for every node that
//! depends on a leaf created with `requires_grad = true`.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`Tape::normalize_rows`].
pub const ZERO_NORM: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Columns { src: Var, start: usize },
    NormalizeRows { src: Var, norms: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// `a[b×i] · w[i×o]`.
    pub fn matmul(&mut self, a: Var, w: Var) -> Result<Var> {
        let (rows, inner) = self.value(a).dims2()?;
        let (inner_w, cols) = self.value(w).dims2()?;
        if inner != inner_w {
            return Err(Error::ShapeMismatch(format!("matmul {rows}x{inner} by {inner_w}x{cols}")));
        }
        let av = self.value(a).values();
        let wv = self.value(w).values();
        let mut out = vec![0.0; rows * cols];
        for (r, out_row) in out.chunks_mut(cols).enumerate() {
            let a_row = &av[r * inner..(r + 1) * inner];
            for (k, &x) in a_row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                axpy(x, &wv[k * cols..(k + 1) * cols], out_row);
            }
        }
        let req = self.needs(&[a, w]);
        Ok(self.push(Tensor::new(vec![rows, cols], out)?, Op::MatMul(a, w), req))
    }

    /// Adds a bias vector to every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let b = self.value(bias).values();
        if b.len() != cols {
            return Err(Error::ShapeMismatch(format!("bias of {} for {cols} columns", b.len())));
        }
        let mut out = self.value(x).values().to_vec();
        for row in out.chunks_mut(cols) {
            for (o, bi) in row.iter_mut().zip(b) {
                *o += bi;
            }
        }
        let req = self.needs(&[x, bias]);
        Ok(self.push(Tensor::new(vec![rows, cols], out)?, Op::AddBias(x, bias), req))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.map(x, f64::tanh);
        let req = self.needs(&[x]);
        self.push(t, Op::Tanh(x), req)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.map(x, logistic);
        let req = self.needs(&[x]);
        self.push(t, Op::Sigmoid(x), req)
    }

    fn map(&self, x: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let src = self.value(x);
        Tensor::new(src.shape().to_vec(), src.values().iter().map(|&v| f(v)).collect()).expect("same shape")
    }

    /// Columns `start..start + len` of a matrix.
    pub fn columns(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if start + len > cols {
            return Err(Error::ShapeMismatch(format!("columns {start}..{} of {cols}", start + len)));
        }
        let src = self.value(x).values();
        let out: Vec<f64> = (0..rows).flat_map(|r| src[r * cols + start..r * cols + start + len].iter().copied()).collect();
        let req = self.needs(&[x]);
        Ok(self.push(Tensor::new(vec![rows, len], out)?, Op::Columns { src: x, start }, req))
    }

    /// Scales every row to unit L2 norm. Rows with (numerically) zero norm
    /// pass through unchanged; [`Tape::zero_norm_rows`] reports them.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let src = self.value(x).values();
        let mut out = src.to_vec();
        let mut norms = Vec::with_capacity(rows);
        for row in out.chunks_mut(cols) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > ZERO_NORM {
                row.iter_mut().for_each(|v| *v /= norm);
                norms.push(norm);
            } else {
                norms.push(0.0);
            }
        }
        let req = self.needs(&[x]);
        Ok(self.push(Tensor::new(vec![rows, cols], out)?, Op::NormalizeRows { src: x, norms }, req))
    }

    /// Per-row flags of a [`Tape::normalize_rows`] node: `true` where the
    /// row had zero norm and was left unnormalized.
    pub fn zero_norm_rows(&self, v: Var) -> Option<Vec<bool>> {
        match &self.nodes[v.0].op {
            Op::NormalizeRows { norms, .. } => Some(norms.iter().map(|&n| n == 0.0).collect()),
            _ => None,
        }
    }

    /// Propagates the seed gradients back through the tape.
    pub fn backward(&self, seeds: &[(Var, &[f64])]) -> Result<TapeGrads> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for &(v, g) in seeds {
            if g.len() != self.value(v).len() {
                return Err(Error::ShapeMismatch(format!(
                    "seed gradient of {} values for node of {}",
                    g.len(),
                    self.value(v).len()
                )));
            }
            accumulate(&mut grads[v.0], g);
        }

        for idx in (0..self.nodes.len()).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, w) => {
                    let (rows, inner) = self.value(*a).dims2()?;
                    let cols = node.value.shape()[1];
                    let av = self.value(*a).values();
                    let wv = self.value(*w).values();
                    if self.nodes[a.0].requires_grad {
                        let mut ga = vec![0.0; rows * inner];
                        for r in 0..rows {
                            let gy_row = &gy[r * cols..(r + 1) * cols];
                            for k in 0..inner {
                                ga[r * inner + k] = dot(gy_row, &wv[k * cols..(k + 1) * cols]);
                            }
                        }
                        accumulate(&mut grads[a.0], &ga);
                    }
                    if self.nodes[w.0].requires_grad {
                        let mut gw = vec![0.0; inner * cols];
                        for r in 0..rows {
                            let gy_row = &gy[r * cols..(r + 1) * cols];
                            for k in 0..inner {
                                let x = av[r * inner + k];
                                if x != 0.0 {
                                    axpy(x, gy_row, &mut gw[k * cols..(k + 1) * cols]);
                                }
                            }
                        }
                        accumulate(&mut grads[w.0], &gw);
                    }
                }
                Op::AddBias(x, bias) => {
                    if self.nodes[bias.0].requires_grad {
                        let cols = self.value(*bias).len();
                        let mut gb = vec![0.0; cols];
                        for row in gy.chunks(cols) {
                            for (g, v) in gb.iter_mut().zip(row) {
                                *g += v;
                            }
                        }
                        accumulate(&mut grads[bias.0], &gb);
                    }
                    if self.nodes[x.0].requires_grad {
                        accumulate(&mut grads[x.0], &gy);
                    }
                }
                Op::Tanh(x) => {
                    let gx: Vec<f64> = gy.iter().zip(node.value.values()).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut grads[x.0], &gx);
                }
                Op::Sigmoid(x) => {
                    let gx: Vec<f64> = gy.iter().zip(node.value.values()).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut grads[x.0], &gx);
                }
                Op::Columns { src, start } => {
                    let (rows, cols) = self.value(*src).dims2()?;
                    let len = node.value.shape()[1];
                    let mut gx = vec![0.0; rows * cols];
                    for r in 0..rows {
                        gx[r * cols + start..r * cols + start + len].copy_from_slice(&gy[r * len..(r + 1) * len]);
                    }
                    accumulate(&mut grads[src.0], &gx);
                }
                Op::NormalizeRows { src, norms } => {
                    let cols = node.value.shape()[1];
                    let y = node.value.values();
                    let mut gx = vec![0.0; gy.len()];
                    for (r, &norm) in norms.iter().enumerate() {
                        let span = r * cols..(r + 1) * cols;
                        if norm == 0.0 {
                            gx[span.clone()].copy_from_slice(&gy[span]);
                            continue;
                        }
                        let yr = &y[span.clone()];
                        let gr = &gy[span.clone()];
                        let proj = dot(yr, gr);
                        for ((o, g), yv) in gx[span].iter_mut().zip(gr).zip(yr) {
                            *o = (g - yv * proj) / norm;
                        }
                    }
                    accumulate(&mut grads[src.0], &gx);
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(gy);
            }
        }
        Ok(TapeGrads(grads))
    }
}

/// Gradients produced by [`Tape::backward`], available for leaves.
#[derive(Debug)]
pub struct TapeGrads(Vec<Option<Vec<f64>>>);

impl TapeGrads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.0[v.0].as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.0[v.0].take()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, v)| *a += v),
        None => *slot = Some(g.to_vec()),
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with four independent accumulators (fixed order, so results
/// are reproducible bit for bit).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
