//! Binary checkpoint format.
//!
//! ```text
//! "PCKP"                      4 bytes
//! version                     u32 little-endian
//! header length               u32 little-endian
//! header                      UTF-8 JSON (CheckpointHeader)
//! values                      f64 LE, every tensor in header order
//! first moments               f64 LE, same order
//! second moments              f64 LE, same order
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, ModelParams, Parameter};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const SECTIONS: [&str; 3] = ["value", "first_moment", "second_moment"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub arch: Architecture,
    pub step: u64,
    pub epochs_completed: u64,
    pub seed: u64,
    /// Free-form training hyperparameters recorded alongside the weights.
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
    pub sections: Vec<String>,
}

pub fn write_checkpoint(params: &ModelParams, hyperparameters: serde_json::Value, mut out: impl Write) -> Result<()> {
    let header = CheckpointHeader {
        arch: params.arch.clone(),
        step: params.step,
        epochs_completed: params.epochs_completed,
        seed: params.seed,
        hyperparameters,
        tensors: params
            .params
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), shape: p.value.shape().to_vec() })
            .collect(),
        sections: SECTIONS.iter().map(|s| s.to_string()).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(12 + json.len() + 24 * params.num_scalars());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for section in 0..3 {
        for p in &params.params {
            let data: &[f64] = match section {
                0 => p.value.values(),
                1 => &p.first_moment,
                _ => &p.second_moment,
            };
            for v in data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out.write_all(&buf).map_err(|e| Error::io("<checkpoint>", e))
}

/// Parses a checkpoint; when `expected` is given the stored architecture
/// must match it.
pub fn read_checkpoint(mut input: impl Read, expected: Option<&Architecture>) -> Result<(ModelParams, CheckpointHeader)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io("<checkpoint>", e))?;
    let mut cursor = Cursor { bytes: &bytes, pos: 0 };

    if cursor.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad magic, not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(cursor.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let header_len = u32::from_le_bytes(cursor.take(4)?.try_into().expect("4 bytes")) as usize;
    let header: CheckpointHeader =
        serde_json::from_slice(cursor.take(header_len)?).map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.sections != SECTIONS {
        return Err(Error::Format(format!("unexpected sections {:?}", header.sections)));
    }
    if let Some(arch) = expected {
        if arch != &header.arch {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint architecture {:?} differs from expected {arch:?}",
                header.arch
            )));
        }
    }
    let layout = header.arch.parameter_layout();
    let declared: Vec<(String, Vec<usize>)> = header.tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect();
    if declared != layout {
        return Err(Error::ShapeMismatch("checkpoint tensors do not match its architecture".into()));
    }

    let mut sections: Vec<Vec<Vec<f64>>> = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut tensors = Vec::with_capacity(layout.len());
        for (_, shape) in &layout {
            let n: usize = shape.iter().product();
            let raw = cursor.take(n * 8)?;
            tensors.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
        }
        sections.push(tensors);
    }
    if cursor.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cursor.pos)));
    }
    let second = sections.pop().expect("3 sections");
    let first = sections.pop().expect("3 sections");
    let values = sections.pop().expect("3 sections");
    let params = layout
        .into_iter()
        .zip(values)
        .zip(first.into_iter().zip(second))
        .map(|(((name, shape), v), (m, s))| {
            Ok(Parameter { name, value: Tensor::new(shape, v)?, first_moment: m, second_moment: s })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = ModelParams {
        arch: header.arch.clone(),
        params,
        step: header.step,
        epochs_completed: header.epochs_completed,
        seed: header.seed,
    };
    Ok((model, header))
}

pub fn save_checkpoint(params: &ModelParams, hyperparameters: serde_json::Value, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(params, hyperparameters, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, expected: Option<&Architecture>) -> Result<(ModelParams, CheckpointHeader)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(io::BufReader::new(file), expected).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated checkpoint: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelParams {
        let arch = Architecture { input_dim: 3, encoder_hidden: vec![4], feature_dim: 5, predictor_hidden: vec![6] };
        let mut p = ModelParams::init(&arch, 11).unwrap();
        p.step = 42;
        p.epochs_completed = 3;
        for (i, param) in p.params.iter_mut().enumerate() {
            param.first_moment.iter_mut().enumerate().for_each(|(j, m)| *m = (i * 100 + j) as f64 * 1e-3);
            param.second_moment.iter_mut().enumerate().for_each(|(j, v)| *v = 1.0 / (1 + i + j) as f64);
        }
        p
    }

    #[test]
    fn roundtrip_is_exact() {
        let p = sample();
        let mut buf = Vec::new();
        write_checkpoint(&p, serde_json::json!({"lr": 1e-4}), &mut buf).unwrap();
        let (back, header) = read_checkpoint(buf.as_slice(), None).unwrap();
        assert_eq!(back, p);
        assert_eq!(header.hyperparameters["lr"], 1e-4);
        let mut again = Vec::new();
        write_checkpoint(&back, header.hyperparameters, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let mut buf = Vec::new();
        write_checkpoint(&sample(), serde_json::Value::Null, &mut buf).unwrap();
        for cut in [2, 10, buf.len() - 1] {
            assert!(matches!(read_checkpoint(&buf[..cut], None), Err(Error::Format(_))), "cut at {cut}");
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = Vec::new();
        write_checkpoint(&sample(), serde_json::Value::Null, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice(), None), Err(Error::Format(_))));
        let mut bad = buf;
        bad[4] = 9;
        assert!(matches!(read_checkpoint(bad.as_slice(), None), Err(Error::Format(_))));
    }

    #[test]
    fn architecture_mismatch() {
        let mut buf = Vec::new();
        write_checkpoint(&sample(), serde_json::Value::Null, &mut buf).unwrap();
        let other = Architecture { input_dim: 3, encoder_hidden: vec![7], feature_dim: 5, predictor_hidden: vec![6] };
        assert!(matches!(read_checkpoint(buf.as_slice(), Some(&other)), Err(Error::ShapeMismatch(_))));
    }
}
