//! CSV output. Every file starts with a `#` comment line carrying the tool
//! version, seed and configuration hash, followed by a header row.

use std::io::Write;
use std::path::Path;

use super::eval::{ClassHistogram, EmbeddingRow, EvalReport, SampleError, SIGNED_BINS, UNSIGNED_BINS};
use super::sweep::SweepRow;
use super::train::EpochLog;
use crate::error::{Error, Result};

/// Provenance written into the comment line of every CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvMeta {
    pub seed: u64,
    pub config_hash: String,
}

impl CsvMeta {
    pub fn comment_line(&self) -> String {
        format!(
            "# tool=posecontrast version={} seed={} config_hash={}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config_hash
        )
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io { path: "<csv>".into(), source: io },
        other => Error::Format(format!("csv: {other:?}")),
    }
}

fn table(meta: Option<&CsvMeta>, header: &[String], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    if let Some(m) = meta {
        out.extend_from_slice(m.comment_line().as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("csv flush: {e}")))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Columns: `epoch,steps,angle_loss,contrastive_loss,total_loss,learning_rate`.
pub fn train_log_csv(log: &[EpochLog], meta: Option<&CsvMeta>) -> Result<Vec<u8>> {
    let rows = log
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.steps.to_string(),
                num(e.angle_loss),
                num(e.contrastive_loss),
                num(e.total_loss),
                num(e.learning_rate),
            ]
        })
        .collect();
    table(meta, &header(&["epoch", "steps", "angle_loss", "contrastive_loss", "total_loss", "learning_rate"]), rows)
}

/// Columns: `scope,class_id,count,acc30,mederr_deg`. One row per class,
/// then a `mean` and a `global` row with an empty class id.
pub fn eval_report_csv(report: &EvalReport, meta: Option<&CsvMeta>) -> Result<Vec<u8>> {
    let mut rows: Vec<Vec<String>> = report
        .per_class
        .iter()
        .map(|c| vec!["class".into(), c.class_id.to_string(), c.count.to_string(), num(c.acc30), num(c.mederr_deg)])
        .collect();
    let n = report.count.to_string();
    rows.push(vec!["mean".into(), String::new(), n.clone(), num(report.mean_acc30), num(report.mean_mederr_deg)]);
    rows.push(vec!["global".into(), String::new(), n, num(report.global_acc30), num(report.global_mederr_deg)]);
    table(meta, &header(&["scope", "class_id", "count", "acc30", "mederr_deg"]), rows)
}

/// Columns: `id,class_id,error_deg`.
pub fn sample_errors_csv(errors: &[SampleError], meta: Option<&CsvMeta>) -> Result<Vec<u8>> {
    let rows = errors.iter().map(|e| vec![e.id.clone(), e.class_id.to_string(), num(e.error.to_degrees())]).collect();
    table(meta, &header(&["id", "class_id", "error_deg"]), rows)
}

/// Long format. Columns: `class_id,kind,bin_start_deg,bin_end_deg,count`
/// where `kind` is `unsigned` (12 bins over [0, 180]) or `signed` (24 bins
/// over [-180, 180)).
pub fn histogram_csv(hists: &[ClassHistogram], meta: Option<&CsvMeta>) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for h in hists {
        for (i, c) in h.unsigned.iter().enumerate().take(UNSIGNED_BINS) {
            let lo = 15.0 * i as f64;
            rows.push(vec![h.class_id.to_string(), "unsigned".into(), num(lo), num(lo + 15.0), c.to_string()]);
        }
        for (i, c) in h.signed.iter().enumerate().take(SIGNED_BINS) {
            let lo = -180.0 + 15.0 * i as f64;
            rows.push(vec![h.class_id.to_string(), "signed".into(), num(lo), num(lo + 15.0), c.to_string()]);
        }
    }
    table(meta, &header(&["class_id", "kind", "bin_start_deg", "bin_end_deg", "count"]), rows)
}

/// Columns: `id,class_id,azimuth_deg,elevation_deg,inplane_deg,e0,e1,...`
/// with embedding values at 9 significant digits.
pub fn embeddings_csv(rows: &[EmbeddingRow], meta: Option<&CsvMeta>) -> Result<Vec<u8>> {
    let dim = rows.first().map_or(0, |r| r.embedding.len());
    let mut head = header(&["id", "class_id", "azimuth_deg", "elevation_deg", "inplane_deg"]);
    head.extend((0..dim).map(|i| format!("e{i}")));
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone(), r.class_id.to_string()];
            row.extend(r.pose_deg.iter().map(|&v| num(v)));
            row.extend(r.embedding.iter().map(|&v| format!("{v:.8e}")));
            row
        })
        .collect();
    table(meta, &head, body)
}

/// Columns: `param,value,scope,count,mean_acc30,mean_mederr_deg,global_acc30,global_mederr_deg`
/// with one row per (value, scope) and scope in `all`, `seen`, `unseen`.
pub fn sweep_csv(rows: &[SweepRow], meta: Option<&CsvMeta>) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    for r in rows {
        for (scope, rep) in r.scopes() {
            body.push(vec![
                r.param.clone(),
                r.value.clone(),
                scope.into(),
                rep.count.to_string(),
                num(rep.mean_acc30),
                num(rep.mean_mederr_deg),
                num(rep.global_acc30),
                num(rep.global_mederr_deg),
            ]);
        }
    }
    let head = header(&[
        "param",
        "value",
        "scope",
        "count",
        "mean_acc30",
        "mean_mederr_deg",
        "global_acc30",
        "global_mederr_deg",
    ]);
    table(meta, &head, body)
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
