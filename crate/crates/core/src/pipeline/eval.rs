use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{decode_head, geodesic_delta, wrap_angle, AngleHeadOutput};
use crate::nn::{forward, ModelParams, Tensor};
use crate::synthdata::{Dataset, Renderer, SampleRecord, Split};

/// Geodesic error threshold for Acc30.
pub const ACC30_THRESHOLD: f64 = PI / 6.0;

const EVAL_CHUNK: usize = 256;

/// Anything that maps samples to angle-head outputs.
pub trait PosePredictor {
    fn predict(&self, renderer: &Renderer, records: &[&SampleRecord]) -> Result<Vec<AngleHeadOutput>>;
}

impl PosePredictor for ModelParams {
    fn predict(&self, renderer: &Renderer, records: &[&SampleRecord]) -> Result<Vec<AngleHeadOutput>> {
        let mut out = Vec::with_capacity(records.len());
        for chunk in records.chunks(EVAL_CHUNK) {
            let input = render_plain(renderer, chunk)?;
            out.extend(forward(self, &input)?.heads());
        }
        Ok(out)
    }
}

/// Un-augmented renders of `records`, one row each.
pub fn render_plain(renderer: &Renderer, records: &[&SampleRecord]) -> Result<Tensor> {
    let mut values = Vec::with_capacity(records.len() * renderer.input_dim());
    for r in records {
        values.extend(renderer.render(r.class_id, &r.pose, r.nuisance_seed)?);
    }
    Tensor::new(vec![records.len(), renderer.input_dim()], values)
}

/// Which samples of a split to evaluate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ClassFilter {
    #[default]
    All,
    Seen,
    Unseen,
    Only(Vec<usize>),
}

impl ClassFilter {
    fn keeps(&self, dataset: &Dataset, class_id: usize) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Seen => !dataset.header.split.is_unseen(class_id),
            ClassFilter::Unseen => dataset.header.split.is_unseen(class_id),
            ClassFilter::Only(ids) => ids.contains(&class_id),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ClassFilter::All => "all".into(),
            ClassFilter::Seen => "seen".into(),
            ClassFilter::Unseen => "unseen".into(),
            ClassFilter::Only(ids) => ids.iter().map(usize::to_string).collect::<Vec<_>>().join("+"),
        }
    }
}

impl std::str::FromStr for ClassFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ClassFilter::All),
            "seen" => Ok(ClassFilter::Seen),
            "unseen" => Ok(ClassFilter::Unseen),
            list => list
                .split(',')
                .map(|c| c.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(ClassFilter::Only)
                .map_err(|_| Error::InvalidConfig(format!("bad class selection `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Count an error as correct only when strictly below 30°.
    pub strict_acc30: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub id: String,
    pub class_id: usize,
    /// Geodesic error in radians.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: usize,
    pub count: usize,
    pub acc30: f64,
    pub mederr_deg: f64,
}

/// Acc30 and MedErr per class, averaged over classes (`mean`) and pooled
/// over instances (`global`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub classes: String,
    pub per_class: Vec<ClassMetrics>,
    pub mean_acc30: f64,
    pub mean_mederr_deg: f64,
    pub global_acc30: f64,
    pub global_mederr_deg: f64,
    pub count: usize,
    /// Per-sample errors, sorted by sample id.
    pub errors: Vec<SampleError>,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "split={} classes={} samples={}\n  mean   Acc30={:.4}  MedErr={:.2}°\n  global Acc30={:.4}  MedErr={:.2}°\n",
            self.split.name(),
            self.classes,
            self.count,
            self.mean_acc30,
            self.mean_mederr_deg,
            self.global_acc30,
            self.global_mederr_deg
        );
        for c in &self.per_class {
            s.push_str(&format!(
                "  class {:>3}: n={:<5} Acc30={:.4}  MedErr={:.2}°\n",
                c.class_id, c.count, c.acc30, c.mederr_deg
            ));
        }
        s
    }
}

/// Lower-middle element of the sorted values.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

pub fn acc30(errors: &[f64], strict: bool) -> f64 {
    let hits = errors.iter().filter(|&&e| if strict { e < ACC30_THRESHOLD } else { e <= ACC30_THRESHOLD }).count();
    hits as f64 / errors.len() as f64
}

fn selected<'a>(dataset: &'a Dataset, split: Split, filter: &ClassFilter) -> Result<Vec<&'a SampleRecord>> {
    let records: Vec<&SampleRecord> =
        dataset.records.iter().filter(|r| r.split == split && filter.keeps(dataset, r.class_id)).collect();
    if records.is_empty() {
        return Err(Error::EmptySplit(format!("{} ({})", split.name(), filter.name())));
    }
    Ok(records)
}

/// Geodesic error between ground truth and decoded prediction for every
/// selected sample.
pub fn evaluate(
    predictor: &impl PosePredictor,
    dataset: &Dataset,
    split: Split,
    filter: &ClassFilter,
    options: EvalOptions,
) -> Result<EvalReport> {
    let records = selected(dataset, split, filter)?;
    let renderer = Renderer::new(&dataset.header.renderer)?;
    let heads = predictor.predict(&renderer, &records)?;
    let mut errors: Vec<SampleError> = records
        .iter()
        .zip(&heads)
        .map(|(r, h)| SampleError {
            id: r.id.clone(),
            class_id: r.class_id,
            error: geodesic_delta(&r.pose.to_matrix(), &decode_head(h).to_matrix()),
        })
        .collect();
    errors.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(report_from_errors(split, filter.name(), errors, options))
}

/// Aggregates per-sample errors into a report.
pub fn report_from_errors(split: Split, classes: String, errors: Vec<SampleError>, options: EvalOptions) -> EvalReport {
    let mut by_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for e in &errors {
        by_class.entry(e.class_id).or_default().push(e.error);
    }
    let per_class: Vec<ClassMetrics> = by_class
        .iter()
        .map(|(&class_id, errs)| ClassMetrics {
            class_id,
            count: errs.len(),
            acc30: acc30(errs, options.strict_acc30),
            mederr_deg: lower_median(errs).to_degrees(),
        })
        .collect();
    let all: Vec<f64> = errors.iter().map(|e| e.error).collect();
    let k = per_class.len() as f64;
    EvalReport {
        split,
        classes,
        mean_acc30: per_class.iter().map(|c| c.acc30).sum::<f64>() / k,
        mean_mederr_deg: per_class.iter().map(|c| c.mederr_deg).sum::<f64>() / k,
        global_acc30: acc30(&all, options.strict_acc30),
        global_mederr_deg: lower_median(&all).to_degrees(),
        count: all.len(),
        per_class,
        errors,
    }
}

pub const UNSIGNED_BINS: usize = 12;
pub const SIGNED_BINS: usize = 24;
const HIST_BIN_DEG: f64 = 15.0;

/// Azimuth error counts for one class, in 15° bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub class_id: usize,
    /// `|wrap(â - a)|` over `[0°, 180°]`.
    pub unsigned: Vec<u64>,
    /// `wrap(â - a)` over `[-180°, 180°)`.
    pub signed: Vec<u64>,
}

impl ClassHistogram {
    pub fn total(&self) -> u64 {
        self.unsigned.iter().sum()
    }
}

/// Per-class histograms of the wrapped azimuth prediction error.
pub fn error_histogram(
    predictor: &impl PosePredictor,
    dataset: &Dataset,
    split: Split,
    filter: &ClassFilter,
) -> Result<Vec<ClassHistogram>> {
    let records = selected(dataset, split, filter)?;
    let renderer = Renderer::new(&dataset.header.renderer)?;
    let heads = predictor.predict(&renderer, &records)?;
    let mut hists: BTreeMap<usize, ClassHistogram> = BTreeMap::new();
    for (r, h) in records.iter().zip(&heads) {
        let signed = wrap_angle(decode_head(h).azimuth() - r.pose.azimuth())?.to_degrees();
        let hist = hists.entry(r.class_id).or_insert_with(|| ClassHistogram {
            class_id: r.class_id,
            unsigned: vec![0; UNSIGNED_BINS],
            signed: vec![0; SIGNED_BINS],
        });
        let u = ((signed.abs() / HIST_BIN_DEG).floor() as usize).min(UNSIGNED_BINS - 1);
        let s = (((signed + 180.0) / HIST_BIN_DEG).floor().max(0.0) as usize).min(SIGNED_BINS - 1);
        hist.unsigned[u] += 1;
        hist.signed[s] += 1;
    }
    Ok(hists.into_values().collect())
}

/// One exported embedding row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub id: String,
    pub class_id: usize,
    pub pose_deg: [f64; 3],
    pub embedding: Vec<f64>,
}

/// Normalized encoder embeddings of every sample in a split.
pub fn compute_embeddings(params: &ModelParams, dataset: &Dataset, split: Split) -> Result<Vec<EmbeddingRow>> {
    let records = selected(dataset, split, &ClassFilter::All)?;
    let renderer = Renderer::new(&dataset.header.renderer)?;
    let dim = params.arch.feature_dim;
    let mut rows = Vec::with_capacity(records.len());
    for chunk in records.chunks(EVAL_CHUNK) {
        let pass = forward(params, &render_plain(&renderer, chunk)?)?;
        for (r, e) in chunk.iter().zip(pass.embeddings().chunks(dim)) {
            rows.push(EmbeddingRow {
                id: r.id.clone(),
                class_id: r.class_id,
                pose_deg: r.pose.to_degrees(),
                embedding: e.to_vec(),
            });
        }
    }
    Ok(rows)
}
