//! Seen/unseen class splits and the JSON-lines dataset file.
//!
//! The first line of a dataset file is a header carrying the renderer
//! configuration and split specification, so every feature vector can be
//! regenerated from the records alone. Each following line is one sample.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_3, PI};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::renderer::RendererConfig;
use crate::error::{Error, Result};
use crate::geometry::PoseLabel;
use crate::rng;

pub const DATASET_FORMAT: &str = "posecontrast-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Decimal digits kept for angles (in degrees) in dataset files.
pub const ANGLE_DECIMALS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}` (expected train or val)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Classes with training and validation samples.
    pub seen_classes: Vec<usize>,
    /// Classes held out of base training; validation samples only, plus an
    /// optional labelled support pool for few-shot fine-tuning.
    pub unseen_classes: Vec<usize>,
    /// Training samples over the seen classes.
    pub train_count: usize,
    /// Validation samples over seen and unseen classes.
    pub val_count: usize,
    /// Training-split samples generated per unseen class for few-shot use.
    pub support_per_unseen: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            seen_classes: (0..8).collect(),
            unseen_classes: vec![8, 9],
            train_count: 5000,
            val_count: 1000,
            support_per_unseen: 0,
        }
    }
}

impl SplitSpec {
    /// Validates the split against the renderer and returns warnings for
    /// unseen classes whose geometry group contains no seen class.
    pub fn validate(&self, renderer: &RendererConfig) -> Result<Vec<String>> {
        if self.seen_classes.is_empty() {
            return Err(Error::InvalidSplit("no seen classes".into()));
        }
        let mut all = BTreeSet::new();
        for &c in self.seen_classes.iter().chain(&self.unseen_classes) {
            if c >= renderer.num_classes {
                return Err(Error::InvalidSplit(format!(
                    "class {c} out of range (num_classes = {})",
                    renderer.num_classes
                )));
            }
            if !all.insert(c) {
                return Err(Error::InvalidSplit(format!("class {c} listed more than once")));
            }
        }
        let seen_groups: BTreeSet<usize> = self.seen_classes.iter().map(|&c| renderer.geometry_group(c)).collect();
        Ok(self
            .unseen_classes
            .iter()
            .filter(|&&c| !seen_groups.contains(&renderer.geometry_group(c)))
            .map(|&c| {
                format!(
                    "unseen class {c} is alone in geometry group {}; expect degraded accuracy",
                    renderer.geometry_group(c)
                )
            })
            .collect())
    }

    pub fn is_unseen(&self, class_id: usize) -> bool {
        self.unseen_classes.contains(&class_id)
    }

    /// Seen and unseen classes in ascending order.
    pub fn all_classes(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.seen_classes.iter().chain(&self.unseen_classes).copied().collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub class_id: usize,
    pub geometry_group: usize,
    pub split: Split,
    pub pose: PoseLabel,
    pub nuisance_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub renderer: RendererConfig,
    pub split: SplitSpec,
    /// Expected-degradation markers (unseen classes without a seen group-mate).
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<SampleRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDegrees {
    az: f64,
    el: f64,
    #[serde(rename = "in")]
    inplane: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    class_id: usize,
    geometry_group: usize,
    split: Split,
    pose_deg: PoseDegrees,
    nuisance_seed: u64,
}

/// Samples a pose: azimuth uniform on the circle, elevation in ±60°,
/// in-plane rotation in ±15°.
pub fn sample_pose(rng: &mut impl Rng) -> PoseLabel {
    let az = rng.random_range(-PI..PI);
    let el = rng.random_range(-FRAC_PI_3..=FRAC_PI_3);
    let inp = rng.random_range(-PI / 12.0..=PI / 12.0);
    PoseLabel::new(az, el, inp).expect("finite")
}

/// Rounds a pose to the precision stored in dataset files, so in-memory
/// records equal what a reader reconstructs.
fn quantize(pose: PoseLabel) -> PoseLabel {
    let q = |deg: f64| -> f64 { format!("{deg:.ANGLE_DECIMALS$}").parse().expect("formatted float") };
    let [a, e, i] = pose.to_degrees();
    PoseLabel::from_degrees(q(a), q(e), q(i)).expect("finite")
}

/// Generates the records for a split specification.
///
/// Training samples cycle through the seen classes, validation samples
/// through every class; unseen classes additionally get
/// `support_per_unseen` training-split samples.
pub fn generate_dataset(renderer: &RendererConfig, split: &SplitSpec) -> Result<Dataset> {
    renderer.validate()?;
    let warnings = split.validate(renderer)?;
    let seed = renderer.master_seed;
    // Each group of records draws from its own streams, so adding support
    // samples leaves the training and validation records untouched.
    let group = |prefix: &str, classes: Vec<usize>, split: Split| {
        let mut pose_rng = rng::stream(seed, &format!("dataset/{prefix}/poses"), 0);
        classes
            .into_iter()
            .enumerate()
            .map(|(index, class_id)| SampleRecord {
                id: format!("{prefix}-{index:06}"),
                class_id,
                geometry_group: renderer.geometry_group(class_id),
                split,
                pose: quantize(sample_pose(&mut pose_rng)),
                nuisance_seed: rng::derive_seed(seed, &format!("dataset/{prefix}/nuisance"), index as u64),
            })
            .collect::<Vec<_>>()
    };

    let train_classes = (0..split.train_count).map(|i| split.seen_classes[i % split.seen_classes.len()]).collect();
    let support_classes = split
        .unseen_classes
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, split.support_per_unseen))
        .collect();
    let eval_classes = split.all_classes();
    let val_classes = (0..split.val_count).map(|i| eval_classes[i % eval_classes.len()]).collect();
    let mut records = group("train", train_classes, Split::Train);
    records.extend(group("support", support_classes, Split::Train));
    records.extend(group("val", val_classes, Split::Val));

    Ok(Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            renderer: renderer.clone(),
            split: split.clone(),
            warnings,
        },
        records,
    })
}

impl Dataset {
    pub fn split_records(&self, split: Split) -> Vec<&SampleRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    /// Training records of seen classes (the base training set).
    pub fn base_train_records(&self) -> Vec<&SampleRecord> {
        self.records
            .iter()
            .filter(|r| r.split == Split::Train && !self.header.split.is_unseen(r.class_id))
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        out.push('\n');
        for r in &self.records {
            let [az, el, inplane] = r.pose.to_degrees();
            let line = RecordLine {
                id: r.id.clone(),
                class_id: r.class_id,
                geometry_group: r.geometry_group,
                split: r.split,
                pose_deg: PoseDegrees { az: round_deg(az), el: round_deg(el), inplane: round_deg(inplane) },
                nuisance_seed: r.nuisance_seed,
            };
            out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_jsonl()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))?;
        let first = first.map_err(|e| Error::io("<dataset>", e))?;
        let header: DatasetHeader =
            serde_json::from_str(&first).map_err(|e| Error::Format(format!("dataset header: {e}")))?;
        if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset {} v{}", header.format, header.version)));
        }
        header.renderer.validate()?;
        let mut records = Vec::new();
        for (n, line) in lines {
            let line = line.map_err(|e| Error::io("<dataset>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine =
                serde_json::from_str(&line).map_err(|e| Error::Format(format!("dataset line {}: {e}", n + 1)))?;
            if rec.class_id >= header.renderer.num_classes {
                return Err(Error::BadClassId { class_id: rec.class_id, num_classes: header.renderer.num_classes });
            }
            let pose = PoseLabel::from_degrees(rec.pose_deg.az, rec.pose_deg.el, rec.pose_deg.inplane)
                .map_err(|e| Error::Format(format!("dataset line {}: {e}", n + 1)))?;
            records.push(SampleRecord {
                id: rec.id,
                class_id: rec.class_id,
                geometry_group: rec.geometry_group,
                split: rec.split,
                pose,
                nuisance_seed: rec.nuisance_seed,
            });
        }
        Ok(Self { header, records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(f))
    }
}

fn round_deg(deg: f64) -> f64 {
    format!("{deg:.ANGLE_DECIMALS$}").parse().expect("formatted float")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_split() -> SplitSpec {
        SplitSpec { train_count: 40, val_count: 20, ..Default::default() }
    }

    #[test]
    fn counts_follow_the_split() {
        let d = generate_dataset(&RendererConfig::default(), &SplitSpec::default()).unwrap();
        assert_eq!(d.split_records(Split::Train).len(), 5000);
        assert_eq!(d.split_records(Split::Val).len(), 1000);
        assert!(d.header.warnings.is_empty());
        assert!(d.base_train_records().iter().all(|r| r.class_id < 8));
    }

    #[test]
    fn support_pool_is_extra_training_data_for_unseen_classes() {
        let split = SplitSpec { support_per_unseen: 5, ..small_split() };
        let d = generate_dataset(&RendererConfig::default(), &split).unwrap();
        assert_eq!(d.split_records(Split::Train).len(), 50);
        assert_eq!(d.base_train_records().len(), 40);
        let plain = generate_dataset(&RendererConfig::default(), &small_split()).unwrap();
        let without_support: Vec<_> = d.records.iter().filter(|r| !r.id.starts_with("support")).cloned().collect();
        assert_eq!(without_support, plain.records);
    }

    #[test]
    fn lonely_unseen_class_is_flagged() {
        // classes 3 and 7 make up geometry group 3
        let split = SplitSpec {
            seen_classes: vec![0, 1, 2, 4, 5, 6, 8, 9],
            unseen_classes: vec![3, 7],
            ..small_split()
        };
        let d = generate_dataset(&RendererConfig::default(), &split).unwrap();
        assert_eq!(d.header.warnings.len(), 2);
    }

    #[test]
    fn invalid_splits() {
        let cfg = RendererConfig::default();
        let overlap = SplitSpec { unseen_classes: vec![0], ..small_split() };
        assert!(matches!(generate_dataset(&cfg, &overlap), Err(Error::InvalidSplit(_))));
        let out_of_range = SplitSpec { unseen_classes: vec![12], ..small_split() };
        assert!(matches!(generate_dataset(&cfg, &out_of_range), Err(Error::InvalidSplit(_))));
        let empty = SplitSpec { seen_classes: vec![], ..small_split() };
        assert!(matches!(generate_dataset(&cfg, &empty), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn file_roundtrip_preserves_records() {
        let d = generate_dataset(&RendererConfig::default(), &small_split()).unwrap();
        let text = d.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 61);
        let back = Dataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_jsonl().unwrap(), text);
    }

    #[test]
    fn poses_respect_sampling_ranges() {
        let d = generate_dataset(&RendererConfig::default(), &small_split()).unwrap();
        for r in &d.records {
            assert!(r.pose.elevation().abs() <= FRAC_PI_3 + 1e-9);
            assert!(r.pose.inplane().abs() <= PI / 12.0 + 1e-9);
        }
    }

    #[test]
    fn unknown_record_fields_are_rejected() {
        let d = generate_dataset(&RendererConfig::default(), &small_split()).unwrap();
        let text = d.to_jsonl().unwrap().replacen("\"nuisance_seed\"", "\"extra\":1,\"nuisance_seed\"", 1);
        assert!(Dataset::from_reader(text.as_bytes()).is_err());
    }
}
