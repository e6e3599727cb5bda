//! Synthetic viewpoint benchmark: a seeded feature "renderer", seen/unseen
//! class splits and pose-aware augmentation.

mod augment;
mod dataset;
mod renderer;

pub use augment::{apply_pose_variant, batch_augment, contrast_views, AugmentationConfig, AugmentedBatch, ContrastViews};
pub use dataset::{
    generate_dataset, sample_pose, Dataset, DatasetHeader, SampleRecord, Split, SplitSpec, ANGLE_DECIMALS,
    DATASET_FORMAT, DATASET_VERSION,
};
pub use renderer::{render, Renderer, RendererConfig};
