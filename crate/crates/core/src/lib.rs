//! Pose-aware contrastive learning for class-agnostic viewpoint estimation,
//! trained and evaluated on a procedural synthetic benchmark.
//!
//! * [`geometry`]: Euler angles, rotation matrices, geodesic distance and the
//!   bin/offset angle codec.
//! * [`losses`]: angle loss, InfoNCE and the pose-weighted PoseNCE.
//! * [`nn`]: a small reverse-mode autodiff tape, the encoder/predictor
//!   model, Adam and checkpoints.
//! * [`synthdata`]: renderer, dataset generation and augmentations.
//! * [`pipeline`]: training, few-shot fine-tuning, evaluation, sweeps and
//!   CSV reports.
//! * [`gradcheck`]: finite-difference verification of every gradient.
//! * [`config`] and [`cli`]: the `posecontrast` command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod losses;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
