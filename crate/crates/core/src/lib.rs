//! Detection of out-of-distribution augmented samples through a two-component
//! mixture on log-losses, and per-sample label smoothing driven by the
//! resulting posteriors.
//!
//! The crate is organised bottom-up:
//!
//! - [`rasters`]: images, labeled samples and every augmentation transform.
//! - [`netcore`]: small classifiers with analytic gradients, SGD with momentum.
//! - [`smoothing`]: smoothed targets, smoothed cross-entropy and batch objectives.
//! - [`lossmodel`]: loss collection, EM fitting, posteriors and hard splits.
//! - [`pipelines`]: pretraining, estimation, smoothed training, DAOOD collection,
//!   fair comparison and sweeps.
//! - [`glyphs`], [`dataset`], [`config`], [`plot`]: synthetic data, file formats
//!   and report emission used by the command-line tool.

// `!(x > 0.0)` style checks reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod glyphs;
pub mod io;
pub mod lossmodel;
pub mod netcore;
pub mod pipelines;
pub mod plot;
pub mod rasters;
pub mod seeding;
pub mod smoothing;

pub use error::{Error, Result};
