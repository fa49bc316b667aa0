//! Neighbor-searching discrepancy (NSD) and kNN-based real concept drift detection.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: points, brute-force kNN, union-of-balls counting.
//! - [`stats`]: the neighbor-searching volume law, its Gamma limit and the
//!   NSD statistic itself (regularized incomplete beta at 0.5).
//! - [`detector`]: classification-gap estimation and the retreat / invasion test.
//! - [`datagen`]: seeded calibration samplers and synthetic drift streams.
//! - [`stream_eval`]: batch-by-batch detection over a stream and scoring.
//! - [`harness`]: Monte Carlo calibration presets, drift benchmark and timing.

pub mod datagen;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod rng;
pub mod stats;
pub mod stream_eval;

pub use detector::{decide, detect_drift, DetectorConfig, DriftEvidence, DriftReport, GapModel, Verdict};
pub use error::{Error, Result};
pub use geometry::{PointSet, RealVector};
pub use stats::{nsd, nsd_exact};
