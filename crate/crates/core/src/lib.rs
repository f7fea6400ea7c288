// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-interval detection on data streams.
//!
//! A stream is cut into non-overlapping intervals of `w` points. Each interval
//! is embedded as a distribution through the Isolation Kernel, scored by its
//! dissimilarity to the preceding interval, and flagged when the score exceeds
//! `mean + alpha * sigma` of all scores. The subsample size `psi` is chosen
//! automatically as the one giving the most stable score series.

#![deny(unsafe_code)]

pub mod bench;
pub mod cli;
pub mod data;
pub mod detector;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod instability;
pub mod kernel;
pub mod online;

pub use data::{apply_norm, gen_s1, gen_s1_blocks, gen_s2, load_csv, load_labels, minmax_normalize, Labels, NormParams, TimeSeries};
pub use detector::{
    detect_offline, flag_intervals, score_points_cpd, score_series, select_psi, split_intervals, threshold,
    DetectionResult, DetectorConfig, PointScores, ScoreSeries, Scoring, DEFAULT_PSI_GRID,
};
pub use embedding::{embed_interval, gdk_similarity, idk_similarity, mmd_squared, DistributionKernel, IntervalEmbedding, PointKernelSpec};
pub use error::{IcidError, Result};
pub use eval::{export_scores, f1_with_margin, interval_hits, Anchor, EvalReport, ExportFormat, ScoreDocument};
pub use instability::{instability, InstabilityKind, InstabilityMeasure};
pub use kernel::{sample_partitioning, IsolationModel, Partitioning, PointFeature, DEFAULT_T};
pub use online::{init_online, OnlineConfig, OnlineState};
