//! Tensor rank estimation toolkit.
//!
//! Implements CP (PARAFAC) decomposition by alternating least squares, the
//! Core Consistency Diagnostic, missing-value factorization with held-out
//! scoring, and four automatic rank estimators built on a parameter-free
//! 2-means split of per-rank quality features. A seeded synthetic harness
//! reproduces the rank-recovery comparison at desk scale.

pub mod als;
pub mod corcondia;
pub mod error;
pub mod io;
pub mod kruskal;
pub mod linalg;
pub mod missing;
pub mod seed;
pub mod select;
pub mod synth;
pub mod tensor;

pub use als::{cp_als, init_factors, AlsOptions, AlsTrace};
pub use corcondia::{corcondia, fit_core, CoreTensor};
pub use error::{Error, Result};
pub use kruskal::KruskalModel;
pub use missing::{cp_wals, holdout_split, rmse, HoldoutMask};
pub use select::{
    autoten, autoten_mv, autoten_rec, baseline1, scan, two_means, QualityLabel, RankDecision,
    RankScanRow, SelectorMethod, TwoMeansResult, BASELINE1_EPSILON,
};
pub use synth::{
    emit_report, run_experiment, synth_kruskal, AccuracyRow, ExperimentConfig, ExperimentReport,
    TrialRecord,
};
pub use tensor::{khatri_rao, DenseTensor3, Matrix};
