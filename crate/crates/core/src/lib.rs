//! Streaming nonparametric anomaly detection.
//!
//! Offline, a nominal sample is reduced to a sorted set of univariate
//! summary statistics: sums of kNN distances into a reference partition
//! ([`gem`]) or residual norms outside a principal subspace ([`pca`]).
//! Online, each observation's statistic is converted into an empirical tail
//! probability and accumulated by a CUSUM-like recursion ([`detector`]).
//! [`theory`] gives the false-alarm bounds and threshold selection,
//! [`benchmarks`] the competing sequential tests and [`simulation`] the
//! synthetic data sources used to evaluate them.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod benchmarks;
pub mod detector;
pub mod error;
pub mod gem;
pub mod knn;
pub mod linalg;
pub mod pca;
pub mod points;
pub mod sequential;
pub mod simulation;
pub mod theory;

pub use baseline::{NominalBaseline, ProjectedGemBaseline, StatisticBaseline};
pub use detector::{DetectorConfig, DetectorState, StepRecord, TailCusum};
pub use error::{Error, Result};
pub use gem::GemBaseline;
pub use pca::{PcaBaseline, RankRule};
pub use points::PointSet;
pub use sequential::SequentialDetector;
