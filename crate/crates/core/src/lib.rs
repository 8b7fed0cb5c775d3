//! Exact input reconstruction from disclosed federated k-means cluster sums.
//!
//! The crate simulates Lloyd's k-means on integer data while recording the
//! per-iteration cluster sums an aggregator would see, rebuilds candidate
//! assignment trajectories from those sums alone, and certifies which hidden
//! inputs are pinned down uniquely by exact rational row reduction. A
//! ground-truth oracle then checks every certified value against the real
//! samples.
//!
//! Modules:
//! - [`kmeans`]: simulator and disclosure trace
//! - [`trajectory`]: candidate trajectory matrix from the trace
//! - [`rref`]: exact elimination and the leakage certificate
//! - [`oracle`]: ground-truth classification of certified values
//! - [`harness`], [`report`], [`io`]: experiments, tables and file formats

pub mod dataset;
pub mod error;
pub mod harness;
pub mod io;
pub mod kmeans;
pub mod matrix;
pub mod oracle;
pub mod report;
pub mod rref;
pub mod trajectory;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use harness::{
    run_experiment, run_trials, DatasetSource, Experiment, ExperimentConfig, TrialOutcome,
};
pub use kmeans::{ClusterConfig, ClusterRun, DisclosureTrace, GroundTruthAssignments};
pub use matrix::{BinaryMatrix, IntMatrix, RationalMatrix};
pub use oracle::{MatchMode, TrialReport, TrueSystem};
pub use report::{AggregateReport, ReportFormat};
pub use rref::{LeakageCertificate, RrefResult};
pub use trajectory::IterationRecordMatrix;
