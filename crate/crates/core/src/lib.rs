//! Value alignment tax (VAT) measurement over paired pre/post Likert judgments.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`taxonomy`] loads the value system (values, micro-values, circumplex angles).
//! * [`dataset`] ingests line-delimited judgment runs and pairs pre/post runs.
//! * [`evidence`] maps Likert answers to signed evidence and builds the [`ShiftMatrix`].
//! * [`metrics`] computes gain, gain-normalized deviation, the coupling matrix,
//!   value/system tax, centralization, hubs and amplification.
//! * [`robustness`] adds scene bootstrap, Spearman/Kendall agreement and
//!   micro/value cross-granularity checks.
//! * [`synthetic`] generates data with planted coupling and holds naive oracles.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel`
//! feature disabled every mode runs sequentially and produces identical output.

pub mod dataset;
pub mod error;
pub mod evidence;
pub mod exec;
pub mod metrics;
pub mod robustness;
pub mod stats;
pub mod synthetic;
pub mod taxonomy;

pub use dataset::{JudgmentRecord, PairedTable, RunManifest, RunTable};
pub use error::{Error, Result};
pub use evidence::ShiftMatrix;
pub use exec::Execution;
pub use metrics::{CouplingMatrix, TaxReport};
pub use taxonomy::{MicroValueId, Taxonomy, ValueId};
