use thiserror::Error;

use crate::dataset::DatasetError;
use crate::evidence::EvidenceError;
use crate::metrics::MetricsError;
use crate::robustness::RobustnessError;
use crate::synthetic::SyntheticError;
use crate::taxonomy::TaxonomyError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error; each variant carries the module it originated in.
#[derive(Debug, Error)]
pub enum Error {
    #[error("taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("evidence: {0}")]
    Evidence(#[from] EvidenceError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("robustness: {0}")]
    Robustness(#[from] RobustnessError),
    #[error("synthetic: {0}")]
    Synthetic(#[from] SyntheticError),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Taxonomy(_) => "taxonomy",
            Error::Dataset(_) => "dataset",
            Error::Evidence(_) => "evidence",
            Error::Metrics(_) => "metrics",
            Error::Robustness(_) => "robustness",
            Error::Synthetic(_) => "synthetic",
        }
    }

    /// `true` for errors that signal a degenerate statistical result rather
    /// than malformed input (e.g. a near-zero gain).
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::Metrics(MetricsError::GainNotComputable { .. })
                | Error::Metrics(MetricsError::LowSupport { .. })
                | Error::Metrics(MetricsError::EmptyColumn(_))
                | Error::Metrics(MetricsError::AllHubs)
        )
    }
}
