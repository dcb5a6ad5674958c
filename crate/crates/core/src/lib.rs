//! Forensic statistics for replicate categorical-count experiments.
//!
//! The crate detects the statistical fingerprints of fabricated data in
//! duplicate-slide assays where every slide is a vector of cell counts over
//! five ordered damage categories. It is `no_std` (with `alloc`) and performs
//! no IO; file formats, reporting and the command line live in the `fabcheck`
//! crate.
//!
//! The battery is split by concern:
//!
//! * [`model`]: counts, duplicate pairs, datasets and their validation.
//! * [`tail_factor`]: the weighted damage score per slide and pair summaries.
//! * [`digits`]: terminal-digit extraction plus chi-square and KS uniformity tests.
//! * [`dispersion`]: intra/inter-assay CVs, theoretical sampling moments and
//!   two-sample variance and mean tests.
//! * [`simulation`]: the pooled-population null model and its seeded replay.
//! * [`battery`]: the end-to-end run that turns all of the above into flags.
//! * [`special`]: the p-value kernels shared by the tests.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod battery;
pub mod digits;
pub mod dispersion;
pub mod model;
#[cfg(feature = "serde")]
mod serde_float;
pub mod simulation;
pub mod special;
pub mod stats;
pub mod tail_factor;

pub use battery::{run_battery, BatteryConfig, BatteryError, Flag, ForensicReport, Severity, Verdict};
pub use digits::{DigitPosition, DigitSample};
pub use dispersion::{DispersionSummary, MomentEstimate, SamplingBasis, VarianceTest};
pub use model::{
    validate_dataset, CalibrationScale, Category, CategoryCounts, Dataset, DuplicatePoint,
    IssueKind, ValidationIssue,
};
pub use simulation::{PopulationSpec, SamplingMode, SimulationComparison, SimulationConfig};
pub use tail_factor::{tail_factor, DuplicateSummary};

/// Outcome of a hypothesis test.
///
/// `df` is the (numerator) degrees of freedom when the reference distribution
/// has one; `df_denominator` is only set for F tests.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestOutcome {
    pub test_name: alloc::string::String,
    #[cfg_attr(feature = "serde", serde(with = "serde_float"))]
    pub statistic: f64,
    pub df: Option<f64>,
    pub df_denominator: Option<f64>,
    pub p_value: f64,
}

impl TestOutcome {
    pub(crate) fn new(name: &str, statistic: f64, df: Option<f64>, p_value: f64) -> Self {
        TestOutcome {
            test_name: name.into(),
            statistic,
            df,
            df_denominator: None,
            p_value: p_value.clamp(0.0, 1.0),
        }
    }

    /// True when the p-value is at or below `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}
