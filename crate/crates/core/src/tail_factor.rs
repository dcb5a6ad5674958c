//! Tail factor: the weighted mean damage score of a slide.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{validate_dataset, CalibrationScale, CategoryCounts, Dataset, ValidationIssue};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TailFactorError {
    #[error("tail factors must be positive, got {0} and {1}")]
    NonPositive(f64, f64),
    #[error("dataset is invalid: {}", .0[0])]
    Invalid(Vec<ValidationIssue>),
}

/// Summary of one duplicate pair. `sd` is the two-observation sample SD.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DuplicateSummary {
    pub label: String,
    pub tf_a: f64,
    pub tf_b: f64,
    pub mean: f64,
    pub sd: f64,
    pub cv: f64,
}

/// `sum(count_i * weight_i) / total`.
///
/// Counts are assumed valid; a zero total yields `NaN`.
pub fn tail_factor(c: &CategoryCounts, s: &CalibrationScale) -> f64 {
    let weighted: f64 = c
        .counts
        .iter()
        .zip(s.weights())
        .map(|(&n, &w)| n as f64 * w)
        .sum();
    weighted / c.total as f64
}

pub fn duplicate_summary(
    label: impl Into<String>,
    tf_a: f64,
    tf_b: f64,
) -> Result<DuplicateSummary, TailFactorError> {
    // also rejects NaN
    if !(tf_a > 0.0 && tf_b > 0.0) {
        return Err(TailFactorError::NonPositive(tf_a, tf_b));
    }
    let mean = (tf_a + tf_b) / 2.0;
    // n - 1 = 1, so the SD of two values is |a - b| / sqrt(2)
    let sd = libm::fabs(tf_a - tf_b) / core::f64::consts::SQRT_2;
    Ok(DuplicateSummary {
        label: label.into(),
        tf_a,
        tf_b,
        mean,
        sd,
        cv: sd / mean,
    })
}

/// One summary per point, in dataset order.
pub fn dataset_tail_factors(d: &Dataset) -> Result<Vec<DuplicateSummary>, TailFactorError> {
    let issues = validate_dataset(d);
    if !issues.is_empty() {
        return Err(TailFactorError::Invalid(issues));
    }
    d.points
        .iter()
        .map(|p| {
            duplicate_summary(
                p.label.clone(),
                tail_factor(&p.slide_a, &d.scale),
                tail_factor(&p.slide_b, &d.scale),
            )
        })
        .collect()
}
