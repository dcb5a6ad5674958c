//! End-to-end forensic battery and its red flags.
//!
//! Stages run in a fixed order: tail factors, terminal digits, CV analysis,
//! theoretical sampling moments, then the simulation comparison. Every flag
//! is a deterministic predicate over numbers held in the report:
//!
//! | flag                      | raised when                                              |
//! |---------------------------|----------------------------------------------------------|
//! | `digit-nonuniform-chisq`  | chi-square digit p <= `alpha`                            |
//! | `digit-nonuniform-ks`     | KS digit p <= `alpha`                                    |
//! | `inter-below-intra`       | inter-assay CV < intra-assay CV                          |
//! | `cv-below-theoretical`    | theoretical SD / mean pair SD >= `theoretical_ratio_threshold` |
//! | `variance-below-simulated`| >= 3 of 5 category variance tests reject at `alpha` with the real variance smaller |

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::digits::{self, DigitError, DigitPosition};
use crate::dispersion::{self, DispersionError, DispersionSummary, MomentEstimate, SamplingBasis, VarianceTest};
use crate::model::{validate_dataset, Category, Dataset, ValidationIssue};
use crate::simulation::{self, SimulationComparison, SimulationConfig, SimulationError};
use crate::stats::mean;
use crate::tail_factor::{dataset_tail_factors, DuplicateSummary, TailFactorError};
use crate::TestOutcome;

/// How many of the five category variance tests must reject.
pub const VARIANCE_FLAG_MIN_CATEGORIES: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BatteryError {
    #[error("data-model: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    DataModel(Vec<ValidationIssue>),
    #[error("config: {0}")]
    Config(&'static str),
    #[error("control selection '{0}' matches no points")]
    EmptyControl(String),
    #[error("tail-factor: {0}")]
    TailFactor(#[from] TailFactorError),
    #[error("digit-forensics: {0}")]
    Digits(#[from] DigitError),
    #[error("dispersion-forensics: {0}")]
    Dispersion(#[from] DispersionError),
    #[error("null-simulator: {0}")]
    Simulation(#[from] SimulationError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatteryConfig {
    /// `n_points` and `cells_per_slide` are taken from the analysed data.
    pub simulation: SimulationConfig,
    pub alpha: f64,
    /// Digit flags with p at or below this are severe.
    pub severe_alpha: f64,
    pub population_size: u64,
    pub digit_column: Category,
    pub digit_position: DigitPosition,
    /// Label prefix selecting the control points used for the CV analysis,
    /// the pooled population and the simulation. `None` uses every point.
    pub control_prefix: Option<String>,
    pub variance_test: VarianceTest,
    pub theoretical_ratio_threshold: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            simulation: SimulationConfig::default(),
            alpha: 0.05,
            severe_alpha: 0.01,
            population_size: simulation::DEFAULT_POPULATION_SIZE,
            digit_column: Category::A,
            digit_position: DigitPosition::Last,
            control_prefix: None,
            variance_test: VarianceTest::FRatio,
            theoretical_ratio_threshold: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Flag {
    DigitNonuniformChisq,
    DigitNonuniformKs,
    InterBelowIntra,
    CvBelowTheoretical,
    VarianceBelowSimulated,
}

impl Flag {
    pub fn id(self) -> &'static str {
        match self {
            Flag::DigitNonuniformChisq => "digit-nonuniform-chisq",
            Flag::DigitNonuniformKs => "digit-nonuniform-ks",
            Flag::InterBelowIntra => "inter-below-intra",
            Flag::CvBelowTheoretical => "cv-below-theoretical",
            Flag::VarianceBelowSimulated => "variance-below-simulated",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Severity {
    Note,
    Suspicious,
    Severe,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Note => "note",
            Severity::Suspicious => "suspicious",
            Severity::Severe => "severe",
        })
    }
}

/// A raised flag with its severity and a JSON pointer to the evidence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub flag: Flag,
    pub severity: Severity,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForensicReport {
    pub dataset_summary: Vec<DuplicateSummary>,
    pub control_points: usize,
    pub digit_tests: Vec<TestOutcome>,
    pub dispersion: DispersionSummary,
    pub theoretical_moments: MomentEstimate,
    /// Mean per-pair SD of the control tail factors.
    pub observed_pair_sd: f64,
    /// `theoretical_moments.sd / observed_pair_sd`; `None` when the observed SD is 0.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::option"))]
    pub theoretical_sd_ratio: Option<f64>,
    pub simulation: SimulationComparison,
    pub flags: Vec<Flag>,
    pub verdicts: Vec<Verdict>,
    /// Stages that could not run, e.g. digit tests on too few values.
    pub notes: Vec<String>,
    pub config_echo: BatteryConfig,
}

impl ForensicReport {
    pub fn has_severe(&self) -> bool {
        self.verdicts.iter().any(|v| v.severity == Severity::Severe)
    }
}

/// Runs the whole battery over `d`.
pub fn run_battery(d: &Dataset, cfg: &BatteryConfig) -> Result<ForensicReport, BatteryError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(BatteryError::Config("alpha must lie in (0, 1)"));
    }
    if !(cfg.severe_alpha > 0.0 && cfg.severe_alpha < 1.0) {
        return Err(BatteryError::Config("severe_alpha must lie in (0, 1)"));
    }
    let issues = validate_dataset(d);
    if !issues.is_empty() {
        return Err(BatteryError::DataModel(issues));
    }
    let mut notes = Vec::new();
    let mut verdicts = Vec::new();

    let dataset_summary = dataset_tail_factors(d)?;

    // digits run over every slide, not only the controls
    let values: Vec<u64> = d
        .category_column(cfg.digit_column)
        .into_iter()
        .map(|v| v as u64)
        .collect();
    let sample = digits::extract_digits(&values, cfg.digit_position)?;
    let mut digit_tests = Vec::new();
    let digit_flags = [
        (
            digits::chi_square_uniform(&digits::digit_histogram(&sample)),
            Flag::DigitNonuniformChisq,
        ),
        (digits::ks_uniform_digits(&sample), Flag::DigitNonuniformKs),
    ];
    for (outcome, flag) in digit_flags {
        match outcome {
            Ok(t) => {
                if t.rejects(cfg.alpha) {
                    let severity = if t.rejects(cfg.severe_alpha) {
                        Severity::Severe
                    } else {
                        Severity::Suspicious
                    };
                    verdicts.push(Verdict {
                        flag,
                        severity,
                        evidence: alloc::format!("/digit_tests/{}", digit_tests.len()),
                    });
                }
                digit_tests.push(t);
            }
            Err(e @ DigitError::SampleTooSmall { .. }) => {
                notes.push(alloc::format!("{flag} skipped: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let control = match &cfg.control_prefix {
        Some(prefix) => {
            let c = d.filter_label_prefix(prefix);
            if c.points.is_empty() {
                return Err(BatteryError::EmptyControl(prefix.clone()));
            }
            c
        }
        None => d.clone(),
    };
    let control_summaries = dataset_tail_factors(&control)?;
    let dispersion = dispersion::dispersion_summary(&control_summaries)?;
    if dispersion.inter_cv.is_none() {
        notes.push("inter-assay CV needs at least two control points".into());
    }
    if dispersion.inter_below_intra() {
        verdicts.push(Verdict {
            flag: Flag::InterBelowIntra,
            severity: Severity::Note,
            evidence: "/dispersion".into(),
        });
    }

    let cells = control.slide_total().unwrap_or(0) as u64;
    let probs = dispersion::pooled_probabilities(&control.pooled_counts());
    let theoretical_moments =
        dispersion::multinomial_tf_moments(&probs, &control.scale, cells, SamplingBasis::Multinomial)?;
    let observed_pair_sd = mean(&control_summaries.iter().map(|s| s.sd).collect::<Vec<_>>());
    let theoretical_sd_ratio = dispersion::theoretical_sd_ratio(&theoretical_moments, observed_pair_sd);
    // zero observed spread against a positive theoretical SD is the extreme case
    let below_theory = match theoretical_sd_ratio {
        Some(r) => r >= cfg.theoretical_ratio_threshold,
        None => theoretical_moments.sd > 0.0,
    };
    if below_theory {
        verdicts.push(Verdict {
            flag: Flag::CvBelowTheoretical,
            severity: Severity::Suspicious,
            evidence: "/theoretical_sd_ratio".into(),
        });
    }

    let population = simulation::build_population(&control, cfg.population_size)?;
    let sim_cfg = SimulationConfig {
        n_points: control.points.len() as u32,
        cells_per_slide: cells,
        ..cfg.simulation
    };
    let simulation = simulation::simulation_battery(&control, &population, &sim_cfg, cfg.variance_test)?;
    if simulation.variance_deficits(cfg.alpha).len() >= VARIANCE_FLAG_MIN_CATEGORIES {
        verdicts.push(Verdict {
            flag: Flag::VarianceBelowSimulated,
            severity: Severity::Severe,
            evidence: "/simulation/per_category_variance_tests".into(),
        });
    }

    verdicts.sort_by_key(|v| v.flag);
    Ok(ForensicReport {
        dataset_summary,
        control_points: control.points.len(),
        digit_tests,
        dispersion,
        theoretical_moments,
        observed_pair_sd,
        theoretical_sd_ratio,
        simulation,
        flags: verdicts.iter().map(|v| v.flag).collect(),
        verdicts,
        notes,
        config_echo: BatteryConfig {
            simulation: sim_cfg,
            ..cfg.clone()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CalibrationScale, DuplicatePoint};
    use alloc::vec;

    fn cfg() -> BatteryConfig {
        BatteryConfig {
            simulation: SimulationConfig { seed: 42, replicates: 20, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn empty_dataset_is_a_data_model_error() {
        let d = Dataset { points: vec![], scale: CalibrationScale::STANDARD };
        assert!(matches!(run_battery(&d, &cfg()), Err(BatteryError::DataModel(_))));
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let d = Dataset::new(
            vec![DuplicatePoint::new("a", [450, 38, 10, 1, 1], [449, 39, 10, 1, 1])],
            CalibrationScale::STANDARD,
        )
        .unwrap();
        let c = BatteryConfig { alpha: 1.5, ..cfg() };
        assert_eq!(run_battery(&d, &c), Err(BatteryError::Config("alpha must lie in (0, 1)")));
    }

    #[test]
    fn single_point_runs_with_notes() {
        let d = Dataset::new(
            vec![DuplicatePoint::new("a", [450, 38, 10, 1, 1], [449, 39, 10, 1, 1])],
            CalibrationScale::STANDARD,
        )
        .unwrap();
        let r = run_battery(&d, &cfg()).unwrap();
        assert!(r.digit_tests.is_empty());
        assert_eq!(r.dispersion.inter_cv, None);
        assert_eq!(r.simulation.fig1_data.len(), 1);
        assert_eq!(r.notes.len(), 3);
        assert!(!r.flags.contains(&Flag::InterBelowIntra));
    }

    #[test]
    fn unknown_control_prefix() {
        let d = Dataset::new(
            vec![DuplicatePoint::new("a", [450, 38, 10, 1, 1], [449, 39, 10, 1, 1])],
            CalibrationScale::STANDARD,
        )
        .unwrap();
        let c = BatteryConfig { control_prefix: Some("sham".into()), ..cfg() };
        assert_eq!(run_battery(&d, &c), Err(BatteryError::EmptyControl("sham".into())));
    }

    #[test]
    fn flags_follow_their_predicates() {
        let pop = simulation::PopulationSpec::new([8992, 776, 202, 18, 12]).unwrap();
        let sim_cfg = SimulationConfig { seed: 7, ..Default::default() };
        let d = simulation::simulate_dataset(&pop, &sim_cfg, &CalibrationScale::STANDARD).unwrap();
        let r = run_battery(&d, &cfg()).unwrap();
        for t in &r.digit_tests {
            let flag = if t.test_name == digits::CHI_SQUARE_TEST {
                Flag::DigitNonuniformChisq
            } else {
                Flag::DigitNonuniformKs
            };
            assert_eq!(r.flags.contains(&flag), t.p_value <= r.config_echo.alpha);
        }
        assert_eq!(r.flags.contains(&Flag::InterBelowIntra), r.dispersion.inter_below_intra());
        assert_eq!(
            r.flags.contains(&Flag::VarianceBelowSimulated),
            r.simulation.variance_deficits(r.config_echo.alpha).len() >= 3
        );
        assert_eq!(r.config_echo.simulation.n_points, 12);
        assert_eq!(r.flags.len(), r.verdicts.len());
    }
}
