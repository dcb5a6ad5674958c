//! Coefficient-of-variation forensics, sampling-theory moments of the tail
//! factor, and two-sample variance and mean tests.
//!
//! Honest replicate data carries at least the variation of pure sampling:
//! scoring `n` cells out of a large pool with category probabilities `p`
//! gives a tail factor with mean `sum(w_i p_i)` and variance
//! `(sum(w_i^2 p_i) - mean^2) / n`. Drawing from a finite pool of `N` cells
//! shrinks that variance by `(N - n) / (N - 1)`.
//!
//! Between-condition variation adds to, and never removes, the replicate
//! noise, so an inter-assay CV below the intra-assay CV is a red flag.

use alloc::vec::Vec;
use libm::{fabs, log, sqrt};
use rand::{seq::SliceRandom, Rng};

use crate::model::{CalibrationScale, CATEGORY_COUNT};
use crate::special::{f_cdf, f_sf, student_t_two_sided};
use crate::stats::{mean, sample_variance};
use crate::tail_factor::DuplicateSummary;
use crate::TestOutcome;

pub const F_TEST: &str = "two-sided F variance ratio";
pub const PERMUTATION_TEST: &str = "permutation log variance ratio";
pub const WELCH_TEST: &str = "welch t";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispersionError {
    #[error("no duplicate summaries")]
    Empty,
    #[error("inter-assay CV needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("probabilities must be non-negative and sum to 1 (sum {0})")]
    InvalidProbabilities(f64),
    #[error("cells per slide must be at least 1")]
    NoCells,
    #[error("population of {population} cannot supply {n} cells without replacement")]
    PopulationTooSmall { population: u64, n: u64 },
    #[error("each sample needs at least 2 values, got {0} and {1}")]
    SampleTooSmall(usize, usize),
    #[error("both samples have zero variance")]
    Degenerate,
    #[error("permutation test needs at least one round")]
    NoRounds,
}

/// Sampling model for the tail-factor moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SamplingBasis {
    /// Independent draws, i.e. an infinite pool.
    Multinomial,
    /// Draws without replacement from a pool of `population` cells.
    Hypergeometric { population: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentEstimate {
    pub mean: f64,
    pub sd: f64,
    pub basis: SamplingBasis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersionSummary {
    pub intra_cv: f64,
    /// `None` with fewer than two pairs.
    pub inter_cv: Option<f64>,
    pub n_pairs: usize,
}

impl DispersionSummary {
    /// Both CVs present and `inter < intra`.
    pub fn inter_below_intra(&self) -> bool {
        self.inter_cv.is_some_and(|inter| inter < self.intra_cv)
    }
}

/// Mean of the per-pair CVs.
pub fn intra_assay_cv(summaries: &[DuplicateSummary]) -> Result<f64, DispersionError> {
    if summaries.is_empty() {
        return Err(DispersionError::Empty);
    }
    let cvs: Vec<f64> = summaries.iter().map(|s| s.cv).collect();
    Ok(mean(&cvs))
}

/// Sample SD of the pair means over their grand mean.
pub fn inter_assay_cv(summaries: &[DuplicateSummary]) -> Result<f64, DispersionError> {
    if summaries.len() < 2 {
        return Err(DispersionError::TooFewPairs(summaries.len()));
    }
    let means: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
    Ok(sqrt(sample_variance(&means)) / mean(&means))
}

pub fn dispersion_summary(summaries: &[DuplicateSummary]) -> Result<DispersionSummary, DispersionError> {
    Ok(DispersionSummary {
        intra_cv: intra_assay_cv(summaries)?,
        inter_cv: inter_assay_cv(summaries).ok(),
        n_pairs: summaries.len(),
    })
}

/// Mean and SD of the tail factor of an `n`-cell slide under `basis`.
pub fn multinomial_tf_moments(
    probs: &[f64; CATEGORY_COUNT],
    scale: &CalibrationScale,
    n: u64,
    basis: SamplingBasis,
) -> Result<MomentEstimate, DispersionError> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| p.is_nan() || *p < 0.0) || fabs(total - 1.0) > 1e-9 {
        return Err(DispersionError::InvalidProbabilities(total));
    }
    if n == 0 {
        return Err(DispersionError::NoCells);
    }
    let w = scale.weights();
    let mean: f64 = probs.iter().zip(w).map(|(p, w)| p * w).sum();
    let second: f64 = probs.iter().zip(w).map(|(p, w)| p * w * w).sum();
    // clamp rounding noise on degenerate vectors
    let mut variance = (second - mean * mean).max(0.0) / n as f64;
    if let SamplingBasis::Hypergeometric { population } = basis {
        if population < n {
            return Err(DispersionError::PopulationTooSmall { population, n });
        }
        variance *= finite_population_correction(population, n);
    }
    Ok(MomentEstimate {
        mean,
        sd: sqrt(variance),
        basis,
    })
}

/// `(N - n) / (N - 1)`; 0 for a single-cell pool.
pub fn finite_population_correction(population: u64, n: u64) -> f64 {
    if population <= 1 {
        0.0
    } else {
        (population - n) as f64 / (population - 1) as f64
    }
}

/// Category probabilities estimated from pooled counts.
pub fn pooled_probabilities(pooled: &[i64; CATEGORY_COUNT]) -> [f64; CATEGORY_COUNT] {
    let total: i64 = pooled.iter().sum();
    pooled.map(|c| c as f64 / total as f64)
}

/// Theoretical SD over an observed SD; `None` when the observed SD is zero.
pub fn theoretical_sd_ratio(theoretical: &MomentEstimate, observed_sd: f64) -> Option<f64> {
    (observed_sd > 0.0).then(|| theoretical.sd / observed_sd)
}

/// Which variance comparison the simulation battery runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum VarianceTest {
    #[default]
    FRatio,
    /// Label-permutation test on `|ln(var_x / var_y)|`.
    Permutation { rounds: u32 },
}

fn check_sizes(x: &[f64], y: &[f64]) -> Result<(), DispersionError> {
    if x.len() < 2 || y.len() < 2 {
        Err(DispersionError::SampleTooSmall(x.len(), y.len()))
    } else {
        Ok(())
    }
}

/// Two-sided F test, larger sample variance over smaller.
///
/// `df` carries the numerator (larger-variance sample) degrees of freedom.
/// One zero variance against a positive one gives `F = inf`, `p = 0`.
pub fn variance_ratio_test(x: &[f64], y: &[f64]) -> Result<TestOutcome, DispersionError> {
    check_sizes(x, y)?;
    let (vx, vy) = (sample_variance(x), sample_variance(y));
    if vx == 0.0 && vy == 0.0 {
        return Err(DispersionError::Degenerate);
    }
    let (dx, dy) = ((x.len() - 1) as f64, (y.len() - 1) as f64);
    let (f, d1, d2) = if vx >= vy { (vx / vy, dx, dy) } else { (vy / vx, dy, dx) };
    let upper = f_sf(f, d1, d2);
    let lower = f_cdf(f, d1, d2);
    let mut t = TestOutcome::new(F_TEST, f, Some(d1), 2.0 * upper.min(lower));
    t.df_denominator = Some(d2);
    Ok(t)
}

/// Permutation version of [`variance_ratio_test`].
///
/// The p-value is `(1 + #{permuted stat >= observed}) / (1 + rounds)`.
pub fn variance_permutation_test<R: Rng + ?Sized>(
    x: &[f64],
    y: &[f64],
    rounds: u32,
    rng: &mut R,
) -> Result<TestOutcome, DispersionError> {
    check_sizes(x, y)?;
    if rounds == 0 {
        return Err(DispersionError::NoRounds);
    }
    let observed = log_variance_ratio(x, y);
    if observed.is_nan() {
        return Err(DispersionError::Degenerate);
    }
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut hits = 0u32;
    for _ in 0..rounds {
        pooled.shuffle(rng);
        let (px, py) = pooled.split_at(x.len());
        let stat = log_variance_ratio(px, py);
        // a permuted split with zero variance on both sides carries no evidence
        if !stat.is_nan() && stat >= observed * (1.0 - 1e-12) {
            hits += 1;
        }
    }
    let p = (1 + hits) as f64 / (1 + rounds) as f64;
    Ok(TestOutcome::new(PERMUTATION_TEST, observed, None, p))
}

fn log_variance_ratio(x: &[f64], y: &[f64]) -> f64 {
    let (vx, vy) = (sample_variance(x), sample_variance(y));
    if vx == 0.0 && vy == 0.0 {
        f64::NAN
    } else {
        fabs(log(vx) - log(vy))
    }
}

/// Welch's unequal-variance t test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(x: &[f64], y: &[f64]) -> Result<TestOutcome, DispersionError> {
    check_sizes(x, y)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mx, my) = (mean(x), mean(y));
    let (ax, ay) = (sample_variance(x) / nx, sample_variance(y) / ny);
    let se2 = ax + ay;
    if se2 == 0.0 {
        if mx == my {
            return Err(DispersionError::Degenerate);
        }
        let t = if mx > my { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(TestOutcome::new(WELCH_TEST, t, None, 0.0));
    }
    let t = (mx - my) / sqrt(se2);
    let df = se2 * se2 / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
    Ok(TestOutcome::new(WELCH_TEST, t, Some(df), student_t_two_sided(t, df)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail_factor::duplicate_summary;
    use proptest::prelude::*;
    use rand::SeedableRng;

    const SHAM_P: [f64; 5] = [0.8992, 0.0776, 0.0202, 0.0018, 0.0012];

    fn pair(a: f64, b: f64) -> DuplicateSummary {
        duplicate_summary("p", a, b).unwrap()
    }

    #[test]
    fn intra_cv_examples() {
        let cv = intra_assay_cv(&[pair(4.92, 5.12), pair(4.0, 4.0)]).unwrap();
        assert!((cv - 0.014_085_792_6).abs() < 1e-9);
        assert_eq!(intra_assay_cv(&[pair(4.0, 4.0), pair(3.0, 3.0)]).unwrap(), 0.0);
        assert_eq!(intra_assay_cv(&[]), Err(DispersionError::Empty));
    }

    #[test]
    fn inter_cv_examples() {
        let cv = inter_assay_cv(&[pair(4.92, 5.12), pair(4.0, 4.0)]).unwrap();
        // sd(5.02, 4.0) = 1.02 / sqrt 2
        let expected = (1.02 / 2f64.sqrt()) / 4.51;
        assert!((cv - expected).abs() < 1e-12);
        assert!((cv - 0.1599).abs() < 1e-4);
        assert_eq!(inter_assay_cv(&[pair(4.0, 4.2), pair(4.2, 4.0)]).unwrap(), 0.0);
        assert_eq!(inter_assay_cv(&[pair(4.0, 4.2)]), Err(DispersionError::TooFewPairs(1)));
    }

    #[test]
    fn summary_flags_inversion() {
        let s = dispersion_summary(&[pair(4.0, 4.4), pair(4.2, 4.2)]).unwrap();
        assert!(s.inter_below_intra());
        let single = dispersion_summary(&[pair(4.0, 4.4)]).unwrap();
        assert_eq!(single.inter_cv, None);
        assert!(!single.inter_below_intra());
    }

    #[test]
    fn sham_moments() {
        let m = multinomial_tf_moments(&SHAM_P, &CalibrationScale::STANDARD, 500, SamplingBasis::Multinomial)
            .unwrap();
        assert!((m.mean - 4.0625).abs() < 1e-12);
        assert!((m.sd - 0.279_391_638_207_015_8).abs() < 1e-12);

        let h = multinomial_tf_moments(
            &SHAM_P,
            &CalibrationScale::STANDARD,
            500,
            SamplingBasis::Hypergeometric { population: 10_000 },
        )
        .unwrap();
        assert!((h.sd - 0.272_330_900_811_776_6).abs() < 1e-12);
        assert!((h.sd / m.sd - (9500.0f64 / 9999.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_and_invalid_moments() {
        let m = multinomial_tf_moments(&[1.0, 0.0, 0.0, 0.0, 0.0], &CalibrationScale::STANDARD, 500, SamplingBasis::Multinomial)
            .unwrap();
        assert_eq!((m.mean, m.sd), (2.5, 0.0));
        let bad = [0.5, 0.5, 0.5, 0.0, 0.0];
        assert!(multinomial_tf_moments(&bad, &CalibrationScale::STANDARD, 500, SamplingBasis::Multinomial).is_err());
        let neg = [1.1, -0.1, 0.0, 0.0, 0.0];
        assert!(multinomial_tf_moments(&neg, &CalibrationScale::STANDARD, 500, SamplingBasis::Multinomial).is_err());
        assert!(multinomial_tf_moments(&SHAM_P, &CalibrationScale::STANDARD, 500, SamplingBasis::Hypergeometric { population: 100 }).is_err());
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let f = variance_ratio_test(&x, &x).unwrap();
        assert_eq!((f.statistic, f.p_value), (1.0, 1.0));
        let t = welch_t_test(&x, &x).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
    }

    #[test]
    fn variance_ratio_of_four() {
        // sample variances 4 and 1, twelve values each
        let base = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
        let v = sample_variance(&base);
        let y: Vec<f64> = base.iter().map(|b| b / v.sqrt()).collect();
        let x: Vec<f64> = y.iter().map(|b| 2.0 * b).collect();
        let t = variance_ratio_test(&x, &y).unwrap();
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert_eq!((t.df, t.df_denominator), (Some(11.0), Some(11.0)));
        // quadrature oracle value, see tests/oracles.rs
        assert!((t.p_value - 0.030_170_795_165_573_864).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_cases() {
        assert_eq!(variance_ratio_test(&[1.0, 1.0], &[2.0, 2.0]), Err(DispersionError::Degenerate));
        let t = variance_ratio_test(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(t.statistic.is_infinite());
        assert_eq!(t.p_value, 0.0);
        assert_eq!(welch_t_test(&[1.0, 1.0], &[1.0, 1.0]), Err(DispersionError::Degenerate));
        assert_eq!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap().p_value, 0.0);
        assert!(variance_ratio_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn welch_small_example() {
        let t = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        // -1.5 / sqrt(1/3 + 3.5/6)
        assert!((t.statistic + 1.5 / (1.0f64 / 3.0 + 3.5 / 6.0).sqrt()).abs() < 1e-12);
        assert!((t.df.unwrap() - 6.797_752_808_988_763).abs() < 1e-9);
        assert!((t.p_value - 0.162_434_787_441_797_43).abs() < 1e-9);
    }

    #[test]
    fn permutation_test_detects_large_ratio() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let tight: Vec<f64> = (0..20).map(|i| (i % 3) as f64).collect();
        let wide: Vec<f64> = (0..20).map(|i| (i * 7 % 23) as f64).collect();
        let t = variance_permutation_test(&tight, &wide, 999, &mut rng).unwrap();
        assert!(t.p_value < 0.01);
        let same = variance_permutation_test(&wide, &wide, 199, &mut rng).unwrap();
        assert_eq!(same.p_value, 1.0);
        assert!(variance_permutation_test(&tight, &wide, 0, &mut rng).is_err());
        assert!(variance_permutation_test(&[1.0, 1.0], &[2.0, 2.0], 10, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn variance_test_is_symmetric(
            x in proptest::collection::vec(-50.0f64..50.0, 2..20),
            y in proptest::collection::vec(-50.0f64..50.0, 2..20),
        ) {
            if let (Ok(a), Ok(b)) = (variance_ratio_test(&x, &y), variance_ratio_test(&y, &x)) {
                prop_assert_eq!(a.p_value, b.p_value);
                prop_assert_eq!(a.statistic, b.statistic);
                prop_assert!((0.0..=1.0).contains(&a.p_value));
                prop_assert!(a.statistic >= 1.0);
            }
        }

        #[test]
        fn finite_population_shrinks_sd(
            raw in proptest::array::uniform5(1u32..1000),
            n in 2u64..500,
            extra in 0u64..100_000,
        ) {
            let total: u32 = raw.iter().sum();
            let probs = raw.map(|r| r as f64 / total as f64);
            prop_assume!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let pop = n + 1 + extra;
            let s = CalibrationScale::STANDARD;
            let m = multinomial_tf_moments(&probs, &s, n, SamplingBasis::Multinomial).unwrap();
            let h = multinomial_tf_moments(&probs, &s, n, SamplingBasis::Hypergeometric { population: pop }).unwrap();
            prop_assert!(h.sd < m.sd);
            let ratio = ((pop - n) as f64 / (pop - 1) as f64).sqrt();
            prop_assert!((h.sd / m.sd - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_probabilities_normalise() {
        let p = pooled_probabilities(&[8992, 776, 202, 18, 12]);
        assert_eq!(p, SHAM_P);
    }
}
