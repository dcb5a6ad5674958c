//! Terminal-digit analysis.
//!
//! Counts in genuine data carry near-uniform trailing digits; invented
//! numbers usually do not. Digits are taken from the decimal representation
//! of each count and tested against the discrete uniform distribution on
//! `0..=9` with a chi-square goodness-of-fit test (9 degrees of freedom, no
//! continuity correction) and a one-sample Kolmogorov-Smirnov test. The KS
//! test uses the continuous-case statistic and the asymptotic Kolmogorov
//! p-value, which is conservative for discrete data.

use alloc::vec::Vec;
use core::fmt;

use crate::special::{chi_square_sf, kolmogorov_sf};
use crate::TestOutcome;

pub const CHI_SQUARE_TEST: &str = "chi-square uniform digits";
pub const KS_TEST: &str = "kolmogorov-smirnov uniform digits";

/// Smallest sample the chi-square test accepts (one expected count per digit).
pub const MIN_CHI_SQUARE_SAMPLE: u64 = 10;
pub const MIN_KS_SAMPLE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DigitError {
    #[error("no values to extract digits from")]
    Empty,
    #[error("value {value} at index {index} has no {position} digit")]
    TooShort {
        index: usize,
        value: u64,
        position: DigitPosition,
    },
    #[error("digit {0} outside 0..=9")]
    OutOfRange(u8),
    #[error("sample of {size} is too small, need at least {min}")]
    SampleTooSmall { size: u64, min: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DigitPosition {
    #[default]
    Last,
    SecondToLast,
}

impl fmt::Display for DigitPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DigitPosition::Last => "last",
            DigitPosition::SecondToLast => "second-to-last",
        })
    }
}

impl core::str::FromStr for DigitPosition {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(DigitPosition::Last),
            "second-to-last" => Ok(DigitPosition::SecondToLast),
            other => Err(alloc::format!("unknown digit position '{other}'")),
        }
    }
}

/// Non-empty sequence of decimal digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitSample {
    digits: Vec<u8>,
    position: DigitPosition,
}

impl DigitSample {
    pub fn new(digits: Vec<u8>, position: DigitPosition) -> Result<Self, DigitError> {
        if digits.is_empty() {
            return Err(DigitError::Empty);
        }
        if let Some(&d) = digits.iter().find(|&&d| d > 9) {
            return Err(DigitError::OutOfRange(d));
        }
        Ok(DigitSample { digits, position })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn position(&self) -> DigitPosition {
        self.position
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

pub fn extract_digits(values: &[u64], position: DigitPosition) -> Result<DigitSample, DigitError> {
    let digits = values
        .iter()
        .enumerate()
        .map(|(index, &value)| match position {
            DigitPosition::Last => Ok((value % 10) as u8),
            DigitPosition::SecondToLast if value >= 10 => Ok(((value / 10) % 10) as u8),
            DigitPosition::SecondToLast => Err(DigitError::TooShort {
                index,
                value,
                position,
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    DigitSample::new(digits, position)
}

pub fn digit_histogram(s: &DigitSample) -> [u64; 10] {
    let mut counts = [0u64; 10];
    for &d in &s.digits {
        counts[d as usize] += 1;
    }
    counts
}

/// Pearson chi-square against equal digit frequencies, 9 degrees of freedom.
pub fn chi_square_uniform(counts: &[u64; 10]) -> Result<TestOutcome, DigitError> {
    let n: u64 = counts.iter().sum();
    if n < MIN_CHI_SQUARE_SAMPLE {
        return Err(DigitError::SampleTooSmall {
            size: n,
            min: MIN_CHI_SQUARE_SAMPLE,
        });
    }
    let expected = n as f64 / 10.0;
    let statistic: f64 = counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(TestOutcome::new(
        CHI_SQUARE_TEST,
        statistic,
        Some(9.0),
        chi_square_sf(statistic, 9),
    ))
}

/// `D = max_k |F_emp(k) - (k + 1) / 10|` with the asymptotic p-value of `sqrt(n) * D`.
pub fn ks_uniform_digits(s: &DigitSample) -> Result<TestOutcome, DigitError> {
    let n = s.len();
    if n < MIN_KS_SAMPLE {
        return Err(DigitError::SampleTooSmall {
            size: n as u64,
            min: MIN_KS_SAMPLE as u64,
        });
    }
    let d = ks_statistic(&digit_histogram(s));
    let p = kolmogorov_sf(libm::sqrt(n as f64) * d);
    Ok(TestOutcome::new(KS_TEST, d, None, p))
}

fn ks_statistic(counts: &[u64; 10]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut cumulative = 0u64;
    let mut d = 0.0f64;
    for (k, &c) in counts.iter().enumerate() {
        cumulative += c;
        // integer numerators keep exact zeros exact
        let gap = (10 * cumulative) as f64 - ((k as u64 + 1) * n) as f64;
        d = d.max(libm::fabs(gap) / (10 * n) as f64);
    }
    d
}
