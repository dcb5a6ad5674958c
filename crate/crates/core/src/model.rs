//! Domain types for duplicate-slide count tables and their structural checks.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Number of damage categories per slide.
pub const CATEGORY_COUNT: usize = 5;

/// Ordered damage category, from intact (`A`) to maximally fragmented (`E`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Category {
    A,
    B,
    C,
    D,
    E,
}

impl Category {
    pub const ALL: [Category; CATEGORY_COUNT] =
        [Category::A, Category::B, Category::C, Category::D, Category::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn from_letter(c: char) -> Option<Category> {
        match c.to_ascii_uppercase() {
            'A' => Some(Category::A),
            'B' => Some(Category::B),
            'C' => Some(Category::C),
            'D' => Some(Category::D),
            'E' => Some(Category::E),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("calibration weights must be positive and strictly increasing, got {0:?}")]
    InvalidScale([f64; CATEGORY_COUNT]),
    #[error("dataset failed validation with {} issue(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<ValidationIssue>),
}

/// Damage weights applied to the category counts, one per category.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "[f64; 5]", into = "[f64; 5]"))]
pub struct CalibrationScale([f64; CATEGORY_COUNT]);

impl CalibrationScale {
    /// The comet-assay weights 2.5, 12.5, 30, 67.5 and 97.5.
    pub const STANDARD: CalibrationScale = CalibrationScale([2.5, 12.5, 30.0, 67.5, 97.5]);

    pub fn new(weights: [f64; CATEGORY_COUNT]) -> Result<Self, ModelError> {
        let positive = weights.iter().all(|w| w.is_finite() && *w > 0.0);
        let increasing = weights.windows(2).all(|p| p[0] < p[1]);
        if positive && increasing {
            Ok(CalibrationScale(weights))
        } else {
            Err(ModelError::InvalidScale(weights))
        }
    }

    pub fn weights(&self) -> &[f64; CATEGORY_COUNT] {
        &self.0
    }

    pub fn weight(&self, c: Category) -> f64 {
        self.0[c.index()]
    }

    /// Multiplies every weight by `k` (`k > 0`).
    pub fn scaled(&self, k: f64) -> Result<Self, ModelError> {
        Self::new(self.0.map(|w| w * k))
    }
}

impl Default for CalibrationScale {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl TryFrom<[f64; CATEGORY_COUNT]> for CalibrationScale {
    type Error = ModelError;

    fn try_from(w: [f64; CATEGORY_COUNT]) -> Result<Self, ModelError> {
        Self::new(w)
    }
}

impl From<CalibrationScale> for [f64; CATEGORY_COUNT] {
    fn from(s: CalibrationScale) -> Self {
        s.0
    }
}

/// Per-slide cell counts.
///
/// Build through [`CategoryCounts::new`], which derives `total` from the
/// counts. The fields stay public so that externally assembled values can be
/// checked with [`validate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategoryCounts {
    pub counts: [i64; CATEGORY_COUNT],
    pub total: i64,
}

impl CategoryCounts {
    pub fn new(counts: [i64; CATEGORY_COUNT]) -> Self {
        CategoryCounts {
            counts,
            total: counts.iter().sum(),
        }
    }

    pub fn get(&self, c: Category) -> i64 {
        self.counts[c.index()]
    }

    fn issues(&self, index: usize, out: &mut Vec<ValidationIssue>) {
        if let Some((i, n)) = self.counts.iter().enumerate().find(|(_, n)| **n < 0) {
            out.push(ValidationIssue::new(
                index,
                IssueKind::NegativeCount,
                alloc::format!("category {} has negative count {}", Category::ALL[i], n),
            ));
        }
        let sum: i64 = self.counts.iter().sum();
        if sum != self.total {
            out.push(ValidationIssue::new(
                index,
                IssueKind::SumMismatch,
                alloc::format!("counts sum to {} but total is {}", sum, self.total),
            ));
        }
        if self.total <= 0 {
            out.push(ValidationIssue::new(
                index,
                IssueKind::Empty,
                alloc::format!("slide total {} is not positive", self.total),
            ));
        }
    }
}

/// One experimental condition scored on two replicate slides.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DuplicatePoint {
    pub label: String,
    pub slide_a: CategoryCounts,
    pub slide_b: CategoryCounts,
}

impl DuplicatePoint {
    pub fn new(label: impl Into<String>, a: [i64; CATEGORY_COUNT], b: [i64; CATEGORY_COUNT]) -> Self {
        DuplicatePoint {
            label: label.into(),
            slide_a: CategoryCounts::new(a),
            slide_b: CategoryCounts::new(b),
        }
    }

    pub fn slides(&self) -> [&CategoryCounts; 2] {
        [&self.slide_a, &self.slide_b]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub points: Vec<DuplicatePoint>,
    pub scale: CalibrationScale,
}

impl Dataset {
    /// Builds a dataset and rejects it if [`validate_dataset`] reports anything.
    pub fn new(points: Vec<DuplicatePoint>, scale: CalibrationScale) -> Result<Self, ModelError> {
        let d = Dataset { points, scale };
        let issues = validate_dataset(&d);
        if issues.is_empty() {
            Ok(d)
        } else {
            Err(ModelError::Invalid(issues))
        }
    }

    /// The common slide total, taken from the first slide.
    pub fn slide_total(&self) -> Option<i64> {
        self.points.first().map(|p| p.slide_a.total)
    }

    pub fn slides(&self) -> impl Iterator<Item = &CategoryCounts> + '_ {
        self.points.iter().flat_map(|p| p.slides())
    }

    /// Counts of one category across all slides, in slide order.
    pub fn category_column(&self, c: Category) -> Vec<i64> {
        self.slides().map(|s| s.get(c)).collect()
    }

    /// Sum of every slide, per category.
    pub fn pooled_counts(&self) -> [i64; CATEGORY_COUNT] {
        let mut pooled = [0i64; CATEGORY_COUNT];
        for s in self.slides() {
            for (p, n) in pooled.iter_mut().zip(s.counts) {
                *p += n;
            }
        }
        pooled
    }

    /// Points whose label starts with `prefix`, keeping the scale.
    pub fn filter_label_prefix(&self, prefix: &str) -> Dataset {
        Dataset {
            points: self
                .points
                .iter()
                .filter(|p| p.label.starts_with(prefix))
                .cloned()
                .collect(),
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum IssueKind {
    SumMismatch,
    NegativeCount,
    TotalMismatch,
    Empty,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueKind::SumMismatch => "sum-mismatch",
            IssueKind::NegativeCount => "negative-count",
            IssueKind::TotalMismatch => "total-mismatch",
            IssueKind::Empty => "empty",
        })
    }
}

/// A structural problem found by [`validate_dataset`].
///
/// `point_index` is `None` for dataset-level problems (no points at all).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationIssue {
    pub point_index: Option<usize>,
    pub kind: IssueKind,
    pub message: String,
}

impl ValidationIssue {
    fn new(index: usize, kind: IssueKind, message: String) -> Self {
        ValidationIssue {
            point_index: Some(index),
            kind,
            message,
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.point_index {
            Some(i) => write!(f, "{} at point {}: {}", self.kind, i, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

/// Checks every structural invariant; an empty result means the dataset is usable.
pub fn validate_dataset(d: &Dataset) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if d.points.is_empty() {
        issues.push(ValidationIssue {
            point_index: None,
            kind: IssueKind::Empty,
            message: "dataset has no points".into(),
        });
        return issues;
    }
    let common = d.points[0].slide_a.total;
    for (i, p) in d.points.iter().enumerate() {
        p.slide_a.issues(i, &mut issues);
        p.slide_b.issues(i, &mut issues);
        if p.slide_a.total != p.slide_b.total {
            issues.push(ValidationIssue::new(
                i,
                IssueKind::TotalMismatch,
                alloc::format!(
                    "'{}' slides have totals {} and {}",
                    p.label,
                    p.slide_a.total,
                    p.slide_b.total
                ),
            ));
        } else if p.slide_a.total != common {
            issues.push(ValidationIssue::new(
                i,
                IssueKind::TotalMismatch,
                alloc::format!(
                    "'{}' slide total {} differs from dataset total {}",
                    p.label,
                    p.slide_a.total,
                    common
                ),
            ));
        }
    }
    issues
}
