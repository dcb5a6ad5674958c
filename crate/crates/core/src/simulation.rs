//! Null model for honest data: score slides drawn at random from a pooled
//! population of cells.
//!
//! The pooled counts of the observed slides are rescaled to a population of
//! `N` cells (10,000 by default). Each simulated slide shuffles that
//! population and scores the first `n` cells, which is the same as a
//! multivariate hypergeometric draw. Nothing but sampling noise enters, so
//! the simulated variation is the least that real replicate data can show.
//!
//! # Random streams
//!
//! Every slide gets its own ChaCha8 stream, derived from the run seed and the
//! slide coordinates (see [`slide_rng`]). Results therefore do not depend on
//! the order in which slides or replicates are evaluated.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dispersion::{
    self, variance_permutation_test, variance_ratio_test, welch_t_test, DispersionError, VarianceTest,
};
use crate::model::{
    validate_dataset, CalibrationScale, Category, CategoryCounts, Dataset, DuplicatePoint,
    ValidationIssue, CATEGORY_COUNT,
};
use crate::stats::{mean, median, sample_variance};
use crate::tail_factor::{dataset_tail_factors, TailFactorError};
use crate::TestOutcome;

/// Identifier of the random stream layout; bump on any change to it.
pub const RNG_ALGORITHM: &str = "chacha8-slide-streams-v1";
pub const DEFAULT_POPULATION_SIZE: u64 = 10_000;
pub const MIN_POPULATION_SIZE: u64 = 1_000;

const TEST_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error("population target {0} is below the minimum of {MIN_POPULATION_SIZE}")]
    TargetTooSmall(u64),
    #[error("dataset is invalid: {}", .0[0])]
    Invalid(Vec<ValidationIssue>),
    #[error("cannot draw {n} cells without replacement from {size}")]
    DrawTooLarge { n: u64, size: u64 },
    #[error("population counts sum to {sum}, not {size}")]
    PopulationMismatch { sum: u64, size: u64 },
    #[error("population is empty")]
    EmptyPopulation,
    #[error("real slides hold {real} cells but the simulation scores {simulated}")]
    SlideTotalMismatch { real: i64, simulated: u64 },
    #[error("real dataset has {real} points but the simulation has {simulated}")]
    PointCountMismatch { real: usize, simulated: usize },
    #[error(transparent)]
    TailFactor(#[from] TailFactorError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

/// A finite population of cells by category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopulationSpec {
    pub counts: [u64; CATEGORY_COUNT],
    pub size: u64,
}

impl PopulationSpec {
    pub fn new(counts: [u64; CATEGORY_COUNT]) -> Result<Self, SimulationError> {
        let size = counts.iter().sum();
        if size == 0 {
            return Err(SimulationError::EmptyPopulation);
        }
        Ok(PopulationSpec { counts, size })
    }

    fn check(&self) -> Result<(), SimulationError> {
        let sum = self.counts.iter().sum();
        if sum != self.size {
            return Err(SimulationError::PopulationMismatch { sum, size: self.size });
        }
        if sum == 0 {
            return Err(SimulationError::EmptyPopulation);
        }
        Ok(())
    }

    pub fn probabilities(&self) -> [f64; CATEGORY_COUNT] {
        self.counts.map(|c| c as f64 / self.size as f64)
    }
}

/// Pools every slide of `d` and rescales the pool to exactly `target_size` cells.
///
/// Rounding uses the largest-remainder method, ties going to the earlier
/// category, so the result always sums to `target_size`.
pub fn build_population(d: &Dataset, target_size: u64) -> Result<PopulationSpec, SimulationError> {
    let issues = validate_dataset(d);
    if !issues.is_empty() {
        return Err(SimulationError::Invalid(issues));
    }
    if target_size < MIN_POPULATION_SIZE {
        return Err(SimulationError::TargetTooSmall(target_size));
    }
    let pooled = d.pooled_counts().map(|c| c as u128);
    let total: u128 = pooled.iter().sum();
    let target = target_size as u128;

    let mut counts = [0u64; CATEGORY_COUNT];
    let mut remainders = [(0u128, 0usize); CATEGORY_COUNT];
    for (i, &c) in pooled.iter().enumerate() {
        let scaled = c * target;
        counts[i] = (scaled / total) as u64;
        remainders[i] = (scaled % total, i);
    }
    let assigned: u64 = counts.iter().sum();
    // stable sort keeps lower indices first among equal remainders
    remainders.sort_by_key(|r| core::cmp::Reverse(r.0));
    for &(_, i) in remainders.iter().take((target_size - assigned) as usize) {
        counts[i] += 1;
    }
    PopulationSpec::new(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SamplingMode {
    /// Shuffle the population and score the first `n` cells.
    #[default]
    WithoutReplacement,
    /// Independent draws from the population frequencies.
    WithReplacement,
}

/// Draws one slide of `n` cells from `pop`.
pub fn draw_slide<R: Rng + ?Sized>(
    pop: &PopulationSpec,
    n: u64,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<CategoryCounts, SimulationError> {
    pop.check()?;
    let mut remaining = pop.counts;
    let mut left = pop.size;
    if mode == SamplingMode::WithoutReplacement && n > left {
        return Err(SimulationError::DrawTooLarge { n, size: left });
    }
    let mut drawn = [0i64; CATEGORY_COUNT];
    for _ in 0..n {
        // position of the next cell in the shuffled order
        let mut u = rng.random_range(0..left);
        let mut k = 0;
        while u >= remaining[k] {
            u -= remaining[k];
            k += 1;
        }
        drawn[k] += 1;
        if mode == SamplingMode::WithoutReplacement {
            remaining[k] -= 1;
            left -= 1;
        }
    }
    Ok(CategoryCounts::new(drawn))
}

/// Stream for one slide: `seed` picks the key, the coordinates pick the stream.
///
/// Stream id = `replicate << 32 | point << 1 | slide`. Replicates must stay
/// below `2^31` and points below `2^31`; the top bit is reserved for the
/// streams used by permutation tests.
pub fn slide_rng(seed: u64, replicate: u32, point: u32, slide: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replicate as u64) << 32) | ((point as u64) << 1) | (slide as u64 & 1));
    rng
}

fn test_rng(seed: u64, replicate: u32, category: Category) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TEST_STREAM_BIT | ((replicate as u64) << 8) | category.index() as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationConfig {
    /// Duplicate pairs per simulated dataset.
    pub n_points: u32,
    pub cells_per_slide: u64,
    pub seed: u64,
    /// Simulated datasets per battery run.
    pub replicates: u32,
    pub sampling: SamplingMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_points: 12,
            cells_per_slide: 500,
            seed: 0,
            replicates: 100,
            sampling: SamplingMode::WithoutReplacement,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.n_points == 0 || self.n_points >= 1 << 31 {
            return Err(SimulationError::InvalidConfig("n_points must be in 1..2^31"));
        }
        if self.cells_per_slide == 0 {
            return Err(SimulationError::InvalidConfig("cells_per_slide must be positive"));
        }
        if self.replicates == 0 || self.replicates >= 1 << 31 {
            return Err(SimulationError::InvalidConfig("replicates must be in 1..2^31"));
        }
        Ok(())
    }
}

/// First replicate of [`simulate_replicate`].
pub fn simulate_dataset(
    pop: &PopulationSpec,
    cfg: &SimulationConfig,
    scale: &CalibrationScale,
) -> Result<Dataset, SimulationError> {
    simulate_replicate(pop, cfg, scale, 0)
}

/// `cfg.n_points` duplicate pairs, every slide an independent draw.
pub fn simulate_replicate(
    pop: &PopulationSpec,
    cfg: &SimulationConfig,
    scale: &CalibrationScale,
    replicate: u32,
) -> Result<Dataset, SimulationError> {
    cfg.validate()?;
    if cfg.sampling == SamplingMode::WithoutReplacement && cfg.cells_per_slide > pop.size {
        return Err(SimulationError::DrawTooLarge {
            n: cfg.cells_per_slide,
            size: pop.size,
        });
    }
    let slide = |point: u32, s: u8| {
        let mut rng = slide_rng(cfg.seed, replicate, point, s);
        draw_slide(pop, cfg.cells_per_slide, cfg.sampling, &mut rng)
    };
    let points = (0..cfg.n_points)
        .map(|i| {
            Ok(DuplicatePoint {
                label: alloc::format!("sim {}", i + 1),
                slide_a: slide(i, 0)?,
                slide_b: slide(i, 1)?,
            })
        })
        .collect::<Result<Vec<_>, SimulationError>>()?;
    Ok(Dataset { points, scale: *scale })
}

/// One row of the reported-versus-simulated tail factor plot.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fig1Row {
    pub point: usize,
    pub label: String,
    pub reported_tf_a: f64,
    pub reported_tf_b: f64,
    pub simulated_tf_a: f64,
    pub simulated_tf_b: f64,
    pub reported_mean: f64,
    pub simulated_mean: f64,
}

/// Across-slide count variance of one category.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fig2Row {
    pub category: Category,
    pub reported_mean: f64,
    pub reported_variance: f64,
    /// Medians over replicates.
    pub simulated_mean: f64,
    pub simulated_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationComparison {
    pub rng_algorithm: String,
    pub population: PopulationSpec,
    pub replicates: u32,
    /// Medians over replicates.
    pub sim_intra_cv: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::option"))]
    pub sim_inter_cv: Option<f64>,
    pub sim_tf_mean: f64,
    pub real_tf_mean: f64,
    /// One per category A..E; statistic and p are medians over replicates.
    pub per_category_variance_tests: Vec<TestOutcome>,
    pub per_category_mean_tests: Vec<TestOutcome>,
    /// Series from the first replicate.
    pub fig1_data: Vec<Fig1Row>,
    pub fig2_data: Vec<Fig2Row>,
}

impl SimulationComparison {
    /// Categories whose variance test rejects at `alpha` with the reported
    /// variance below the simulated one.
    pub fn variance_deficits(&self, alpha: f64) -> Vec<Category> {
        self.per_category_variance_tests
            .iter()
            .zip(&self.fig2_data)
            .filter(|(t, row)| t.rejects(alpha) && row.reported_variance < row.simulated_variance)
            .map(|(_, row)| row.category)
            .collect()
    }
}

struct ReplicateStats {
    intra: f64,
    inter: Option<f64>,
    tf_mean: f64,
    variance: Vec<TestOutcome>,
    means: Vec<TestOutcome>,
    column_mean: [f64; CATEGORY_COUNT],
    column_variance: [f64; CATEGORY_COUNT],
}

fn columns(d: &Dataset) -> [Vec<f64>; CATEGORY_COUNT] {
    Category::ALL.map(|c| d.category_column(c).into_iter().map(|v| v as f64).collect())
}

fn slide_tf_mean(d: &Dataset) -> f64 {
    let tfs: Vec<f64> = d.slides().map(|s| crate::tail_factor(s, &d.scale)).collect();
    mean(&tfs)
}

fn compare_variance(
    real: &[f64],
    sim: &[f64],
    method: VarianceTest,
    rng: impl FnOnce() -> ChaCha8Rng,
) -> Result<TestOutcome, SimulationError> {
    let outcome = match method {
        VarianceTest::FRatio => variance_ratio_test(real, sim),
        VarianceTest::Permutation { rounds } => variance_permutation_test(real, sim, rounds, &mut rng()),
    };
    match outcome {
        Ok(t) => Ok(t),
        // two constant columns carry no evidence either way
        Err(DispersionError::Degenerate) => {
            let name = match method {
                VarianceTest::FRatio => dispersion::F_TEST,
                VarianceTest::Permutation { .. } => dispersion::PERMUTATION_TEST,
            };
            Ok(TestOutcome::new(name, 1.0, None, 1.0))
        }
        Err(e) => Err(e.into()),
    }
}

fn compare_means(real: &[f64], sim: &[f64]) -> Result<TestOutcome, SimulationError> {
    match welch_t_test(real, sim) {
        Ok(t) => Ok(t),
        Err(DispersionError::Degenerate) => Ok(TestOutcome::new(dispersion::WELCH_TEST, 0.0, None, 1.0)),
        Err(e) => Err(e.into()),
    }
}

fn median_outcome(outcomes: &[&TestOutcome]) -> TestOutcome {
    let pick = |f: fn(&TestOutcome) -> Option<f64>| {
        let v: Vec<f64> = outcomes.iter().filter_map(|t| f(t)).collect();
        (!v.is_empty()).then(|| median(&v))
    };
    TestOutcome {
        test_name: outcomes[0].test_name.clone(),
        statistic: pick(|t| Some(t.statistic)).unwrap_or(f64::NAN),
        df: pick(|t| t.df),
        df_denominator: pick(|t| t.df_denominator),
        p_value: pick(|t| Some(t.p_value)).unwrap_or(1.0),
    }
}

/// Compares `real` against `cfg.replicates` simulated datasets drawn from `pop`.
///
/// Per replicate this computes the simulated intra/inter CVs and grand tail
/// factor, and for every category a variance test and a Welch mean test
/// between the real and simulated slide counts. Replicates are summarised by
/// medians.
pub fn simulation_battery(
    real: &Dataset,
    pop: &PopulationSpec,
    cfg: &SimulationConfig,
    variance_test: VarianceTest,
) -> Result<SimulationComparison, SimulationError> {
    cfg.validate()?;
    let real_summaries = dataset_tail_factors(real)?;
    let real_total = real.slide_total().unwrap_or(0);
    if real_total != cfg.cells_per_slide as i64 {
        return Err(SimulationError::SlideTotalMismatch {
            real: real_total,
            simulated: cfg.cells_per_slide,
        });
    }
    if real.points.len() != cfg.n_points as usize {
        return Err(SimulationError::PointCountMismatch {
            real: real.points.len(),
            simulated: cfg.n_points as usize,
        });
    }
    let real_columns = columns(real);

    let mut fig1_data = Vec::new();
    let mut runs = Vec::with_capacity(cfg.replicates as usize);
    for r in 0..cfg.replicates {
        let sim = simulate_replicate(pop, cfg, &real.scale, r)?;
        let summaries = dataset_tail_factors(&sim)?;
        let sim_columns = columns(&sim);
        let mut variance = Vec::with_capacity(CATEGORY_COUNT);
        let mut means = Vec::with_capacity(CATEGORY_COUNT);
        for c in Category::ALL {
            let (x, y) = (&real_columns[c.index()], &sim_columns[c.index()]);
            variance.push(compare_variance(x, y, variance_test, || test_rng(cfg.seed, r, c))?);
            means.push(compare_means(x, y)?);
        }
        if r == 0 {
            fig1_data = real_summaries
                .iter()
                .zip(&summaries)
                .enumerate()
                .map(|(i, (rs, ss))| Fig1Row {
                    point: i + 1,
                    label: rs.label.clone(),
                    reported_tf_a: rs.tf_a,
                    reported_tf_b: rs.tf_b,
                    simulated_tf_a: ss.tf_a,
                    simulated_tf_b: ss.tf_b,
                    reported_mean: rs.mean,
                    simulated_mean: ss.mean,
                })
                .collect();
        }
        runs.push(ReplicateStats {
            intra: dispersion::intra_assay_cv(&summaries)?,
            inter: dispersion::inter_assay_cv(&summaries).ok(),
            tf_mean: slide_tf_mean(&sim),
            variance,
            means,
            column_mean: sim_columns.each_ref().map(|c| mean(c)),
            column_variance: sim_columns.each_ref().map(|c| sample_variance(c)),
        });
    }

    let med = |f: &dyn Fn(&ReplicateStats) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
    let inter: Vec<f64> = runs.iter().filter_map(|r| r.inter).collect();
    let per_category = |pick: fn(&ReplicateStats) -> &Vec<TestOutcome>| -> Vec<TestOutcome> {
        (0..CATEGORY_COUNT)
            .map(|k| median_outcome(&runs.iter().map(|r| &pick(r)[k]).collect::<Vec<_>>()))
            .collect()
    };
    let fig2_data = Category::ALL
        .iter()
        .map(|&c| {
            let k = c.index();
            Fig2Row {
                category: c,
                reported_mean: mean(&real_columns[k]),
                reported_variance: sample_variance(&real_columns[k]),
                simulated_mean: med(&|r| r.column_mean[k]),
                simulated_variance: med(&|r| r.column_variance[k]),
            }
        })
        .collect();

    Ok(SimulationComparison {
        rng_algorithm: RNG_ALGORITHM.into(),
        population: *pop,
        replicates: cfg.replicates,
        sim_intra_cv: med(&|r| r.intra),
        sim_inter_cv: (!inter.is_empty()).then(|| median(&inter)),
        sim_tf_mean: med(&|r| r.tf_mean),
        real_tf_mean: slide_tf_mean(real),
        per_category_variance_tests: per_category(|r| &r.variance),
        per_category_mean_tests: per_category(|r| &r.means),
        fig1_data,
        fig2_data,
    })
}
