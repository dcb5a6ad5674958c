//! Optional TOML configuration file.
//!
//! Keys mirror the long `analyze` flags. Resolution order, lowest first:
//! built-in defaults, this file, the seed environment variable, flags.
//!
//! ```toml
//! control = "sham"
//! replicates = 200
//! seed = 42
//! digit-column = "A"
//! variance-test = "permutation"
//! permutation-rounds = 1999
//! ```

use std::path::{Path, PathBuf};

use fabcheck_core::digits::DigitPosition;
use fabcheck_core::model::Category;
use fabcheck_core::simulation::SamplingMode;
use serde::Deserialize;

use crate::report::ReportFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceTestKind {
    /// Two-sided F test on the variance ratio.
    F,
    /// Label-permutation test on the log variance ratio.
    Permutation,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub scale: Option<Vec<f64>>,
    pub population_size: Option<u64>,
    pub cells_per_slide: Option<u64>,
    pub replicates: Option<u32>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub severe_alpha: Option<f64>,
    pub digit_column: Option<Category>,
    pub digit_position: Option<DigitPosition>,
    pub control: Option<String>,
    pub variance_test: Option<VarianceTestKind>,
    pub permutation_rounds: Option<u32>,
    pub sampling: Option<SamplingMode>,
    pub theoretical_ratio_threshold: Option<f64>,
    pub format: Option<ReportFormat>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
}

pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let c: FileConfig = toml::from_str(
            r#"
            scale = [1.0, 2.0, 3.0, 4.0, 5.0]
            population-size = 20000
            cells-per-slide = 500
            replicates = 7
            seed = 9
            alpha = 0.01
            severe-alpha = 0.001
            digit-column = "B"
            digit-position = "second-to-last"
            control = "sham"
            variance-test = "permutation"
            permutation-rounds = 99
            sampling = "with-replacement"
            theoretical-ratio-threshold = 3.0
            format = "structured"
            "#,
        )
        .unwrap();
        assert_eq!(c.digit_column, Some(Category::B));
        assert_eq!(c.digit_position, Some(DigitPosition::SecondToLast));
        assert_eq!(c.sampling, Some(SamplingMode::WithReplacement));
        assert_eq!(c.variance_test, Some(VarianceTestKind::Permutation));
        assert_eq!(c.format, Some(ReportFormat::Structured));
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(toml::from_str::<FileConfig>("sed = 4").is_err());
    }
}
