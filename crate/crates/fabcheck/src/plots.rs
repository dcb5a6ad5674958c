//! Plot-ready CSV files for the tail-factor and variance figures.

use std::io;
use std::path::{Path, PathBuf};

use fabcheck_core::battery::ForensicReport;
use fabcheck_core::model::Category;

pub const FIG1_FILE: &str = "fig1.csv";
pub const FIG2_FILE: &str = "fig2.csv";

/// The variance figure covers these categories.
pub const FIG2_CATEGORIES: [Category; 4] = [Category::A, Category::B, Category::C, Category::D];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("cannot write to {}: {source}", path.display())]
    Unwritable { path: PathBuf, source: io::Error },
    #[error("cannot write to {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

/// Writes `fig1.csv` and `fig2.csv` into an existing directory.
pub fn emit_plot_data(r: &ForensicReport, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    if !out_dir.is_dir() {
        return Err(PlotError::Unwritable {
            path: out_dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let fig1 = out_dir.join(FIG1_FILE);
    write_csv(&fig1, |w| {
        w.write_record([
            "point",
            "label",
            "reported_tf_a",
            "reported_tf_b",
            "simulated_tf_a",
            "simulated_tf_b",
            "reported_mean",
            "simulated_mean",
        ])?;
        for row in &r.simulation.fig1_data {
            w.write_record([
                row.point.to_string(),
                row.label.clone(),
                row.reported_tf_a.to_string(),
                row.reported_tf_b.to_string(),
                row.simulated_tf_a.to_string(),
                row.simulated_tf_b.to_string(),
                row.reported_mean.to_string(),
                row.simulated_mean.to_string(),
            ])?;
        }
        Ok(())
    })?;

    let fig2 = out_dir.join(FIG2_FILE);
    write_csv(&fig2, |w| {
        w.write_record(["category", "source", "variance", "mean"])?;
        for row in r.simulation.fig2_data.iter().filter(|row| FIG2_CATEGORIES.contains(&row.category)) {
            let c = row.category.to_string();
            w.write_record([&c, "reported", &row.reported_variance.to_string(), &row.reported_mean.to_string()])?;
            w.write_record([&c, "simulated", &row.simulated_variance.to_string(), &row.simulated_mean.to_string()])?;
        }
        Ok(())
    })?;
    Ok(vec![fig1, fig2])
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut csv::Writer<std::fs::File>) -> Result<(), csv::Error>,
) -> Result<(), PlotError> {
    let file = std::fs::File::create(path).map_err(|source| PlotError::Unwritable {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    let csv_err = |source| PlotError::Csv { path: path.to_path_buf(), source };
    body(&mut w).map_err(csv_err)?;
    w.flush().map_err(|source| PlotError::Unwritable { path: path.to_path_buf(), source })
}
