//! Text and structured renderings of a [`ForensicReport`].

use std::fmt::Write as _;

use fabcheck_core::battery::ForensicReport;
use fabcheck_core::dispersion::SamplingBasis;
use fabcheck_core::model::Category;
use fabcheck_core::TestOutcome;
use serde::{Deserialize, Serialize};

/// Bumped on any incompatible change to the structured layout.
pub const SCHEMA_VERSION: &str = "fabcheck.report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredReport {
    pub schema_version: String,
    pub generator: String,
    pub report: ForensicReport,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("unsupported schema version '{0}', expected '{SCHEMA_VERSION}'")]
    SchemaVersion(String),
    #[error("malformed structured report: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn emit_report(r: &ForensicReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => render_text(r).into_bytes(),
        ReportFormat::Structured => {
            let doc = StructuredReport {
                schema_version: SCHEMA_VERSION.into(),
                generator: concat!("fabcheck ", env!("CARGO_PKG_VERSION")).into(),
                report: r.clone(),
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("report serializes");
            out.push(b'\n');
            out
        }
    }
}

pub fn parse_structured(bytes: &[u8]) -> Result<ForensicReport, ReportError> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: String,
    }
    let v: Version = serde_json::from_slice(bytes)?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(v.schema_version));
    }
    let doc: StructuredReport = serde_json::from_slice(bytes)?;
    Ok(doc.report)
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn p_value(p: f64) -> String {
    if p == 0.0 || p >= 1e-4 {
        format!("{p:.4}")
    } else {
        format!("{p:.2e}")
    }
}

fn outcome_line(t: &TestOutcome) -> String {
    let df = match (t.df, t.df_denominator) {
        (Some(a), Some(b)) => format!(", df {a:.0}/{b:.0}"),
        (Some(a), None) if a.fract() == 0.0 => format!(", df {a:.0}"),
        (Some(a), None) => format!(", df {a:.2}"),
        _ => String::new(),
    };
    format!("{}: statistic {:.4}{df}, p = {}", t.test_name, t.statistic, p_value(t.p_value))
}

pub fn render_text(r: &ForensicReport) -> String {
    let cfg = &r.config_echo;
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "fabcheck report");
    let _ = writeln!(w, "points: {} ({} control)", r.dataset_summary.len(), r.control_points);

    let _ = writeln!(w, "\ntail factors (slide a, slide b, mean, sd, cv)");
    let width = r.dataset_summary.iter().map(|d| d.label.len()).max().unwrap_or(0);
    for d in &r.dataset_summary {
        let _ = writeln!(
            w,
            "  {:<width$}  {:.2}  {:.2}  mean {:.2}  sd {:.2}  cv {}",
            d.label,
            d.tf_a,
            d.tf_b,
            d.mean,
            d.sd,
            percent(d.cv)
        );
    }

    let _ = writeln!(
        w,
        "\nterminal digits (column {}, {} digit, n = {})",
        cfg.digit_column,
        cfg.digit_position,
        2 * r.dataset_summary.len()
    );
    if r.digit_tests.is_empty() {
        let _ = writeln!(w, "  not run");
    }
    for t in &r.digit_tests {
        let _ = writeln!(w, "  {}", outcome_line(t));
    }

    let _ = writeln!(w, "\ndispersion ({} control points)", r.dispersion.n_pairs);
    let _ = writeln!(w, "  intra-assay CV: {}", percent(r.dispersion.intra_cv));
    match r.dispersion.inter_cv {
        Some(cv) => {
            let _ = writeln!(w, "  inter-assay CV: {}", percent(cv));
        }
        None => {
            let _ = writeln!(w, "  inter-assay CV: n/a");
        }
    }

    let basis = match r.theoretical_moments.basis {
        SamplingBasis::Multinomial => "multinomial".to_string(),
        SamplingBasis::Hypergeometric { population } => format!("hypergeometric, N = {population}"),
    };
    let _ = writeln!(w, "\ntheoretical sampling ({basis}, {} cells)", cfg.simulation.cells_per_slide);
    let _ = writeln!(w, "  tail factor mean: {:.2}", r.theoretical_moments.mean);
    let _ = writeln!(w, "  tail factor sd: {:.2}", r.theoretical_moments.sd);
    let _ = writeln!(w, "  observed mean pair sd: {:.2}", r.observed_pair_sd);
    match r.theoretical_sd_ratio {
        Some(x) => {
            let _ = writeln!(w, "  theoretical / observed sd: {x:.1}");
        }
        None => {
            let _ = writeln!(w, "  theoretical / observed sd: n/a");
        }
    }

    let sim = &r.simulation;
    let pop = sim.population.counts.map(|c| c.to_string()).join("/");
    let _ = writeln!(
        w,
        "\nsimulation (population {pop}, {} replicates, seed {}, {})",
        sim.replicates, cfg.simulation.seed, sim.rng_algorithm
    );
    let _ = writeln!(w, "  simulated intra-assay CV: {}", percent(sim.sim_intra_cv));
    if let Some(cv) = sim.sim_inter_cv {
        let _ = writeln!(w, "  simulated inter-assay CV: {}", percent(cv));
    }
    let _ = writeln!(
        w,
        "  simulated tail factor mean: {:.2} (reported {:.2})",
        sim.sim_tf_mean, sim.real_tf_mean
    );
    let _ = writeln!(w, "  category  reported var  simulated var  variance p  mean p");
    for (k, row) in sim.fig2_data.iter().enumerate() {
        let vp = sim.per_category_variance_tests.get(k).map_or("n/a".into(), |t| p_value(t.p_value));
        let mp = sim.per_category_mean_tests.get(k).map_or("n/a".into(), |t| p_value(t.p_value));
        let _ = writeln!(
            w,
            "  {:<8}  {:>12.2}  {:>13.2}  {:>10}  {:>6}",
            row.category, row.reported_variance, row.simulated_variance, vp, mp
        );
    }
    let deficits: Vec<String> = sim
        .variance_deficits(cfg.alpha)
        .iter()
        .map(Category::to_string)
        .collect();
    if !deficits.is_empty() {
        let _ = writeln!(w, "  variance below simulation at alpha {}: {}", cfg.alpha, deficits.join(", "));
    }

    let _ = writeln!(w, "\nred flags");
    if r.verdicts.is_empty() {
        let _ = writeln!(w, "  no red flags raised");
    }
    for v in &r.verdicts {
        let _ = writeln!(w, "  [{}] {} (evidence: {})", v.severity, v.flag, v.evidence);
    }
    if !r.notes.is_empty() {
        let _ = writeln!(w, "\nnotes");
        for n in &r.notes {
            let _ = writeln!(w, "  {n}");
        }
    }
    s
}
