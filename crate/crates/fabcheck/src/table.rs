//! Replicate count tables.
//!
//! One row per slide: `label,A,B,C,D,E`. The two slides of a duplicate pair
//! share a label; points keep the order in which their labels first appear.
//! Lines starting with `#` are comments.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use fabcheck_core::model::{validate_dataset, CalibrationScale, Dataset, DuplicatePoint, ValidationIssue, CATEGORY_COUNT};

pub const HEADER: [&str; 6] = ["label", "A", "B", "C", "D", "E"];

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("table has no data rows")]
    Empty,
    #[error("expected header {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: count '{value}' is not an integer")]
    NotAnInteger { line: u64, value: String },
    #[error("label '{label}' has {slides} slide row(s), expected 2")]
    SlideCount { label: String, slides: usize },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationIssue>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

pub fn read_dataset(path: &Path, scale: CalibrationScale) -> Result<Dataset, TableError> {
    let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, scale)
}

pub fn parse_dataset(text: &str, scale: CalibrationScale) -> Result<Dataset, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader.headers()?.clone();
    let matches = header.len() == HEADER.len()
        && header.iter().zip(HEADER).all(|(h, e)| h.eq_ignore_ascii_case(e));
    if !matches {
        return Err(TableError::Header {
            expected: HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut slides: HashMap<String, Vec<[i64; CATEGORY_COUNT]>> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(TableError::Malformed {
                line,
                message: format!("expected {} fields, found {}", HEADER.len(), record.len()),
            });
        }
        let label = record[0].to_string();
        if label.is_empty() {
            return Err(TableError::Malformed { line, message: "empty label".into() });
        }
        let mut counts = [0i64; CATEGORY_COUNT];
        for (k, c) in counts.iter_mut().enumerate() {
            let field = &record[k + 1];
            *c = field.parse().map_err(|_| TableError::NotAnInteger {
                line,
                value: field.to_string(),
            })?;
        }
        slides
            .entry(label.clone())
            .or_insert_with(|| {
                order.push(label);
                Vec::new()
            })
            .push(counts);
    }
    if order.is_empty() {
        return Err(TableError::Empty);
    }

    let mut points = Vec::with_capacity(order.len());
    for label in order {
        let rows = &slides[&label];
        if rows.len() != 2 {
            return Err(TableError::SlideCount { slides: rows.len(), label });
        }
        points.push(DuplicatePoint::new(label, rows[0], rows[1]));
    }
    let d = Dataset { points, scale };
    let issues = validate_dataset(&d);
    if issues.is_empty() {
        Ok(d)
    } else {
        Err(TableError::Invalid(issues))
    }
}

/// Canonical form: header, then both slides of each point in order, LF endings.
pub fn write_dataset<W: io::Write>(d: &Dataset, out: W) -> Result<(), TableError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for p in &d.points {
        for s in p.slides() {
            let mut row = vec![p.label.clone()];
            row.extend(s.counts.iter().map(ToString::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|source| TableError::Io { path: "<output>".into(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use fabcheck_core::model::IssueKind;

    const SMALL: &str = "label,A,B,C,D,E\nx,442,40,12,3,3\nx,439,39,16,3,3\ny,450,39,9,2,0\ny,451,37,10,0,2\n";

    fn parse(text: &str) -> Result<Dataset, TableError> {
        parse_dataset(text, CalibrationScale::STANDARD)
    }

    #[test]
    fn parses_pairs_in_label_order() {
        let d = parse(SMALL).unwrap();
        assert_eq!(d.points.len(), 2);
        assert_eq!(d.points[0].label, "x");
        assert_eq!(d.points[0].slide_b.counts, [439, 39, 16, 3, 3]);
        assert_eq!(d.slide_total(), Some(500));
    }

    #[test]
    fn comments_whitespace_and_interleaving() {
        let text = "# note\nlabel, A, B, C, D, E\ny, 450,39,9,2,0\nx,442,40,12,3,3\n# mid\ny,451,37,10,0,2\nx,439,39,16,3,3\n";
        let d = parse(text).unwrap();
        assert_eq!(d.points[0].label, "y");
        assert_eq!(d.points[1].slide_a.counts, [442, 40, 12, 3, 3]);
    }

    #[test]
    fn canonical_text_round_trips_byte_for_byte() {
        let d = parse(SMALL).unwrap();
        let mut out = Vec::new();
        write_dataset(&d, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SMALL);
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse("label,A,B,C,D,E\n"), Err(TableError::Empty)));
        assert!(matches!(parse("name,A,B,C,D,E\nx,1,1,1,1,1\n"), Err(TableError::Header { .. })));
        assert!(matches!(
            parse("label,A,B,C,D,E\nx,1,1,1,1\n"),
            Err(TableError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            parse("label,A,B,C,D,E\nx,1,1,1,1,1\nx,1,1,1,one,1\n"),
            Err(TableError::NotAnInteger { line: 3, .. })
        ));
        assert!(matches!(
            parse("label,A,B,C,D,E\nx,1,1,1,1,1\n"),
            Err(TableError::SlideCount { slides: 1, .. })
        ));
    }

    #[test]
    fn validation_issues_surface() {
        let Err(TableError::Invalid(issues)) = parse("label,A,B,C,D,E\nx,5,-1,0,0,0\nx,4,0,0,0,0\n") else {
            panic!("expected validation failure");
        };
        assert!(issues.iter().any(|i| i.kind == IssueKind::NegativeCount));
        let Err(TableError::Invalid(issues)) = parse("label,A,B,C,D,E\nx,5,0,0,0,0\nx,4,0,0,0,0\n") else {
            panic!("expected validation failure");
        };
        assert!(issues.iter().any(|i| i.kind == IssueKind::TotalMismatch));
    }
}
