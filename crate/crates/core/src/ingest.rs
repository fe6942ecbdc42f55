//! Event-data ingestion and serialisation.
//!
//! Two input formats: CSV rows `replicate,time` (optional header line) and
//! plain text with one event time per line (a single replicate). The CSV
//! flavour understands two comment directives,
//! `# replicates=N` and `# horizon=T`, which let a file carry replicates
//! with no events and the exact observation window; [`write_events_csv`]
//! emits both, so its output re-ingests losslessly.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::EventSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Plain,
}

impl EventFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "plain" => Ok(EventFormat::Plain),
            other => Err(Error::Config(format!("unknown event format '{other}'"))),
        }
    }
}

/// Ingestion result: the series plus anything the caller should surface.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub series: EventSeries,
    pub warnings: Vec<String>,
    /// True when no horizon was supplied (argument or file directive) and
    /// the maximum event time was used instead.
    pub horizon_from_data: bool,
}

pub fn ingest_events_path(
    path: &Path,
    format: EventFormat,
    horizon: Option<f64>,
) -> Result<Ingested> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    ingest_events(BufReader::new(file), format, horizon)
}

/// Parse events from a reader. An explicit `horizon` argument wins over a
/// `# horizon=` directive; with neither, the maximum event time is used and
/// flagged.
pub fn ingest_events(
    reader: impl BufRead,
    format: EventFormat,
    horizon: Option<f64>,
) -> Result<Ingested> {
    let mut warnings = Vec::new();
    let mut declared_replicates: Option<usize> = None;
    let mut declared_horizon: Option<f64> = None;
    // (label, time) pairs; plain format gets a single implicit label.
    let mut rows: Vec<(u64, f64)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        let line_no = idx + 1;
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("replicates=") {
                declared_replicates = Some(v.trim().parse().map_err(|_| {
                    Error::Data(format!("line {line_no}: bad replicate count '{v}'"))
                })?);
            } else if let Some(v) = comment.strip_prefix("horizon=") {
                declared_horizon = Some(v.trim().parse().map_err(|_| {
                    Error::Data(format!("line {line_no}: bad horizon '{v}'"))
                })?);
            }
            continue;
        }
        match format {
            EventFormat::Csv => {
                if trimmed.eq_ignore_ascii_case("replicate,time") {
                    continue;
                }
                let mut parts = trimmed.split(',');
                let (rep, time) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(r), Some(t), None) => (r.trim(), t.trim()),
                    _ => {
                        return Err(Error::Data(format!(
                            "line {line_no}: expected 'replicate,time', got '{trimmed}'"
                        )))
                    }
                };
                let label: u64 = rep.parse().map_err(|_| {
                    Error::Data(format!("line {line_no}: bad replicate label '{rep}'"))
                })?;
                if label == 0 {
                    return Err(Error::Data(format!(
                        "line {line_no}: replicate labels must be positive"
                    )));
                }
                let t: f64 = time.parse().map_err(|_| {
                    Error::Data(format!("line {line_no}: bad event time '{time}'"))
                })?;
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::Data(format!(
                        "line {line_no}: event time {t} must be finite and >= 0"
                    )));
                }
                rows.push((label, t));
            }
            EventFormat::Plain => {
                let t: f64 = trimmed.parse().map_err(|_| {
                    Error::Data(format!("line {line_no}: bad event time '{trimmed}'"))
                })?;
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::Data(format!(
                        "line {line_no}: event time {t} must be finite and >= 0"
                    )));
                }
                rows.push((1, t));
            }
        }
    }

    let replicates = match declared_replicates {
        Some(n) => {
            if n == 0 {
                return Err(Error::Data("declared replicate count must be positive".into()));
            }
            let mut replicates: Vec<Vec<f64>> = vec![Vec::new(); n];
            for (label, t) in rows {
                if label as usize > n {
                    return Err(Error::Data(format!(
                        "replicate label {label} exceeds the declared count {n}"
                    )));
                }
                replicates[label as usize - 1].push(t);
            }
            replicates
        }
        None => {
            // Group by label, relabelling to 1..n in ascending label order.
            let mut labels: Vec<u64> = rows.iter().map(|&(l, _)| l).collect();
            labels.sort_unstable();
            labels.dedup();
            if labels.is_empty() {
                warnings
                    .push("input contains no events; treating as one empty replicate".into());
                labels.push(1);
            } else if !labels.iter().enumerate().all(|(i, &l)| l == i as u64 + 1) {
                warnings.push(format!(
                    "replicate labels are not 1..{}; relabelled in ascending order",
                    labels.len()
                ));
            }
            let mut replicates: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
            for (label, t) in rows {
                let slot = labels.binary_search(&label).expect("label collected above");
                replicates[slot].push(t);
            }
            replicates
        }
    };

    let max_time = replicates.iter().flatten().cloned().fold(0.0_f64, f64::max);
    let (horizon, horizon_from_data) = match horizon.or(declared_horizon) {
        Some(t) => (t, false),
        None => {
            let t = if max_time > 0.0 { max_time } else { 1.0 };
            warnings.push(format!("no horizon given; defaulting to the maximum event time {t}"));
            (t, true)
        }
    };
    let series = EventSeries::new(horizon, replicates)?;
    Ok(Ingested { series, warnings, horizon_from_data })
}

/// Write a series as `replicate,time` CSV with the replicate-count and
/// horizon directives.
pub fn write_events_csv(series: &EventSeries, mut writer: impl Write) -> Result<()> {
    writeln!(writer, "# replicates={}", series.n_replicates())?;
    writeln!(writer, "# horizon={}", series.horizon())?;
    writeln!(writer, "replicate,time")?;
    for (j, events) in series.replicates().iter().enumerate() {
        for &t in events {
            writeln!(writer, "{},{}", j + 1, t)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn ingest_str(s: &str, format: EventFormat, horizon: Option<f64>) -> Result<Ingested> {
        ingest_events(Cursor::new(s.as_bytes().to_vec()), format, horizon)
    }

    #[test]
    fn csv_two_replicates() {
        let got = ingest_str("1,0.5\n1,2.0\n2,1.0\n", EventFormat::Csv, Some(3.0)).unwrap();
        assert_eq!(got.series.n_replicates(), 2);
        assert_eq!(got.series.replicates()[0], vec![0.5, 2.0]);
        assert_eq!(got.series.replicates()[1], vec![1.0]);
        assert!(!got.horizon_from_data);
        assert!(got.warnings.is_empty());
    }

    #[test]
    fn csv_header_is_skipped() {
        let got = ingest_str("replicate,time\n1,0.5\n", EventFormat::Csv, Some(1.0)).unwrap();
        assert_eq!(got.series.total_events(), 1);
    }

    #[test]
    fn empty_file_single_empty_replicate_with_warning() {
        let got = ingest_str("", EventFormat::Csv, Some(2.0)).unwrap();
        assert_eq!(got.series.n_replicates(), 1);
        assert_eq!(got.series.total_events(), 0);
        assert_eq!(got.warnings.len(), 1);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let err = ingest_str("1,0.5\nbogus\n", EventFormat::Csv, Some(1.0)).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn negative_time_is_data_error() {
        let err = ingest_str("1,-0.5\n", EventFormat::Csv, Some(1.0)).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        let err = ingest_str("-0.5\n", EventFormat::Plain, Some(1.0)).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn non_contiguous_labels_relabelled_with_note() {
        let got = ingest_str("7,0.1\n3,0.2\n7,0.3\n", EventFormat::Csv, Some(1.0)).unwrap();
        assert_eq!(got.series.n_replicates(), 2);
        // Label 3 sorts first.
        assert_eq!(got.series.replicates()[0], vec![0.2]);
        assert_eq!(got.series.replicates()[1], vec![0.1, 0.3]);
        assert_eq!(got.warnings.len(), 1);
        assert!(got.warnings[0].contains("relabelled"));
    }

    #[test]
    fn declared_replicates_preserve_empty_ones() {
        let got = ingest_str(
            "# replicates=4\n2,0.5\n2,0.7\n4,0.1\n",
            EventFormat::Csv,
            Some(1.0),
        )
        .unwrap();
        assert_eq!(got.series.n_replicates(), 4);
        assert!(got.series.replicates()[0].is_empty());
        assert_eq!(got.series.replicates()[1], vec![0.5, 0.7]);
        assert!(got.series.replicates()[2].is_empty());
        assert_eq!(got.series.replicates()[3], vec![0.1]);
    }

    #[test]
    fn label_above_declared_count_is_data_error() {
        let err =
            ingest_str("# replicates=2\n3,0.5\n", EventFormat::Csv, Some(1.0)).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn plain_single_replicate_and_default_horizon() {
        let got = ingest_str("0.25\n1.5\n0.75\n", EventFormat::Plain, None).unwrap();
        assert_eq!(got.series.n_replicates(), 1);
        assert_eq!(got.series.replicates()[0], vec![0.25, 0.75, 1.5]);
        assert_eq!(got.series.horizon(), 1.5);
        assert!(got.horizon_from_data);
    }

    #[test]
    fn explicit_horizon_beats_directive() {
        let got = ingest_str("# horizon=9\n1,0.5\n", EventFormat::Csv, Some(2.0)).unwrap();
        assert_eq!(got.series.horizon(), 2.0);
        let got = ingest_str("# horizon=9\n1,0.5\n", EventFormat::Csv, None).unwrap();
        assert_eq!(got.series.horizon(), 9.0);
        assert!(!got.horizon_from_data);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let series = EventSeries::new(
            2.0,
            vec![vec![0.123456789012345, 1.9999999999], vec![], vec![0.5]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_events_csv(&series, &mut buf).unwrap();
        let got =
            ingest_str(std::str::from_utf8(&buf).unwrap(), EventFormat::Csv, None).unwrap();
        assert_eq!(got.series, series);
        assert!(!got.horizon_from_data);
    }
}
