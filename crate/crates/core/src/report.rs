//! Fit reports and their JSON/CSV serialisation.
//!
//! JSON carries the whole report and round-trips losslessly (floats are
//! written in shortest round-trip decimal form). CSV is the plot-ready long
//! format: one row per bin with the band columns, which also reads back.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conjugate::PosteriorBand;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBand {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportDiagnostics {
    /// Post-burn-in Metropolis acceptance rate of the coupling update.
    pub mwg_acceptance: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub alpha_sd: Option<f64>,
    /// Which trace the ACF and ESS below refer to.
    pub acf_series: Option<String>,
    /// Sample autocorrelation at lags 1..=20 (empty for closed-form fits).
    pub acf: Vec<f64>,
    pub ess: Option<f64>,
    /// Model-index visit counts (reversible-jump fits).
    pub model_frequencies: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub seed: Option<u64>,
    pub horizon: f64,
    pub n_replicates: usize,
    pub n_events: usize,
    pub n_bins: usize,
    /// How the bin count was chosen ("explicit:N", "rule", "ebayes:lo..hi").
    pub bin_selection: String,
    /// Echo of the resolved run settings, in a fixed order.
    pub config: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub grid_edges: Vec<f64>,
    pub mean: Vec<f64>,
    pub bands: Vec<ReportBand>,
    pub diagnostics: ReportDiagnostics,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub timing_seconds: f64,
}

impl FitReport {
    /// The report with timing zeroed: identical runs compare byte-identical
    /// through this view.
    pub fn without_timing(&self) -> FitReport {
        FitReport { timing_seconds: 0.0, ..self.clone() }
    }
}

pub fn bands_from_posterior(band: &PosteriorBand) -> (Vec<f64>, Vec<ReportBand>) {
    let bands = band
        .levels()
        .iter()
        .map(|l| ReportBand { level: l.level, lower: l.lower.clone(), upper: l.upper.clone() })
        .collect();
    (band.mean().to_vec(), bands)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

pub fn report_to_json(report: &FitReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}

pub fn write_report(report: &FitReport, writer: &mut impl Write, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => writer.write_all(report_to_json(report).as_bytes())?,
        ReportFormat::Csv => write_band_csv(report, writer)?,
    }
    Ok(())
}

pub fn write_report_path(report: &FitReport, path: &Path, format: ReportFormat) -> Result<()> {
    let mut file = File::create(path)?;
    write_report(report, &mut file, format)
}

pub fn read_report_json_path(path: &Path) -> Result<FitReport> {
    let file = File::open(path)?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("cannot parse report {}: {e}", path.display())))
}

pub fn read_report_json(reader: impl std::io::Read) -> Result<FitReport> {
    serde_json::from_reader(reader).map_err(|e| Error::Data(format!("cannot parse report: {e}")))
}

/// Long-format CSV: bin_index, edge_lo, edge_hi, mean, then lo_/hi_ column
/// pairs per level.
pub fn write_band_csv(report: &FitReport, writer: &mut impl Write) -> Result<()> {
    let mut header = String::from("bin_index,edge_lo,edge_hi,mean");
    for band in &report.bands {
        header.push_str(&format!(",lo_{0},hi_{0}", band.level));
    }
    writeln!(writer, "{header}")?;
    for k in 0..report.n_bins {
        let mut row = format!(
            "{},{},{},{}",
            k + 1,
            report.grid_edges[k],
            report.grid_edges[k + 1],
            report.mean[k]
        );
        for band in &report.bands {
            row.push_str(&format!(",{},{}", band.lower[k], band.upper[k]));
        }
        writeln!(writer, "{row}")?;
    }
    Ok(())
}

/// Read back the band table: (grid edges, mean, bands).
pub fn read_band_csv(reader: impl BufRead) -> Result<(Vec<f64>, Vec<f64>, Vec<ReportBand>)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty band CSV".into()))??;
    let columns: Vec<&str> = header.trim().split(',').collect();
    if columns.len() < 4 || columns[..4] != ["bin_index", "edge_lo", "edge_hi", "mean"] {
        return Err(Error::Data(format!("unexpected band CSV header '{header}'")));
    }
    let mut levels = Vec::new();
    let mut i = 4;
    while i < columns.len() {
        let lo = columns[i]
            .strip_prefix("lo_")
            .ok_or_else(|| Error::Data(format!("expected lo_ column, got '{}'", columns[i])))?;
        if i + 1 >= columns.len() || columns[i + 1] != format!("hi_{lo}") {
            return Err(Error::Data(format!("column pair mismatch at '{}'", columns[i])));
        }
        let level: f64 = lo
            .parse()
            .map_err(|_| Error::Data(format!("bad level in column '{}'", columns[i])))?;
        levels.push(level);
        i += 2;
    }

    let mut edges: Vec<f64> = Vec::new();
    let mut mean = Vec::new();
    let mut bands: Vec<ReportBand> = levels
        .iter()
        .map(|&level| ReportBand { level, lower: Vec::new(), upper: Vec::new() })
        .collect();
    for (row_idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Data(format!(
                "row {}: {} fields, expected {}",
                row_idx + 2,
                fields.len(),
                columns.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Data(format!("row {}: bad number '{s}'", row_idx + 2)))
        };
        let lo = num(fields[1])?;
        let hi = num(fields[2])?;
        if edges.is_empty() {
            edges.push(lo);
        }
        edges.push(hi);
        mean.push(num(fields[3])?);
        for (b, band) in bands.iter_mut().enumerate() {
            band.lower.push(num(fields[4 + 2 * b])?);
            band.upper.push(num(fields[5 + 2 * b])?);
        }
    }
    Ok((edges, mean, bands))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample_report() -> FitReport {
        FitReport {
            method: "conjugate".into(),
            seed: Some(7),
            horizon: 2.0,
            n_replicates: 3,
            n_events: 11,
            n_bins: 2,
            bin_selection: "explicit:2".into(),
            config: vec![("alpha".into(), "0.1".into()), ("beta".into(), "0.1".into())],
            warnings: vec![],
            grid_edges: vec![0.0, 1.0, 2.0],
            mean: vec![1.5, 0.25],
            bands: vec![
                ReportBand { level: 0.75, lower: vec![1.2, 0.1], upper: vec![1.9, 0.5] },
                ReportBand { level: 0.95, lower: vec![1.0, 0.05], upper: vec![2.3, 0.8] },
            ],
            diagnostics: ReportDiagnostics::default(),
            timing_seconds: 0.123,
        }
    }

    #[test]
    fn json_round_trip_is_field_identical() {
        let report = sample_report();
        let json = report_to_json(&report);
        let back = read_report_json(Cursor::new(json.clone())).unwrap();
        assert_eq!(back, report);
        // And stable: serialising again yields the same bytes.
        assert_eq!(report_to_json(&back), json);
    }

    #[test]
    fn single_bin_report_serialises() {
        let mut report = sample_report();
        report.n_bins = 1;
        report.grid_edges = vec![0.0, 2.0];
        report.mean = vec![0.5];
        report.bands = vec![ReportBand { level: 0.95, lower: vec![0.1], upper: vec![1.1] }];
        let json = report_to_json(&report);
        let back = read_report_json(Cursor::new(json)).unwrap();
        assert_eq!(back, report);
        let mut csv = Vec::new();
        write_band_csv(&report, &mut csv).unwrap();
        let (edges, mean, bands) = read_band_csv(Cursor::new(csv)).unwrap();
        assert_eq!(edges, report.grid_edges);
        assert_eq!(mean, report.mean);
        assert_eq!(bands, report.bands);
    }

    #[test]
    fn csv_round_trip_preserves_curves_exactly() {
        let report = sample_report();
        let mut csv = Vec::new();
        write_band_csv(&report, &mut csv).unwrap();
        let (edges, mean, bands) = read_band_csv(Cursor::new(csv)).unwrap();
        assert_eq!(edges, report.grid_edges);
        assert_eq!(mean, report.mean);
        assert_eq!(bands, report.bands);
    }

    #[test]
    fn csv_rejects_malformed_tables() {
        assert!(read_band_csv(Cursor::new(b"nope\n".to_vec())).is_err());
        let bad_pair = "bin_index,edge_lo,edge_hi,mean,lo_0.5,hi_0.9\n";
        assert!(read_band_csv(Cursor::new(bad_pair.as_bytes().to_vec())).is_err());
    }

    #[test]
    fn without_timing_normalises() {
        let report = sample_report();
        let a = report.without_timing();
        let mut b = sample_report();
        b.timing_seconds = 9.9;
        assert_eq!(a, b.without_timing());
    }
}
