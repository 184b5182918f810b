//! Report files: CSV with a fixed header, or JSON `{meta, rows}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use icn_lab::simulator::TraceRecord;

use crate::config::Format;
use crate::error::CliError;
use crate::rows::{ReportRow, Rows, ScalingRow};

pub const REPORT_COLUMNS: [&str; 24] = [
    "experiment",
    "scenario",
    "L",
    "n",
    "r",
    "content",
    "level",
    "rho",
    "E_h",
    "gamma_interference",
    "psi",
    "gamma_supportable",
    "gamma_max",
    "source",
    "stderr",
    "regime",
    "total_request_rate",
    "total_traffic",
    "axis_1",
    "value_1",
    "axis_2",
    "value_2",
    "flag",
    "error",
];

pub const SCALING_COLUMNS: [&str; 13] = [
    "experiment",
    "metric",
    "scenario",
    "rho_law",
    "sizes",
    "slope",
    "r_squared",
    "predicted",
    "tolerance",
    "pass",
    "straddles",
    "regime",
    "error",
];

/// Run description. Holds nothing that varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub experiment: String,
    pub seed: u64,
    pub rows: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub meta: Meta,
    pub rows: Rows,
}

#[derive(Deserialize)]
struct RawReport {
    meta: Meta,
    rows: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, experiment: &str, seed: u64, rows: Rows) -> Self {
        Self {
            meta: Meta {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                experiment: experiment.to_string(),
                seed,
                rows: rows.len(),
                errors: rows.error_count(),
            },
            rows,
        }
    }

    pub fn has_errors(&self) -> bool {
        self.rows.error_count() > 0
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Reads a JSON report; the row type follows `meta.command`.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawReport = serde_json::from_str(text)?;
        let rows = if raw.meta.command == "scaling" {
            Rows::Scaling(serde_json::from_value(raw.rows)?)
        } else {
            Rows::Report(serde_json::from_value(raw.rows)?)
        };
        Ok(Self {
            meta: raw.meta,
            rows,
        })
    }

    /// CSV body; the header is written even without rows.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        match &self.rows {
            Rows::Report(rows) => {
                w.write_record(REPORT_COLUMNS)?;
                for r in rows {
                    w.serialize(r)?;
                }
            }
            Rows::Scaling(rows) => {
                w.write_record(SCALING_COLUMNS)?;
                for r in rows {
                    w.serialize(r)?;
                }
            }
        }
        w.into_inner().map_err(|e| CliError::Write(e.into_error()))
    }

    pub fn encode(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json().map(String::into_bytes),
        }
    }
}

pub fn read_report_csv(bytes: &[u8]) -> Result<Vec<ReportRow>, CliError> {
    let rows = csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()?;
    Ok(rows)
}

pub fn read_scaling_csv(bytes: &[u8]) -> Result<Vec<ScalingRow>, CliError> {
    let rows = csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<Vec<ScalingRow>, _>>()?;
    Ok(rows)
}

/// Service records as CSV; the server holder is an empty field.
pub fn write_trace<W: Write>(records: &[TraceRecord], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rows::Source;

    fn sample_rows() -> Vec<ReportRow> {
        let mut a = ReportRow::new("e", "I", Source::Analytic);
        a.levels = Some(2);
        a.n = Some(12);
        a.e_h = Some(5.0 / 3.0);
        a.gamma_max = Some(f64::INFINITY);
        a.add_flag("inf-sentinel");
        let mut b = ReportRow::new("e", "II", Source::Simulated);
        b.content = "0".into();
        b.stderr = Some(1e-3);
        b.error = "bad, \"quoted\" value".into();
        vec![a, b]
    }

    #[test]
    fn header_matches_serialized_fields() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&sample_rows()[0]).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    }

    #[test]
    fn csv_round_trips() {
        let report = Report::new("analyze", "e", 7, Rows::Report(sample_rows()));
        let bytes = report.to_csv().unwrap();
        assert_eq!(read_report_csv(&bytes).unwrap(), sample_rows());
        let empty = Report::new("analyze", "e", 7, Rows::Report(Vec::new()));
        let text = String::from_utf8(empty.to_csv().unwrap()).unwrap();
        assert_eq!(text.trim_end(), REPORT_COLUMNS.join(","));
    }

    #[test]
    fn json_round_trips() {
        let report = Report::new("analyze", "e", 7, Rows::Report(sample_rows()));
        assert_eq!(report.meta.errors, 1);
        let back = Report::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn scaling_header_matches() {
        let row = ScalingRow {
            experiment: "e".into(),
            metric: "E_h".into(),
            scenario: "I".into(),
            rho_law: "const(0.875)".into(),
            sizes: "220;840".into(),
            slope: Some(0.01),
            r_squared: Some(0.5),
            predicted: Some(0.0),
            tolerance: Some(0.05),
            pass: Some(true),
            straddles: Some(false),
            regime: "cache-dominated".into(),
            error: String::new(),
        };
        let report = Report::new("scaling", "e", 0, Rows::Scaling(vec![row.clone()]));
        let bytes = report.to_csv().unwrap();
        assert_eq!(
            String::from_utf8_lossy(&bytes).lines().next().unwrap(),
            SCALING_COLUMNS.join(",")
        );
        assert_eq!(read_scaling_csv(&bytes).unwrap(), vec![row.clone()]);
        assert_eq!(
            Report::from_json(&report.to_json().unwrap()).unwrap(),
            report
        );
    }
}
