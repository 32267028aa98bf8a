//! Machine-readable run reports.
//!
//! CSV output has a header row and one record per line; columns follow the
//! field order of [`RunRecord`]. JSON-lines output has one object per line
//! with the same field order. Absent optional values are empty CSV fields and
//! JSON `null`s.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{BenchError, Result};
use crate::sweep::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" | "json-lines" => Ok(ReportFormat::JsonLines),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub fn write_report<W: Write>(records: &[RunRecord], out: W, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        ReportFormat::JsonLines => {
            let mut w = BufWriter::new(out);
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn emit_report(records: &[RunRecord], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    if records.is_empty() {
        return Err(BenchError::Invalid("no records to report".into()));
    }
    write_report(records, File::create(path)?, format)
}

pub fn read_json_lines(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(BenchError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(i: usize) -> RunRecord {
        RunRecord {
            dataset: "synthetic:10:2:0".into(),
            kernel: "rbf".into(),
            theta: 1.0,
            lengthscale: 2.5,
            sigma2: 1e-3,
            delta: 0.1,
            algorithm: "blocked".into(),
            permutation: i,
            permutation_seed: i as u64,
            block_size: Some(64),
            target_r: Some(0.1),
            diag_tol: None,
            wall_time_s: 0.25,
            cpu_time_s: None,
            stopped: true,
            stop_index: 5,
            estimate: -42.125,
            reference_logdet: Some(-41.5),
            relative_error: Some(0.015),
            m: 0.5,
            warnings: "r>=1;exact-target".into(),
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_record() {
        let mut buf = Vec::new();
        write_report(&[sample(0)], &mut buf, ReportFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("dataset,kernel,theta,lengthscale,sigma2,delta,algorithm"));
        assert!(lines[1].contains(",,"), "missing optionals are empty fields");
    }

    #[test]
    fn json_lines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let recs: Vec<_> = (0..4).map(sample).collect();
        emit_report(&recs, &path, ReportFormat::JsonLines).unwrap();
        assert_eq!(read_json_lines(&path).unwrap(), recs);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let recs: Vec<_> = (0..3).map(sample).collect();
        emit_report(&recs, &path, ReportFormat::Csv).unwrap();
        assert_eq!(read_csv(&path).unwrap(), recs);
    }

    #[test]
    fn empty_and_unwritable() {
        assert!(emit_report(&[], "/tmp/never.csv", ReportFormat::Csv).is_err());
        let err = emit_report(&[sample(0)], "/nonexistent-dir/x.csv", ReportFormat::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
