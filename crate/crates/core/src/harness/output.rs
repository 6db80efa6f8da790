//! CSV and JSON-lines result files.
//!
//! Floating-point fields are written with 9 significant digits in both
//! formats, so a file parsed back equals the rows passed through
//! [`round_row`], and the two formats carry identical numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Method, ResultRow};
use crate::error::{config_err, Error, Result};

pub const CSV_HEADER: [&str; 6] = [
    "sweep_value",
    "method",
    "d_bar_db",
    "sat_antennas",
    "wall_time_s",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "json-lines" | "jsonlines" => Ok(OutputFormat::JsonLines),
            _ => Err(config_err(format!("unknown output format '{s}' (csv | jsonl)"))),
        }
    }
}

impl OutputFormat {
    /// Guesses the format from a file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => OutputFormat::JsonLines,
            _ => OutputFormat::Csv,
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

/// `v` rounded to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if v.is_finite() {
        fmt_num(v).parse().expect("formatted float parses")
    } else {
        v
    }
}

/// The row as it reads back from a result file.
pub fn round_row(r: &ResultRow) -> ResultRow {
    ResultRow {
        sweep_value: round_sig9(r.sweep_value),
        method: r.method,
        d_bar_db: round_sig9(r.d_bar_db),
        sat_antennas: round_sig9(r.sat_antennas),
        lms_final_weight: r
            .lms_final_weight
            .map(|w| Complex64::new(round_sig9(w.re), round_sig9(w.im))),
        wall_time_s: round_sig9(r.wall_time_s),
        seed: r.seed,
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_num(r.sweep_value),
            r.method.to_string(),
            fmt_num(r.d_bar_db),
            fmt_num(r.sat_antennas),
            fmt_num(r.wall_time_s),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, &round_row(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `rows` to `path`. Empty input is an error.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("result rows"));
    }
    let file = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(rows, file),
        OutputFormat::JsonLines => write_jsonl(rows, file),
    }
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| config_err(format!("missing CSV column {i}")))?;
    raw.parse()
        .map_err(|_| config_err(format!("bad value '{raw}' in CSV column {}", CSV_HEADER[i])))
}

/// Parses a CSV result file. The LMS weight is not part of the CSV and reads
/// back as `None`.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(config_err(format!("unexpected CSV header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                sweep_value: parse_field(&rec, 0)?,
                method: parse_field::<Method>(&rec, 1)?,
                d_bar_db: parse_field(&rec, 2)?,
                sat_antennas: parse_field(&rec, 3)?,
                lms_final_weight: None,
                wall_time_s: parse_field(&rec, 4)?,
                seed: parse_field(&rec, 5)?,
            })
        })
        .collect()
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ResultRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}
