//! Flat-file data formats.
//!
//! All files are plain text, LF-terminated, decimal point, no thousands
//! separators:
//!
//! - spectrum: header `freq_mhz,value` or `freq_mhz,value,sigma`,
//! - trace: comment `# bin_width_s=<value>`, header `bin_index,counts`,
//! - truth/event intervals: header `start_s,end_s`,
//! - survival: header `tau_ms,survived,trials`.
//!
//! Readers report schema violations with 1-based line numbers. An optional
//! JSON-lines rendering of each format exists for writing only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::constants::{angular_from_mhz, mhz_from_angular};
use crate::fit::SurvivalPoint;
use crate::spectra::{Spectrum, SpectrumPoint};
use crate::trace::{PhotonTrace, SurvivalOutcome};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    fn schema(path: &Path, line: usize, message: impl Into<String>) -> Self {
        DataError::Schema {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// How data files are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    fs::write(path, text).map_err(|e| DataError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

pub fn write_spectrum(
    path: &Path,
    spectrum: &Spectrum,
    format: OutputFormat,
) -> Result<(), DataError> {
    let with_sigma = spectrum.iter().any(|p| p.sigma.is_some());
    let mut text = String::new();
    match format {
        OutputFormat::Csv => {
            text.push_str(if with_sigma {
                "freq_mhz,value,sigma\n"
            } else {
                "freq_mhz,value\n"
            });
            for p in spectrum.iter() {
                let freq = mhz_from_angular(p.frequency);
                match p.sigma {
                    Some(s) if with_sigma => {
                        let _ = writeln!(text, "{},{},{}", freq, p.value, s);
                    }
                    None if with_sigma => {
                        let _ = writeln!(text, "{},{},", freq, p.value);
                    }
                    _ => {
                        let _ = writeln!(text, "{},{}", freq, p.value);
                    }
                }
            }
        }
        OutputFormat::JsonLines => {
            for p in spectrum.iter() {
                let freq = mhz_from_angular(p.frequency);
                match p.sigma {
                    Some(s) => {
                        let _ = writeln!(
                            text,
                            "{{\"freq_mhz\":{},\"value\":{},\"sigma\":{}}}",
                            freq, p.value, s
                        );
                    }
                    None => {
                        let _ =
                            writeln!(text, "{{\"freq_mhz\":{},\"value\":{}}}", freq, p.value);
                    }
                }
            }
        }
    }
    write_text(path, &text)
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::schema(path, 1, "empty file, header expected"))?;
    let with_sigma = match header.trim_end() {
        "freq_mhz,value" => false,
        "freq_mhz,value,sigma" => true,
        other => {
            return Err(DataError::schema(
                path,
                1,
                format!("expected header `freq_mhz,value[,sigma]`, found `{other}`"),
            ))
        }
    };
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if with_sigma { 3 } else { 2 };
        if fields.len() != expected {
            return Err(DataError::schema(
                path,
                line_no,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let freq_mhz = parse_f64(path, line_no, "freq_mhz", fields[0])?;
        let value = parse_f64(path, line_no, "value", fields[1])?;
        let sigma = if with_sigma && !fields[2].is_empty() {
            Some(parse_f64(path, line_no, "sigma", fields[2])?)
        } else {
            None
        };
        if let Some(last) = points.last() {
            let last: &SpectrumPoint = last;
            if angular_from_mhz(freq_mhz) <= last.frequency {
                return Err(DataError::schema(
                    path,
                    line_no,
                    "frequencies must be strictly increasing",
                ));
            }
        }
        if value < 0.0 {
            return Err(DataError::schema(path, line_no, "value must be >= 0"));
        }
        if let Some(s) = sigma {
            if !(s > 0.0) {
                return Err(DataError::schema(path, line_no, "sigma must be > 0"));
            }
        }
        points.push(SpectrumPoint {
            frequency: angular_from_mhz(freq_mhz),
            value,
            sigma,
        });
    }
    Spectrum::new(points).map_err(|e| DataError::schema(path, 1, e.to_string()))
}

pub fn write_trace(
    path: &Path,
    trace: &PhotonTrace,
    format: OutputFormat,
) -> Result<(), DataError> {
    let mut text = String::new();
    match format {
        OutputFormat::Csv => {
            let _ = writeln!(text, "# bin_width_s={}", trace.bin_width);
            text.push_str("bin_index,counts\n");
            for (i, c) in trace.counts.iter().enumerate() {
                let _ = writeln!(text, "{},{}", i, c);
            }
        }
        OutputFormat::JsonLines => {
            let _ = writeln!(text, "{{\"bin_width_s\":{}}}", trace.bin_width);
            for (i, c) in trace.counts.iter().enumerate() {
                let _ = writeln!(text, "{{\"bin_index\":{},\"counts\":{}}}", i, c);
            }
        }
    }
    write_text(path, &text)
}

pub fn read_trace(path: &Path) -> Result<PhotonTrace, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, comment) = lines
        .next()
        .ok_or_else(|| DataError::schema(path, 1, "empty file, bin width comment expected"))?;
    let bin_width = comment
        .trim_end()
        .strip_prefix("# bin_width_s=")
        .ok_or_else(|| DataError::schema(path, 1, "expected `# bin_width_s=<value>`"))
        .and_then(|v| parse_f64(path, 1, "bin_width_s", v))?;
    if !(bin_width > 0.0) {
        return Err(DataError::schema(path, 1, "bin width must be positive"));
    }
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::schema(path, 2, "header `bin_index,counts` expected"))?;
    if header.trim_end() != "bin_index,counts" {
        return Err(DataError::schema(
            path,
            2,
            format!("expected header `bin_index,counts`, found `{}`", header.trim_end()),
        ));
    }
    let mut counts = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (index_field, counts_field) = line.split_once(',').ok_or_else(|| {
            DataError::schema(path, line_no, "expected `bin_index,counts` row")
        })?;
        let index: usize = index_field.parse().map_err(|_| {
            DataError::schema(path, line_no, format!("invalid bin_index `{index_field}`"))
        })?;
        if index != counts.len() {
            return Err(DataError::schema(
                path,
                line_no,
                format!("bin_index {index} out of order, expected {}", counts.len()),
            ));
        }
        let c: u64 = counts_field.parse().map_err(|_| {
            DataError::schema(path, line_no, format!("invalid counts `{counts_field}`"))
        })?;
        counts.push(c);
    }
    Ok(PhotonTrace {
        counts,
        bin_width,
        truth_intervals: None,
    })
}

pub fn write_intervals(
    path: &Path,
    intervals: &[(f64, f64)],
    format: OutputFormat,
) -> Result<(), DataError> {
    let mut text = String::new();
    match format {
        OutputFormat::Csv => {
            text.push_str("start_s,end_s\n");
            for (a, b) in intervals {
                let _ = writeln!(text, "{},{}", a, b);
            }
        }
        OutputFormat::JsonLines => {
            for (a, b) in intervals {
                let _ = writeln!(text, "{{\"start_s\":{},\"end_s\":{}}}", a, b);
            }
        }
    }
    write_text(path, &text)
}

pub fn read_intervals(path: &Path) -> Result<Vec<(f64, f64)>, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::schema(path, 1, "header `start_s,end_s` expected"))?;
    if header.trim_end() != "start_s,end_s" {
        return Err(DataError::schema(
            path,
            1,
            format!("expected header `start_s,end_s`, found `{}`", header.trim_end()),
        ));
    }
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| DataError::schema(path, line_no, "expected `start_s,end_s` row"))?;
        let start = parse_f64(path, line_no, "start_s", a)?;
        let end = parse_f64(path, line_no, "end_s", b)?;
        if end < start {
            return Err(DataError::schema(path, line_no, "interval ends before it starts"));
        }
        if let Some(&(_, prev_end)) = intervals.last() {
            if start < prev_end {
                return Err(DataError::schema(
                    path,
                    line_no,
                    "intervals must be ordered and non-overlapping",
                ));
            }
        }
        intervals.push((start, end));
    }
    Ok(intervals)
}

pub fn write_survival(
    path: &Path,
    outcomes: &[SurvivalOutcome],
    format: OutputFormat,
) -> Result<(), DataError> {
    let mut text = String::new();
    match format {
        OutputFormat::Csv => {
            text.push_str("tau_ms,survived,trials\n");
            for o in outcomes {
                let _ = writeln!(text, "{},{},{}", o.delay * 1e3, o.survived, o.trials);
            }
        }
        OutputFormat::JsonLines => {
            for o in outcomes {
                let _ = writeln!(
                    text,
                    "{{\"tau_ms\":{},\"survived\":{},\"trials\":{}}}",
                    o.delay * 1e3,
                    o.survived,
                    o.trials
                );
            }
        }
    }
    write_text(path, &text)
}

pub fn read_survival(path: &Path) -> Result<Vec<SurvivalPoint>, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::schema(path, 1, "header `tau_ms,survived,trials` expected"))?;
    if header.trim_end() != "tau_ms,survived,trials" {
        return Err(DataError::schema(
            path,
            1,
            format!(
                "expected header `tau_ms,survived,trials`, found `{}`",
                header.trim_end()
            ),
        ));
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(DataError::schema(
                path,
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let tau_ms = parse_f64(path, line_no, "tau_ms", fields[0])?;
        let survived: u64 = fields[1].parse().map_err(|_| {
            DataError::schema(path, line_no, format!("invalid survived `{}`", fields[1]))
        })?;
        let trials: u64 = fields[2].parse().map_err(|_| {
            DataError::schema(path, line_no, format!("invalid trials `{}`", fields[2]))
        })?;
        if trials == 0 || survived > trials {
            return Err(DataError::schema(
                path,
                line_no,
                format!("survived {survived} of {trials} trials is not a fraction"),
            ));
        }
        points.push(SurvivalPoint {
            delay: tau_ms * 1e-3,
            probability: survived as f64 / trials as f64,
            trials,
        });
    }
    Ok(points)
}

/// One row of the concentric-approach sweep table (I/O units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTableRow {
    pub d_nm: f64,
    pub g0_mhz: f64,
    pub g0_over_gamma: f64,
    pub w0_um: f64,
    pub c0_at_finesse: f64,
}

pub fn write_sweep_table(
    path: &Path,
    rows: &[SweepTableRow],
    format: OutputFormat,
) -> Result<(), DataError> {
    let mut text = String::new();
    match format {
        OutputFormat::Csv => {
            text.push_str("d_nm,g0_mhz,g0_over_gamma,w0_um,c0_at_finesse\n");
            for r in rows {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    r.d_nm, r.g0_mhz, r.g0_over_gamma, r.w0_um, r.c0_at_finesse
                );
            }
        }
        OutputFormat::JsonLines => {
            for r in rows {
                let _ = writeln!(
                    text,
                    "{{\"d_nm\":{},\"g0_mhz\":{},\"g0_over_gamma\":{},\"w0_um\":{},\"c0_at_finesse\":{}}}",
                    r.d_nm, r.g0_mhz, r.g0_over_gamma, r.w0_um, r.c0_at_finesse
                );
            }
        }
    }
    write_text(path, &text)
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64, DataError> {
    let value: f64 = raw.trim().parse().map_err(|_| {
        DataError::schema(path, line, format!("invalid {field} `{raw}`"))
    })?;
    if !value.is_finite() {
        return Err(DataError::schema(path, line, format!("{field} must be finite")));
    }
    Ok(value)
}
