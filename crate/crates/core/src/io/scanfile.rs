//! Scan CSV files: `f_khz,p_p2,p_p1,p_0,p_m1,p_m2[,s_p2,s_p1,s_0,s_m1,s_m2]`.

use std::io::{Read, Write};

use log::warn;

use crate::error::{Error, Result};
use crate::ramsey::{FringeScan, ScanMetadata, ScanRow, ScanSource};
use crate::spin2::DIM;

pub const SCAN_HEADER: &str = "f_khz,p_p2,p_p1,p_0,p_m1,p_m2";
pub const STDDEV_HEADER: &str = "s_p2,s_p1,s_0,s_m1,s_m2";

/// Largest population accepted on ingest; values above 1 are clamped.
pub const MAX_POPULATION: f64 = 1.05;

const POPULATION_COLUMNS: [&str; DIM] = ["p_p2", "p_p1", "p_0", "p_m1", "p_m2"];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a measured scan. Line numbers in errors are 1-based file lines.
pub fn read_scan<R: Read>(reader: R) -> Result<FringeScan> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let mut records = csv.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "empty file (missing header)")),
    };
    let header: Vec<&str> = header.iter().collect();
    let joined = header.join(",");
    let with_stddev = if joined == SCAN_HEADER {
        false
    } else if joined == format!("{SCAN_HEADER},{STDDEV_HEADER}") {
        true
    } else {
        return Err(parse_err(
            1,
            format!("header must be `{SCAN_HEADER}` optionally followed by `,{STDDEV_HEADER}`, got `{joined}`"),
        ));
    };
    let width = if with_stddev { 1 + 2 * DIM } else { 1 + DIM };

    let mut rows = Vec::new();
    let mut prev_f: Option<f64> = None;
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(
                    line,
                    format!("column {}: cannot parse {field:?} as a number", i + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!("column {}: non-finite value", i + 1),
                ));
            }
            values.push(v);
        }
        let f = values[0];
        if let Some(p) = prev_f {
            if f <= p {
                return Err(parse_err(
                    line,
                    format!("f_khz must be strictly increasing ({f} after {p})"),
                ));
            }
        }
        prev_f = Some(f);

        let mut populations = [0.0; DIM];
        for (k, slot) in populations.iter_mut().enumerate() {
            let v = values[1 + k];
            if !(0.0..=MAX_POPULATION).contains(&v) {
                return Err(parse_err(
                    line,
                    format!(
                        "{} = {v} outside [0, {MAX_POPULATION}]",
                        POPULATION_COLUMNS[k]
                    ),
                ));
            }
            if v > 1.0 {
                warn!("line {line}: {} = {v} clamped to 1", POPULATION_COLUMNS[k]);
            }
            *slot = v.min(1.0);
        }
        let sum: f64 = populations.iter().sum();
        if (sum - 1.0).abs() > ScanSource::Measured.sum_tolerance() {
            return Err(parse_err(
                line,
                format!("populations sum to {sum}, expected 1 within 2e-2"),
            ));
        }
        let stddev = if with_stddev {
            let s: [f64; DIM] = std::array::from_fn(|k| values[1 + DIM + k]);
            if s.iter().any(|x| *x < 0.0) {
                return Err(parse_err(line, "stddev columns must be non-negative"));
            }
            Some(s)
        } else {
            None
        };
        rows.push(ScanRow {
            f_khz: f,
            populations,
            stddev,
        });
    }
    if rows.is_empty() {
        return Err(parse_err(1, "scan has no data rows"));
    }
    FringeScan::new(
        rows,
        ScanMetadata {
            source: ScanSource::Measured,
            ..Default::default()
        },
    )
}

/// Writes a scan with the exact header; floats use the shortest round-trip form
/// (exponent notation for very small or large values).
pub fn write_scan<W: Write>(mut writer: W, scan: &FringeScan) -> Result<()> {
    let with_stddev = scan.has_stddev();
    if with_stddev {
        writeln!(writer, "{SCAN_HEADER},{STDDEV_HEADER}")?;
    } else {
        writeln!(writer, "{SCAN_HEADER}")?;
    }
    for row in scan.rows() {
        let mut fields: Vec<f64> = Vec::with_capacity(1 + 2 * DIM);
        fields.push(row.f_khz);
        fields.extend(row.populations);
        if let Some(s) = row.stddev {
            fields.extend(s);
        }
        write_record(&mut writer, &fields)?;
    }
    Ok(())
}

/// Writes a five-port table keyed by an arbitrary first column (pulse width, phase, ...).
pub fn write_table<W: Write>(
    mut writer: W,
    key_column: &str,
    rows: &[(f64, [f64; DIM])],
) -> Result<()> {
    writeln!(writer, "{key_column},p_p2,p_p1,p_0,p_m1,p_m2")?;
    for (key, p) in rows {
        let mut fields = vec![*key];
        fields.extend(p);
        write_record(&mut writer, &fields)?;
    }
    Ok(())
}

fn write_record<W: Write>(writer: &mut W, fields: &[f64]) -> Result<()> {
    let line: Vec<String> = fields.iter().map(|v| format!("{v:?}")).collect();
    writeln!(writer, "{}", line.join(","))?;
    Ok(())
}
