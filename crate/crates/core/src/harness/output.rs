//! CSV and JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{HarnessError, TimeSeriesRecord};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SWEEP_FILE: &str = "sweep.json";
/// Column excluded from determinism comparisons.
pub const TIMING_COLUMN: &str = "solve_time";

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in ["xL", "xLd", "eL"] {
        h.extend(["x", "y", "z"].iter().map(|a| format!("{name}_{a}")));
    }
    h.extend((1..=n).map(|i| format!("T_act_{i}")));
    h.extend((1..=n).map(|i| format!("T_des_{i}")));
    for i in 1..=n {
        h.extend(((i + 1)..=n).map(|j| format!("theta_{i}_{j}")));
    }
    h.extend((1..=n).map(|i| format!("f_{i}")));
    h.extend(["iterations", "status", TIMING_COLUMN].map(String::from));
    h.extend((1..=n).map(|i| format!("slack_{i}")));
    h.push("balance_residual".into());
    h
}

fn csv_row(r: &TimeSeriesRecord) -> Vec<String> {
    let mut row = vec![num(r.t)];
    for v in [&r.x_l, &r.x_ld, &r.e_l] {
        row.extend(v.iter().map(|&x| num(x)));
    }
    row.extend(r.tension_actual.iter().map(|&x| num(x)));
    row.extend(r.tension_desired.iter().map(|&x| num(x)));
    row.extend(r.pair_angles.iter().map(|&x| num(x)));
    row.extend(r.thrusts.iter().map(|&x| num(x)));
    row.push(r.iterations.to_string());
    row.push(r.status.as_str().to_string());
    row.push(num(r.solve_time));
    row.extend(r.slack.iter().map(|&s| u8::from(s).to_string()));
    row.push(num(r.balance_residual));
    row
}

pub fn write_csv<W: Write>(out: W, records: &[TimeSeriesRecord]) -> Result<(), HarnessError> {
    let n = records.first().map_or(0, |r| r.n());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(n))?;
    for r in records {
        w.write_record(csv_row(r))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: "<csv>".into(), source })?;
    Ok(())
}

pub fn csv_string(records: &[TimeSeriesRecord]) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}

/// Drops the timing column from CSV text, for run-to-run comparisons.
pub fn strip_timing_column(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let Some(col) = header.split(',').position(|h| h == TIMING_COLUMN) else {
        return csv_text.to_string();
    };
    let strip = |line: &str| {
        line.split(',')
            .enumerate()
            .filter(|(k, _)| *k != col)
            .map(|(_, f)| f)
            .collect::<Vec<_>>()
            .join(",")
    };
    std::iter::once(strip(header))
        .chain(lines.map(strip))
        .collect::<Vec<_>>()
        .join("\n")
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn create_file(path: &Path) -> Result<fs::File, HarnessError> {
    fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_timeseries(dir: &Path, records: &[TimeSeriesRecord]) -> Result<(), HarnessError> {
    create_dir(dir)?;
    let file = create_file(&dir.join(TIMESERIES_FILE))?;
    write_csv(std::io::BufWriter::new(file), records)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), HarnessError> {
    create_dir(dir)?;
    let path = dir.join(name);
    let mut file = create_file(&path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
