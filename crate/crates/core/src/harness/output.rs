use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::run::{ReportRow, RunReport};
use crate::error::Result;

/// Shortest round-trip scientific notation; identical bits give identical text.
pub fn format_float(x: f64) -> String {
    format!("{x:e}")
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    csv_string(&ReportRow::COLUMNS, rows.iter().map(|r| r.values().iter().map(|v| format_float(*v)).collect()))
}

pub fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Sidecar<'a> {
    columns: &'a [&'a str],
    config: &'a super::config::ExperimentConfig,
    fit: &'a super::run::FitSummary,
    samples: usize,
}

/// `report.csv` and `report.json` in `dir`.
pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    write_atomic(&dir.join("report.csv"), report_csv(&report.rows).as_bytes())?;
    let sidecar = Sidecar {
        columns: &ReportRow::COLUMNS,
        config: &report.config,
        fit: &report.fit,
        samples: report.rows.len(),
    };
    write_atomic(&dir.join("report.json"), json_string(&sidecar).as_bytes())
}
