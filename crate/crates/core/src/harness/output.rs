//! CSV and JSON emission. Every file carries the resolved configuration and
//! seed so a run can be reproduced from its output alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

fn header(command: &str, cfg: &ExperimentConfig) -> serde_json::Map<String, serde_json::Value> {
    let mut map = serde_json::Map::new();
    map.insert("command".into(), command.into());
    map.insert("seed".into(), cfg.seed.into());
    map.insert("config".into(), cfg.to_json());
    map
}

/// Per-trial rows as CSV, preceded by `#` comment lines holding the command,
/// the seed and the resolved configuration.
pub fn write_csv<W: Write, R: Serialize>(out: W, command: &str, cfg: &ExperimentConfig, rows: &[R]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# irskey {command}")?;
    writeln!(out, "# seed = {}", cfg.seed)?;
    writeln!(out, "# config = {}", serde_json::to_string(&cfg.to_json())?)?;
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Aggregates with the command, seed and configuration.
pub fn summary_json<S: Serialize>(command: &str, cfg: &ExperimentConfig, summary: &S) -> Result<serde_json::Value> {
    let mut map = header(command, cfg);
    map.insert("summary".into(), serde_json::to_value(summary)?);
    Ok(serde_json::Value::Object(map))
}

/// Rows and aggregates in a single JSON document.
pub fn write_json<W: Write, R: Serialize, S: Serialize>(
    out: W,
    command: &str,
    cfg: &ExperimentConfig,
    rows: &[R],
    summary: &S,
) -> Result<()> {
    let mut map = header(command, cfg);
    map.insert("rows".into(), serde_json::to_value(rows)?);
    map.insert("summary".into(), serde_json::to_value(summary)?);
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &serde_json::Value::Object(map))?;
    writeln!(out)?;
    Ok(())
}

/// Location of the JSON summary written next to a CSV file.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

/// Writes a run to `out` (standard output when absent). CSV output to a file
/// also writes the aggregates to [`summary_path`]. Returns the files written.
pub fn emit<R: Serialize, S: Serialize>(
    out: Option<&Path>,
    format: Format,
    command: &str,
    cfg: &ExperimentConfig,
    rows: &[R],
    summary: &S,
) -> Result<Vec<PathBuf>> {
    match (out, format) {
        (None, Format::Csv) => {
            write_csv(std::io::stdout().lock(), command, cfg, rows)?;
            Ok(Vec::new())
        }
        (None, Format::Json) => {
            write_json(std::io::stdout().lock(), command, cfg, rows, summary)?;
            Ok(Vec::new())
        }
        (Some(path), Format::Csv) => {
            let mut file = BufWriter::new(File::create(path)?);
            write_csv(&mut file, command, cfg, rows)?;
            file.flush()?;
            let sp = summary_path(path);
            let mut file = BufWriter::new(File::create(&sp)?);
            serde_json::to_writer_pretty(&mut file, &summary_json(command, cfg, summary)?)?;
            writeln!(file)?;
            file.flush()?;
            Ok(vec![path.to_path_buf(), sp])
        }
        (Some(path), Format::Json) => {
            let mut file = BufWriter::new(File::create(path)?);
            write_json(&mut file, command, cfg, rows, summary)?;
            file.flush()?;
            Ok(vec![path.to_path_buf()])
        }
    }
}
