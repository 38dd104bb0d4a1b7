use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{ExperimentResult, RawRow, SeedEntry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Parse(format!("unknown report format {other:?}"))),
        }
    }
}

/// Config and per-realization seeds; enough to replay any cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub linear_baseline_std: f64,
    pub quoted_linear_baseline_std: f64,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedEntry>,
}

impl Ledger {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let ledger: Ledger = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        ledger.config.validate()?;
        Ok(ledger)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub raw: PathBuf,
    pub ledger: PathBuf,
}

/// Writes `summary`, `raw` and `ledger` files into `dir`.
///
/// The ledger is TOML for the CSV format and JSON otherwise.
pub fn emit_report(result: &ExperimentResult, format: ReportFormat, dir: impl AsRef<Path>) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let ext = format.extension();
    let files = ReportFiles {
        summary: dir.join(format!("summary.{ext}")),
        raw: dir.join(format!("raw.{ext}")),
        ledger: dir.join(match format {
            ReportFormat::Csv => "ledger.toml".to_string(),
            ReportFormat::Json => "ledger.json".to_string(),
        }),
    };
    let ledger = Ledger {
        linear_baseline_std: result.linear_baseline_std,
        quoted_linear_baseline_std: result.quoted_linear_baseline_std,
        config: result.config.clone(),
        seeds: result.seeds.clone(),
    };

    match format {
        ReportFormat::Csv => {
            write_csv(&files.summary, &result.summaries)?;
            write_csv(&files.raw, &result.rows)?;
            let text = toml::to_string(&ledger).map_err(|e| Error::Config(e.to_string()))?;
            fs::write(&files.ledger, text)?;
        }
        ReportFormat::Json => {
            write_json(&files.summary, &result.summaries)?;
            write_json(&files.raw, &result.rows)?;
            write_json(&files.ledger, &ledger)?;
        }
    }
    Ok(files)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

/// Reads a raw table written by [`emit_report`], choosing the parser by
/// extension.
pub fn read_raw(path: impl AsRef<Path>) -> Result<Vec<RawRow>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_reader(File::open(path)?)?)
    } else {
        let mut r = csv::Reader::from_path(path)?;
        r.deserialize().map(|row| row.map_err(Error::from)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::run::run_experiment;
    use crate::report::Method;

    fn result() -> ExperimentResult {
        let cfg = ExperimentConfig {
            n: 200,
            realizations: 3,
            methods: vec![Method::PemW, Method::Ii1W],
            ..ExperimentConfig::paper_uniform()
        };
        run_experiment(&cfg).unwrap()
    }

    #[test]
    fn csv_files_round_trip() {
        let res = result();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&res, ReportFormat::Csv, dir.path()).unwrap();
        let raw_text = fs::read_to_string(&files.raw).unwrap();
        assert_eq!(raw_text.lines().count(), 7);
        let back = read_raw(&files.raw).unwrap();
        assert_eq!(back, res.rows);
        let ledger = Ledger::load(&files.ledger).unwrap();
        assert_eq!(ledger.config, res.config);
        assert_eq!(ledger.seeds, res.seeds);
        let summary = fs::read_to_string(&files.summary).unwrap();
        assert_eq!(summary.lines().count(), 3);
    }

    #[test]
    fn json_files_round_trip() {
        let res = result();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&res, ReportFormat::Json, dir.path()).unwrap();
        assert_eq!(read_raw(&files.raw).unwrap(), res.rows);
        assert_eq!(Ledger::load(&files.ledger).unwrap().config, res.config);
    }

    #[test]
    fn format_names() {
        assert_eq!("CSV".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
