use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::runner::MetricsRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Json,
    Csv,
}

impl MetricsFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(MetricsFormat::Json),
            "csv" => Ok(MetricsFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown metrics format '{other}'; valid: json, csv"
            ))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Full f64 precision: 17 significant digits round-trip any double exactly.
fn full(v: f64) -> String {
    format!("{v:.16e}")
}

fn full_opt(v: Option<f64>) -> String {
    v.map(full).unwrap_or_default()
}

/// Write a metrics record. JSON carries the whole record with stable key
/// order; CSV carries one row per epoch under a header. All numeric fields
/// round-trip losslessly.
pub fn emit_metrics(record: &MetricsRecord, format: MetricsFormat, path: &Path) -> Result<()> {
    match format {
        MetricsFormat::Json => {
            let text = serde_json::to_string_pretty(record)
                .map_err(|e| Error::Config(format!("metrics serialization failed: {e}")))?;
            fs::write(path, text + "\n").map_err(io_err(path))?;
        }
        MetricsFormat::Csv => {
            let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io {
                    path: path.display().to_string(),
                    source: io,
                },
                other => Error::Config(format!("csv error: {other:?}")),
            })?;
            writer
                .write_record([
                    "epoch",
                    "train_accuracy",
                    "test_accuracy",
                    "mean_global_loss",
                    "mean_ger",
                    "mean_ler",
                    "mean_target_mad",
                ])
                .and_then(|_| {
                    for e in &record.epochs {
                        writer.write_record([
                            e.epoch.to_string(),
                            full(e.train_accuracy),
                            full(e.test_accuracy),
                            full(e.mean_global_loss),
                            full_opt(e.mean_ger),
                            full_opt(e.mean_ler),
                            full_opt(e.mean_target_mad),
                        ])?;
                    }
                    writer.flush().map_err(csv::Error::from)
                })
                .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        }
    }
    Ok(())
}

pub fn read_metrics_json(path: &Path) -> Result<MetricsRecord> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("metrics parse failed: {e}")))
}
