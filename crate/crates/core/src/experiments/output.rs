//! CSV and JSON renderings of sweep tables.
//!
//! CSV files start with `#` comment lines holding the run metadata, then a
//! header row with [`CSV_COLUMNS`]. Floats are written with 17 significant
//! digits so every `f64` survives a round trip; missing values are empty
//! fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sweep::SweepRow;
use super::RunMetadata;
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 10] = [
    "mu",
    "length_km",
    "qber_bs",
    "qber_active",
    "i_ae_active",
    "mu_e_opt",
    "block_fraction",
    "fully_insecure",
    "margin",
    "mu_opt",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> OutputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidSpec(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn record(row: &SweepRow) -> [String; 10] {
    [
        fmt_f64(row.mu),
        fmt_f64(row.length_km),
        fmt_opt(row.qber_bs),
        fmt_opt(row.qber_active),
        fmt_opt(row.i_ae_active),
        fmt_opt(row.mu_e_opt),
        fmt_opt(row.block_fraction),
        row.fully_insecure.map(|b| b.to_string()).unwrap_or_default(),
        fmt_opt(row.margin),
        fmt_opt(row.mu_opt),
    ]
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv(path: &Path, meta: &RunMetadata, rows: &[SweepRow]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# tool: {} {}", meta.tool, meta.version).map_err(io_err(path))?;
    writeln!(out, "# command: {}", meta.command).map_err(io_err(path))?;
    writeln!(out, "# config: {}", meta.config).map_err(io_err(path))?;

    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(record(row)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    metadata: &'a RunMetadata,
    rows: &'a [SweepRow],
}

pub fn write_json(path: &Path, meta: &RunMetadata, rows: &[SweepRow]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &JsonDocument { metadata: meta, rows }).map_err(|source| {
        Error::Json {
            path: path.to_path_buf(),
            source,
        }
    })?;
    writeln!(out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Reads a table written by [`write_csv`], skipping the metadata comments.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let opt_f64 = |field: &str| -> Result<Option<f64>> {
        if field.is_empty() {
            Ok(None)
        } else {
            field
                .parse()
                .map(Some)
                .map_err(|_| parse_err(format!("bad number {field:?}")))
        }
    };
    let req_f64 = |field: &str| -> Result<f64> {
        opt_f64(field)?.ok_or_else(|| parse_err("missing required value".into()))
    };

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        let fully_insecure = match &rec[7] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(parse_err(format!("bad flag {other:?}"))),
        };
        rows.push(SweepRow {
            mu: req_f64(&rec[0])?,
            length_km: req_f64(&rec[1])?,
            qber_bs: opt_f64(&rec[2])?,
            qber_active: opt_f64(&rec[3])?,
            i_ae_active: opt_f64(&rec[4])?,
            mu_e_opt: opt_f64(&rec[5])?,
            block_fraction: opt_f64(&rec[6])?,
            fully_insecure,
            margin: opt_f64(&rec[8])?,
            mu_opt: opt_f64(&rec[9])?,
        });
    }
    Ok(rows)
}
