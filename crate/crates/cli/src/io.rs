use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use magictrap::dls::TrapCoefficients;
use magictrap::fitting::{DlsDataset, DlsPoint, RamseySample};
use magictrap::transfer::TimelineDocument;
use magictrap::units::depth_hz_from_mk;
use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::report::fmt_sig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] magictrap::Error),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Domain(e) => e.code(),
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "file-not-found",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn parse_err(path: &Path, reason: impl ToString) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        reason: reason.to_string().replace('\n', " "),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// TOML unless the extension is `.json`.
fn load_document<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| parse_err(path, e))
    } else {
        toml::from_str(&text).map_err(|e| parse_err(path, e))
    }
}

pub fn load_coeffs(path: Option<&Path>) -> CliResult<TrapCoefficients> {
    let coeffs = match path {
        Some(p) => load_document::<TrapCoefficients>(p)?,
        None => TrapCoefficients::experimental(),
    };
    coeffs.validate()?;
    Ok(coeffs)
}

pub fn load_timeline(path: &Path) -> CliResult<TimelineDocument> {
    load_document(path)
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn column(&self, path: &Path, name: &str) -> CliResult<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(path, format!("missing column `{name}`")))
    }
}

fn read_table(path: &Path) -> CliResult<Table> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns = reader
        .headers()
        .map_err(|e| parse_err(path, e))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e))?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(path, format!("record {}: `{f}` is not a number", line + 1)))
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Light-shift measurements grouped by bias field in order of first
/// appearance. The flag reports whether a sigma column was present; without
/// one every point gets unit weight.
pub fn read_dls_csv(path: &Path) -> CliResult<(Vec<DlsDataset>, bool)> {
    let table = read_table(path)?;
    let b = table.column(path, "b_field_gauss")?;
    let d = table.column(path, "depth_mk")?;
    let s = table.column(path, "dls_hz")?;
    let sigma = table.columns.get("sigma_hz").copied();
    let mut sets: Vec<DlsDataset> = Vec::new();
    for row in &table.rows {
        let point = DlsPoint {
            depth: depth_hz_from_mk(row[d])?,
            dls: row[s],
            sigma: sigma.map_or(1.0, |i| row[i]),
        };
        match sets.iter_mut().find(|ds| ds.b_field == row[b]) {
            Some(ds) => ds.points.push(point),
            None => sets.push(DlsDataset {
                b_field: row[b],
                points: vec![point],
            }),
        }
    }
    Ok((sets, sigma.is_some()))
}

pub fn read_ramsey_csv(path: &Path) -> CliResult<(Vec<RamseySample>, bool)> {
    let table = read_table(path)?;
    let t = table.column(path, "t_s")?;
    let p = table.column(path, "p")?;
    let sigma = table.columns.get("sigma").copied();
    let samples = table
        .rows
        .iter()
        .map(|row| RamseySample {
            t: row[t],
            p: row[p],
            sigma: sigma.map_or(1.0, |i| row[i]),
        })
        .collect();
    Ok((samples, sigma.is_some()))
}

pub enum Cell<'a> {
    Num(f64),
    Text(&'a str),
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>], digits: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| parse_err(path, e);
    w.write_record(header).map_err(io)?;
    for row in rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => fmt_sig(*x, digits),
                Cell::Text(s) => s.to_string(),
            })
            .collect();
        w.write_record(&fields).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| parse_err(path, e))?;
    write(path, &String::from_utf8_lossy(&bytes))
}

pub fn numeric_rows(columns: &[&[f64]]) -> Vec<Vec<Cell<'static>>> {
    let n = columns.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| columns.iter().map(|c| Cell::Num(c[i])).collect())
        .collect()
}
