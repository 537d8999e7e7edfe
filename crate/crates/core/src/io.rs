//! File formats for the pipeline's intermediate artifacts.
//!
//! CSV floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every finite f64 exactly; regenerating a report from persisted
//! files therefore reproduces a fresh run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::calculi::Calculus;
use crate::joint::{JointTable, CELL_COUNT};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path} row {row}: {message}")]
    Malformed {
        path: PathBuf,
        row: usize,
        message: String,
    },
}

const NETWORKS_HEADER: [&str; 9] = [
    "id", "p000", "p001", "p010", "p011", "p100", "p101", "p110", "p111",
];

const NORMS_HEADER: [&str; 6] = [
    "network_id",
    "p1",
    "p2",
    "posterior_c",
    "iterations",
    "residual",
];

/// Formats a float with enough digits to reparse to the identical bits.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// One line of `networks.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRow {
    pub id: u64,
    pub table: JointTable,
}

/// One line of `norms.csv`: the norm solution for one (network, probe) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub network_id: u64,
    pub p1: f64,
    pub p2: f64,
    pub posterior_c: f64,
    pub iterations: u64,
    pub residual: f64,
}

/// Contents of `per_network_rmse.csv`: additivity factor and tuned RMSE per
/// method, one row per network. `values` aligns with `methods`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseTable {
    pub methods: Vec<Calculus>,
    pub rows: Vec<RmseRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub network_id: u64,
    pub additivity: f64,
    pub values: Vec<f64>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, IoError> {
    csv::Writer::from_path(path).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_rows(path: &Path, expected_header: &[&str]) -> Result<Vec<csv::StringRecord>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let header = reader.headers().map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    if header.iter().ne(expected_header.iter().copied()) {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            row: 0,
            message: format!(
                "unexpected header {:?}, expected {:?}",
                header.iter().collect::<Vec<_>>(),
                expected_header
            ),
        });
    }
    reader
        .into_records()
        .enumerate()
        .map(|(i, record)| {
            record.map_err(|source| IoError::Malformed {
                path: path.to_path_buf(),
                row: i + 1,
                message: source.to_string(),
            })
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    name: &str,
    raw: &str,
) -> Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| IoError::Malformed {
        path: path.to_path_buf(),
        row,
        message: format!("{name} = {raw:?}: {e}"),
    })
}

/// Writes `networks.csv` with ids equal to the list position.
pub fn write_networks(path: &Path, tables: &[JointTable]) -> Result<(), IoError> {
    let mut writer = csv_writer(path)?;
    let fail = |source| IoError::Csv { path: path.to_path_buf(), source };
    writer.write_record(NETWORKS_HEADER).map_err(fail)?;
    for (id, table) in tables.iter().enumerate() {
        let mut record = vec![id.to_string()];
        record.extend(table.cells().iter().map(|&c| format_float(c)));
        writer.write_record(&record).map_err(fail)?;
    }
    writer.flush().map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `networks.csv`. Cell sums may carry text round-trip drift; anything
/// beyond the load tolerance is rejected.
pub fn read_networks(path: &Path) -> Result<Vec<NetworkRow>, IoError> {
    let mut rows = Vec::new();
    for (i, record) in csv_rows(path, &NETWORKS_HEADER)?.iter().enumerate() {
        let row = i + 1;
        if record.len() != NETWORKS_HEADER.len() {
            return Err(IoError::Malformed {
                path: path.to_path_buf(),
                row,
                message: format!("expected {} fields, got {}", NETWORKS_HEADER.len(), record.len()),
            });
        }
        let id: u64 = parse_field(path, row, "id", &record[0])?;
        let mut cells = [0.0; CELL_COUNT];
        for (k, cell) in cells.iter_mut().enumerate() {
            *cell = parse_field(path, row, NETWORKS_HEADER[k + 1], &record[k + 1])?;
        }
        let table = JointTable::from_unnormalized(cells).map_err(|e| IoError::Malformed {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        rows.push(NetworkRow { id, table });
    }
    Ok(rows)
}

pub fn write_norms(path: &Path, rows: &[NormRow]) -> Result<(), IoError> {
    let mut writer = csv_writer(path)?;
    let fail = |source| IoError::Csv { path: path.to_path_buf(), source };
    writer.write_record(NORMS_HEADER).map_err(fail)?;
    for r in rows {
        writer
            .write_record([
                r.network_id.to_string(),
                format_float(r.p1),
                format_float(r.p2),
                format_float(r.posterior_c),
                r.iterations.to_string(),
                format_float(r.residual),
            ])
            .map_err(fail)?;
    }
    writer.flush().map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_norms(path: &Path) -> Result<Vec<NormRow>, IoError> {
    let mut rows = Vec::new();
    for (i, record) in csv_rows(path, &NORMS_HEADER)?.iter().enumerate() {
        let row = i + 1;
        if record.len() != NORMS_HEADER.len() {
            return Err(IoError::Malformed {
                path: path.to_path_buf(),
                row,
                message: format!("expected {} fields, got {}", NORMS_HEADER.len(), record.len()),
            });
        }
        rows.push(NormRow {
            network_id: parse_field(path, row, "network_id", &record[0])?,
            p1: parse_field(path, row, "p1", &record[1])?,
            p2: parse_field(path, row, "p2", &record[2])?,
            posterior_c: parse_field(path, row, "posterior_c", &record[3])?,
            iterations: parse_field(path, row, "iterations", &record[4])?,
            residual: parse_field(path, row, "residual", &record[5])?,
        });
    }
    Ok(rows)
}

pub fn write_rmse_table(path: &Path, table: &RmseTable) -> Result<(), IoError> {
    let mut writer = csv_writer(path)?;
    let fail = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut header = vec!["network_id".to_string(), "additivity".to_string()];
    header.extend(table.methods.iter().map(|m| m.name().to_string()));
    writer.write_record(&header).map_err(fail)?;
    for r in &table.rows {
        if r.values.len() != table.methods.len() {
            return Err(IoError::Malformed {
                path: path.to_path_buf(),
                row: 0,
                message: format!(
                    "network {} has {} values for {} methods",
                    r.network_id,
                    r.values.len(),
                    table.methods.len()
                ),
            });
        }
        let mut record = vec![r.network_id.to_string(), format_float(r.additivity)];
        record.extend(r.values.iter().map(|&v| format_float(v)));
        writer.write_record(&record).map_err(fail)?;
    }
    writer.flush().map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_rmse_table(path: &Path) -> Result<RmseTable, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let header = reader
        .headers()
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 || fields[0] != "network_id" || fields[1] != "additivity" {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            row: 0,
            message: format!("unexpected header {fields:?}"),
        });
    }
    let methods = fields[2..]
        .iter()
        .map(|name| {
            name.parse::<Calculus>().map_err(|e| IoError::Malformed {
                path: path.to_path_buf(),
                row: 0,
                message: e,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.into_records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| IoError::Malformed {
            path: path.to_path_buf(),
            row,
            message: source.to_string(),
        })?;
        if record.len() != 2 + methods.len() {
            return Err(IoError::Malformed {
                path: path.to_path_buf(),
                row,
                message: format!("expected {} fields, got {}", 2 + methods.len(), record.len()),
            });
        }
        let values = (0..methods.len())
            .map(|k| parse_field(path, row, methods[k].name(), &record[2 + k]))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(RmseRow {
            network_id: parse_field(path, row, "network_id", &record[0])?,
            additivity: parse_field(path, row, "additivity", &record[1])?,
            values,
        });
    }
    Ok(RmseTable { methods, rows })
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}
