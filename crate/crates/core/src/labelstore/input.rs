use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::DatasetDescriptor;
use crate::error::{Error, Result};

/// One row of a per-dataset annotation table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    /// Id as it appears in the source study, before namespacing.
    pub sample_id: String,
    pub media_ref: String,
    /// Explicit annotations only. Classes absent from the map are unknown.
    pub labels: BTreeMap<String, i64>,
}

/// Annotation table of a single source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetTable {
    pub dataset: String,
    /// Class columns present in the source file.
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl DatasetTable {
    pub fn new(dataset: impl Into<String>) -> Self {
        DatasetTable {
            dataset: dataset.into(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Appends a row given as `(class, value)` pairs; classes seen for the first
    /// time are added to `columns`.
    pub fn push<'a>(
        &mut self,
        sample_id: impl Into<String>,
        media_ref: impl Into<String>,
        labels: impl IntoIterator<Item = (&'a str, i64)>,
    ) {
        let labels: BTreeMap<String, i64> = labels.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for k in labels.keys() {
            if !self.columns.contains(k) {
                self.columns.push(k.clone());
            }
        }
        self.rows.push(TableRow {
            sample_id: sample_id.into(),
            media_ref: media_ref.into(),
            labels,
        });
    }
}

/// Reads a dataset descriptor document (JSON).
pub fn read_descriptor(path: impl AsRef<Path>) -> Result<DatasetDescriptor> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let descriptor: DatasetDescriptor = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    descriptor.validate()?;
    Ok(descriptor)
}

/// Reads an annotation table with header `sample_id,media_ref,<class>,...`.
///
/// Cells hold `1`, `0`, `-1` or nothing; the last two mean unknown and are
/// left out of the row's label map.
pub fn read_table(path: impl AsRef<Path>, dataset: &str) -> Result<DatasetTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            kind => Error::parse(path, line, format!("{kind:?}")),
        }
    };

    let header = reader.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "sample_id" || &header[1] != "media_ref" {
        return Err(Error::parse(path, 1, "header must start with `sample_id,media_ref`"));
    }
    let columns: Vec<String> = header.iter().skip(2).map(|s| s.trim().to_string()).collect();
    if let Some(c) = columns.iter().find(|c| c.is_empty()) {
        return Err(Error::parse(path, 1, format!("empty class column name `{c}`")));
    }

    let mut table = DatasetTable {
        dataset: dataset.to_string(),
        columns,
        rows: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != table.columns.len() + 2 {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", table.columns.len() + 2, record.len()),
            ));
        }
        let mut labels = BTreeMap::new();
        for (class, cell) in table.columns.iter().zip(record.iter().skip(2)) {
            match cell.trim() {
                "" | "-1" => {}
                "1" => {
                    labels.insert(class.clone(), 1);
                }
                "0" => {
                    labels.insert(class.clone(), 0);
                }
                other => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("class `{class}`: cell `{other}` is not one of 1, 0, -1 or empty"),
                    ))
                }
            }
        }
        table.rows.push(TableRow {
            sample_id: record[0].trim().to_string(),
            media_ref: record[1].trim().to_string(),
            labels,
        });
    }
    Ok(table)
}
