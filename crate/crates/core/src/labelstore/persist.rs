//! Line-delimited JSON file for the merged database.
//!
//! Line 1 is a header object (`format`, `version`, `class_names`,
//! `descriptors`); every following line is one record whose `labels` array
//! holds ternary codes in class-axis order. `null` is read as unknown but
//! unknown is always written as `-1`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetDescriptor, MergedDatabase, SampleRecord, TernaryLabel};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

const FORMAT: &str = "aumask.merged-db";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    class_names: Vec<String>,
    descriptors: Vec<DatasetDescriptor>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    sample_id: &'a str,
    dataset: &'a str,
    media_ref: &'a str,
    labels: Vec<i8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    sample_id: String,
    dataset: String,
    media_ref: String,
    labels: Vec<Option<i64>>,
}

/// Serializes the database; identical databases give identical bytes.
pub fn to_bytes(db: &MergedDatabase) -> Vec<u8> {
    let header = Header {
        format: FORMAT.to_string(),
        version: VERSION,
        class_names: db.class_names().to_vec(),
        descriptors: db.descriptors().to_vec(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for r in db.records() {
        let line = RecordOut {
            sample_id: &r.sample_id,
            dataset: &r.dataset,
            media_ref: &r.media_ref,
            labels: r.labels.iter().map(|l| l.code()).collect(),
        };
        serde_json::to_writer(&mut out, &line).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn save(db: &MergedDatabase, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &to_bytes(db))
}

pub fn load(path: impl AsRef<Path>) -> Result<MergedDatabase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}

fn parse(path: &Path, text: &str) -> Result<MergedDatabase> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| Error::parse(path, 1, format!("header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::parse(path, 1, format!("unexpected format `{}`", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::parse(path, 1, format!("unsupported version {}", header.version)));
    }

    let mut records = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordIn =
            serde_json::from_str(line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        let labels = raw
            .labels
            .iter()
            .map(|code| match code {
                None => Ok(TernaryLabel::Unknown),
                Some(c) => TernaryLabel::from_code(*c).ok_or_else(|| {
                    Error::parse(path, line_no, format!("ternary code {c} is not one of -1, 0, 1"))
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(SampleRecord {
            sample_id: raw.sample_id,
            dataset: raw.dataset,
            media_ref: raw.media_ref,
            labels,
        });
    }
    MergedDatabase::from_parts(header.class_names, header.descriptors, records)
}
