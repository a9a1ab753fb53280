//! Ternary label model and the merged meta-database.
//!
//! Every cell of ground truth is one of three states. `Unknown` means the
//! source study never annotated the class for that image (or the annotator
//! could not see it); it is never coerced into a positive or negative label.

mod database;
mod input;
mod merge;
mod persist;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use database::{ClassCounts, ClassHistogram, MergedDatabase, SampleRecord};
pub use input::{read_descriptor, read_table, DatasetTable, TableRow};
pub use merge::merge;
pub use persist::{load, save, to_bytes};

/// Ground-truth state of one (sample, class) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TernaryLabel {
    NotDisplayed,
    Displayed,
    Unknown,
}

impl TernaryLabel {
    /// On-disk code: 1 displayed, 0 not displayed, -1 unknown.
    pub fn code(self) -> i8 {
        match self {
            TernaryLabel::Displayed => 1,
            TernaryLabel::NotDisplayed => 0,
            TernaryLabel::Unknown => -1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(TernaryLabel::Displayed),
            0 => Some(TernaryLabel::NotDisplayed),
            -1 => Some(TernaryLabel::Unknown),
            _ => None,
        }
    }

    pub fn from_bool(displayed: bool) -> Self {
        if displayed {
            TernaryLabel::Displayed
        } else {
            TernaryLabel::NotDisplayed
        }
    }

    /// `None` for unknown cells.
    pub fn as_bool(self) -> Option<bool> {
        match self {
            TernaryLabel::Displayed => Some(true),
            TernaryLabel::NotDisplayed => Some(false),
            TernaryLabel::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != TernaryLabel::Unknown
    }
}

impl fmt::Display for TernaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

fn check_class_names(class_names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(class_names.len());
    for name in class_names {
        if name.is_empty() {
            return Err(Error::Validation("class names must be non-empty".into()));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Validation(format!("duplicate class name `{name}`")));
        }
    }
    Ok(())
}

/// Samples × classes grid of ternary ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    class_names: Vec<String>,
    rows: Vec<Vec<TernaryLabel>>,
}

impl LabelMatrix {
    pub fn new(class_names: Vec<String>, rows: Vec<Vec<TernaryLabel>>) -> Result<Self> {
        check_class_names(&class_names)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != class_names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "label row {i} has {} entries, expected {}",
                    row.len(),
                    class_names.len()
                )));
            }
        }
        Ok(LabelMatrix { class_names, rows })
    }

    /// Builds a matrix from on-disk codes (-1, 0, 1).
    pub fn from_codes(class_names: Vec<String>, codes: &[Vec<i64>]) -> Result<Self> {
        let rows = codes
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| {
                        TernaryLabel::from_code(c)
                            .ok_or_else(|| Error::InvalidArgument(format!("ternary code {c} is not one of -1, 0, 1")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(class_names, rows)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn rows(&self) -> &[Vec<TernaryLabel>] {
        &self.rows
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn get(&self, sample: usize, class: usize) -> TernaryLabel {
        self.rows[sample][class]
    }

    pub fn column(&self, class: usize) -> Vec<TernaryLabel> {
        self.rows.iter().map(|r| r[class]).collect()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> LabelMatrix {
        LabelMatrix {
            class_names: self.class_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn unknown_count(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .filter(|l| **l == TernaryLabel::Unknown)
            .count()
    }
}

/// Samples × classes grid of probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    class_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl PredictionMatrix {
    pub fn new(class_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_class_names(&class_names)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != class_names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "prediction row {i} has {} entries, expected {}",
                    row.len(),
                    class_names.len()
                )));
            }
            if let Some((j, p)) = row.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidArgument(format!(
                    "prediction at row {i}, class `{}` is {p}, outside [0, 1]",
                    class_names[j]
                )));
            }
        }
        Ok(PredictionMatrix { class_names, rows })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn column(&self, class: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[class]).collect()
    }

    /// Fails unless `truth` has the same class axis and sample count.
    pub fn check_paired(&self, truth: &LabelMatrix) -> Result<()> {
        check_axes(truth.class_names(), &self.class_names)?;
        if truth.n_samples() != self.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} truth rows vs {} prediction rows",
                truth.n_samples(),
                self.n_samples()
            )));
        }
        Ok(())
    }
}

/// Compares two class axes, naming the first differing class on mismatch.
pub fn check_axes(expected: &[String], found: &[String]) -> Result<()> {
    for i in 0..expected.len().max(found.len()) {
        let e = expected.get(i).map(String::as_str).unwrap_or("<none>");
        let f = found.get(i).map(String::as_str).unwrap_or("<none>");
        if e != f {
            return Err(Error::ClassAxisMismatch {
                expected: e.to_string(),
                found: f.to_string(),
            });
        }
    }
    Ok(())
}

/// Declares which classes one source study annotates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub annotated_classes: std::collections::BTreeSet<String>,
    #[serde(default)]
    pub source_uri: String,
    #[serde(default)]
    pub notes: String,
}

impl DatasetDescriptor {
    pub fn new<I, S>(name: impl Into<String>, annotated: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        DatasetDescriptor {
            name: name.into(),
            annotated_classes: annotated.into_iter().map(Into::into).collect(),
            source_uri: String::new(),
            notes: String::new(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Validation("dataset name must be non-empty".into()));
        }
        if self.name.contains('/') {
            return Err(Error::Validation(format!(
                "dataset name `{}` must not contain `/`",
                self.name
            )));
        }
        if self.annotated_classes.is_empty() {
            return Err(Error::Validation(format!(
                "dataset `{}` declares no annotated classes",
                self.name
            )));
        }
        if self.annotated_classes.iter().any(String::is_empty) {
            return Err(Error::Validation(format!(
                "dataset `{}` declares an empty class name",
                self.name
            )));
        }
        Ok(())
    }
}
