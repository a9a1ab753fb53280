use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use super::{check_class_names, DatasetDescriptor, LabelMatrix, TernaryLabel};
use crate::error::{Error, Result};

/// One image of the merged database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    /// `<dataset>/<original id>`.
    pub sample_id: String,
    pub dataset: String,
    pub media_ref: String,
    /// Ternary vector in class-axis order.
    pub labels: Vec<TernaryLabel>,
}

/// The unified ternary meta-database built from several partially annotated studies.
///
/// Construction always goes through [`MergedDatabase::from_parts`] (directly, via
/// [`merge`](super::merge), or via [`load`](super::load)), so every instance
/// satisfies its invariants:
///
/// - the class axis is the sorted union of the descriptors' annotated classes,
/// - every cell outside the source dataset's annotated set is `Unknown`,
/// - sample ids are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedDatabase {
    class_names: Vec<String>,
    descriptors: Vec<DatasetDescriptor>,
    records: Vec<SampleRecord>,
}

impl MergedDatabase {
    pub fn from_parts(
        class_names: Vec<String>,
        descriptors: Vec<DatasetDescriptor>,
        records: Vec<SampleRecord>,
    ) -> Result<Self> {
        check_class_names(&class_names)?;
        if class_names.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("class names must be sorted lexicographically".into()));
        }

        let mut by_name: HashMap<&str, &DatasetDescriptor> = HashMap::new();
        let mut union = BTreeSet::new();
        for d in &descriptors {
            d.validate()?;
            if by_name.insert(d.name.as_str(), d).is_some() {
                return Err(Error::Validation(format!("duplicate dataset descriptor `{}`", d.name)));
            }
            union.extend(d.annotated_classes.iter().cloned());
        }
        if !union.iter().eq(class_names.iter()) {
            return Err(Error::Validation(
                "class axis differs from the union of the descriptors' annotated classes".into(),
            ));
        }

        let mut ids = HashSet::with_capacity(records.len());
        for r in &records {
            if !ids.insert(r.sample_id.as_str()) {
                return Err(Error::DuplicateSampleId(r.sample_id.clone()));
            }
            let Some(d) = by_name.get(r.dataset.as_str()) else {
                return Err(Error::Validation(format!(
                    "sample `{}` references undeclared dataset `{}`",
                    r.sample_id, r.dataset
                )));
            };
            if r.labels.len() != class_names.len() {
                return Err(Error::Validation(format!(
                    "sample `{}` has {} labels, expected {}",
                    r.sample_id,
                    r.labels.len(),
                    class_names.len()
                )));
            }
            for (class, label) in class_names.iter().zip(&r.labels) {
                if label.is_known() && !d.annotated_classes.contains(class) {
                    return Err(Error::Validation(format!(
                        "sample `{}` carries a label for `{class}`, which dataset `{}` does not annotate",
                        r.sample_id, r.dataset
                    )));
                }
            }
        }

        Ok(MergedDatabase {
            class_names,
            descriptors,
            records,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn descriptors(&self) -> &[DatasetDescriptor] {
        &self.descriptors
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }

    pub fn label_matrix(&self) -> LabelMatrix {
        LabelMatrix {
            class_names: self.class_names.clone(),
            rows: self.records.iter().map(|r| r.labels.clone()).collect(),
        }
    }

    /// Fraction of cells that are `Unknown`.
    pub fn missing_fraction(&self) -> Result<f64> {
        if self.records.is_empty() || self.class_names.is_empty() {
            return Err(Error::Empty("database has no cells".into()));
        }
        let unknown = self
            .records
            .iter()
            .flat_map(|r| &r.labels)
            .filter(|l| **l == TernaryLabel::Unknown)
            .count();
        Ok(unknown as f64 / (self.records.len() * self.class_names.len()) as f64)
    }

    pub fn class_histogram(&self) -> ClassHistogram {
        let mut counts = vec![ClassCounts::default(); self.class_names.len()];
        for r in &self.records {
            for (c, label) in counts.iter_mut().zip(&r.labels) {
                match label {
                    TernaryLabel::Displayed => c.displayed += 1,
                    TernaryLabel::NotDisplayed => c.not_displayed += 1,
                    TernaryLabel::Unknown => c.unknown += 1,
                }
            }
        }
        ClassHistogram {
            class_names: self.class_names.clone(),
            counts,
            records: self.records.len() as u64,
        }
    }

    /// Keeps the records for which `keep` returns true, preserving order.
    pub fn retain_records(&self, mut keep: impl FnMut(&SampleRecord) -> bool) -> MergedDatabase {
        MergedDatabase {
            class_names: self.class_names.clone(),
            descriptors: self.descriptors.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Narrows the class axis to `selected`.
    ///
    /// Descriptors are intersected with the selection and those left with no
    /// annotated class are removed; this fails if such a descriptor still owns
    /// records (run unknown-row removal first).
    pub fn restrict_classes(&self, selected: &[String]) -> Result<MergedDatabase> {
        let keep: BTreeSet<&String> = selected.iter().collect();
        let mut columns = Vec::with_capacity(keep.len());
        for name in &keep {
            columns.push(
                self.class_index(name)
                    .ok_or_else(|| Error::UnknownClass((*name).clone()))?,
            );
        }
        let class_names: Vec<String> = keep.iter().map(|s| (*s).clone()).collect();
        let descriptors: Vec<DatasetDescriptor> = self
            .descriptors
            .iter()
            .filter_map(|d| {
                let annotated: BTreeSet<String> = d
                    .annotated_classes
                    .iter()
                    .filter(|c| keep.contains(c))
                    .cloned()
                    .collect();
                (!annotated.is_empty()).then(|| DatasetDescriptor {
                    annotated_classes: annotated,
                    ..d.clone()
                })
            })
            .collect();
        let records = self
            .records
            .iter()
            .map(|r| SampleRecord {
                labels: columns.iter().map(|&c| r.labels[c]).collect(),
                ..r.clone()
            })
            .collect();
        MergedDatabase::from_parts(class_names, descriptors, records)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub displayed: u64,
    pub not_displayed: u64,
    pub unknown: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.displayed + self.not_displayed + self.unknown
    }
}

/// Per-class displayed / not displayed / unknown counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassHistogram {
    pub class_names: Vec<String>,
    pub counts: Vec<ClassCounts>,
    pub records: u64,
}

impl ClassHistogram {
    pub fn get(&self, class: &str) -> Option<ClassCounts> {
        self.class_names
            .iter()
            .position(|c| c == class)
            .map(|i| self.counts[i])
    }

    pub fn totals(&self) -> ClassCounts {
        self.counts.iter().fold(ClassCounts::default(), |acc, c| ClassCounts {
            displayed: acc.displayed + c.displayed,
            not_displayed: acc.not_displayed + c.not_displayed,
            unknown: acc.unknown + c.unknown,
        })
    }
}
