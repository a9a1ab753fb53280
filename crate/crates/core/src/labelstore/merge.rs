use std::collections::{BTreeSet, HashMap, HashSet};

use super::{DatasetDescriptor, DatasetTable, MergedDatabase, SampleRecord, TernaryLabel};
use crate::error::{Error, Result};

/// Merges per-dataset annotation tables into one ternary database.
///
/// The class axis is the sorted union of all annotated sets. A cell is
/// `Unknown` when its class lies outside the source dataset's annotated set
/// or when the row carries no value for it. Sample ids become
/// `<dataset>/<original id>`. Records keep table order, then row order.
pub fn merge(descriptors: &[DatasetDescriptor], tables: &[DatasetTable]) -> Result<MergedDatabase> {
    let mut by_name: HashMap<&str, &DatasetDescriptor> = HashMap::new();
    for d in descriptors {
        d.validate()?;
        if by_name.insert(d.name.as_str(), d).is_some() {
            return Err(Error::Validation(format!("duplicate dataset descriptor `{}`", d.name)));
        }
    }
    let class_names: Vec<String> = descriptors
        .iter()
        .flat_map(|d| d.annotated_classes.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(tables.iter().map(|t| t.rows.len()).sum());
    for table in tables {
        let descriptor = by_name.get(table.dataset.as_str()).ok_or_else(|| {
            Error::Validation(format!("no descriptor for dataset `{}`", table.dataset))
        })?;
        let undeclared = |class: &String| Error::UndeclaredClass {
            dataset: table.dataset.clone(),
            class: class.clone(),
        };
        if let Some(c) = table
            .columns
            .iter()
            .find(|c| !descriptor.annotated_classes.contains(*c))
        {
            return Err(undeclared(c));
        }
        for row in &table.rows {
            let sample_id = format!("{}/{}", table.dataset, row.sample_id);
            if !seen.insert(sample_id.clone()) {
                return Err(Error::DuplicateSampleId(sample_id));
            }
            let mut labels = vec![TernaryLabel::Unknown; class_names.len()];
            for (class, &value) in &row.labels {
                if !descriptor.annotated_classes.contains(class) {
                    return Err(undeclared(class));
                }
                let label = match value {
                    1 => TernaryLabel::Displayed,
                    0 => TernaryLabel::NotDisplayed,
                    v => {
                        return Err(Error::InvalidLabelValue {
                            dataset: table.dataset.clone(),
                            sample_id: row.sample_id.clone(),
                            class: class.clone(),
                            value: v,
                        })
                    }
                };
                labels[index[class.as_str()]] = label;
            }
            records.push(SampleRecord {
                sample_id,
                dataset: table.dataset.clone(),
                media_ref: row.media_ref.clone(),
                labels,
            });
        }
    }

    MergedDatabase::from_parts(class_names, descriptors.to_vec(), records)
}
