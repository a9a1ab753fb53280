//! Readers for the CLI-only input files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use aumask_core::labelstore::{check_axes, LabelMatrix, MergedDatabase, PredictionMatrix};
use aumask_core::metrics::OccurrenceWeights;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => io_error(path, e),
        _ => CliError::domain(format!("{}:{line}: {e}", path.display())),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Reads `sample_id,<class>,...` probabilities and aligns them with the
/// database's record order and class axis.
pub fn read_predictions(path: &Path, db: &MergedDatabase) -> Result<PredictionMatrix, CliError> {
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("sample_id") {
        return Err(CliError::domain(format!(
            "{}:1: header must start with `sample_id`",
            path.display()
        )));
    }
    let classes: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    check_axes(db.class_names(), &classes)?;

    let mut by_id: HashMap<String, Vec<f64>> = HashMap::with_capacity(db.len());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let at = |msg: String| CliError::domain(format!("{}:{line}: {msg}", path.display()));
        if record.len() != classes.len() + 1 {
            return Err(at(format!("expected {} fields, found {}", classes.len() + 1, record.len())));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| at(format!("`{cell}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let id = record[0].trim().to_string();
        if by_id.insert(id.clone(), values).is_some() {
            return Err(at(format!("duplicate prediction for `{id}`")));
        }
    }

    let mut rows = Vec::with_capacity(db.len());
    for r in db.records() {
        rows.push(
            by_id
                .remove(&r.sample_id)
                .ok_or_else(|| CliError::domain(format!("no prediction for sample `{}`", r.sample_id)))?,
        );
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(CliError::domain(format!("prediction for unknown sample `{extra}`")));
    }
    Ok(PredictionMatrix::new(db.class_names().to_vec(), rows)?)
}

/// Reads a `class,count` CSV of displayed occurrences.
pub fn read_weights(path: &Path) -> Result<OccurrenceWeights, CliError> {
    let mut reader = open_csv(path)?;
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(CliError::domain(format!("{}:{line}: expected `class,count`", path.display())));
        }
        let count = record[1]
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::domain(format!("{}:{line}: bad count `{}`", path.display(), &record[1])))?;
        pairs.push((record[0].trim().to_string(), count));
    }
    Ok(OccurrenceWeights::from_pairs(pairs))
}

/// Truth/prediction pair for `grad-check`.
#[derive(Debug, Serialize, Deserialize)]
pub struct GradFixture {
    pub class_names: Vec<String>,
    /// Ternary codes: 1, 0, -1.
    pub truth: Vec<Vec<i64>>,
    pub predictions: Vec<Vec<f64>>,
}

impl GradFixture {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::domain(format!("{}:{}: {e}", path.display(), e.line())))
    }

    /// Uniform predictions in (0, 1), balanced truth, cells masked with
    /// probability `missingness`. Every class keeps at least one displayed cell.
    pub fn random(seed: u64, samples: usize, classes: usize, missingness: f64) -> Result<Self, CliError> {
        if samples == 0 || classes == 0 || !(0.0..1.0).contains(&missingness) {
            return Err(CliError::domain("random fixture needs samples, classes >= 1 and missingness in [0, 1)"));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut truth = vec![vec![0i64; classes]; samples];
        let mut predictions = vec![vec![0.0; classes]; samples];
        for (t_row, p_row) in truth.iter_mut().zip(predictions.iter_mut()) {
            for (t, p) in t_row.iter_mut().zip(p_row.iter_mut()) {
                *p = rng.random_range(0.01..0.99);
                *t = if rng.random::<f64>() < missingness {
                    -1
                } else {
                    rng.random_range(0..2)
                };
            }
        }
        for c in 0..classes {
            if !truth.iter().any(|r| r[c] == 1) {
                let i = rng.random_range(0..samples);
                truth[i][c] = 1;
            }
        }
        Ok(GradFixture {
            class_names: (0..classes).map(|c| format!("class_{c:02}")).collect(),
            truth,
            predictions,
        })
    }

    pub fn matrices(&self) -> Result<(PredictionMatrix, LabelMatrix), CliError> {
        Ok((
            PredictionMatrix::new(self.class_names.clone(), self.predictions.clone())?,
            LabelMatrix::from_codes(self.class_names.clone(), &self.truth)?,
        ))
    }
}
