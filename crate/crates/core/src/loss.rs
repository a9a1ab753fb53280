//! Soft-F1-macro loss over masked labels.
//!
//! For class `c` with annotated positions `M`, let `T = Σ p·y` and
//! `S = Σ p + Σ y` over `M`. The soft F1 is `2T / (S + ε)`, which equals the
//! hard F1 whenever the predictions are binary and `ε = 0`. The loss is
//! `1 − mean_c softF1_c` over the classes that are not skipped in the batch,
//! and its gradient is
//!
//! ```text
//! ∂L/∂p_j = −(1/K) · 2·(y_j·(S+ε) − T) / (S+ε)²   for j ∈ M, 0 otherwise
//! ```
//!
//! where `K` is the number of non-skipped classes in the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelstore::{check_axes, LabelMatrix, PredictionMatrix, TernaryLabel};
use crate::metrics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftF1Config {
    /// Added to the denominator only.
    pub epsilon: f64,
    /// Drop classes with no displayed label in the masked batch.
    pub skip_empty_classes: bool,
}

impl Default for SoftF1Config {
    fn default() -> Self {
        SoftF1Config {
            epsilon: 1e-7,
            skip_empty_classes: true,
        }
    }
}

impl SoftF1Config {
    /// Validates the stabilizer. Zero is accepted so that exact identities
    /// with the hard metrics can be checked.
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_finite() && self.epsilon >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("epsilon {} must be finite and >= 0", self.epsilon)))
        }
    }
}

/// Soft counts of one masked column.
#[derive(Debug, Clone, Copy, Default)]
struct ColumnStats {
    annotated: usize,
    sum_p: f64,
    sum_y: f64,
    sum_py: f64,
}

impl ColumnStats {
    fn collect<'a>(cells: impl Iterator<Item = (f64, &'a TernaryLabel)>) -> Self {
        let mut s = ColumnStats::default();
        for (p, t) in cells {
            if let Some(y) = t.as_bool() {
                let y = if y { 1.0 } else { 0.0 };
                s.annotated += 1;
                s.sum_p += p;
                s.sum_y += y;
                s.sum_py += p * y;
            }
        }
        s
    }

    fn skipped(&self, config: &SoftF1Config) -> bool {
        self.annotated == 0 || (config.skip_empty_classes && self.sum_y == 0.0)
    }

    fn denominator(&self, config: &SoftF1Config) -> f64 {
        self.sum_p + self.sum_y + config.epsilon
    }

    fn soft_f1(&self, config: &SoftF1Config) -> f64 {
        let d = self.denominator(config);
        if d == 0.0 {
            0.0
        } else {
            2.0 * self.sum_py / d
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")))
    }
}

/// Soft F1 of one class column; `None` when the class is skipped.
pub fn soft_class_f1(pred: &[f64], truth: &[TernaryLabel], config: &SoftF1Config) -> Result<Option<f64>> {
    config.validate()?;
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} truth entries",
            pred.len(),
            truth.len()
        )));
    }
    for &p in pred {
        check_probability(p)?;
    }
    let stats = ColumnStats::collect(pred.iter().copied().zip(truth));
    Ok((!stats.skipped(config)).then(|| stats.soft_f1(config)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossResult {
    pub loss: f64,
    /// Mean soft F1 over the scored classes; `loss = 1 − soft_f1_macro`.
    pub soft_f1_macro: f64,
    /// ∂loss/∂p, same shape as the predictions. Exactly zero at unknown cells.
    pub gradient: Vec<Vec<f64>>,
    pub per_class_soft_f1: Vec<(String, Option<f64>)>,
    pub batch_skipped_classes: Vec<String>,
    /// Annotated positions per class in this batch.
    pub annotated_counts: Vec<usize>,
}

/// Loss and analytic gradient for a batch.
pub fn soft_f1_loss(pred: &PredictionMatrix, truth: &LabelMatrix, config: &SoftF1Config) -> Result<LossResult> {
    config.validate()?;
    check_axes(truth.class_names(), pred.class_names())?;
    pred.check_paired(truth)?;

    let n_classes = truth.n_classes();
    let stats: Vec<ColumnStats> = (0..n_classes)
        .map(|c| {
            ColumnStats::collect(
                pred.rows()
                    .iter()
                    .zip(truth.rows())
                    .map(|(p, t)| (p[c], &t[c])),
            )
        })
        .collect();

    let scores: Vec<Option<f64>> = stats
        .iter()
        .map(|s| (!s.skipped(config)).then(|| s.soft_f1(config)))
        .collect();
    // Shares the summation order of the hard metrics.
    let soft_f1_macro = metrics::mean_of_scored(scores.iter().copied())?;
    let k = scores.iter().flatten().count();

    // Per class: ∂L/∂p_j = coef · (y_j·D − T) with coef = −2 / (K·D²).
    let coefs: Vec<Option<(f64, f64, f64)>> = stats
        .iter()
        .map(|s| {
            if s.skipped(config) {
                return None;
            }
            let d = s.denominator(config);
            (d > 0.0).then(|| (-2.0 / (k as f64 * d * d), d, s.sum_py))
        })
        .collect();
    let gradient = truth
        .rows()
        .iter()
        .map(|t_row| {
            t_row
                .iter()
                .zip(&coefs)
                .map(|(t, coef)| match (t.as_bool(), coef) {
                    (Some(y), Some((scale, d, sum_py))) => {
                        let y = if y { 1.0 } else { 0.0 };
                        scale * (y * d - sum_py)
                    }
                    _ => 0.0,
                })
                .collect()
        })
        .collect();

    Ok(LossResult {
        loss: 1.0 - soft_f1_macro,
        soft_f1_macro,
        gradient,
        per_class_soft_f1: truth.class_names().iter().cloned().zip(scores.iter().copied()).collect(),
        batch_skipped_classes: truth
            .class_names()
            .iter()
            .zip(&scores)
            .filter(|(_, s)| s.is_none())
            .map(|(c, _)| c.clone())
            .collect(),
        annotated_counts: stats.iter().map(|s| s.annotated).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Annotated cells within `step` of 0 or 1, left out.
    pub excluded: usize,
    /// Largest |analytic| gradient seen at an unknown cell; always 0.
    pub max_unknown_gradient: f64,
}

/// |a − b| / max(|a|, |b|), and 0 when both are 0.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Compares the analytic gradient with central finite differences at every
/// annotated cell whose perturbation stays inside [0, 1].
pub fn finite_difference_check(
    pred: &PredictionMatrix,
    truth: &LabelMatrix,
    config: &SoftF1Config,
    step: f64,
) -> Result<GradCheck> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let base = soft_f1_loss(pred, truth, config)?;
    let mut rows = pred.rows().to_vec();
    let mut report = GradCheck {
        max_relative_error: 0.0,
        checked: 0,
        excluded: 0,
        max_unknown_gradient: 0.0,
    };
    for i in 0..rows.len() {
        for c in 0..truth.n_classes() {
            let analytic = base.gradient[i][c];
            if !truth.get(i, c).is_known() {
                report.max_unknown_gradient = report.max_unknown_gradient.max(analytic.abs());
                continue;
            }
            let p = rows[i][c];
            if p - step < 0.0 || p + step > 1.0 {
                report.excluded += 1;
                continue;
            }
            let (hi, lo) = (p + step, p - step);
            rows[i][c] = hi;
            let up = soft_f1_loss(&PredictionMatrix::new(pred.class_names().to_vec(), rows.clone())?, truth, config)?;
            rows[i][c] = lo;
            let down = soft_f1_loss(&PredictionMatrix::new(pred.class_names().to_vec(), rows.clone())?, truth, config)?;
            rows[i][c] = p;
            let numeric = (up.loss - down.loss) / (hi - lo);
            report.max_relative_error = report.max_relative_error.max(relative_error(analytic, numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}
