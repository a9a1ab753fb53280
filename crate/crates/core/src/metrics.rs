//! Masked evaluation metrics.
//!
//! For every class, positions whose ground truth is unknown are deleted from
//! both the truth and the prediction column before counting. F1 macro and
//! accuracy are unweighted means over the classes that keep at least one
//! annotated position.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::labelstore::{check_axes, ClassHistogram, LabelMatrix, PredictionMatrix, TernaryLabel};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Drops the positions whose truth is unknown, keeping order.
pub fn mask_class(truth: &[TernaryLabel], values: &[f64]) -> Result<(Vec<bool>, Vec<f64>)> {
    check_len(truth.len(), values.len())?;
    Ok(truth
        .iter()
        .zip(values)
        .filter_map(|(t, v)| t.as_bool().map(|b| (b, *v)))
        .unzip())
}

/// `value >= threshold` is a positive prediction.
pub fn binarize(values: &[f64], threshold: f64) -> Result<Vec<bool>> {
    check_threshold(threshold)?;
    Ok(values.iter().map(|&v| v >= threshold).collect())
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("threshold {threshold} must lie in (0, 1)")))
    }
}

fn check_len(truth: usize, pred: usize) -> Result<()> {
    if truth == pred {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("{truth} truth entries vs {pred} predictions")))
    }
}

/// Masked confusion counts of one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn from_column(truth: &[TernaryLabel], pred: &[bool]) -> Result<Self> {
        check_len(truth.len(), pred.len())?;
        let mut c = ConfusionCounts::default();
        for (t, &p) in truth.iter().zip(pred) {
            match (t.as_bool(), p) {
                (None, _) => {}
                (Some(true), true) => c.true_pos += 1,
                (Some(false), true) => c.false_pos += 1,
                (Some(true), false) => c.false_neg += 1,
                (Some(false), false) => c.true_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn annotated(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    /// `None` when the class has no annotated position.
    ///
    /// Uses the count form 2·tp / (2·tp + fp + fn), which equals the harmonic
    /// mean of precision and recall; a zero denominator gives 0.
    pub fn f1(&self) -> Option<f64> {
        if self.annotated() == 0 {
            return None;
        }
        let denom = 2 * self.true_pos + self.false_pos + self.false_neg;
        if denom == 0 {
            return Some(0.0);
        }
        Some((2 * self.true_pos) as f64 / denom as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.annotated();
        (n > 0).then(|| (self.true_pos + self.true_neg) as f64 / n as f64)
    }
}

/// Masked F1 of one class; `None` (skipped) when nothing is annotated.
pub fn class_f1(truth: &[TernaryLabel], pred: &[bool]) -> Result<Option<f64>> {
    Ok(ConfusionCounts::from_column(truth, pred)?.f1())
}

fn check_binary_shape(truth: &LabelMatrix, pred: &[Vec<bool>]) -> Result<()> {
    check_len(truth.n_samples(), pred.len())?;
    if let Some((i, row)) = pred.iter().enumerate().find(|(_, r)| r.len() != truth.n_classes()) {
        return Err(Error::ShapeMismatch(format!(
            "prediction row {i} has {} entries, expected {}",
            row.len(),
            truth.n_classes()
        )));
    }
    Ok(())
}

/// Per-class confusion counts in class-axis order.
pub fn confusion_counts(truth: &LabelMatrix, pred: &[Vec<bool>]) -> Result<Vec<ConfusionCounts>> {
    check_binary_shape(truth, pred)?;
    let mut counts = vec![ConfusionCounts::default(); truth.n_classes()];
    for (t_row, p_row) in truth.rows().iter().zip(pred) {
        for ((c, t), &p) in counts.iter_mut().zip(t_row).zip(p_row) {
            match (t.as_bool(), p) {
                (None, _) => {}
                (Some(true), true) => c.true_pos += 1,
                (Some(false), true) => c.false_pos += 1,
                (Some(true), false) => c.false_neg += 1,
                (Some(false), false) => c.true_neg += 1,
            }
        }
    }
    Ok(counts)
}

/// Mean of the non-skipped scores, summed in the given order.
pub fn mean_of_scored(scores: impl IntoIterator<Item = Option<f64>>) -> Result<f64> {
    let (sum, n) = scores
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        return Err(Error::AllClassesSkipped);
    }
    Ok(sum / n as f64)
}

pub fn macro_f1(truth: &LabelMatrix, pred: &[Vec<bool>]) -> Result<f64> {
    mean_of_scored(confusion_counts(truth, pred)?.iter().map(ConfusionCounts::f1))
}

/// Per-class masked accuracy, averaged over non-skipped classes.
pub fn masked_accuracy(truth: &LabelMatrix, pred: &[Vec<bool>]) -> Result<f64> {
    mean_of_scored(confusion_counts(truth, pred)?.iter().map(ConfusionCounts::accuracy))
}

/// F1 of one class, `None` when skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub class: String,
    pub f1: Option<f64>,
}

/// Displayed-label counts per class, taken from a reference split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OccurrenceWeights {
    pub counts: BTreeMap<String, u64>,
}

impl OccurrenceWeights {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        OccurrenceWeights {
            counts: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn from_histogram(h: &ClassHistogram) -> Self {
        Self::from_pairs(h.class_names.iter().cloned().zip(h.counts.iter().map(|c| c.displayed)))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Σ n_c·F1_c / Σ n_c over the scored classes.
///
/// Weights are first divided by their greatest common divisor; this leaves
/// the result unchanged and makes uniform weights reproduce the plain mean
/// bit for bit.
pub fn weighted_macro_f1(per_class: &[ClassScore], weights: &OccurrenceWeights) -> Result<f64> {
    let scored: Vec<(f64, u64)> = per_class
        .iter()
        .filter_map(|s| s.f1.map(|f| (s.class.as_str(), f)))
        .map(|(class, f)| {
            weights
                .counts
                .get(class)
                .map(|&w| (f, w))
                .ok_or_else(|| Error::InvalidArgument(format!("no occurrence weight for class `{class}`")))
        })
        .collect::<Result<_>>()?;
    if scored.is_empty() {
        return Err(Error::AllClassesSkipped);
    }
    let g = scored.iter().fold(0, |g, &(_, w)| gcd(g, w));
    if g == 0 {
        return Err(Error::InvalidArgument("occurrence weights sum to zero".into()));
    }
    let (num, den) = scored.iter().fold((0.0, 0.0), |(num, den), &(f, w)| {
        let w = (w / g) as f64;
        (num + w * f, den + w)
    });
    Ok(num / den)
}

/// Metrics of one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: String,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_class: Vec<ClassReport>,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub weighted_macro_f1: Option<f64>,
    pub skipped_classes: Vec<String>,
    pub selection_score: f64,
}

/// Model-selection score: mean of F1 macro and accuracy.
pub fn selection_score(report: &MetricReport) -> f64 {
    (report.macro_f1 + report.accuracy) / 2.0
}

impl MetricReport {
    /// Scores binary predictions against ternary truth.
    pub fn from_binary(truth: &LabelMatrix, pred: &[Vec<bool>], weights: Option<&OccurrenceWeights>) -> Result<Self> {
        let counts = confusion_counts(truth, pred)?;
        let per_class: Vec<ClassReport> = truth
            .class_names()
            .iter()
            .zip(&counts)
            .map(|(class, c)| ClassReport {
                class: class.clone(),
                f1: c.f1(),
                accuracy: c.accuracy(),
                counts: *c,
            })
            .collect();
        let macro_f1 = mean_of_scored(per_class.iter().map(|c| c.f1))?;
        let accuracy = mean_of_scored(per_class.iter().map(|c| c.accuracy))?;
        let weighted_macro_f1 = weights
            .map(|w| weighted_macro_f1(&class_scores(&per_class), w))
            .transpose()?;
        let skipped_classes = per_class
            .iter()
            .filter(|c| c.f1.is_none())
            .map(|c| c.class.clone())
            .collect();
        let mut report = MetricReport {
            per_class,
            macro_f1,
            accuracy,
            weighted_macro_f1,
            skipped_classes,
            selection_score: 0.0,
        };
        report.selection_score = selection_score(&report);
        Ok(report)
    }

    pub fn class_scores(&self) -> Vec<ClassScore> {
        class_scores(&self.per_class)
    }

    /// Fixed-width table with scores rounded to two decimals.
    pub fn render_table(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|c| c.class.len())
            .max()
            .unwrap_or(0)
            .max("weighted F1 macro".len());
        let fmt_opt = |x: Option<f64>| x.map(display_2dp).unwrap_or_else(|| "-".to_string());
        let mut out = format!(
            "{:<width$}  {:>6}  {:>8}  {:>9}\n",
            "class", "F1", "accuracy", "annotated"
        );
        for c in &self.per_class {
            out += &format!(
                "{:<width$}  {:>6}  {:>8}  {:>9}\n",
                c.class,
                fmt_opt(c.f1),
                fmt_opt(c.accuracy),
                c.counts.annotated()
            );
        }
        out += &format!("{:<width$}  {:>6}\n", "F1 macro", display_2dp(self.macro_f1));
        if let Some(w) = self.weighted_macro_f1 {
            out += &format!("{:<width$}  {:>6}\n", "weighted F1 macro", display_2dp(w));
        }
        out += &format!("{:<width$}  {:>6}\n", "accuracy", display_2dp(self.accuracy));
        out += &format!("{:<width$}  {:>6}\n", "selection score", display_2dp(self.selection_score));
        if !self.skipped_classes.is_empty() {
            out += &format!("skipped: {}\n", self.skipped_classes.join(", "));
        }
        out
    }
}

fn class_scores(per_class: &[ClassReport]) -> Vec<ClassScore> {
    per_class
        .iter()
        .map(|c| ClassScore {
            class: c.class.clone(),
            f1: c.f1,
        })
        .collect()
}

/// Rounds half away from zero to two decimals.
pub fn round_2dp(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn display_2dp(x: f64) -> String {
    format!("{:.2}", round_2dp(x))
}

/// Binarizes probabilities and builds the full report.
pub fn evaluate(
    truth: &LabelMatrix,
    pred: &PredictionMatrix,
    threshold: f64,
    weights: Option<&OccurrenceWeights>,
) -> Result<MetricReport> {
    check_axes(truth.class_names(), pred.class_names())?;
    pred.check_paired(truth)?;
    check_threshold(threshold)?;
    let binary: Vec<Vec<bool>> = pred
        .rows()
        .iter()
        .map(|r| r.iter().map(|&p| p >= threshold).collect())
        .collect();
    MetricReport::from_binary(truth, &binary, weights)
}
