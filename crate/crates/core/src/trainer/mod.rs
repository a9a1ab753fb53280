//! Deterministic toy trainer for the masked soft-F1 loss.
//!
//! A linear model with sigmoid outputs stands in for a vision backbone. Each
//! minibatch is scored with [`soft_f1_loss`], the gradient is pushed through
//! the sigmoid and the linear layer, and parameters are updated with AMSGrad.
//! After every epoch the held-out split is evaluated and the epoch with the
//! highest mean of F1 macro and accuracy is kept.

mod model;
mod optim;
mod synth;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::labelstore::{check_axes, LabelMatrix, PredictionMatrix};
use crate::loss::{soft_f1_loss, LossResult, SoftF1Config};
use crate::metrics::{self, MetricReport};

pub use model::{predict, sigmoid, ToyModel};
pub use optim::AmsGrad;
pub use synth::{class_names, synth_dataset, SynthConfig, SyntheticTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub optimizer_epsilon: f64,
    /// Fraction of samples held out for model selection.
    pub validation_fraction: f64,
    /// Decision threshold for validation metrics.
    pub threshold: f64,
    pub loss: SoftF1Config,
}

impl Default for TrainConfig {
    /// Fine-tuning settings of the original large-scale setup.
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 30,
            batch_size: 256,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            optimizer_epsilon: 1e-8,
            validation_fraction: 0.2,
            threshold: metrics::DEFAULT_THRESHOLD,
            loss: SoftF1Config::default(),
        }
    }
}

impl TrainConfig {
    /// Settings for the synthetic demo task. Only the learning rate differs
    /// from [`TrainConfig::default`]: a linear model trained from zero for
    /// 30 short epochs needs larger steps than a pretrained backbone.
    pub fn demo(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 0.05,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation fraction {} must lie in (0, 1)",
                self.validation_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("optimizer betas must lie in [0, 1)".into());
        }
        if self.optimizer_epsilon.is_nan() || self.optimizer_epsilon <= 0.0 {
            return bad("optimizer epsilon must be positive".into());
        }
        metrics::check_threshold(self.threshold)?;
        self.loss.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean minibatch loss; `None` if every batch was unusable.
    pub train_loss: Option<f64>,
    pub batches: usize,
    /// Batches in which every class was skipped.
    pub skipped_batches: usize,
    pub validation: MetricReport,
    pub selection_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch with the highest selection score (earliest on ties).
    pub best_epoch: Option<usize>,
    pub best_model: ToyModel,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|e| &self.history[e - 1])
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}

fn split_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic (train, validation) index split.
pub fn train_validation_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = (n as f64 * fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot be split with validation fraction {fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut split_stream(seed, 0));
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

fn gather(features: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| features[i].clone()).collect()
}

/// Batch loss and its gradient with respect to the flattened model parameters.
pub fn loss_and_gradient(
    model: &ToyModel,
    features: &[Vec<f64>],
    labels: &LabelMatrix,
    config: &SoftF1Config,
) -> Result<(LossResult, Vec<f64>)> {
    let pred = predict(model, features)?;
    let loss = soft_f1_loss(&pred, labels, config)?;
    let grad = model.backprop(features, pred.rows(), &loss);
    Ok((loss, grad))
}

/// Trains `model` in place and returns the per-epoch history together with a
/// snapshot of the best epoch's parameters.
pub fn fit(
    model: &mut ToyModel,
    features: &[Vec<f64>],
    labels: &LabelMatrix,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    check_axes(&model.class_names, labels.class_names())?;
    if features.len() != labels.n_samples() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} label rows",
            features.len(),
            labels.n_samples()
        )));
    }
    predict(model, features)?;

    let (train_idx, val_idx) = train_validation_split(features.len(), config.validation_fraction, config.seed)?;
    let train_labels = labels.select_rows(&train_idx);
    if train_labels.unknown_count() == train_labels.n_samples() * train_labels.n_classes() {
        return Err(Error::Empty("training split has no annotated labels".into()));
    }
    let val_x = gather(features, &val_idx);
    let val_y = labels.select_rows(&val_idx);

    let mut opt = AmsGrad::new(
        model.n_params(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.optimizer_epsilon,
    );
    let mut params = model.params();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ToyModel)> = None;

    for epoch in 1..=config.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut split_stream(config.seed, epoch as u64));

        let (mut loss_sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
        for batch in order.chunks(config.batch_size) {
            let x = gather(features, batch);
            let y = labels.select_rows(batch);
            match loss_and_gradient(model, &x, &y, &config.loss) {
                Ok((loss, grad)) => {
                    opt.step(&mut params, &grad);
                    model.set_params(&params);
                    loss_sum += loss.loss;
                    used += 1;
                }
                Err(Error::AllClassesSkipped) => skipped += 1,
                Err(e) => return Err(e),
            }
        }

        let val_pred: PredictionMatrix = predict(model, &val_x)?;
        let validation = metrics::evaluate(&val_y, &val_pred, config.threshold, None)?;
        let score = validation.selection_score;
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((epoch, score, model.clone()));
        }
        history.push(EpochRecord {
            epoch,
            train_loss: (used > 0).then(|| loss_sum / used as f64),
            batches: used + skipped,
            skipped_batches: skipped,
            validation,
            selection_score: score,
        });
    }

    let (best_epoch, best_model) = match best {
        Some((e, _, m)) => (Some(e), m),
        None => (None, model.clone()),
    };
    Ok(TrainReport {
        config: config.clone(),
        train_samples: train_idx.len(),
        validation_samples: val_idx.len(),
        history,
        best_epoch,
        best_model,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ToyModel,
}

const MODEL_FORMAT: &str = "aumask.toy-model";

pub fn model_to_bytes(model: &ToyModel) -> Vec<u8> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: 1,
        model: model.clone(),
    };
    let mut out = serde_json::to_vec(&file).expect("model serializes");
    out.push(b'\n');
    out
}

pub fn save_model(model: &ToyModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &model_to_bytes(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ToyModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != 1 {
        return Err(Error::parse(path, 1, format!("unsupported model format `{}` v{}", file.format, file.version)));
    }
    let m = file.model;
    if m.bias.len() != m.class_names.len() || m.weights.iter().any(|r| r.len() != m.class_names.len()) {
        return Err(Error::Validation("model weights do not match its class axis".into()));
    }
    Ok(m)
}
