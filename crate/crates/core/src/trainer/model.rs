use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelstore::PredictionMatrix;
use crate::loss::LossResult;

/// Linear layer followed by a per-class logistic sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub class_names: Vec<String>,
    /// features × classes.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ToyModel {
    pub fn zeros(class_names: Vec<String>, n_features: usize) -> Self {
        let k = class_names.len();
        ToyModel {
            class_names,
            weights: vec![vec![0.0; k]; n_features],
            bias: vec![0.0; k],
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_params(&self) -> usize {
        (self.n_features() + 1) * self.n_classes()
    }

    /// Parameters flattened as weights (row-major) followed by bias.
    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(&self.bias).copied().collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let k = self.n_classes();
        for (row, chunk) in self.weights.iter_mut().zip(flat.chunks(k)) {
            row.copy_from_slice(chunk);
        }
        let offset = self.n_features() * k;
        self.bias.copy_from_slice(&flat[offset..]);
    }

    fn check_features(&self, features: &[Vec<f64>]) -> Result<()> {
        match features.iter().position(|x| x.len() != self.n_features()) {
            Some(i) => Err(Error::ShapeMismatch(format!(
                "feature row {i} has {} values, model expects {}",
                features[i].len(),
                self.n_features()
            ))),
            None => Ok(()),
        }
    }

    fn probabilities(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|x| {
                (0..self.n_classes())
                    .map(|c| {
                        let z = x
                            .iter()
                            .zip(&self.weights)
                            .fold(self.bias[c], |acc, (xi, w)| acc + xi * w[c]);
                        sigmoid(z)
                    })
                    .collect()
            })
            .collect()
    }

    /// Back-propagates ∂L/∂p through the sigmoid and linear layer.
    /// Returns gradients in [`ToyModel::params`] layout.
    pub fn backprop(&self, features: &[Vec<f64>], probs: &[Vec<f64>], loss: &LossResult) -> Vec<f64> {
        let k = self.n_classes();
        let mut grad = vec![0.0; self.n_params()];
        let bias_offset = self.n_features() * k;
        for ((x, p_row), g_row) in features.iter().zip(probs).zip(&loss.gradient) {
            for c in 0..k {
                let dz = g_row[c] * p_row[c] * (1.0 - p_row[c]);
                if dz == 0.0 {
                    continue;
                }
                for (f, xi) in x.iter().enumerate() {
                    grad[f * k + c] += xi * dz;
                }
                grad[bias_offset + c] += dz;
            }
        }
        grad
    }
}

/// sigmoid(x·W + b) for every row.
pub fn predict(model: &ToyModel, features: &[Vec<f64>]) -> Result<PredictionMatrix> {
    model.check_features(features)?;
    PredictionMatrix::new(model.class_names.clone(), model.probabilities(features))
}
