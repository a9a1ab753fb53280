#![allow(dead_code)]

use aumask_core::labelstore::{LabelMatrix, PredictionMatrix, TernaryLabel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("c{c}")).collect()
}

/// Random ternary truth with the given chance of `Unknown` per cell.
pub fn random_truth(rng: &mut ChaCha8Rng, n: usize, k: usize, missing: f64) -> LabelMatrix {
    let rows = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| {
                    if rng.random_bool(missing) {
                        TernaryLabel::Unknown
                    } else {
                        TernaryLabel::from_bool(rng.random_bool(0.5))
                    }
                })
                .collect()
        })
        .collect();
    LabelMatrix::new(names(k), rows).unwrap()
}

pub fn random_pred(rng: &mut ChaCha8Rng, n: usize, k: usize) -> PredictionMatrix {
    let rows = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.01..0.99)).collect()).collect();
    PredictionMatrix::new(names(k), rows).unwrap()
}

/// Row-wise copy of `pred` with every value at an unknown truth cell replaced.
pub fn scramble_unknown(rng: &mut ChaCha8Rng, truth: &LabelMatrix, pred: &PredictionMatrix) -> PredictionMatrix {
    let rows = pred
        .rows()
        .iter()
        .zip(truth.rows())
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(&v, l)| if l.is_known() { v } else { rng.random_range(0.0..=1.0) })
                .collect()
        })
        .collect();
    PredictionMatrix::new(pred.class_names().to_vec(), rows).unwrap()
}

/// Binary predictions at threshold 0.5.
pub fn binarize(pred: &PredictionMatrix) -> Vec<Vec<bool>> {
    pred.rows().iter().map(|r| r.iter().map(|&p| p >= 0.5).collect()).collect()
}
