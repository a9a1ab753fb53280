use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelstore::{LabelMatrix, TernaryLabel};

/// Parameters of the synthetic multi-label task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    /// Probability that a cell is replaced by `Unknown`.
    pub missingness: f64,
    /// Probability that a label is flipped before masking.
    pub noise: f64,
    /// Samples closer than this to any class hyperplane (unit normals,
    /// standard-normal features) are rejected and redrawn.
    pub margin: f64,
}

impl Default for SynthConfig {
    /// The reference task: 2000 × 10 features, 4 classes, half the labels missing.
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            samples: 2000,
            features: 10,
            classes: 4,
            missingness: 0.5,
            noise: 0.02,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub features: Vec<Vec<f64>>,
    pub labels: LabelMatrix,
    /// Generating unit normals, one per class (classes × features).
    pub normals: Vec<Vec<f64>>,
    /// Noise-free labels before masking.
    pub clean: Vec<Vec<bool>>,
}

pub fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("class_{c:02}")).collect()
}

/// Draws features from a standard normal, labels each class by the side of a
/// random hyperplane through the origin, flips a `noise` fraction of labels
/// and masks each cell independently with probability `missingness`.
pub fn synth_dataset(config: &SynthConfig) -> Result<SyntheticTask> {
    let SynthConfig {
        seed,
        samples,
        features,
        classes,
        missingness,
        noise,
        margin,
    } = *config;
    if samples == 0 || features == 0 || classes == 0 {
        return Err(Error::InvalidArgument(format!(
            "degenerate task size {samples} × {features} features × {classes} classes"
        )));
    }
    if !(0.0..1.0).contains(&missingness) {
        return Err(Error::InvalidArgument(format!("missingness {missingness} must lie in [0, 1)")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!("noise {noise} must lie in [0, 1]")));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidArgument(format!("margin {margin} must lie in [0, 1)")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Vec<f64>> = (0..classes)
        .map(|_| loop {
            let w: Vec<f64> = (0..features).map(|_| rng.sample(StandardNormal)).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                break w.iter().map(|x| x / norm).collect();
            }
        })
        .collect();

    let max_draws = samples.saturating_mul(1000);
    let mut draws = 0usize;
    let mut xs = Vec::with_capacity(samples);
    let mut clean = Vec::with_capacity(samples);
    while xs.len() < samples {
        if draws == max_draws {
            return Err(Error::InvalidArgument(format!(
                "margin {margin} rejects too many samples for {classes} classes"
            )));
        }
        draws += 1;
        let x: Vec<f64> = (0..features).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = normals
            .iter()
            .map(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        if z.iter().any(|v: &f64| v.abs() < margin) {
            continue;
        }
        clean.push(z.iter().map(|&v| v > 0.0).collect::<Vec<bool>>());
        xs.push(x);
    }

    let rows = clean
        .iter()
        .map(|row| {
            row.iter()
                .map(|&y| {
                    let flipped = rng.random::<f64>() < noise;
                    let masked = rng.random::<f64>() < missingness;
                    if masked {
                        TernaryLabel::Unknown
                    } else {
                        TernaryLabel::from_bool(y != flipped)
                    }
                })
                .collect()
        })
        .collect();

    Ok(SyntheticTask {
        features: xs,
        labels: LabelMatrix::new(class_names(classes), rows)?,
        normals,
        clean,
    })
}
