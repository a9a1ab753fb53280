//! Multi-label learning under heavy label missingness.
//!
//! Ground truth is ternary (displayed, not displayed, unknown). Unknown cells
//! are removed per class before any metric or loss is computed, so a model can
//! be trained and evaluated on a merged collection of partially annotated
//! datasets without inferring the missing values.
//!
//! - [`labelstore`]: ternary label model, dataset merging, persistence, statistics.
//! - [`metrics`]: masked F1, F1 macro, accuracy, occurrence-weighted F1 macro.
//! - [`loss`]: differentiable soft-F1-macro loss with analytic gradients.
//! - [`balance`]: occurrence filtering, unknown-row removal, greedy oversampling.
//! - [`trainer`]: deterministic sigmoid-output toy model trained with the masked loss.

pub mod balance;
pub mod error;
pub mod labelstore;
pub mod loss;
pub mod metrics;
pub mod trainer;

mod fsutil;

pub use error::{Error, Result};
pub use fsutil::write_atomic;
