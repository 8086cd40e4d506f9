//! Dataset screening, run aggregation and surrogate accuracy.

mod aggregate;
mod merit;
mod snr;

pub use aggregate::{
    distance_curve, median, quantile, write_aggregate_csv, AggregateReport, CurvePoint,
};
pub use merit::{merit, merit_value, pearson, rank_subsets, MeritReport};
pub use snr::{configuration_families, snr, SnrRow};

use crate::gp::GpModel;
use crate::space::{ConfigPoint, TabularDataset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("subset is empty")]
    EmptySubset,
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("need at least 3 measurements, have {0}")]
    TooFewRows(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    Confidence(f64),
    #[error("dataset has no points outside the training set")]
    NoHeldOutPoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub rmse: f64,
    /// `|prediction - y| / |y|` per held-out point, `y = 0` excluded.
    pub ape: Vec<(ConfigPoint, f64)>,
    pub held_out: usize,
    /// Held-out points skipped in `ape` because `y = 0`.
    pub zero_responses: usize,
}

/// Prediction error of the posterior mean on dataset points the model was
/// not trained on.
pub fn holdout_accuracy(
    model: &GpModel,
    dataset: &TabularDataset,
) -> Result<HoldoutReport, AnalysisError> {
    let mut sq = 0.0;
    let mut held_out = 0;
    let mut ape = Vec::new();
    let mut zero_responses = 0;
    for (x, y) in dataset.rows() {
        if model.train().contains(&x) {
            continue;
        }
        let mean = model
            .predict(&x)
            .expect("dataset point matches the model")
            .mean;
        sq += (mean - y).powi(2);
        held_out += 1;
        if y == 0.0 {
            zero_responses += 1;
        } else {
            ape.push((x, (mean - y).abs() / y.abs()));
        }
    }
    if held_out == 0 {
        return Err(AnalysisError::NoHeldOutPoints);
    }
    Ok(HoldoutReport {
        rmse: (sq / held_out as f64).sqrt(),
        ape,
        held_out,
        zero_responses,
    })
}
