//! Gaussian-process surrogate over a discrete configuration space.

mod cholesky;
mod kernel;
mod learn;
mod likelihood;
mod model;

pub use cholesky::{Cholesky, NotPositiveDefinite};
pub use kernel::{kernel_eval, FeatureMap, KernelFamily, KernelSpec};
pub use learn::{learn_hyperparams, LearnOptions, NoiseMode};
pub use likelihood::{lml_gradient, log_marginal_likelihood};
pub use model::{GpModel, Prediction};

use crate::space::{ConfigPoint, ConfigSpace};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("expected {expected} dimensions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(
        "covariance matrix is not positive definite (smallest pivot {min_pivot:e} at row {row})"
    )]
    Conditioning { row: usize, min_pivot: f64 },
    #[error("point {0} is already in the training set")]
    DuplicatePoint(ConfigPoint),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("need at least {needed} observations, have {have}")]
    TooFewObservations { needed: usize, have: usize },
    #[error("no restart produced a finite likelihood")]
    LearningFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanForm {
    Constant,
    Linear,
}

/// Prior mean `b + a . z` over encoded features `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub form: MeanForm,
    pub offset: f64,
    pub slopes: Vec<f64>,
}

impl MeanSpec {
    pub fn constant(offset: f64) -> Self {
        MeanSpec {
            form: MeanForm::Constant,
            offset,
            slopes: Vec::new(),
        }
    }

    pub fn linear(offset: f64, slopes: Vec<f64>) -> Self {
        MeanSpec {
            form: MeanForm::Linear,
            offset,
            slopes,
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.offset + self.slopes.iter().zip(z).map(|(a, v)| a * v).sum::<f64>()
    }

    /// Number of regression coefficients for `dim` inputs.
    pub(crate) fn n_coefficients(form: MeanForm, dim: usize) -> usize {
        match form {
            MeanForm::Constant => 1,
            MeanForm::Linear => dim + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kernel: KernelSpec,
    pub mean: MeanSpec,
    /// Observation noise variance.
    pub noise: f64,
}

impl Hyperparams {
    /// Starting point before any likelihood fit: amplitude from the response
    /// spread, moderate length-scales, mean offset at the response average.
    pub fn initial(
        space: &ConfigSpace,
        family: KernelFamily,
        form: MeanForm,
        obs: &ObservationSet,
        noise: NoiseMode,
    ) -> Self {
        let features = FeatureMap::new(space);
        let kinds = features.kinds();
        let (mean, sd) = response_stats(obs.responses());
        let mask = family.categorical_mask(kinds);
        let scales = mask
            .iter()
            .map(|&cat| if cat { 1.0 } else { 0.3 })
            .collect();
        let kernel = KernelSpec::new(family, kinds, sd, scales);
        let mean = match form {
            MeanForm::Constant => MeanSpec::constant(mean),
            MeanForm::Linear => MeanSpec::linear(mean, vec![0.0; kinds.len()]),
        };
        let noise = match noise {
            NoiseMode::Fixed(v) => v,
            NoiseMode::Learned { floor } => (1e-4 * sd * sd).max(floor),
        };
        Hyperparams {
            kernel,
            mean,
            noise,
        }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !self.kernel.is_valid() {
            return Err(GpError::InvalidHyperparams(
                "amplitude and scales must be positive and finite".into(),
            ));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(GpError::InvalidHyperparams(
                "noise variance must be nonnegative".into(),
            ));
        }
        if self.mean.form == MeanForm::Constant && !self.mean.slopes.is_empty() {
            return Err(GpError::InvalidHyperparams(
                "constant mean cannot have slopes".into(),
            ));
        }
        if self.mean.form == MeanForm::Linear && self.mean.slopes.len() != self.kernel.dim() {
            return Err(GpError::InvalidHyperparams(
                "linear mean needs one slope per dimension".into(),
            ));
        }
        Ok(())
    }
}

/// Mean and standard deviation of the responses; the deviation falls back to
/// a small positive value so it can seed an amplitude.
pub(crate) fn response_stats(y: &[f64]) -> (f64, f64) {
    if y.is_empty() {
        return (0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let floor = 1e-6 * mean.abs().max(1.0);
    (mean, if sd > floor { sd } else { mean.abs().max(1.0) })
}

/// Training data `S = {(x_i, y_i)}` with distinct points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    points: Vec<ConfigPoint>,
    y: Vec<f64>,
    seen: HashSet<ConfigPoint>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (ConfigPoint, f64)>,
    ) -> Result<Self, GpError> {
        let mut obs = ObservationSet::new();
        for (x, y) in pairs {
            obs.push(x, y)?;
        }
        Ok(obs)
    }

    pub fn push(&mut self, x: ConfigPoint, y: f64) -> Result<(), GpError> {
        if !self.seen.insert(x.clone()) {
            return Err(GpError::DuplicatePoint(x));
        }
        self.points.push(x);
        self.y.push(y);
        Ok(())
    }

    pub fn contains(&self, x: &ConfigPoint) -> bool {
        self.seen.contains(x)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ConfigPoint] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ConfigPoint, f64)> {
        self.points.iter().zip(self.y.iter().copied())
    }
}
