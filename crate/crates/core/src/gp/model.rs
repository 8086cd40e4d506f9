use super::cholesky::dot;
use super::{Cholesky, FeatureMap, GpError, Hyperparams, KernelSpec, ObservationSet};
use crate::space::ConfigPoint;

/// Diagonal jitter levels, relative to the prior variance, tried in order
/// until the covariance factors.
pub(crate) const JITTER_STEPS: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn stddev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Dense `K + (noise + jitter) I` over `inputs`, row-major.
pub(crate) fn covariance(kernel: &KernelSpec, inputs: &[Vec<f64>], diag_extra: f64) -> Vec<f64> {
    let n = inputs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = kernel.eval(&inputs[i], &inputs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] = kernel.variance() + diag_extra;
    }
    k
}

/// Factors the training covariance, escalating jitter as needed.
pub(crate) fn factor_with_jitter(
    kernel: &KernelSpec,
    inputs: &[Vec<f64>],
    noise: f64,
) -> Result<(Cholesky, f64), GpError> {
    let n = inputs.len();
    let base = covariance(kernel, inputs, noise);
    let mut last = None;
    for step in JITTER_STEPS {
        let jitter = step * kernel.variance();
        let a = if jitter == 0.0 {
            std::borrow::Cow::Borrowed(&base)
        } else {
            let mut a = base.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            std::borrow::Cow::Owned(a)
        };
        match Cholesky::factor(&a, n) {
            Ok(c) => return Ok((c, jitter)),
            Err(e) => last = Some(e),
        }
    }
    let e = last.expect("at least one attempt");
    Err(GpError::Conditioning {
        row: e.row,
        min_pivot: e.pivot,
    })
}

/// A fitted GP: hyperparameters, training data and the cached factor of
/// `K + noise I` together with `alpha = (K + noise I)^{-1} (y - mean(X))`.
#[derive(Clone, Debug)]
pub struct GpModel {
    features: FeatureMap,
    hyper: Hyperparams,
    train: ObservationSet,
    inputs: Vec<Vec<f64>>,
    chol: Cholesky,
    alpha: Vec<f64>,
    jitter: f64,
}

impl GpModel {
    /// Model with no observations; predictions are the prior.
    pub fn prior(features: &FeatureMap, hyper: &Hyperparams) -> Result<Self, GpError> {
        hyper.validate()?;
        if hyper.kernel.dim() != features.dim() {
            return Err(GpError::DimensionMismatch {
                expected: features.dim(),
                found: hyper.kernel.dim(),
            });
        }
        Ok(GpModel {
            features: features.clone(),
            hyper: hyper.clone(),
            train: ObservationSet::new(),
            inputs: Vec::new(),
            chol: Cholesky::empty(),
            alpha: Vec::new(),
            jitter: 0.0,
        })
    }

    pub fn fit(
        features: &FeatureMap,
        obs: &ObservationSet,
        hyper: &Hyperparams,
    ) -> Result<Self, GpError> {
        let mut model = GpModel::prior(features, hyper)?;
        if obs.is_empty() {
            return Ok(model);
        }
        let inputs = model.encode_all(obs)?;
        let (chol, jitter) = factor_with_jitter(&hyper.kernel, &inputs, hyper.noise)?;
        model.inputs = inputs;
        model.chol = chol;
        model.jitter = jitter;
        model.train = obs.clone();
        model.alpha = model.solve_alpha();
        Ok(model)
    }

    fn encode_all(&self, obs: &ObservationSet) -> Result<Vec<Vec<f64>>, GpError> {
        obs.points()
            .iter()
            .map(|x| {
                if x.dim() != self.features.dim() {
                    Err(GpError::DimensionMismatch {
                        expected: self.features.dim(),
                        found: x.dim(),
                    })
                } else {
                    Ok(self.features.encode(x))
                }
            })
            .collect()
    }

    fn solve_alpha(&self) -> Vec<f64> {
        let resid: Vec<f64> = self
            .inputs
            .iter()
            .zip(self.train.responses())
            .map(|(z, y)| y - self.hyper.mean.eval(z))
            .collect();
        self.chol.solve(&resid)
    }

    /// Adds one observation by extending the Cholesky factor with a single
    /// row (O(t^2)); the hyperparameters and jitter stay fixed.
    pub fn refit_with(&self, x: ConfigPoint, y: f64) -> Result<Self, GpError> {
        if x.dim() != self.features.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.features.dim(),
                found: x.dim(),
            });
        }
        if self.train.contains(&x) {
            return Err(GpError::DuplicatePoint(x));
        }
        let z = self.features.encode(&x);
        let col: Vec<f64> = self
            .inputs
            .iter()
            .map(|zi| self.hyper.kernel.eval(zi, &z))
            .collect();
        let diag = self.hyper.kernel.variance() + self.hyper.noise + self.jitter;
        let mut chol = self.chol.clone();
        chol.extend(&col, diag).map_err(|e| GpError::Conditioning {
            row: e.row,
            min_pivot: e.pivot,
        })?;
        let mut next = GpModel {
            features: self.features.clone(),
            hyper: self.hyper.clone(),
            train: self.train.clone(),
            inputs: self.inputs.clone(),
            chol,
            alpha: Vec::new(),
            jitter: self.jitter,
        };
        next.train.push(x, y)?;
        next.inputs.push(z);
        next.alpha = next.solve_alpha();
        Ok(next)
    }

    pub fn predict(&self, x: &ConfigPoint) -> Result<Prediction, GpError> {
        if x.dim() != self.features.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.features.dim(),
                found: x.dim(),
            });
        }
        Ok(self.predict_encoded(&self.features.encode(x)))
    }

    /// Posterior mean and predictive variance of a noisy observation at `z`.
    pub fn predict_encoded(&self, z: &[f64]) -> Prediction {
        let kernel = &self.hyper.kernel;
        let mut k: Vec<f64> = self.inputs.iter().map(|zi| kernel.eval(zi, z)).collect();
        let mean = self.hyper.mean.eval(z) + dot(&k, &self.alpha);
        self.chol.solve_lower_in_place(&mut k);
        let explained = dot(&k, &k);
        let variance = (kernel.variance() + self.hyper.noise - explained).max(0.0);
        Prediction { mean, variance }
    }

    /// Log marginal likelihood of the training data under the cached factor.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let t = self.train.len() as f64;
        let fit: f64 = self
            .inputs
            .iter()
            .zip(self.train.responses())
            .zip(&self.alpha)
            .map(|((z, y), a)| (y - self.hyper.mean.eval(z)) * a)
            .sum();
        -0.5 * fit - 0.5 * self.chol.log_det() - 0.5 * t * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn train(&self) -> &ObservationSet {
        &self.train
    }

    pub fn chol(&self) -> &Cholesky {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Diagonal jitter added on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Prior mean at `x`.
    pub fn prior_mean(&self, x: &ConfigPoint) -> f64 {
        self.hyper.mean.eval(&self.features.encode(x))
    }
}
