//! Gaussian evidence of the observations and its gradient with respect to
//! the log kernel and noise hyperparameters.

use super::model::factor_with_jitter;
use super::KernelSpec;
use super::{
    Cholesky, FeatureMap, GpError, GpModel, Hyperparams, MeanForm, MeanSpec, ObservationSet,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log p(y | X, theta)`.
pub fn log_marginal_likelihood(
    features: &FeatureMap,
    obs: &ObservationSet,
    hyper: &Hyperparams,
) -> Result<f64, GpError> {
    if obs.is_empty() {
        return Err(GpError::TooFewObservations { needed: 1, have: 0 });
    }
    Ok(GpModel::fit(features, obs, hyper)?.log_marginal_likelihood())
}

/// Log marginal likelihood and its gradient with respect to
/// `[ln amplitude, ln scale_1 .. ln scale_d, ln noise]`, mean held fixed.
pub fn lml_gradient(
    features: &FeatureMap,
    obs: &ObservationSet,
    hyper: &Hyperparams,
) -> Result<(f64, Vec<f64>), GpError> {
    hyper.validate()?;
    if obs.is_empty() {
        return Err(GpError::TooFewObservations { needed: 1, have: 0 });
    }
    let inputs: Vec<Vec<f64>> = obs.points().iter().map(|x| features.encode(x)).collect();
    let ev = evaluate(
        &inputs,
        obs.responses(),
        &hyper.kernel,
        MeanTreatment::Fixed(&hyper.mean),
        hyper.noise,
        true,
    )?;
    Ok((ev.lml, ev.grad))
}

pub(crate) enum MeanTreatment<'a> {
    Fixed(&'a MeanSpec),
    /// Replace the mean by its generalized-least-squares estimate, which
    /// maximizes the likelihood for the given kernel and noise.
    Profile(MeanForm),
}

pub(crate) struct Evaluation {
    pub lml: f64,
    pub grad: Vec<f64>,
    pub mean: MeanSpec,
}

pub(crate) fn evaluate(
    inputs: &[Vec<f64>],
    y: &[f64],
    kernel: &KernelSpec,
    mean: MeanTreatment<'_>,
    noise: f64,
    want_grad: bool,
) -> Result<Evaluation, GpError> {
    let t = inputs.len();
    let (chol, _) = factor_with_jitter(kernel, inputs, noise)?;
    let mean = match mean {
        MeanTreatment::Fixed(m) => m.clone(),
        MeanTreatment::Profile(form) => gls_mean(&chol, inputs, y, form),
    };
    let resid: Vec<f64> = inputs
        .iter()
        .zip(y)
        .map(|(z, v)| v - mean.eval(z))
        .collect();
    let alpha = chol.solve(&resid);
    let fit: f64 = resid.iter().zip(&alpha).map(|(r, a)| r * a).sum();
    let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * t as f64 * LN_2PI;
    if !lml.is_finite() {
        return Err(GpError::Conditioning {
            row: 0,
            min_pivot: f64::NAN,
        });
    }
    let grad = if want_grad {
        gradient(inputs, kernel, noise, &chol, &alpha)
    } else {
        Vec::new()
    };
    Ok(Evaluation { lml, grad, mean })
}

/// `d lml / d p = 1/2 tr((alpha alpha^T - K^{-1}) dK/dp)`.
fn gradient(
    inputs: &[Vec<f64>],
    kernel: &KernelSpec,
    noise: f64,
    chol: &Cholesky,
    alpha: &[f64],
) -> Vec<f64> {
    let t = inputs.len();
    let d = kernel.dim();
    let kinv = chol.inverse();
    let mut grad = vec![0.0; d + 2];
    let var = kernel.variance();
    let mut per_dim = vec![0.0; d];

    for i in 0..t {
        let w_ii = alpha[i] * alpha[i] - kinv[i * t + i];
        grad[0] += 0.5 * w_ii * 2.0 * var;
        grad[d + 1] += 0.5 * w_ii * noise;
        for j in 0..i {
            let w = alpha[i] * alpha[j] - kinv[i * t + j];
            // off-diagonal pairs appear twice in the trace
            let (a, b) = (&inputs[i], &inputs[j]);
            let mut r2 = 0.0;
            let mut mismatch = 0.0;
            for l in 0..d {
                if kernel.categorical[l] {
                    if a[l] != b[l] {
                        mismatch += kernel.scales[l];
                        per_dim[l] = 1.0;
                    } else {
                        per_dim[l] = 0.0;
                    }
                } else {
                    let u = (a[l] - b[l]) / kernel.scales[l];
                    per_dim[l] = u * u;
                    r2 += per_dim[l];
                }
            }
            let r = r2.sqrt();
            let k = var * (-r - mismatch).exp();
            grad[0] += w * 2.0 * k;
            for l in 0..d {
                let dk = if kernel.categorical[l] {
                    -k * kernel.scales[l] * per_dim[l]
                } else if r > 0.0 {
                    k * per_dim[l] / r
                } else {
                    0.0
                };
                grad[1 + l] += w * dk;
            }
        }
    }
    grad
}

/// Generalized least squares for the mean coefficients:
/// `beta = (H^T K^{-1} H)^{-1} H^T K^{-1} y`.
fn gls_mean(chol: &Cholesky, inputs: &[Vec<f64>], y: &[f64], form: MeanForm) -> MeanSpec {
    let t = inputs.len();
    let d = inputs.first().map_or(0, Vec::len);
    // a linear trend is only trusted with at least twice as many points as
    // coefficients; with fewer it extrapolates wildly
    let form = if form == MeanForm::Linear && t >= 2 * (d + 1) {
        MeanForm::Linear
    } else {
        MeanForm::Constant
    };
    let m = MeanSpec::n_coefficients(form, d);
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            let mut col: Vec<f64> = inputs
                .iter()
                .map(|z| if c == 0 { 1.0 } else { z[c - 1] })
                .collect();
            chol.solve_lower_in_place(&mut col);
            col
        })
        .collect();
    let ly = chol.solve_lower(y);
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for a in 0..m {
        rhs[a] = columns[a].iter().zip(&ly).map(|(p, q)| p * q).sum();
        for b in 0..=a {
            let v: f64 = columns[a].iter().zip(&columns[b]).map(|(p, q)| p * q).sum();
            gram[a * m + b] = v;
            gram[b * m + a] = v;
        }
    }
    let trace: f64 = (0..m).map(|a| gram[a * m + a]).sum::<f64>() / m as f64;
    let mut ridge = 1e-12 * trace;
    let beta = loop {
        let mut g = gram.clone();
        for a in 0..m {
            g[a * m + a] += ridge;
        }
        if let Ok(c) = Cholesky::factor(&g, m) {
            break c.solve(&rhs);
        }
        ridge *= 100.0;
        if ridge > trace {
            // degenerate design: fall back to the plain average
            let mut b = vec![0.0; m];
            b[0] = y.iter().sum::<f64>() / t as f64;
            break b;
        }
    };
    match form {
        MeanForm::Constant => MeanSpec::constant(beta[0]),
        MeanForm::Linear => MeanSpec::linear(beta[0], beta[1..].to_vec()),
    }
}
