//! Signal-to-noise ratios of replicated measurements.

use super::AnalysisError;
use crate::space::TabularDataset;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub family: String,
    pub samples: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    /// `mean / sd`; `+inf` when the replicates are all equal.
    pub ratio: f64,
    pub mean_ci: (f64, f64),
    pub sd_ci: (f64, f64),
}

/// Mean, deviation, ratio and `confidence` intervals per family. Families
/// with fewer than two replicates are skipped with a warning.
pub fn snr(families: &[(String, Vec<f64>)], confidence: f64) -> Result<Vec<SnrRow>, AnalysisError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(AnalysisError::Confidence(confidence));
    }
    let alpha = 1.0 - confidence;
    let mut rows = Vec::new();
    for (family, samples) in families {
        let k = samples.len();
        if k < 2 {
            log::warn!("family `{family}` has {k} replicate(s); skipped");
            continue;
        }
        let n = k as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        let ratio = if sd > 0.0 { mean / sd } else { f64::INFINITY };

        let dof = n - 1.0;
        let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
        let half = t.inverse_cdf(1.0 - alpha / 2.0) * sd / n.sqrt();
        let chi = ChiSquared::new(dof).expect("positive dof");
        let upper_q = chi.inverse_cdf(1.0 - alpha / 2.0);
        let lower_q = chi.inverse_cdf(alpha / 2.0);
        rows.push(SnrRow {
            family: family.clone(),
            samples: k,
            mean,
            sd,
            ratio,
            mean_ci: (mean - half, mean + half),
            sd_ci: ((dof * var / upper_q).sqrt(), (dof * var / lower_q).sqrt()),
        });
    }
    Ok(rows)
}

/// One family per configuration, labelled `name=value;...`.
pub fn configuration_families(dataset: &TabularDataset) -> Vec<(String, Vec<f64>)> {
    let space = dataset.space();
    dataset
        .replicates()
        .map(|(x, s)| {
            let label = space
                .describe(&x)
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            (label, s.to_vec())
        })
        .collect()
}
