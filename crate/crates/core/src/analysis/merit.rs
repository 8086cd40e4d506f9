//! Correlation-based merit of parameter subsets.

use super::AnalysisError;
use crate::space::TabularDataset;
use serde::{Deserialize, Serialize};

const EXHAUSTIVE_MAX_DIM: usize = 12;
const BEAM_WIDTH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeritReport {
    /// Parameter indices, ascending.
    pub subset: Vec<usize>,
    pub merit: f64,
    /// Pearson correlation of each subset parameter with the response.
    pub correlations: Vec<f64>,
    /// Mean absolute parameter-response correlation.
    pub mean_response_corr: f64,
    /// Mean absolute pairwise correlation among subset parameters.
    pub mean_inter_corr: f64,
    /// Subset parameters whose column is constant (correlations taken as 0).
    pub constant_columns: Vec<usize>,
}

/// Pearson correlation; `None` when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// `n r_lp / sqrt(n + n (n - 1) r_pp)`.
pub fn merit_value(n: usize, mean_response_corr: f64, mean_inter_corr: f64) -> f64 {
    let n = n as f64;
    n * mean_response_corr / (n + n * (n - 1.0) * mean_inter_corr).sqrt()
}

/// Correlations shared by every subset of one dataset.
struct Correlations {
    response: Vec<f64>,
    pairwise: Vec<Vec<f64>>,
    constant: Vec<bool>,
}

impl Correlations {
    fn new(dataset: &TabularDataset) -> Result<Self, AnalysisError> {
        let space = dataset.space();
        let mut columns = vec![Vec::new(); space.dim()];
        let mut y = Vec::new();
        for (x, samples) in dataset.replicates() {
            let values = space.values(&x);
            for &s in samples {
                for (c, v) in columns.iter_mut().zip(&values) {
                    c.push(*v);
                }
                y.push(s);
            }
        }
        if y.len() < 3 {
            return Err(AnalysisError::TooFewRows(y.len()));
        }
        let d = columns.len();
        let constant: Vec<bool> = columns
            .iter()
            .map(|c| c.iter().all(|v| *v == c[0]))
            .collect();
        let response = columns
            .iter()
            .map(|c| pearson(c, &y).unwrap_or(0.0))
            .collect();
        let mut pairwise = vec![vec![0.0; d]; d];
        for i in 0..d {
            pairwise[i][i] = 1.0;
            for j in 0..i {
                let r = pearson(&columns[i], &columns[j]).unwrap_or(0.0);
                pairwise[i][j] = r;
                pairwise[j][i] = r;
            }
        }
        Ok(Correlations {
            response,
            pairwise,
            constant,
        })
    }

    fn report(&self, subset: &[usize]) -> MeritReport {
        let n = subset.len();
        let correlations: Vec<f64> = subset.iter().map(|&i| self.response[i]).collect();
        let r_lp = correlations.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
        let r_pp = if n < 2 {
            0.0
        } else {
            let mut sum = 0.0;
            for (a, &i) in subset.iter().enumerate() {
                for &j in &subset[..a] {
                    sum += self.pairwise[i][j].abs();
                }
            }
            sum / (n * (n - 1) / 2) as f64
        };
        MeritReport {
            subset: subset.to_vec(),
            merit: merit_value(n, r_lp, r_pp),
            correlations,
            mean_response_corr: r_lp,
            mean_inter_corr: r_pp,
            constant_columns: subset
                .iter()
                .copied()
                .filter(|&i| self.constant[i])
                .collect(),
        }
    }
}

fn validate_subset(subset: &[usize], dim: usize) -> Result<Vec<usize>, AnalysisError> {
    if subset.is_empty() {
        return Err(AnalysisError::EmptySubset);
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != subset.len() {
        return Err(AnalysisError::InvalidSubset("repeated parameter".into()));
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= dim) {
        return Err(AnalysisError::InvalidSubset(format!(
            "parameter index {bad} out of range for {dim} parameters"
        )));
    }
    Ok(s)
}

/// Merit of one parameter subset. Categorical columns use the option index.
pub fn merit(dataset: &TabularDataset, subset: &[usize]) -> Result<MeritReport, AnalysisError> {
    let subset = validate_subset(subset, dataset.space().dim())?;
    let corr = Correlations::new(dataset)?;
    let report = corr.report(&subset);
    if !report.constant_columns.is_empty() {
        log::warn!(
            "constant columns {:?} have correlation 0",
            report.constant_columns
        );
    }
    Ok(report)
}

fn ranking_order(a: &MeritReport, b: &MeritReport) -> std::cmp::Ordering {
    b.merit
        .total_cmp(&a.merit)
        .then(a.subset.len().cmp(&b.subset.len()))
        .then_with(|| a.subset.cmp(&b.subset))
}

/// Subsets of up to `max_size` parameters by decreasing merit, then by size,
/// then lexicographically. Exhaustive up to 12 parameters, beam search above.
pub fn rank_subsets(
    dataset: &TabularDataset,
    max_size: usize,
) -> Result<Vec<MeritReport>, AnalysisError> {
    let d = dataset.space().dim();
    if max_size == 0 || max_size > d {
        return Err(AnalysisError::InvalidSubset(format!(
            "subset size cap {max_size} must lie in 1..={d}"
        )));
    }
    let corr = Correlations::new(dataset)?;
    let mut out = Vec::new();
    if d <= EXHAUSTIVE_MAX_DIM {
        for mask in 1u32..(1 << d) {
            if mask.count_ones() as usize > max_size {
                continue;
            }
            let subset: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
            out.push(corr.report(&subset));
        }
    } else {
        let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..max_size {
            let mut layer: Vec<MeritReport> = Vec::new();
            for base in &frontier {
                let start = base.last().map_or(0, |&l| l + 1);
                for i in start..d {
                    let mut s = base.clone();
                    s.push(i);
                    layer.push(corr.report(&s));
                }
            }
            layer.sort_by(ranking_order);
            layer.truncate(BEAM_WIDTH);
            frontier = layer.iter().map(|r| r.subset.clone()).collect();
            out.extend(layer);
        }
    }
    out.sort_by(ranking_order);
    Ok(out)
}
