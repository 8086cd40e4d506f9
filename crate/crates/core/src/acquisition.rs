//! Lower-confidence-bound selection over the unobserved grid.

use crate::gp::{FeatureMap, GpModel};
use crate::space::{ConfigPoint, ConfigSpace, VisitedSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("every configuration has been observed")]
    Exhausted,
    #[error("invalid kappa schedule: {0}")]
    Schedule(String),
}

/// Exploration weight over time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KappaSchedule {
    Constant {
        kappa: f64,
    },
    /// `kappa_t = sqrt(2 ln(|X| zeta(r) t^r / epsilon))`.
    Adaptive {
        epsilon: f64,
        r: u32,
        space_size: usize,
    },
}

impl KappaSchedule {
    pub fn constant(kappa: f64) -> Result<Self, AcquisitionError> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(AcquisitionError::Schedule(format!(
                "kappa must be a nonnegative number, got {kappa}"
            )));
        }
        Ok(KappaSchedule::Constant { kappa })
    }

    pub fn adaptive(epsilon: f64, r: u32, space_size: usize) -> Result<Self, AcquisitionError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(AcquisitionError::Schedule(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if r < 2 {
            return Err(AcquisitionError::Schedule(format!(
                "r must be >= 2, got {r}"
            )));
        }
        if space_size == 0 {
            return Err(AcquisitionError::Schedule(
                "space size must be positive".into(),
            ));
        }
        Ok(KappaSchedule::Adaptive {
            epsilon,
            r,
            space_size,
        })
    }

    pub fn kappa_at(&self, t: usize) -> Result<f64, AcquisitionError> {
        match *self {
            KappaSchedule::Constant { kappa } => Ok(kappa),
            KappaSchedule::Adaptive {
                epsilon,
                r,
                space_size,
            } => {
                if t == 0 {
                    return Err(AcquisitionError::Schedule("t starts at 1".into()));
                }
                let log_arg =
                    (space_size as f64).ln() + riemann_zeta(r).ln() + r as f64 * (t as f64).ln()
                        - epsilon.ln();
                if !(log_arg > 0.0) {
                    return Err(AcquisitionError::Schedule(format!(
                        "log argument {} is not above 1",
                        log_arg.exp()
                    )));
                }
                Ok((2.0 * log_arg).sqrt())
            }
        }
    }
}

/// `zeta(r) = sum_{n>=1} n^-r` for integer `r >= 2`.
///
/// Sums the first terms directly and closes the tail with the
/// Euler-Maclaurin expansion, which is far below 1e-12 for r >= 2.
pub fn riemann_zeta(r: u32) -> f64 {
    assert!(r >= 2, "zeta diverges for r < 2");
    const N: u32 = 64;
    let s = r as f64;
    let head: f64 = (1..N).rev().map(|n| (n as f64).powf(-s)).sum();
    let n = N as f64;
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * n.powf(-s - 5.0) / 30240.0;
    head + tail
}

/// `mean - kappa * stddev`.
pub fn lcb(mean: f64, stddev: f64, kappa: f64) -> f64 {
    mean - kappa * stddev
}

/// How the posterior enters the criterion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `mu - kappa sigma`.
    #[default]
    Lcb,
    /// Posterior mean replaced by zero: pure uncertainty sampling.
    IgnoreMean,
}

/// Encoded grid, built once per space and reused across iterations.
#[derive(Clone, Debug)]
pub struct CandidateGrid {
    encoded: Vec<Vec<f64>>,
}

impl CandidateGrid {
    pub fn new(space: &ConfigSpace, features: &FeatureMap) -> Self {
        CandidateGrid {
            encoded: space.points().map(|x| features.encode(&x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }

    pub fn encoded(&self, index: usize) -> &[f64] {
        &self.encoded[index]
    }

    /// Linear index of the unvisited point minimizing the criterion; ties go
    /// to the smaller index.
    pub fn argmin(
        &self,
        model: &GpModel,
        visited: &VisitedSet,
        kappa: f64,
        criterion: Criterion,
    ) -> Result<usize, AcquisitionError> {
        let mut best: Option<(f64, usize)> = None;
        for (i, z) in self.encoded.iter().enumerate() {
            if visited.contains_index(i) {
                continue;
            }
            let p = model.predict_encoded(z);
            let mean = match criterion {
                Criterion::Lcb => p.mean,
                Criterion::IgnoreMean => 0.0,
            };
            let score = lcb(mean, p.stddev(), kappa);
            if best.map_or(true, |(b, _)| score < b) {
                best = Some((score, i));
            }
        }
        best.map(|(_, i)| i).ok_or(AcquisitionError::Exhausted)
    }
}

/// Posterior summaries of every grid point, kept in step with a model that
/// grows one observation at a time.
///
/// For each candidate `c` the cache stores `v = L^{-1} k(X, c)`, so adding an
/// observation costs O(t) per candidate instead of the O(t^2) triangular
/// solve of a fresh prediction. A model with different hyperparameters,
/// jitter or training prefix triggers a rebuild.
#[derive(Clone, Debug, Default)]
pub struct PosteriorCache {
    /// `rows[i][c]`: entry `i` of `v` for candidate `c`.
    rows: Vec<Vec<f64>>,
    /// `L^{-1} (y - m(X))`, entry by entry.
    beta: Vec<f64>,
    /// `v . beta` per candidate.
    mean_part: Vec<f64>,
    /// `v . v` per candidate.
    explained: Vec<f64>,
    points: Vec<ConfigPoint>,
    key: Option<(crate::gp::Hyperparams, f64)>,
}

impl PosteriorCache {
    pub fn new() -> Self {
        PosteriorCache::default()
    }

    /// Number of observations folded in.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn matches_prefix(&self, model: &GpModel) -> bool {
        let key_ok = self
            .key
            .as_ref()
            .is_some_and(|(h, j)| h == model.hyper() && *j == model.jitter());
        let train = model.train().points();
        key_ok && train.len() >= self.points.len() && train[..self.points.len()] == self.points[..]
    }

    /// Brings the cache up to date with `model`.
    pub fn sync(&mut self, grid: &CandidateGrid, model: &GpModel) {
        let m = grid.len();
        if !self.matches_prefix(model) || self.explained.len() != m {
            self.rows.clear();
            self.beta.clear();
            self.points.clear();
            self.mean_part = vec![0.0; m];
            self.explained = vec![0.0; m];
            self.key = Some((model.hyper().clone(), model.jitter()));
        }
        let hyper = model.hyper();
        let chol = model.chol();
        let train = model.train();
        for t in self.rows.len()..train.len() {
            let x = &train.points()[t];
            let z = model.features().encode(x);
            let l = chol.row(t);
            let mut row: Vec<f64> = grid
                .encoded
                .iter()
                .map(|c| hyper.kernel.eval(&z, c))
                .collect();
            for (i, prev) in self.rows.iter().enumerate() {
                let a = l[i];
                for (r, p) in row.iter_mut().zip(prev) {
                    *r -= a * p;
                }
            }
            let resid = train.responses()[t] - hyper.mean.eval(&z);
            let partial: f64 = self.beta.iter().zip(&l[..t]).map(|(b, li)| b * li).sum();
            let b = (resid - partial) / l[t];
            for ((r, mp), ex) in row
                .iter_mut()
                .zip(&mut self.mean_part)
                .zip(&mut self.explained)
            {
                *r /= l[t];
                *mp += *r * b;
                *ex += *r * *r;
            }
            self.beta.push(b);
            self.rows.push(row);
            self.points.push(x.clone());
        }
    }

    /// Posterior of candidate `index`; requires a prior [`sync`](Self::sync).
    pub fn predict(&self, grid: &CandidateGrid, index: usize) -> crate::gp::Prediction {
        let (hyper, _) = self.key.as_ref().expect("cache synced with a model");
        let z = grid.encoded(index);
        crate::gp::Prediction {
            mean: hyper.mean.eval(z) + self.mean_part[index],
            variance: (hyper.kernel.variance() + hyper.noise - self.explained[index]).max(0.0),
        }
    }

    /// Same contract as [`CandidateGrid::argmin`], using the cached posterior.
    pub fn argmin(
        &mut self,
        grid: &CandidateGrid,
        model: &GpModel,
        visited: &VisitedSet,
        kappa: f64,
        criterion: Criterion,
    ) -> Result<usize, AcquisitionError> {
        self.sync(grid, model);
        let mut best: Option<(f64, usize)> = None;
        for i in 0..grid.len() {
            if visited.contains_index(i) {
                continue;
            }
            let p = self.predict(grid, i);
            let mean = match criterion {
                Criterion::Lcb => p.mean,
                Criterion::IgnoreMean => 0.0,
            };
            let score = lcb(mean, p.stddev(), kappa);
            if best.map_or(true, |(b, _)| score < b) {
                best = Some((score, i));
            }
        }
        best.map(|(_, i)| i).ok_or(AcquisitionError::Exhausted)
    }
}

/// Unobserved grid point minimizing `mu - kappa sigma`, by exhaustive scan.
pub fn select_next(
    model: &GpModel,
    space: &ConfigSpace,
    observed: &VisitedSet,
    kappa: f64,
) -> Result<ConfigPoint, AcquisitionError> {
    let grid = CandidateGrid::new(space, model.features());
    let idx = grid.argmin(model, observed, kappa, Criterion::Lcb)?;
    Ok(space.point_at(idx).expect("index from the grid"))
}
