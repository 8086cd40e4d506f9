//! Latin hypercube initial designs over a discrete grid.
//!
//! Strata are defined on option indices: with `m` options and `n` points,
//! index `i` belongs to stratum `floor(i * n / m)`. Dimensions with fewer
//! options than points use every option as evenly as possible instead.

use crate::space::{ConfigPoint, ConfigSpace};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashSet;
use thiserror::Error;

const MAX_RESHUFFLES: usize = 200;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("cannot draw {n} distinct points from a space of {size}")]
    Infeasible { n: usize, size: usize },
    #[error("design size must be at least 1")]
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialDesign {
    pub points: Vec<ConfigPoint>,
}

impl InitialDesign {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Stratum of option index `idx` among `m` options split into `n` strata.
pub fn stratum(idx: usize, m: usize, n: usize) -> usize {
    idx * n / m
}

fn column<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<usize> {
    if m >= n {
        (0..n)
            .map(|k| {
                // indices i with floor(i*n/m) == k
                let lo = (k * m).div_ceil(n);
                let hi = ((k + 1) * m).div_ceil(n);
                rng.random_range(lo..hi)
            })
            .collect()
    } else {
        let mut extra: Vec<usize> = (0..m).collect();
        extra.shuffle(rng);
        let mut col: Vec<usize> = (0..n).map(|i| i % m).collect();
        // n = q*m + rem: the first q*m entries cover every option q times,
        // the remaining `rem` go to distinct random options.
        let rem = n % m;
        let base = n - rem;
        for (slot, &opt) in col[base..].iter_mut().zip(&extra) {
            *slot = opt;
        }
        col
    }
}

fn assemble(cols: &[Vec<usize>], n: usize) -> Vec<ConfigPoint> {
    (0..n)
        .map(|i| ConfigPoint(cols.iter().map(|c| c[i]).collect()))
        .collect()
}

fn duplicated_rows(points: &[ConfigPoint]) -> Vec<usize> {
    let mut seen = HashSet::new();
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| !seen.insert(*p))
        .map(|(i, _)| i)
        .collect()
}

pub fn lhd_sample<R: Rng + ?Sized>(
    space: &ConfigSpace,
    n: usize,
    rng: &mut R,
) -> Result<InitialDesign, DesignError> {
    if n == 0 {
        return Err(DesignError::Empty);
    }
    if n > space.size() {
        return Err(DesignError::Infeasible {
            n,
            size: space.size(),
        });
    }
    let sizes: Vec<usize> = space.params().iter().map(|p| p.len()).collect();
    let mut cols: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&m| {
            let mut c = column(m, n, rng);
            c.shuffle(rng);
            c
        })
        .collect();

    let mut points = assemble(&cols, n);
    for _ in 0..MAX_RESHUFFLES {
        if duplicated_rows(&points).is_empty() {
            return Ok(InitialDesign { points });
        }
        // redraw one dimension: stratification of every column is preserved
        let d = rng.random_range(0..sizes.len());
        let mut c = column(sizes[d], n, rng);
        c.shuffle(rng);
        cols[d] = c;
        points = assemble(&cols, n);
    }

    let dups = duplicated_rows(&points);
    log::warn!(
        "lhd: {} collisions left after {MAX_RESHUFFLES} reshuffles, filling uniformly",
        dups.len()
    );
    let mut used: HashSet<ConfigPoint> = points.iter().cloned().collect();
    for i in dups {
        loop {
            let idx = rng.random_range(0..space.size());
            let p = space.point_at(idx).expect("index in range");
            if used.insert(p.clone()) {
                points[i] = p;
                break;
            }
        }
    }
    Ok(InitialDesign { points })
}
