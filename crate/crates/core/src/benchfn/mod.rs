//! Response sources: analytic test functions on grids, tabular playback and
//! an external measurement command.

mod source;

pub use source::{
    make_grid_source, CommandSource, GridSource, GroundTruth, MeasureError, PlaybackNoise,
    PlaybackSource, ResponseSource,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("{function}: coordinate {index} = {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        function: &'static str,
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{function}: expected {expected} coordinates, got {found}")]
    Arity {
        function: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("grid needs at least 2 points per dimension, got {0}")]
    GridTooSmall(usize),
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// Standard minimization test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchFunction {
    Branin,
    Hartmann3,
    /// Five-dimensional Rosenbrock.
    Rosenbrock5,
    /// Dixon-Price in two dimensions.
    Dixon2,
}

impl BenchFunction {
    pub fn name(self) -> &'static str {
        match self {
            BenchFunction::Branin => "branin",
            BenchFunction::Hartmann3 => "hartmann3",
            BenchFunction::Rosenbrock5 => "rosenbrock5",
            BenchFunction::Dixon2 => "dixon2",
        }
    }

    /// Per-dimension `(lo, hi)` of the standard domain.
    pub fn domain(self) -> Vec<(f64, f64)> {
        match self {
            BenchFunction::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            BenchFunction::Hartmann3 => vec![(0.0, 1.0); 3],
            BenchFunction::Rosenbrock5 => vec![(-5.0, 10.0); 5],
            BenchFunction::Dixon2 => vec![(-10.0, 10.0); 2],
        }
    }

    pub fn dim(self) -> usize {
        self.domain().len()
    }

    /// Points per dimension used when no grid is given.
    pub fn default_grid(self) -> Vec<usize> {
        match self {
            BenchFunction::Branin | BenchFunction::Dixon2 => vec![51, 51],
            BenchFunction::Hartmann3 => vec![15; 3],
            BenchFunction::Rosenbrock5 => vec![6; 5],
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<f64, BenchError> {
        let domain = self.domain();
        if x.len() != domain.len() {
            return Err(BenchError::Arity {
                function: self.name(),
                expected: domain.len(),
                found: x.len(),
            });
        }
        for (index, (&value, &(lo, hi))) in x.iter().zip(&domain).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(BenchError::OutOfDomain {
                    function: self.name(),
                    index,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(match self {
            BenchFunction::Branin => branin_raw(x[0], x[1]),
            BenchFunction::Hartmann3 => hartmann3_raw(x),
            BenchFunction::Rosenbrock5 => rosenbrock_raw(x),
            BenchFunction::Dixon2 => dixon_price_raw(x),
        })
    }
}

impl std::str::FromStr for BenchFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "branin" => Ok(BenchFunction::Branin),
            "hartmann3" => Ok(BenchFunction::Hartmann3),
            "rosenbrock5" | "rosenbrock" => Ok(BenchFunction::Rosenbrock5),
            "dixon2" | "dixon" => Ok(BenchFunction::Dixon2),
            other => Err(format!("unknown benchmark function `{other}`")),
        }
    }
}

pub fn branin(x1: f64, x2: f64) -> Result<f64, BenchError> {
    BenchFunction::Branin.eval(&[x1, x2])
}

pub fn hartmann3(x: &[f64]) -> Result<f64, BenchError> {
    BenchFunction::Hartmann3.eval(x)
}

pub fn rosenbrock(x: &[f64]) -> Result<f64, BenchError> {
    BenchFunction::Rosenbrock5.eval(x)
}

pub fn dixon2(x1: f64, x2: f64) -> Result<f64, BenchError> {
    BenchFunction::Dixon2.eval(&[x1, x2])
}

fn branin_raw(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const HARTMANN3_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

fn hartmann3_raw(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..3)
                .map(|j| HARTMANN3_A[i][j] * (x[j] - HARTMANN3_P[i][j]).powi(2))
                .sum();
            HARTMANN3_ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

fn rosenbrock_raw(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

fn dixon_price_raw(x: &[f64]) -> f64 {
    (x[0] - 1.0).powi(2)
        + x.windows(2)
            .enumerate()
            .map(|(i, w)| (i + 2) as f64 * (2.0 * w[1] * w[1] - w[0]).powi(2))
            .sum::<f64>()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}
