use super::{linspace, BenchError, BenchFunction};
use crate::space::dataset::sample_variance;
use crate::space::{ConfigPoint, ConfigSpace, ParameterDef, TabularDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::Command;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("{0} is not a point of the space")]
    Outside(String),
    #[error("measurement failed: {0}")]
    Failed(String),
    #[error("cannot start measurement command: {0}")]
    Spawn(String),
    #[error("dataset covers {covered} of {size} configurations")]
    Incomplete { covered: usize, size: usize },
    #[error("noise standard deviation must be finite and nonnegative, got {0}")]
    Noise(f64),
}

/// Known grid optimum of a synthetic source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub point: ConfigPoint,
    pub value: f64,
    /// Coordinates of `point` in the original units.
    pub location: Vec<f64>,
}

/// Anything that can measure a configuration. Lower is better.
pub trait ResponseSource {
    fn space(&self) -> &ConfigSpace;

    fn measure(&mut self, x: &ConfigPoint) -> Result<f64, MeasureError>;

    /// Grid optimum, when the source knows it.
    fn ground_truth(&self) -> Option<GroundTruth> {
        None
    }

    /// Noise-free response, when the source knows it.
    fn true_value(&self, _x: &ConfigPoint) -> Option<f64> {
        None
    }
}

fn normal(sd: f64) -> Result<Option<Normal<f64>>, MeasureError> {
    if !(sd >= 0.0) || !sd.is_finite() {
        return Err(MeasureError::Noise(sd));
    }
    Ok((sd > 0.0).then(|| Normal::new(0.0, sd).expect("valid sd")))
}

/// Analytic function tabulated on a uniform grid, plus Gaussian noise.
#[derive(Clone, Debug)]
pub struct GridSource {
    function: BenchFunction,
    space: ConfigSpace,
    values: Vec<f64>,
    noise: Option<Normal<f64>>,
    noise_sd: f64,
    rng: ChaCha8Rng,
    truth: GroundTruth,
}

impl GridSource {
    pub fn function(&self) -> BenchFunction {
        self.function
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Same grid and noise level with a fresh noise stream.
    pub fn reseeded(&self, seed: u64) -> Self {
        GridSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            ..self.clone()
        }
    }
}

/// Discretizes `function` with `sizes[i]` evenly spaced points on each
/// dimension of its domain and scans the grid once for the optimum.
pub fn make_grid_source(
    function: BenchFunction,
    sizes: &[usize],
    noise_sd: f64,
    seed: u64,
) -> Result<(ConfigSpace, GridSource), BenchError> {
    let domain = function.domain();
    if sizes.len() != domain.len() {
        return Err(BenchError::Arity {
            function: function.name(),
            expected: domain.len(),
            found: sizes.len(),
        });
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
        return Err(BenchError::GridTooSmall(n));
    }
    let params = sizes
        .iter()
        .zip(&domain)
        .enumerate()
        .map(|(i, (&n, &(lo, hi)))| {
            ParameterDef::integer(format!("x{}", i + 1), linspace(lo, hi, n))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| BenchError::Grid(e.to_string()))?;
    let space = ConfigSpace::new(params).map_err(|e| BenchError::Grid(e.to_string()))?;
    let values = space
        .points()
        .map(|x| function.eval(&space.values(&x)))
        .collect::<Result<Vec<_>, _>>()?;
    let (best, &value) = values
        .iter()
        .enumerate()
        .fold(None::<(usize, &f64)>, |acc, (i, v)| match acc {
            Some((_, b)) if b <= v => acc,
            _ => Some((i, v)),
        })
        .expect("grid is not empty");
    let point = space.point_at(best).expect("index from the grid");
    let truth = GroundTruth {
        location: space.values(&point),
        point,
        value,
    };
    let noise = normal(noise_sd).map_err(|e| BenchError::Grid(e.to_string()))?;
    let source = GridSource {
        function,
        space: space.clone(),
        values,
        noise,
        noise_sd,
        rng: ChaCha8Rng::seed_from_u64(seed),
        truth,
    };
    Ok((space, source))
}

impl ResponseSource for GridSource {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn measure(&mut self, x: &ConfigPoint) -> Result<f64, MeasureError> {
        let idx = self
            .space
            .linear_index(x)
            .map_err(|_| MeasureError::Outside(x.to_string()))?;
        let noise = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
        Ok(self.values[idx] + noise)
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(self.truth.clone())
    }

    fn true_value(&self, x: &ConfigPoint) -> Option<f64> {
        Some(self.values[self.space.linear_index(x).ok()?])
    }
}

/// How a playback source perturbs the stored values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaybackNoise {
    Off,
    /// Gaussian with this standard deviation.
    Fixed(f64),
    /// Gaussian with each configuration's replicate standard deviation;
    /// configurations measured once use the pooled estimate.
    Replicates,
}

/// Replays a tabular dataset.
#[derive(Clone, Debug)]
pub struct PlaybackSource {
    dataset: TabularDataset,
    values: Vec<f64>,
    sds: Vec<f64>,
    rng: ChaCha8Rng,
}

impl PlaybackSource {
    pub fn new(
        dataset: TabularDataset,
        noise: PlaybackNoise,
        seed: u64,
    ) -> Result<Self, MeasureError> {
        let size = dataset.space().size();
        if !dataset.is_total() {
            return Err(MeasureError::Incomplete {
                covered: dataset.len(),
                size,
            });
        }
        let values: Vec<f64> = (0..size)
            .map(|i| dataset.value_at(i).expect("dataset is total"))
            .collect();
        let sds = match noise {
            PlaybackNoise::Off => vec![0.0; size],
            PlaybackNoise::Fixed(sd) => {
                normal(sd)?;
                vec![sd; size]
            }
            PlaybackNoise::Replicates => {
                let pooled = dataset.pooled_noise_variance().unwrap_or(0.0).sqrt();
                let mut sds = vec![pooled; size];
                for (x, s) in dataset.replicates() {
                    if s.len() >= 2 {
                        let i = dataset.space().linear_index(&x).expect("stored point");
                        sds[i] = sample_variance(s).sqrt();
                    }
                }
                sds
            }
        };
        Ok(PlaybackSource {
            dataset,
            values,
            sds,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dataset(&self) -> &TabularDataset {
        &self.dataset
    }

    /// Noise standard deviation applied at `x`.
    pub fn noise_sd(&self, x: &ConfigPoint) -> Option<f64> {
        Some(self.sds[self.dataset.space().linear_index(x).ok()?])
    }
}

impl ResponseSource for PlaybackSource {
    fn space(&self) -> &ConfigSpace {
        self.dataset.space()
    }

    fn measure(&mut self, x: &ConfigPoint) -> Result<f64, MeasureError> {
        let idx = self
            .dataset
            .space()
            .linear_index(x)
            .map_err(|_| MeasureError::Outside(x.to_string()))?;
        let sd = self.sds[idx];
        let noise = if sd > 0.0 {
            Normal::new(0.0, sd)
                .expect("valid sd")
                .sample(&mut self.rng)
        } else {
            0.0
        };
        Ok(self.values[idx] + noise)
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        let (point, value) = self.dataset.minimum()?;
        Some(GroundTruth {
            location: self.dataset.space().values(&point),
            point,
            value,
        })
    }

    fn true_value(&self, x: &ConfigPoint) -> Option<f64> {
        self.dataset.value(x)
    }
}

/// Runs `program args.. name=value..` for each measurement and reads one
/// number from the first nonblank line of its standard output.
#[derive(Clone, Debug)]
pub struct CommandSource {
    space: ConfigSpace,
    program: PathBuf,
    args: Vec<String>,
}

impl CommandSource {
    pub fn new(space: ConfigSpace, program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        CommandSource {
            space,
            program: program.into(),
            args,
        }
    }
}

impl ResponseSource for CommandSource {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn measure(&mut self, x: &ConfigPoint) -> Result<f64, MeasureError> {
        self.space
            .validate(x)
            .map_err(|_| MeasureError::Outside(x.to_string()))?;
        let pairs = self
            .space
            .describe(x)
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"));
        let out = Command::new(&self.program)
            .args(&self.args)
            .args(pairs)
            .output()
            .map_err(|e| MeasureError::Spawn(format!("{}: {e}", self.program.display())))?;
        if !out.status.success() {
            return Err(MeasureError::Failed(format!(
                "{} exited with {}",
                self.program.display(),
                out.status
            )));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let line = stdout
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| MeasureError::Failed("no output".into()))?;
        let v: f64 = line
            .parse()
            .map_err(|_| MeasureError::Failed(format!("cannot parse `{line}` as a number")))?;
        if v.is_nan() {
            return Err(MeasureError::Failed("measurement is NaN".into()));
        }
        Ok(v)
    }
}
