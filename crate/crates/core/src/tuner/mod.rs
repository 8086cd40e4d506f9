//! The tuning loop and classical search baselines.
//!
//! Every run produces a [`RunTrace`] with one record per evaluation.
//! Evaluation `t` counts all measurements so far, design included, and the
//! surrogate's hyperparameters are relearned whenever `t` is a multiple of
//! the learning cycle.

mod baselines;
mod trace;

pub use baselines::{run_baseline, run_with_strategy, BaselineKind, Evaluator};
pub use trace::{read_trace_csv, write_overhead_csv, write_trace_csv, TraceRow};

use crate::acquisition::{
    AcquisitionError, CandidateGrid, Criterion, KappaSchedule, PosteriorCache,
};
use crate::benchfn::{MeasureError, ResponseSource};
use crate::design::{lhd_sample, DesignError};
use crate::gp::{
    learn_hyperparams, FeatureMap, GpError, GpModel, Hyperparams, KernelFamily, LearnOptions,
    MeanForm, MeanSpec, NoiseMode, ObservationSet,
};
use crate::space::{ConfigPoint, ConfigSpace, VisitedSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
}

/// Evaluation budget and bookkeeping knobs for one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Total number of evaluations, design included.
    pub max_evals: usize,
    /// Initial design size.
    pub initial: usize,
    /// Relearn hyperparameters every `learn_every` evaluations.
    pub learn_every: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl BudgetConfig {
    /// Default design size `max(d + 1, 9)`, learning cycle 10 and 3 restarts.
    pub fn with_defaults(space: &ConfigSpace, max_evals: usize, seed: u64) -> Self {
        BudgetConfig {
            max_evals,
            initial: (space.dim() + 1).max(9).min(max_evals),
            learn_every: 10,
            restarts: 3,
            seed,
        }
    }

    pub fn validate(&self, space: &ConfigSpace) -> Result<(), TunerError> {
        if self.initial == 0 {
            return Err(TunerError::Budget(
                "initial design needs at least one point".into(),
            ));
        }
        if self.initial > self.max_evals {
            return Err(TunerError::Budget(format!(
                "initial design {} exceeds the budget {}",
                self.initial, self.max_evals
            )));
        }
        if self.max_evals > space.size() {
            return Err(TunerError::Budget(format!(
                "budget {} exceeds the space size {}",
                self.max_evals,
                space.size()
            )));
        }
        if self.learn_every == 0 {
            return Err(TunerError::Budget(
                "learning cycle must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Surrogate and acquisition settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub family: KernelFamily,
    pub mean: MeanForm,
    pub kappa: KappaSchedule,
    pub noise: NoiseMode,
    pub criterion: Criterion,
    pub max_learn_iters: usize,
}

impl SurrogateConfig {
    /// Matérn kernel, linear mean, adaptive kappa with `epsilon = 0.1, r = 2`.
    pub fn for_space(space: &ConfigSpace) -> Self {
        SurrogateConfig {
            family: KernelFamily::Matern12,
            mean: MeanForm::Linear,
            kappa: KappaSchedule::adaptive(0.1, 2, space.size()).expect("valid defaults"),
            noise: NoiseMode::default(),
            criterion: Criterion::Lcb,
            max_learn_iters: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Design,
    Search,
}

/// Wall-clock cost of the bookkeeping around one evaluation, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overhead {
    pub learn_ms: f64,
    pub select_ms: f64,
    pub refit_ms: f64,
}

impl Overhead {
    /// Refit plus selection.
    pub fn per_iteration_ms(&self) -> f64 {
        self.select_ms + self.refit_ms
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub phase: Phase,
    pub point: ConfigPoint,
    /// Measured response; `+inf` when the measurement failed.
    pub y: f64,
    pub kappa: Option<f64>,
    /// Best finite response so far; `+inf` until one exists.
    pub best: f64,
    pub relearned: bool,
    pub overhead: Overhead,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    pub hyperparams: Option<Hyperparams>,
    /// The grid ran out before the budget did.
    pub exhausted: bool,
}

impl RunTrace {
    pub fn new(method: impl Into<String>, seed: u64) -> Self {
        RunTrace {
            method: method.into(),
            seed,
            records: Vec::new(),
            hyperparams: None,
            exhausted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(x*, y*)` over finite measurements; earliest on ties.
    pub fn best(&self) -> Option<(&ConfigPoint, f64)> {
        self.records.iter().filter(|r| r.y.is_finite()).fold(
            None,
            |acc: Option<(&ConfigPoint, f64)>, r| match acc {
                Some((_, b)) if b <= r.y => acc,
                _ => Some((&r.point, r.y)),
            },
        )
    }

    pub fn best_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    /// Appends a record, maintaining the running best.
    pub(crate) fn push(
        &mut self,
        phase: Phase,
        point: ConfigPoint,
        y: f64,
        kappa: Option<f64>,
        relearned: bool,
        overhead: Overhead,
    ) {
        let prev = self.records.last().map_or(f64::INFINITY, |r| r.best);
        let best = if y < prev { y } else { prev };
        self.records.push(TraceRecord {
            t: self.records.len() + 1,
            phase,
            point,
            y,
            kappa,
            best,
            relearned,
            overhead,
        });
    }
}

/// Measures `x`, retrying once. A second failure yields `+inf`; a command
/// that cannot be started is fatal.
pub(crate) fn measure_with_retry(
    source: &mut dyn ResponseSource,
    x: &ConfigPoint,
) -> Result<f64, TunerError> {
    for attempt in 0..2 {
        match source.measure(x) {
            Ok(v) => return Ok(v),
            Err(e @ (MeasureError::Spawn(_) | MeasureError::Outside(_))) => return Err(e.into()),
            Err(e) => log::warn!("measurement of {x} failed (attempt {}): {e}", attempt + 1),
        }
    }
    Ok(f64::INFINITY)
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Learning template: previous kernel and noise with the requested mean form.
fn learning_template(prev: &Hyperparams, form: MeanForm) -> Hyperparams {
    let mean = match (form, prev.mean.form) {
        (MeanForm::Linear, MeanForm::Constant) => {
            MeanSpec::linear(prev.mean.offset, vec![0.0; prev.kernel.dim()])
        }
        (MeanForm::Constant, MeanForm::Linear) => MeanSpec::constant(prev.mean.offset),
        _ => prev.mean.clone(),
    };
    Hyperparams {
        mean,
        ..prev.clone()
    }
}

struct Surrogate<'a> {
    features: FeatureMap,
    config: &'a SurrogateConfig,
    options: LearnOptions,
    rng: ChaCha8Rng,
}

impl Surrogate<'_> {
    /// Learns hyperparameters from `start` and fits; `None` if neither the
    /// learned nor the starting hyperparameters give a usable model.
    fn learn_and_fit(&mut self, obs: &ObservationSet, start: &Hyperparams) -> Option<GpModel> {
        let template = learning_template(start, self.config.mean);
        let learned = if obs.len() >= 2 {
            match learn_hyperparams(&self.features, obs, &template, &self.options, &mut self.rng) {
                Ok(h) => h,
                Err(e) => {
                    log::warn!("hyperparameter learning failed: {e}");
                    start.clone()
                }
            }
        } else {
            start.clone()
        };
        GpModel::fit(&self.features, obs, &learned)
            .or_else(|_| GpModel::fit(&self.features, obs, start))
            .map_err(|e| log::warn!("cannot fit the surrogate: {e}"))
            .ok()
    }
}

/// Gaussian-process Bayesian optimization with the lower confidence bound.
pub fn run_bo4co(
    space: &ConfigSpace,
    source: &mut dyn ResponseSource,
    budget: &BudgetConfig,
    config: &SurrogateConfig,
) -> Result<RunTrace, TunerError> {
    budget.validate(space)?;
    let mut trace = RunTrace::new("bo4co", budget.seed);
    let mut design_rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut learn_rng = ChaCha8Rng::seed_from_u64(budget.seed);
    learn_rng.set_stream(1);

    let features = FeatureMap::new(space);
    let grid = CandidateGrid::new(space, &features);
    let mut cache = PosteriorCache::new();
    let mut visited = VisitedSet::new(space);
    let mut obs = ObservationSet::new();

    let design = lhd_sample(space, budget.initial, &mut design_rng)?;
    for x in design.points {
        let y = measure_with_retry(source, &x)?;
        visited.insert_index(space.linear_index(&x).expect("design point in space"));
        if y.is_finite() {
            obs.push(x.clone(), y)?;
        }
        trace.push(Phase::Design, x, y, None, false, Overhead::default());
    }

    let mut surrogate = Surrogate {
        features: features.clone(),
        config,
        options: LearnOptions {
            restarts: budget.restarts,
            max_iters: config.max_learn_iters,
            noise: config.noise,
        },
        rng: learn_rng,
    };
    let init = Hyperparams::initial(space, config.family, config.mean, &obs, config.noise);
    let mut model = match surrogate.learn_and_fit(&obs, &init) {
        Some(m) => m,
        None => GpModel::prior(&features, &init)?,
    };
    // after a conditioning failure the next pick maximizes the variance
    let mut explore_next = false;

    let mut t = budget.initial + 1;
    while t <= budget.max_evals {
        if visited.is_full() {
            trace.exhausted = true;
            break;
        }
        let mut overhead = Overhead::default();
        let mut relearned = false;
        if t % budget.learn_every == 0 && obs.len() >= 2 {
            let start = Instant::now();
            let prev = model.hyper().clone();
            if let Some(m) = surrogate.learn_and_fit(&obs, &prev) {
                model = m;
                relearned = true;
                explore_next = false;
            }
            overhead.learn_ms = millis(start);
        }

        let kappa = config.kappa.kappa_at(t)?;
        let start = Instant::now();
        let idx = if explore_next {
            cache.argmin(&grid, &model, &visited, 1.0, Criterion::IgnoreMean)?
        } else {
            cache.argmin(&grid, &model, &visited, kappa, config.criterion)?
        };
        overhead.select_ms = millis(start);
        let x = space.point_at(idx).expect("index from the grid");

        let y = measure_with_retry(source, &x)?;
        visited.insert_index(idx);

        let start = Instant::now();
        if y.is_finite() {
            obs.push(x.clone(), y)?;
            match model.refit_with(x.clone(), y) {
                Ok(m) => {
                    model = m;
                    explore_next = false;
                }
                Err(e) => {
                    log::debug!("incremental refit failed at t={t}: {e}");
                    match GpModel::fit(&features, &obs, model.hyper()) {
                        Ok(m) => {
                            model = m;
                            explore_next = false;
                        }
                        Err(e) => {
                            log::warn!("refit failed at t={t}, keeping the previous model: {e}");
                            explore_next = true;
                        }
                    }
                }
            }
        }
        overhead.refit_ms = millis(start);

        trace.push(Phase::Search, x, y, Some(kappa), relearned, overhead);
        t += 1;
    }
    trace.hyperparams = Some(model.hyper().clone());
    Ok(trace)
}
