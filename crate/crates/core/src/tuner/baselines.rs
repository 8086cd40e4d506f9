//! Classical search baselines sharing one evaluation budget.
//!
//! Revisiting a measured point replays the cached response without spending
//! budget. Strategies that keep proposing visited points are moved to a
//! fresh random point after a fixed number of consecutive replays.

use super::{measure_with_retry, BudgetConfig, Overhead, Phase, RunTrace, TunerError};
use crate::benchfn::ResponseSource;
use crate::space::{ConfigPoint, ConfigSpace, VisitedSet};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const STALL_LIMIT: usize = 1000;
const SA_COOLING: f64 = 0.95;
const SA_INITIAL_ACCEPTANCE: f64 = 0.8;
const DRIFT_GLOBAL_SHARE: f64 = 0.3;
const DRIFT_SPREAD: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Simulated annealing with geometric cooling.
    Sa,
    /// Steepest descent with random restarts.
    Hill,
    /// Coordinate pattern search with step halving.
    Ps,
    /// Random sampling drifting toward the incumbent.
    Drift,
    /// Uniform sampling without replacement.
    Random,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Sa,
        BaselineKind::Hill,
        BaselineKind::Ps,
        BaselineKind::Drift,
        BaselineKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Sa => "sa",
            BaselineKind::Hill => "hill",
            BaselineKind::Ps => "ps",
            BaselineKind::Drift => "drift",
            BaselineKind::Random => "random",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown baseline `{s}`"))
    }
}

/// Budgeted access to a source for search strategies.
pub struct Evaluator<'a> {
    space: &'a ConfigSpace,
    source: &'a mut dyn ResponseSource,
    limit: usize,
    visited: VisitedSet,
    cache: HashMap<usize, f64>,
    trace: RunTrace,
    replays: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        method: &str,
        space: &'a ConfigSpace,
        source: &'a mut dyn ResponseSource,
        budget: &BudgetConfig,
    ) -> Self {
        Evaluator {
            space,
            source,
            limit: budget.max_evals.min(space.size()),
            visited: VisitedSet::new(space),
            cache: HashMap::new(),
            trace: RunTrace::new(method, budget.seed),
            replays: 0,
        }
    }

    pub fn space(&self) -> &ConfigSpace {
        self.space
    }

    /// Budget spent.
    pub fn done(&self) -> bool {
        self.trace.len() >= self.limit
    }

    /// Too many replays in a row: the strategy should jump elsewhere.
    pub fn stalled(&self) -> bool {
        self.replays >= STALL_LIMIT
    }

    /// Response at linear index `idx`: cached if already measured, otherwise
    /// measured. `None` when a new measurement is needed but the budget is spent.
    pub fn evaluate(&mut self, idx: usize) -> Result<Option<f64>, TunerError> {
        if let Some(&y) = self.cache.get(&idx) {
            self.replays += 1;
            return Ok(Some(y));
        }
        if self.done() {
            return Ok(None);
        }
        let x = self.space.point_at(idx).expect("index in range");
        let y = measure_with_retry(self.source, &x)?;
        self.visited.insert_index(idx);
        self.cache.insert(idx, y);
        self.replays = 0;
        self.trace
            .push(Phase::Search, x, y, None, false, Overhead::default());
        Ok(Some(y))
    }

    /// Best finite `(index, value)` so far.
    pub fn incumbent(&self) -> Option<(usize, f64)> {
        self.trace
            .best()
            .map(|(x, y)| (self.space.linear_index(x).expect("traced point"), y))
    }

    /// Uniformly random unmeasured index, `None` once the grid is exhausted.
    pub fn random_unvisited<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.visited.is_full() {
            return None;
        }
        for _ in 0..64 {
            let i = rng.random_range(0..self.space.size());
            if !self.visited.contains_index(i) {
                return Some(i);
            }
        }
        let free: Vec<usize> = (0..self.space.size())
            .filter(|&i| !self.visited.contains_index(i))
            .collect();
        free.choose(rng).copied()
    }

    fn neighbors(&self, idx: usize) -> Vec<usize> {
        let x = self.space.point_at(idx).expect("index in range");
        self.space
            .neighborhood(&x, 1)
            .expect("valid point")
            .iter()
            .map(|p| self.space.linear_index(p).expect("neighbor in space"))
            .collect()
    }

    pub fn into_trace(self) -> RunTrace {
        self.trace
    }
}

/// Runs a named custom strategy under the shared budget rules.
pub fn run_with_strategy<F>(
    method: &str,
    space: &ConfigSpace,
    source: &mut dyn ResponseSource,
    budget: &BudgetConfig,
    mut strategy: F,
) -> Result<RunTrace, TunerError>
where
    F: FnMut(&mut Evaluator<'_>, &mut ChaCha8Rng) -> Result<(), TunerError>,
{
    budget.validate(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    rng.set_stream(2);
    let mut ev = Evaluator::new(method, space, source, budget);
    strategy(&mut ev, &mut rng)?;
    let mut trace = ev.into_trace();
    trace.exhausted = trace.len() == space.size() && budget.max_evals > space.size();
    Ok(trace)
}

pub fn run_baseline(
    kind: BaselineKind,
    space: &ConfigSpace,
    source: &mut dyn ResponseSource,
    budget: &BudgetConfig,
) -> Result<RunTrace, TunerError> {
    run_with_strategy(kind.name(), space, source, budget, |ev, rng| match kind {
        BaselineKind::Sa => annealing(ev, rng),
        BaselineKind::Hill => hill_climbing(ev, rng),
        BaselineKind::Ps => pattern_search(ev, rng),
        BaselineKind::Drift => drift(ev, rng),
        BaselineKind::Random => random_search(ev, rng),
    })
}

/// Measures a fresh random point; `None` when nothing is left.
fn restart(
    ev: &mut Evaluator<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(usize, f64)>, TunerError> {
    let Some(i) = ev.random_unvisited(rng) else {
        return Ok(None);
    };
    Ok(ev.evaluate(i)?.map(|y| (i, y)))
}

fn random_search(ev: &mut Evaluator<'_>, rng: &mut ChaCha8Rng) -> Result<(), TunerError> {
    let mut order: Vec<usize> = (0..ev.space().size()).collect();
    order.shuffle(rng);
    for i in order {
        if ev.done() {
            break;
        }
        ev.evaluate(i)?;
    }
    Ok(())
}

fn annealing(ev: &mut Evaluator<'_>, rng: &mut ChaCha8Rng) -> Result<(), TunerError> {
    let Some((mut cur, mut ycur)) = restart(ev, rng)? else {
        return Ok(());
    };
    let mut t0: Option<f64> = None;
    let mut step = 0i32;
    while !ev.done() {
        if ev.stalled() {
            match restart(ev, rng)? {
                Some((i, y)) => (cur, ycur) = (i, y),
                None => break,
            }
            continue;
        }
        let nbrs = ev.neighbors(cur);
        let Some(&cand) = nbrs.choose(rng) else {
            break;
        };
        let Some(y) = ev.evaluate(cand)? else {
            break;
        };
        let delta = y - ycur;
        if t0.is_none() && delta.is_finite() && delta != 0.0 {
            // exp(-|delta| / t0) equals the target initial acceptance
            t0 = Some(delta.abs() / (1.0 / SA_INITIAL_ACCEPTANCE).ln());
        }
        let temp = t0.unwrap_or(1.0) * SA_COOLING.powi(step);
        step = step.saturating_add(1);
        let accept = if !y.is_finite() {
            false
        } else if !ycur.is_finite() || delta <= 0.0 {
            true
        } else {
            temp > 0.0 && rng.random::<f64>() < (-delta / temp).exp()
        };
        if accept {
            cur = cand;
            ycur = y;
        }
    }
    Ok(())
}

fn hill_climbing(ev: &mut Evaluator<'_>, rng: &mut ChaCha8Rng) -> Result<(), TunerError> {
    let Some((mut cur, mut ycur)) = restart(ev, rng)? else {
        return Ok(());
    };
    while !ev.done() {
        let mut best: Option<(usize, f64)> = None;
        for n in ev.neighbors(cur) {
            let Some(y) = ev.evaluate(n)? else {
                return Ok(());
            };
            if best.map_or(true, |(_, b)| y < b) {
                best = Some((n, y));
            }
        }
        match best {
            Some((n, y)) if y < ycur => (cur, ycur) = (n, y),
            _ => match restart(ev, rng)? {
                Some((i, y)) => (cur, ycur) = (i, y),
                None => break,
            },
        }
    }
    Ok(())
}

fn pattern_search(ev: &mut Evaluator<'_>, rng: &mut ChaCha8Rng) -> Result<(), TunerError> {
    let sizes: Vec<usize> = ev.space().params().iter().map(|p| p.len()).collect();
    let initial_steps: Vec<usize> = sizes.iter().map(|&m| (m / 4).max(1)).collect();
    let Some((mut cur, mut ycur)) = restart(ev, rng)? else {
        return Ok(());
    };
    let mut steps = initial_steps.clone();
    while !ev.done() {
        let x = ev.space().point_at(cur).expect("index in range");
        let mut moved = false;
        'poll: for d in 0..sizes.len() {
            for dir in [1isize, -1] {
                let c = x.0[d] as isize + dir * steps[d] as isize;
                let c = c.clamp(0, sizes[d] as isize - 1) as usize;
                if c == x.0[d] {
                    continue;
                }
                let mut p = x.0.clone();
                p[d] = c;
                let idx = ev.space().linear_index(&ConfigPoint(p)).expect("in range");
                let Some(y) = ev.evaluate(idx)? else {
                    return Ok(());
                };
                if y < ycur {
                    cur = idx;
                    ycur = y;
                    moved = true;
                    break 'poll;
                }
            }
        }
        if moved {
            continue;
        }
        if steps.iter().all(|&s| s == 1) {
            match restart(ev, rng)? {
                Some((i, y)) => (cur, ycur) = (i, y),
                None => break,
            }
            steps = initial_steps.clone();
        } else {
            steps.iter_mut().for_each(|s| *s = (*s / 2).max(1));
        }
    }
    Ok(())
}

fn drift(ev: &mut Evaluator<'_>, rng: &mut ChaCha8Rng) -> Result<(), TunerError> {
    let sizes: Vec<usize> = ev.space().params().iter().map(|p| p.len()).collect();
    let spread: Vec<Normal<f64>> = sizes
        .iter()
        .map(|&m| Normal::new(0.0, (DRIFT_SPREAD * m as f64).max(0.5)).expect("positive sd"))
        .collect();
    while !ev.done() {
        let centre = ev.incumbent();
        let idx = match centre {
            Some((c, _)) if !ev.stalled() && rng.random::<f64>() >= DRIFT_GLOBAL_SHARE => {
                let x = ev.space().point_at(c).expect("index in range");
                let p: Vec<usize> =
                    x.0.iter()
                        .zip(&sizes)
                        .zip(&spread)
                        .map(|((&v, &m), n)| {
                            let moved = (v as f64 + n.sample(rng)).round();
                            moved.clamp(0.0, m as f64 - 1.0) as usize
                        })
                        .collect();
                ev.space().linear_index(&ConfigPoint(p)).expect("in range")
            }
            _ => match ev.random_unvisited(rng) {
                Some(i) => i,
                None => break,
            },
        };
        if ev.evaluate(idx)?.is_none() {
            break;
        }
    }
    Ok(())
}
