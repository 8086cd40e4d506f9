//! Type-II maximum likelihood for the kernel, noise and mean parameters.
//!
//! Kernel and noise parameters are optimized in log space by a
//! box-constrained BFGS with backtracking line search, restarted from the
//! incoming hyperparameters and from random points. The mean coefficients
//! are profiled out by generalized least squares at every evaluation.

use super::likelihood::{evaluate, MeanTreatment};
use super::{response_stats, FeatureMap, GpError, Hyperparams, KernelSpec, ObservationSet};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Noise variance is a learned hyperparameter bounded below by `floor`.
    Learned { floor: f64 },
    /// Noise variance known in advance, e.g. from replicated measurements.
    Fixed(f64),
}

impl Default for NoiseMode {
    fn default() -> Self {
        NoiseMode::Learned { floor: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub noise: NoiseMode,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            restarts: 3,
            max_iters: 100,
            noise: NoiseMode::default(),
        }
    }
}

struct Problem<'a> {
    inputs: Vec<Vec<f64>>,
    y: &'a [f64],
    template: &'a Hyperparams,
    lower: Vec<f64>,
    upper: Vec<f64>,
    learn_noise: bool,
    fixed_noise: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn unpack(&self, v: &[f64]) -> (KernelSpec, f64) {
        let d = self.template.kernel.dim();
        let mut kernel = self.template.kernel.clone();
        kernel.amplitude = v[0].exp();
        for l in 0..d {
            kernel.scales[l] = v[1 + l].exp();
        }
        let noise = if self.learn_noise {
            v[1 + d].exp()
        } else {
            self.fixed_noise
        };
        (kernel, noise)
    }

    fn pack(&self, h: &Hyperparams) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(h.kernel.amplitude.ln());
        v.extend(h.kernel.scales.iter().map(|s| s.ln()));
        if self.learn_noise {
            v.push(h.noise.ln());
        }
        self.clamp(&mut v);
        v
    }

    fn clamp(&self, v: &mut [f64]) {
        for ((x, lo), hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// Negative profiled log likelihood and its gradient.
    fn objective(&self, v: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (kernel, noise) = self.unpack(v);
        let ev = evaluate(
            &self.inputs,
            self.y,
            &kernel,
            MeanTreatment::Profile(self.template.mean.form),
            noise,
            true,
        )
        .ok()?;
        let d = kernel.dim();
        let mut g: Vec<f64> = ev.grad[..1 + d].iter().map(|x| -x).collect();
        if self.learn_noise {
            g.push(-ev.grad[1 + d]);
        }
        if g.iter().all(|x| x.is_finite()) {
            Some((-ev.lml, g))
        } else {
            None
        }
    }

    fn hyperparams(&self, v: &[f64]) -> Option<(Hyperparams, f64)> {
        let (kernel, noise) = self.unpack(v);
        let ev = evaluate(
            &self.inputs,
            self.y,
            &kernel,
            MeanTreatment::Profile(self.template.mean.form),
            noise,
            false,
        )
        .ok()?;
        Some((
            Hyperparams {
                kernel,
                mean: ev.mean,
                noise,
            },
            ev.lml,
        ))
    }
}

/// Maximizes the marginal likelihood from `init` plus `restarts - 1`
/// random starting points; returns the best hyperparameters found, never
/// worse than `init`.
pub fn learn_hyperparams<R: Rng + ?Sized>(
    features: &FeatureMap,
    obs: &ObservationSet,
    init: &Hyperparams,
    options: &LearnOptions,
    rng: &mut R,
) -> Result<Hyperparams, GpError> {
    init.validate()?;
    if obs.len() < 2 {
        return Err(GpError::TooFewObservations {
            needed: 2,
            have: obs.len(),
        });
    }
    let restarts = options.restarts.max(1);
    let (_, sd) = response_stats(obs.responses());
    let d = init.kernel.dim();

    let (learn_noise, fixed_noise, noise_floor) = match options.noise {
        NoiseMode::Learned { floor } => (true, 0.0, floor.max(f64::MIN_POSITIVE)),
        NoiseMode::Fixed(v) => (false, v, 0.0),
    };
    let mut lower = vec![(sd * 1e-2).min(init.kernel.amplitude).ln()];
    let mut upper = vec![(sd * 1e2).max(init.kernel.amplitude).ln()];
    for l in 0..d {
        // a numeric length-scale below the grid spacing decorrelates every
        // pair of grid points, which no discrete response can distinguish
        let (lo, hi) = if init.kernel.categorical[l] {
            (1e-4f64, 20.0f64)
        } else {
            (features.min_gap(l), 1e2f64)
        };
        let s = init.kernel.scales[l];
        lower.push(lo.min(s).ln());
        upper.push(hi.max(s).ln());
    }
    if learn_noise {
        let init_noise = init.noise.max(noise_floor);
        lower.push(noise_floor.min(init_noise).ln());
        upper.push((10.0 * sd * sd).max(init_noise).ln());
    }

    let problem = Problem {
        inputs: obs.points().iter().map(|x| features.encode(x)).collect(),
        y: obs.responses(),
        template: init,
        lower,
        upper,
        learn_noise,
        fixed_noise,
    };

    // the incoming hyperparameters with their own mean are always a candidate
    let init_for_model = Hyperparams {
        noise: if learn_noise {
            init.noise.max(noise_floor)
        } else {
            fixed_noise
        },
        ..init.clone()
    };
    let mut best: Option<(Hyperparams, f64)> = evaluate(
        &problem.inputs,
        problem.y,
        &init_for_model.kernel,
        MeanTreatment::Fixed(&init_for_model.mean),
        init_for_model.noise,
        false,
    )
    .ok()
    .map(|ev| (init_for_model.clone(), ev.lml));

    for restart in 0..restarts {
        let start = if restart == 0 {
            problem.pack(init)
        } else {
            random_start(&problem, sd, d, rng)
        };
        let Some(v) = minimize(&problem, start, options.max_iters) else {
            continue;
        };
        if let Some((h, lml)) = problem.hyperparams(&v) {
            if best.as_ref().map_or(true, |(_, b)| lml > *b) {
                best = Some((h, lml));
            }
        }
    }
    best.map(|(h, _)| h).ok_or(GpError::LearningFailed)
}

fn random_start<R: Rng + ?Sized>(p: &Problem<'_>, sd: f64, d: usize, rng: &mut R) -> Vec<f64> {
    let mut v = Vec::with_capacity(p.dim());
    v.push(sd.ln() + rng.random_range(-1.0..1.0));
    for l in 0..d {
        let (lo, hi) = if p.template.kernel.categorical[l] {
            (0.05f64, 3.0f64)
        } else {
            (0.05f64, 2.0f64)
        };
        v.push(rng.random_range(lo.ln()..hi.ln()));
    }
    if p.learn_noise {
        let lo = p.lower[1 + d];
        let hi = (1e-2 * sd * sd).ln().max(lo + 1e-9);
        v.push(rng.random_range(lo..hi));
    }
    p.clamp(&mut v);
    v
}

/// Projected BFGS on the box `[lower, upper]`.
fn minimize(p: &Problem<'_>, mut x: Vec<f64>, max_iters: usize) -> Option<Vec<f64>> {
    const C1: f64 = 1e-4;
    const GTOL: f64 = 1e-6;
    const FTOL: f64 = 1e-10;
    const MAX_STEP: f64 = 3.0;

    let n = x.len();
    let (mut fx, mut g) = p.objective(&x)?;
    let mut h = scaled_identity(n, 1.0);
    // curvature scale `s.y / y.y` of the latest step; unknown at the start
    let mut gamma = 1.0;
    let mut unscaled = true;

    for _ in 0..max_iters {
        let pg = projected(&x, &g, &p.lower, &p.upper);
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < GTOL {
            break;
        }
        // coordinates pinned at a bound and pushed outward stay put; the
        // others follow the quasi-Newton step restricted to the free subspace
        let free: Vec<bool> = pg.iter().map(|v| *v != 0.0).collect();
        let mut dir: Vec<f64> = (0..n)
            .map(|i| {
                if free[i] {
                    -(0..n)
                        .filter(|&j| free[j])
                        .map(|j| h[i * n + j] * g[j])
                        .sum::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = scaled_identity(n, gamma);
            dir = pg.iter().map(|v| -gamma * v).collect();
            slope = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                break;
            }
        }
        let longest = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // a raw gradient step has no natural length; try a unit move
        let cap = if unscaled { 1.0 } else { MAX_STEP };
        if longest > cap {
            let s = cap / longest;
            dir.iter_mut().for_each(|v| *v *= s);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            p.clamp(&mut trial);
            let moved: f64 = trial
                .iter()
                .zip(&x)
                .zip(&g)
                .map(|((t, a), gi)| (t - a) * gi)
                .sum();
            if let Some((ft, gt)) = p.objective(&trial) {
                if ft <= fx + C1 * moved {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let converged = (fx - fn_).abs() <= FTOL * (1.0 + fx.abs());
        x = xn;
        fx = fn_;
        g = gn;
        if converged {
            break;
        }
        if sy > 1e-12 {
            gamma = sy / yv.iter().map(|v| v * v).sum::<f64>();
            if unscaled {
                h = scaled_identity(n, gamma);
                unscaled = false;
            }
            bfgs_update(&mut h, &s, &yv, sy);
        }
    }
    Some(x)
}

fn scaled_identity(n: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = scale;
    }
    m
}

fn projected(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Inverse-Hessian update `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
        .collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] +=
                -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{log_marginal_likelihood, KernelFamily, MeanForm};
    use crate::space::{ConfigPoint, ConfigSpace, ParameterDef};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_data() -> (ConfigSpace, FeatureMap, ObservationSet) {
        let s = ConfigSpace::new(vec![ParameterDef::integer(
            "a",
            (0..21).map(f64::from).collect(),
        )
        .unwrap()])
        .unwrap();
        let f = FeatureMap::new(&s);
        let obs = ObservationSet::from_pairs(
            [0usize, 3, 6, 8, 11, 14, 17, 20]
                .map(|i| (ConfigPoint::new(vec![i]), ((i as f64) - 9.0).powi(2) / 10.0)),
        )
        .unwrap();
        (s, f, obs)
    }

    #[test]
    fn never_worse_than_init() {
        let (s, f, obs) = quadratic_data();
        let init = Hyperparams::initial(
            &s,
            KernelFamily::Matern12,
            MeanForm::Constant,
            &obs,
            NoiseMode::default(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let learned =
            learn_hyperparams(&f, &obs, &init, &LearnOptions::default(), &mut rng).unwrap();
        let before = log_marginal_likelihood(&f, &obs, &init).unwrap();
        let after = log_marginal_likelihood(&f, &obs, &learned).unwrap();
        assert!(after >= before - 1e-9, "{after} < {before}");

        // restarting from the optimum stays there
        let opts = LearnOptions {
            restarts: 1,
            ..LearnOptions::default()
        };
        let again = learn_hyperparams(&f, &obs, &learned, &opts, &mut rng).unwrap();
        let lml_again = log_marginal_likelihood(&f, &obs, &again).unwrap();
        assert!(lml_again >= after - 1e-9);
        assert!((again.kernel.scales[0].ln() - learned.kernel.scales[0].ln()).abs() < 1e-2);
    }

    #[test]
    fn fixed_noise_is_kept() {
        let (s, f, obs) = quadratic_data();
        let mode = NoiseMode::Fixed(0.01);
        let init = Hyperparams::initial(&s, KernelFamily::Matern12, MeanForm::Linear, &obs, mode);
        let opts = LearnOptions {
            noise: mode,
            ..LearnOptions::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let learned = learn_hyperparams(&f, &obs, &init, &opts, &mut rng).unwrap();
        assert_eq!(learned.noise, 0.01);
    }

    #[test]
    fn needs_two_observations() {
        let (s, f, _) = quadratic_data();
        let obs = ObservationSet::from_pairs([(ConfigPoint::new(vec![0]), 1.0)]).unwrap();
        let init = Hyperparams::initial(
            &s,
            KernelFamily::Matern12,
            MeanForm::Constant,
            &obs,
            NoiseMode::default(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            learn_hyperparams(&f, &obs, &init, &LearnOptions::default(), &mut rng),
            Err(GpError::TooFewObservations { .. })
        ));
    }
}
