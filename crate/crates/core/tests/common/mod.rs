//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's numerics: encodings, kernels,
//! posteriors and correlations are recomputed from their definitions.

#![allow(dead_code)]

use autotune_core::gp::{Hyperparams, KernelFamily, KernelSpec, MeanSpec, ObservationSet};
use autotune_core::space::{ParamKind, TabularDataset};
use autotune_core::{ConfigPoint, ConfigSpace, ParameterDef};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

/// Random space of 1..=`max_d` parameters with 2..=`max_m` options each;
/// about a third of the parameters are categorical when `mixed` is set.
pub fn random_space<R: Rng>(rng: &mut R, max_d: usize, max_m: usize, mixed: bool) -> ConfigSpace {
    let d = rng.random_range(1..=max_d);
    let params = (0..d)
        .map(|l| {
            let m = rng.random_range(2..=max_m);
            if mixed && rng.random_bool(0.35) {
                ParameterDef::categorical(format!("c{l}"), (0..m).map(|i| format!("o{i}")))
            } else {
                // strictly increasing, unevenly spaced options
                let mut v = rng.random_range(-5.0..5.0);
                let opts = (0..m)
                    .map(|_| {
                        v += rng.random_range(0.1..3.0);
                        v
                    })
                    .collect();
                ParameterDef::integer(format!("x{l}"), opts)
            }
            .unwrap()
        })
        .collect();
    ConfigSpace::new(params).unwrap()
}

/// `t` distinct points of `space`, uniformly at random.
pub fn distinct_points<R: Rng>(rng: &mut R, space: &ConfigSpace, t: usize) -> Vec<ConfigPoint> {
    sample(rng, space.size(), t)
        .into_iter()
        .map(|i| space.point_at(i).unwrap())
        .collect()
}

/// Random hyperparameters of `family` for `space`; noise is drawn as a
/// fraction of the prior variance in `[noise_lo, noise_hi]` (log-uniform),
/// or exactly zero when `noise_hi` is zero.
pub fn random_hyper<R: Rng>(
    rng: &mut R,
    space: &ConfigSpace,
    family: KernelFamily,
    noise_lo: f64,
    noise_hi: f64,
) -> Hyperparams {
    let kinds: Vec<ParamKind> = space.params().iter().map(|p| p.kind()).collect();
    let amplitude = rng.random_range(0.5..2.0);
    let scales = kinds.iter().map(|_| rng.random_range(0.2..2.0)).collect();
    let kernel = KernelSpec::new(family, &kinds, amplitude, scales);
    let mean = if rng.random_bool(0.5) {
        MeanSpec::constant(rng.random_range(-1.0..1.0))
    } else {
        MeanSpec::linear(
            rng.random_range(-1.0..1.0),
            kinds.iter().map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    };
    let noise = if noise_hi == 0.0 {
        0.0
    } else {
        let u: f64 = rng.random_range(noise_lo.ln()..=noise_hi.ln());
        u.exp() * amplitude * amplitude
    };
    Hyperparams {
        kernel,
        mean,
        noise,
    }
}

pub fn random_family<R: Rng>(rng: &mut R) -> KernelFamily {
    [
        KernelFamily::Matern12,
        KernelFamily::Categorical,
        KernelFamily::Product,
    ][rng.random_range(0..3)]
}

pub fn observations<R: Rng>(rng: &mut R, points: &[ConfigPoint]) -> ObservationSet {
    let mut obs = ObservationSet::new();
    for x in points {
        obs.push(x.clone(), rng.random_range(-3.0..3.0)).unwrap();
    }
    obs
}

/// Numeric options min-max scaled to `[0, 1]`; categorical options as their
/// index.
pub fn encode(space: &ConfigSpace, x: &ConfigPoint) -> Vec<f64> {
    space
        .params()
        .iter()
        .zip(x.coords())
        .map(|(p, &c)| match p.kind() {
            ParamKind::Categorical => c as f64,
            ParamKind::IntegerGrid => {
                let opts: Vec<f64> = (0..p.len()).map(|i| p.numeric_value(i)).collect();
                let lo = opts.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = opts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (opts[c] - lo) / (hi - lo)
            }
        })
        .collect()
}

fn is_delta(family: KernelFamily, kind: ParamKind) -> bool {
    match family {
        KernelFamily::Matern12 => false,
        KernelFamily::Categorical => true,
        KernelFamily::Product => kind == ParamKind::Categorical,
    }
}

/// `a^2 exp(-||(z - z') / l||_numeric - sum_categorical rate [c != c'])`.
pub fn kernel(space: &ConfigSpace, h: &Hyperparams, a: &ConfigPoint, b: &ConfigPoint) -> f64 {
    let (za, zb) = (encode(space, a), encode(space, b));
    let mut r2 = 0.0;
    let mut penalty = 0.0;
    for (l, p) in space.params().iter().enumerate() {
        let s = h.kernel.scales[l];
        if is_delta(h.kernel.family, p.kind()) {
            if a.coords()[l] != b.coords()[l] {
                penalty += s;
            }
        } else {
            r2 += ((za[l] - zb[l]) / s).powi(2);
        }
    }
    h.kernel.amplitude.powi(2) * (-r2.sqrt() - penalty).exp()
}

pub fn prior_mean(space: &ConfigSpace, h: &Hyperparams, x: &ConfigPoint) -> f64 {
    let z = encode(space, x);
    h.mean.offset
        + h.mean
            .slopes
            .iter()
            .zip(&z)
            .map(|(a, v)| a * v)
            .sum::<f64>()
}

/// Posterior mean and noisy predictive variance from an explicit inverse of
/// `K + (noise + jitter) I`.
pub fn dense_posterior(
    space: &ConfigSpace,
    obs: &ObservationSet,
    h: &Hyperparams,
    jitter: f64,
    x: &ConfigPoint,
) -> (f64, f64) {
    let pts = obs.points();
    let t = pts.len();
    let k = DMatrix::from_fn(t, t, |i, j| {
        kernel(space, h, &pts[i], &pts[j]) + if i == j { h.noise + jitter } else { 0.0 }
    });
    let inv = k.try_inverse().expect("invertible covariance");
    let kx = DVector::from_fn(t, |i, _| kernel(space, h, &pts[i], x));
    let resid = DVector::from_fn(t, |i, _| obs.responses()[i] - prior_mean(space, h, &pts[i]));
    let mean = prior_mean(space, h, x) + (kx.transpose() * &inv * resid)[(0, 0)];
    let var = kernel(space, h, x, x) + h.noise - (kx.transpose() * &inv * &kx)[(0, 0)];
    (mean, var)
}

/// `log N(y | m(X), K + noise I)` computed with a dense LU determinant.
pub fn dense_lml(space: &ConfigSpace, obs: &ObservationSet, h: &Hyperparams) -> f64 {
    let pts = obs.points();
    let t = pts.len();
    let k = DMatrix::from_fn(t, t, |i, j| {
        kernel(space, h, &pts[i], &pts[j]) + if i == j { h.noise } else { 0.0 }
    });
    let resid = DVector::from_fn(t, |i, _| obs.responses()[i] - prior_mean(space, h, &pts[i]));
    let quad = (resid.transpose() * k.clone().try_inverse().unwrap() * &resid)[(0, 0)];
    -0.5 * quad - 0.5 * k.determinant().ln() - 0.5 * t as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Log-hyperparameters in gradient order: amplitude, scales, noise.
pub fn log_params(h: &Hyperparams) -> Vec<f64> {
    let mut v = vec![h.kernel.amplitude.ln()];
    v.extend(h.kernel.scales.iter().map(|s| s.ln()));
    v.push(h.noise.ln());
    v
}

pub fn with_log_params(h: &Hyperparams, v: &[f64]) -> Hyperparams {
    let mut out = h.clone();
    let d = h.kernel.scales.len();
    out.kernel.amplitude = v[0].exp();
    for l in 0..d {
        out.kernel.scales[l] = v[1 + l].exp();
    }
    out.noise = v[d + 1].exp();
    out
}

/// Central finite differences of `f` at `v` with step `step`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, v: &[f64], step: f64) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let mut up = v.to_vec();
            let mut down = v.to_vec();
            up[i] += step;
            down[i] -= step;
            (f(&up) - f(&down)) / (2.0 * step)
        })
        .collect()
}

/// Sample Pearson correlation by the two-pass textbook formula; zero for a
/// constant column.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Correlation-based subset merit over raw `(features, response)` rows:
/// `k r_cf / sqrt(k + k (k - 1) r_ff)` with mean absolute correlations.
pub fn merit(rows: &[(Vec<f64>, f64)], subset: &[usize]) -> f64 {
    let col = |j: usize| rows.iter().map(|(x, _)| x[j]).collect::<Vec<_>>();
    let y: Vec<f64> = rows.iter().map(|(_, y)| *y).collect();
    let k = subset.len() as f64;
    let r_cf = subset
        .iter()
        .map(|&j| correlation(&col(j), &y).abs())
        .sum::<f64>()
        / k;
    let mut pair_sum = 0.0;
    let mut pairs = 0.0;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            pair_sum += correlation(&col(i), &col(j)).abs();
            pairs += 1.0;
        }
    }
    let r_ff = if pairs > 0.0 { pair_sum / pairs } else { 0.0 };
    k * r_cf / (k + k * (k - 1.0) * r_ff).sqrt()
}

/// Integer grid with the given option counts (options `0..m`).
pub fn grid_space(counts: &[usize]) -> ConfigSpace {
    ConfigSpace::new(
        counts
            .iter()
            .enumerate()
            .map(|(l, &m)| {
                ParameterDef::integer(format!("x{l}"), (0..m).map(|v| v as f64).collect()).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// Option counts of the measured spaces, with their categorical dimension
/// (if any).
pub const TABLE_SHAPES: [(&str, &[usize], Option<usize>); 5] = [
    ("wc6", &[2, 6, 5, 4, 4, 3], None),
    ("sol6", &[2, 5, 4, 3, 6, 4], None),
    ("rs6", &[2, 4, 8, 5, 4, 3], None),
    ("wc3", &[7, 6, 18], None),
    ("wc5", &[3, 4, 6, 5, 3], Some(4)),
];

/// Space of one shape; the categorical dimension gets labelled options.
pub fn table_space(counts: &[usize], categorical: Option<usize>) -> ConfigSpace {
    ConfigSpace::new(
        counts
            .iter()
            .enumerate()
            .map(|(l, &m)| {
                if Some(l) == categorical {
                    ParameterDef::categorical(format!("p{l}"), (0..m).map(|i| format!("v{i}")))
                } else {
                    ParameterDef::integer(
                        format!("p{l}"),
                        (0..m).map(|v| (1 << v) as f64).collect(),
                    )
                }
                .unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// CSV text covering a `threads x heap(categorical) x buffer` grid with one
/// to three replicates per configuration, plus the per-configuration means
/// in row order of first appearance.
pub fn storm_like_csv<R: Rng>(rng: &mut R) -> (String, Vec<f64>) {
    let mut text = String::from("threads,heap,buffer,latency\n");
    let mut means = Vec::new();
    for threads in [1, 2, 4, 8, 16] {
        for heap in ["small", "medium", "large"] {
            for buffer in [64, 128, 256, 512] {
                let reps = rng.random_range(1..=3);
                let base = rng.random_range(5.0..50.0);
                let mut sum = 0.0;
                for _ in 0..reps {
                    let y: f64 = base + rng.random_range(-1.0..1.0);
                    sum += y;
                    text.push_str(&format!("{threads},{heap},{buffer},{y}\n"));
                }
                means.push(sum / reps as f64);
            }
        }
    }
    (text, means)
}

/// Random dataset on a random integer grid with 1-2 samples per point and a
/// response driven by a few of the parameters.
pub fn random_dataset<R: Rng>(rng: &mut R) -> (TabularDataset, Vec<(Vec<f64>, f64)>) {
    let d = rng.random_range(2..=6);
    let counts: Vec<usize> = (0..d).map(|_| rng.random_range(2..=4)).collect();
    let space = grid_space(&counts);
    let weights: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut data = TabularDataset::new(space.clone());
    let mut rows = Vec::new();
    for x in space.points() {
        for _ in 0..rng.random_range(1..=2) {
            let v = space.values(&x);
            let y = v.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>()
                + rng.random_range(-1.0..1.0);
            data.add_sample(&x, y).unwrap();
            rows.push((v, y));
        }
    }
    (data, rows)
}
