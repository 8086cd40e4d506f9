//! Distance-to-optimum statistics across replications.

use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub method: String,
    pub replications: usize,
    pub curve: Vec<CurvePoint>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Per-iteration `|best_t - optimum|` statistics over best-so-far curves.
/// Curves of unequal length are cut to the shortest.
pub fn distance_curve(method: &str, best_curves: &[Vec<f64>], optimum: f64) -> AggregateReport {
    let len = best_curves.iter().map(Vec::len).min().unwrap_or(0);
    if best_curves.iter().any(|c| c.len() != len) {
        log::warn!("{method}: traces differ in length, aligning to {len} iterations");
    }
    let curve = (0..len)
        .map(|i| {
            let mut d: Vec<f64> = best_curves.iter().map(|c| (c[i] - optimum).abs()).collect();
            d.sort_by(f64::total_cmp);
            CurvePoint {
                t: i + 1,
                mean: d.iter().sum::<f64>() / d.len() as f64,
                median: quantile(&d, 0.5),
                q1: quantile(&d, 0.25),
                q3: quantile(&d, 0.75),
                min: d[0],
                max: d[d.len() - 1],
            }
        })
        .collect();
    AggregateReport {
        method: method.to_string(),
        replications: best_curves.len(),
        curve,
    }
}

/// Long format: `method,t,statistic,value`, one row per iteration and statistic.
pub fn write_aggregate_csv<W: Write>(reports: &[AggregateReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "t", "statistic", "value"])?;
    for r in reports {
        for p in &r.curve {
            for (name, v) in [
                ("mean", p.mean),
                ("median", p.median),
                ("q1", p.q1),
                ("q3", p.q3),
                ("min", p.min),
                ("max", p.max),
            ] {
                w.write_record([r.method.as_str(), &p.t.to_string(), name, &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hitting_the_optimum_zeroes_the_tail() {
        let curve: Vec<f64> = (1..=10)
            .map(|t| if t >= 7 { 1.0 } else { 1.0 + 1.0 / t as f64 })
            .collect();
        let r = distance_curve("x", &[curve], 1.0);
        for p in &r.curve {
            assert_eq!(p.median == 0.0, p.t >= 7);
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn ragged_curves_are_cut() {
        let r = distance_curve("x", &[vec![3.0, 2.0, 1.0], vec![4.0, 2.0]], 1.0);
        assert_eq!(r.curve.len(), 2);
        assert_eq!(r.curve[1].mean, 1.0);
        let mut buf = Vec::new();
        write_aggregate_csv(&[r], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 6);
    }
}
