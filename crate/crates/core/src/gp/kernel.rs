//! Covariance functions over encoded configuration points.
//!
//! Numeric dimensions are min-max scaled to `[0, 1]` by [`FeatureMap`];
//! categorical dimensions are carried as option indices and only compared
//! for equality.

use crate::space::{ConfigPoint, ConfigSpace, ParamKind};
use serde::{Deserialize, Serialize};

/// Encodes grid points as kernel inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    kinds: Vec<ParamKind>,
    // option index -> encoded value, per dimension
    table: Vec<Vec<f64>>,
}

impl FeatureMap {
    pub fn new(space: &ConfigSpace) -> Self {
        let mut kinds = Vec::with_capacity(space.dim());
        let mut table = Vec::with_capacity(space.dim());
        for p in space.params() {
            kinds.push(p.kind());
            let values: Vec<f64> = (0..p.len()).map(|i| p.numeric_value(i)).collect();
            match p.kind() {
                ParamKind::IntegerGrid => {
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let span = hi - lo;
                    table.push(
                        values
                            .iter()
                            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
                            .collect(),
                    );
                }
                ParamKind::Categorical => {
                    table.push(values);
                }
            }
        }
        FeatureMap { kinds, table }
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    /// Smallest distance between adjacent encoded options of dimension `l`;
    /// 1 for categorical dimensions and single-option grids.
    pub fn min_gap(&self, l: usize) -> f64 {
        if self.kinds[l] == ParamKind::Categorical {
            return 1.0;
        }
        self.table[l]
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .filter(|g| *g > 0.0)
            .fold(1.0, f64::min)
    }

    pub fn encode(&self, x: &ConfigPoint) -> Vec<f64> {
        x.0.iter().zip(&self.table).map(|(&c, t)| t[c]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// Matérn ν = 1/2 with ARD length-scales on every dimension.
    Matern12,
    /// Kronecker-delta kernel with per-dimension rates on every dimension.
    Categorical,
    /// Matérn ν = 1/2 on numeric dimensions times the delta kernel on
    /// categorical ones.
    Product,
}

impl KernelFamily {
    /// Whether each dimension is handled by the delta kernel.
    pub fn categorical_mask(self, kinds: &[ParamKind]) -> Vec<bool> {
        kinds
            .iter()
            .map(|k| match self {
                KernelFamily::Matern12 => false,
                KernelFamily::Categorical => true,
                KernelFamily::Product => *k == ParamKind::Categorical,
            })
            .collect()
    }
}

/// Kernel family plus hyperparameters.
///
/// `scales[l]` is a length-scale for Matérn dimensions (larger means less
/// relevant) and a mismatch rate for delta dimensions (smaller means less
/// relevant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub scales: Vec<f64>,
    pub categorical: Vec<bool>,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        kinds: &[ParamKind],
        amplitude: f64,
        scales: Vec<f64>,
    ) -> Self {
        assert_eq!(kinds.len(), scales.len(), "one scale per dimension");
        KernelSpec {
            family,
            amplitude,
            scales,
            categorical: family.categorical_mask(kinds),
        }
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn is_valid(&self) -> bool {
        self.amplitude > 0.0
            && self.amplitude.is_finite()
            && self.scales.iter().all(|s| *s > 0.0 && s.is_finite())
            && self.categorical.len() == self.scales.len()
    }

    /// Prior variance `k(x, x)`.
    pub fn variance(&self) -> f64 {
        self.amplitude * self.amplitude
    }

    /// Per-dimension relevance: 1/length-scale for Matérn dimensions, the
    /// rate itself for delta dimensions.
    pub fn relevance(&self) -> Vec<f64> {
        self.scales
            .iter()
            .zip(&self.categorical)
            .map(|(&s, &cat)| if cat { s } else { 1.0 / s })
            .collect()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim());
        debug_assert_eq!(b.len(), self.dim());
        let mut r2 = 0.0;
        let mut mismatch = 0.0;
        for l in 0..self.scales.len() {
            if self.categorical[l] {
                if a[l] != b[l] {
                    mismatch += self.scales[l];
                }
            } else {
                let d = (a[l] - b[l]) / self.scales[l];
                r2 += d * d;
            }
        }
        self.variance() * (-(r2.sqrt()) - mismatch).exp()
    }
}

/// Evaluates `spec` between two grid points.
pub fn kernel_eval(
    spec: &KernelSpec,
    features: &FeatureMap,
    x1: &ConfigPoint,
    x2: &ConfigPoint,
) -> Result<f64, super::GpError> {
    if x1.dim() != spec.dim() || x2.dim() != spec.dim() || features.dim() != spec.dim() {
        return Err(super::GpError::DimensionMismatch {
            expected: spec.dim(),
            found: x1.dim().max(x2.dim()),
        });
    }
    Ok(spec.eval(&features.encode(x1), &features.encode(x2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParameterDef;

    fn numeric_1d() -> ConfigSpace {
        ConfigSpace::new(vec![ParameterDef::integer("a", vec![0.0, 1.0]).unwrap()]).unwrap()
    }

    #[test]
    fn matern_identity_and_unit_distance() {
        let s = numeric_1d();
        let f = FeatureMap::new(&s);
        let k = KernelSpec::new(KernelFamily::Matern12, f.kinds(), 1.0, vec![1.0]);
        let x0 = ConfigPoint::new(vec![0]);
        let x1 = ConfigPoint::new(vec![1]);
        assert_eq!(kernel_eval(&k, &f, &x0, &x0).unwrap(), 1.0);
        let v = kernel_eval(&k, &f, &x0, &x1).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn categorical_mismatch() {
        let s =
            ConfigSpace::new(vec![ParameterDef::categorical("c", ["u", "v"]).unwrap()]).unwrap();
        let f = FeatureMap::new(&s);
        let k = KernelSpec::new(KernelFamily::Product, f.kinds(), 1.0, vec![2.0]);
        let v = kernel_eval(
            &k,
            &f,
            &ConfigPoint::new(vec![0]),
            &ConfigPoint::new(vec![1]),
        )
        .unwrap();
        assert!((v - 0.135335).abs() < 1e-6);
    }

    #[test]
    fn product_combines_both_parts() {
        let s = ConfigSpace::new(vec![
            ParameterDef::integer("a", vec![0.0, 5.0, 10.0]).unwrap(),
            ParameterDef::categorical("c", ["u", "v"]).unwrap(),
        ])
        .unwrap();
        let f = FeatureMap::new(&s);
        let k = KernelSpec::new(KernelFamily::Product, f.kinds(), 2.0, vec![0.5, 0.3]);
        let v = kernel_eval(
            &k,
            &f,
            &ConfigPoint::new(vec![0, 0]),
            &ConfigPoint::new(vec![1, 1]),
        )
        .unwrap();
        // scaled distance 0.5 / 0.5 = 1, mismatch rate 0.3
        let expected = 4.0 * (-1.0f64).exp() * (-0.3f64).exp();
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let s = numeric_1d();
        let f = FeatureMap::new(&s);
        let k = KernelSpec::new(KernelFamily::Matern12, f.kinds(), 1.0, vec![1.0]);
        assert!(kernel_eval(
            &k,
            &f,
            &ConfigPoint::new(vec![0, 0]),
            &ConfigPoint::new(vec![0])
        )
        .is_err());
    }

    #[test]
    fn standardization_uses_option_range() {
        let s = ConfigSpace::new(vec![
            ParameterDef::integer("a", vec![1.0, 10.0, 100.0]).unwrap()
        ])
        .unwrap();
        let f = FeatureMap::new(&s);
        assert_eq!(f.encode(&ConfigPoint::new(vec![0])), vec![0.0]);
        assert!((f.encode(&ConfigPoint::new(vec![1]))[0] - 9.0 / 99.0).abs() < 1e-15);
        assert_eq!(f.encode(&ConfigPoint::new(vec![2])), vec![1.0]);
    }
}
