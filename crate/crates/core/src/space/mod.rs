//! Discrete configuration spaces.
//!
//! A [`ConfigSpace`] is the Cartesian product of a finite, ordered list of
//! options per parameter. Points are stored as per-parameter option indices;
//! the flat linear index uses row-major order (last parameter varies fastest).

pub(crate) mod dataset;

pub use dataset::{infer_space, load_dataset, TabularDataset};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("parameter `{0}` has no options")]
    EmptyDomain(String),
    #[error("parameter `{name}` lists option `{option}` more than once")]
    DuplicateOption { name: String, option: String },
    #[error("integer-grid parameter `{0}` options must be strictly increasing")]
    NotIncreasing(String),
    #[error("parameter name `{0}` is used twice")]
    DuplicateName(String),
    #[error("space has no parameters")]
    NoParameters,
    #[error("space size overflows")]
    TooLarge,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("linear index {index} out of range for space of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("space declaration: {0}")]
    Declaration(String),
    #[error("dataset row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Admissible values of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Ordered numeric levels (need not be evenly spaced).
    IntegerGrid(Vec<f64>),
    /// Unordered labels.
    Categorical(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    IntegerGrid,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParam", into = "RawParam")]
pub struct ParameterDef {
    pub name: String,
    pub domain: Domain,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum OptionValue {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawParam {
    name: String,
    kind: ParamKind,
    options: Vec<OptionValue>,
}

impl TryFrom<RawParam> for ParameterDef {
    type Error = SpaceError;

    fn try_from(raw: RawParam) -> Result<Self, SpaceError> {
        match raw.kind {
            ParamKind::IntegerGrid => {
                let values = raw
                    .options
                    .into_iter()
                    .map(|o| match o {
                        OptionValue::Number(v) => Ok(v),
                        OptionValue::Text(t) => t.trim().parse::<f64>().map_err(|_| {
                            SpaceError::Declaration(format!(
                                "integer-grid parameter `{}` has non-numeric option `{t}`",
                                raw.name
                            ))
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ParameterDef::integer(raw.name, values)
            }
            ParamKind::Categorical => {
                let labels: Vec<String> = raw
                    .options
                    .into_iter()
                    .map(|o| match o {
                        OptionValue::Number(v) => v.to_string(),
                        OptionValue::Text(t) => t,
                    })
                    .collect();
                ParameterDef::categorical(raw.name, labels)
            }
        }
    }
}

impl From<ParameterDef> for RawParam {
    fn from(p: ParameterDef) -> Self {
        let kind = p.kind();
        let options = match p.domain {
            Domain::IntegerGrid(v) => v.into_iter().map(OptionValue::Number).collect(),
            Domain::Categorical(v) => v.into_iter().map(OptionValue::Text).collect(),
        };
        RawParam {
            name: p.name,
            kind,
            options,
        }
    }
}

impl ParameterDef {
    pub fn integer(name: impl Into<String>, options: Vec<f64>) -> Result<Self, SpaceError> {
        let def = ParameterDef {
            name: name.into(),
            domain: Domain::IntegerGrid(options),
        };
        def.validate()?;
        Ok(def)
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self, SpaceError> {
        let def = ParameterDef {
            name: name.into(),
            domain: Domain::Categorical(labels.into_iter().map(Into::into).collect()),
        };
        def.validate()?;
        Ok(def)
    }

    fn validate(&self) -> Result<(), SpaceError> {
        if self.is_empty() {
            return Err(SpaceError::EmptyDomain(self.name.clone()));
        }
        match &self.domain {
            Domain::IntegerGrid(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(SpaceError::Declaration(format!(
                        "parameter `{}` has a non-finite option",
                        self.name
                    )));
                }
                for w in values.windows(2) {
                    if w[0] == w[1] {
                        return Err(SpaceError::DuplicateOption {
                            name: self.name.clone(),
                            option: w[0].to_string(),
                        });
                    }
                    if w[0] > w[1] {
                        return Err(SpaceError::NotIncreasing(self.name.clone()));
                    }
                }
            }
            Domain::Categorical(labels) => {
                let mut seen = HashSet::new();
                for l in labels {
                    if !seen.insert(l.as_str()) {
                        return Err(SpaceError::DuplicateOption {
                            name: self.name.clone(),
                            option: l.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ParamKind {
        match self.domain {
            Domain::IntegerGrid(_) => ParamKind::IntegerGrid,
            Domain::Categorical(_) => ParamKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.domain {
            Domain::IntegerGrid(v) => v.len(),
            Domain::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric value of option `idx`; categorical options map to their index.
    pub fn numeric_value(&self, idx: usize) -> f64 {
        match &self.domain {
            Domain::IntegerGrid(v) => v[idx],
            Domain::Categorical(_) => idx as f64,
        }
    }

    /// Textual form of option `idx`, as written in datasets and reports.
    pub fn label(&self, idx: usize) -> String {
        match &self.domain {
            Domain::IntegerGrid(v) => v[idx].to_string(),
            Domain::Categorical(v) => v[idx].clone(),
        }
    }

    /// Finds the option matching `text` verbatim (numerically for integer grids).
    pub fn find_option(&self, text: &str) -> Option<usize> {
        let text = text.trim();
        match &self.domain {
            Domain::IntegerGrid(v) => {
                let x: f64 = text.parse().ok()?;
                v.iter().position(|&o| o == x)
            }
            Domain::Categorical(v) => v.iter().position(|o| o == text),
        }
    }
}

/// A point of the grid as per-parameter option indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigPoint(pub Vec<usize>);

impl ConfigPoint {
    pub fn new(coords: Vec<usize>) -> Self {
        ConfigPoint(coords)
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for ConfigPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDeclaration", into = "SpaceDeclaration")]
pub struct ConfigSpace {
    params: Vec<ParameterDef>,
    strides: Vec<usize>,
    size: usize,
}

impl ConfigSpace {
    pub fn new(params: Vec<ParameterDef>) -> Result<Self, SpaceError> {
        if params.is_empty() {
            return Err(SpaceError::NoParameters);
        }
        let mut names = HashSet::new();
        for p in &params {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        let mut strides = vec![1usize; params.len()];
        let mut size = 1usize;
        for (i, p) in params.iter().enumerate().rev() {
            strides[i] = size;
            size = size.checked_mul(p.len()).ok_or(SpaceError::TooLarge)?;
        }
        Ok(ConfigSpace {
            params,
            strides,
            size,
        })
    }

    /// Parses a TOML space declaration (see [`SpaceDeclaration`]).
    pub fn from_toml(text: &str) -> Result<Self, SpaceError> {
        let decl: SpaceDeclaration =
            toml::from_str(text).map_err(|e| SpaceError::Declaration(e.to_string()))?;
        decl.try_into()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&SpaceDeclaration::from(self.clone())).expect("space serializes")
    }

    pub fn params(&self) -> &[ParameterDef] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn validate(&self, x: &ConfigPoint) -> Result<(), SpaceError> {
        if x.dim() != self.dim() {
            return Err(SpaceError::InvalidPoint(format!(
                "point {x} has {} coordinates, space has {}",
                x.dim(),
                self.dim()
            )));
        }
        for (c, p) in x.0.iter().zip(&self.params) {
            if *c >= p.len() {
                return Err(SpaceError::InvalidPoint(format!(
                    "coordinate {c} of `{}` exceeds {} options",
                    p.name,
                    p.len()
                )));
            }
        }
        Ok(())
    }

    pub fn linear_index(&self, x: &ConfigPoint) -> Result<usize, SpaceError> {
        self.validate(x)?;
        Ok(self.linear_index_unchecked(x))
    }

    pub(crate) fn linear_index_unchecked(&self, x: &ConfigPoint) -> usize {
        x.0.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn point_at(&self, index: usize) -> Result<ConfigPoint, SpaceError> {
        if index >= self.size {
            return Err(SpaceError::IndexOutOfRange {
                index,
                size: self.size,
            });
        }
        let mut rest = index;
        let coords = self
            .strides
            .iter()
            .map(|s| {
                let c = rest / s;
                rest %= s;
                c
            })
            .collect();
        Ok(ConfigPoint(coords))
    }

    /// All points in linear-index order.
    pub fn points(&self) -> impl Iterator<Item = ConfigPoint> + '_ {
        (0..self.size).map(move |i| self.point_at(i).expect("index in range"))
    }

    /// Points within index distance `radius` of `x`, excluding `x`.
    ///
    /// Integer grids use |Δindex| per dimension; categorical dimensions
    /// count any differing label as distance 1. Results are clipped to the
    /// domain and returned in linear-index order.
    pub fn neighborhood(
        &self,
        x: &ConfigPoint,
        radius: usize,
    ) -> Result<Vec<ConfigPoint>, SpaceError> {
        self.validate(x)?;
        if radius == 0 {
            return Ok(Vec::new());
        }
        let ranges: Vec<Vec<usize>> = self
            .params
            .iter()
            .zip(&x.0)
            .map(|(p, &c)| match p.kind() {
                ParamKind::IntegerGrid => {
                    let lo = c.saturating_sub(radius);
                    let hi = (c + radius).min(p.len() - 1);
                    (lo..=hi).collect()
                }
                ParamKind::Categorical => (0..p.len()).collect(),
            })
            .collect();

        let mut out = Vec::new();
        let mut cursor = vec![0usize; ranges.len()];
        loop {
            let coords: Vec<usize> = cursor.iter().zip(&ranges).map(|(&i, r)| r[i]).collect();
            if coords != x.0 {
                out.push(ConfigPoint(coords));
            }
            // odometer increment, last dimension fastest
            let mut d = ranges.len();
            loop {
                if d == 0 {
                    return Ok(out);
                }
                d -= 1;
                cursor[d] += 1;
                if cursor[d] < ranges[d].len() {
                    break;
                }
                cursor[d] = 0;
            }
        }
    }

    /// Numeric value of each coordinate (categorical: option index).
    pub fn values(&self, x: &ConfigPoint) -> Vec<f64> {
        x.0.iter()
            .zip(&self.params)
            .map(|(&c, p)| p.numeric_value(c))
            .collect()
    }

    /// Human-readable `name=value` pairs.
    pub fn describe(&self, x: &ConfigPoint) -> Vec<(String, String)> {
        x.0.iter()
            .zip(&self.params)
            .map(|(&c, p)| (p.name.clone(), p.label(c)))
            .collect()
    }
}

/// Membership over the grid by linear index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitedSet {
    flags: Vec<bool>,
    count: usize,
}

impl VisitedSet {
    pub fn new(space: &ConfigSpace) -> Self {
        VisitedSet {
            flags: vec![false; space.size()],
            count: 0,
        }
    }

    /// Returns `true` if the index was not yet present.
    pub fn insert_index(&mut self, index: usize) -> bool {
        let fresh = !self.flags[index];
        if fresh {
            self.flags[index] = true;
            self.count += 1;
        }
        fresh
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.flags[index]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.flags.len()
    }
}

/// On-disk space declaration.
///
/// ```toml
/// [[param]]
/// name = "max_spout"
/// kind = "integer-grid"
/// options = [1, 10, 100, 1000]
///
/// [[param]]
/// name = "heap"
/// kind = "categorical"
/// options = ["-Xmx512m", "-Xmx1024m"]
///
/// # optional, informational only
/// interacting = ["max_spout"]
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceDeclaration {
    #[serde(rename = "param")]
    pub params: Vec<ParameterDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interacting: Vec<String>,
}

impl TryFrom<SpaceDeclaration> for ConfigSpace {
    type Error = SpaceError;

    fn try_from(decl: SpaceDeclaration) -> Result<Self, SpaceError> {
        let space = ConfigSpace::new(decl.params)?;
        for name in &decl.interacting {
            if space.param_index(name).is_none() {
                return Err(SpaceError::Declaration(format!(
                    "interacting parameter `{name}` is not declared"
                )));
            }
        }
        Ok(space)
    }
}

impl From<ConfigSpace> for SpaceDeclaration {
    fn from(space: ConfigSpace) -> Self {
        SpaceDeclaration {
            params: space.params,
            interacting: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(sizes: &[usize]) -> ConfigSpace {
        let params = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                ParameterDef::integer(format!("p{i}"), (0..n).map(|v| v as f64).collect()).unwrap()
            })
            .collect();
        ConfigSpace::new(params).unwrap()
    }

    #[test]
    fn linear_index_corners() {
        let s = grid(&[2, 3]);
        assert_eq!(s.linear_index(&ConfigPoint::new(vec![0, 0])).unwrap(), 0);
        assert_eq!(s.linear_index(&ConfigPoint::new(vec![1, 2])).unwrap(), 5);
        assert!(matches!(
            s.linear_index(&ConfigPoint::new(vec![2, 0])),
            Err(SpaceError::InvalidPoint(_))
        ));
        assert!(s.point_at(6).is_err());
    }

    #[test]
    fn round_trip_exhaustive() {
        let s = grid(&[3, 4, 5]);
        let mut seen = HashSet::new();
        for a in 0..3 {
            for b in 0..4 {
                for c in 0..5 {
                    let x = ConfigPoint::new(vec![a, b, c]);
                    let idx = s.linear_index(&x).unwrap();
                    assert!(idx < s.size());
                    assert!(seen.insert(idx));
                    assert_eq!(s.point_at(idx).unwrap(), x);
                }
            }
        }
        assert_eq!(seen.len(), 60);
    }

    #[test]
    fn neighborhood_interior_and_boundary() {
        let s = grid(&[5]);
        let n = s.neighborhood(&ConfigPoint::new(vec![2]), 1).unwrap();
        assert_eq!(
            n,
            vec![ConfigPoint::new(vec![1]), ConfigPoint::new(vec![3])]
        );

        let s = grid(&[3]);
        let n = s.neighborhood(&ConfigPoint::new(vec![0]), 1).unwrap();
        assert_eq!(n, vec![ConfigPoint::new(vec![1])]);
    }

    #[test]
    fn neighborhood_center_of_3x3() {
        let s = grid(&[3, 3]);
        let center = ConfigPoint::new(vec![1, 1]);
        let n = s.neighborhood(&center, 1).unwrap();
        let brute: Vec<_> = s
            .points()
            .filter(|p| p != &center && p.0.iter().zip(&center.0).all(|(a, b)| a.abs_diff(*b) <= 1))
            .collect();
        assert_eq!(n.len(), 8);
        assert_eq!(n, brute);
    }

    #[test]
    fn categorical_neighborhood_is_hamming() {
        let s = ConfigSpace::new(vec![
            ParameterDef::categorical("c", ["a", "b", "c", "d"]).unwrap(),
            ParameterDef::integer("n", vec![1.0, 2.0, 4.0]).unwrap(),
        ])
        .unwrap();
        let x = ConfigPoint::new(vec![0, 0]);
        let n = s.neighborhood(&x, 1).unwrap();
        // 4 labels x 2 levels, minus the point itself
        assert_eq!(n.len(), 7);
    }

    #[test]
    fn invalid_definitions() {
        assert!(matches!(
            ParameterDef::integer("a", vec![]),
            Err(SpaceError::EmptyDomain(_))
        ));
        assert!(matches!(
            ParameterDef::integer("a", vec![1.0, 1.0]),
            Err(SpaceError::DuplicateOption { .. })
        ));
        assert!(matches!(
            ParameterDef::integer("a", vec![2.0, 1.0]),
            Err(SpaceError::NotIncreasing(_))
        ));
        assert!(matches!(
            ParameterDef::categorical("a", ["x", "x"]),
            Err(SpaceError::DuplicateOption { .. })
        ));
        let p = ParameterDef::integer("a", vec![1.0]).unwrap();
        assert!(matches!(
            ConfigSpace::new(vec![p.clone(), p]),
            Err(SpaceError::DuplicateName(_))
        ));
    }

    #[test]
    fn declaration_round_trip() {
        let text = r#"
            interacting = ["max_spout"]

            [[param]]
            name = "max_spout"
            kind = "integer-grid"
            options = [1, 10, 100]

            [[param]]
            name = "heap"
            kind = "categorical"
            options = ["-Xmx512m", "-Xmx1024m"]
        "#;
        let s = ConfigSpace::from_toml(text).unwrap();
        assert_eq!(s.size(), 6);
        assert_eq!(s.params()[1].kind(), ParamKind::Categorical);
        let again = ConfigSpace::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again, s);

        let bad = text.replace("interacting = [\"max_spout\"]", "interacting = [\"nope\"]");
        assert!(ConfigSpace::from_toml(&bad).is_err());
    }

    fn arb_space() -> impl Strategy<Value = ConfigSpace> {
        prop::collection::vec(1usize..6, 1..4).prop_map(|sizes| grid(&sizes))
    }

    proptest! {
        #[test]
        fn index_round_trip(s in arb_space(), seed in any::<u64>()) {
            let idx = (seed as usize) % s.size();
            let x = s.point_at(idx).unwrap();
            prop_assert_eq!(s.linear_index(&x).unwrap(), idx);
        }

        #[test]
        fn neighborhood_symmetric_and_bounded(s in arb_space(), a in any::<u64>(), r in 1usize..3) {
            let x = s.point_at((a as usize) % s.size()).unwrap();
            let nx = s.neighborhood(&x, r).unwrap();
            let bound = (2 * r + 1).pow(s.dim() as u32) - 1;
            prop_assert!(nx.len() <= bound);
            for y in &nx {
                let ny = s.neighborhood(y, r).unwrap();
                prop_assert!(ny.contains(&x));
            }
        }
    }
}
