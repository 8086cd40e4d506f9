use super::{ConfigPoint, ConfigSpace, ParameterDef, SpaceError};
use std::collections::BTreeMap;
use std::io::Read;

/// Measured responses over a configuration space.
///
/// Each configuration holds the arithmetic mean of its measurements plus the
/// raw samples, which are kept for noise estimation.
#[derive(Clone, Debug)]
pub struct TabularDataset {
    space: ConfigSpace,
    samples: BTreeMap<usize, Vec<f64>>,
    means: BTreeMap<usize, f64>,
}

impl TabularDataset {
    pub fn new(space: ConfigSpace) -> Self {
        TabularDataset {
            space,
            samples: BTreeMap::new(),
            means: BTreeMap::new(),
        }
    }

    pub fn add_sample(&mut self, x: &ConfigPoint, value: f64) -> Result<(), SpaceError> {
        let idx = self.space.linear_index(x)?;
        let samples = self.samples.entry(idx).or_default();
        samples.push(value);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        self.means.insert(idx, mean);
        Ok(())
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    /// Number of distinct configurations measured.
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn is_total(&self) -> bool {
        self.means.len() == self.space.size()
    }

    pub fn value(&self, x: &ConfigPoint) -> Option<f64> {
        let idx = self.space.linear_index(x).ok()?;
        self.means.get(&idx).copied()
    }

    pub fn value_at(&self, index: usize) -> Option<f64> {
        self.means.get(&index).copied()
    }

    pub fn samples(&self, x: &ConfigPoint) -> Option<&[f64]> {
        let idx = self.space.linear_index(x).ok()?;
        self.samples.get(&idx).map(Vec::as_slice)
    }

    /// Aggregate rows in linear-index order.
    pub fn rows(&self) -> impl Iterator<Item = (ConfigPoint, f64)> + '_ {
        self.means
            .iter()
            .map(|(&i, &v)| (self.space.point_at(i).expect("stored index is valid"), v))
    }

    /// Raw sample lists in linear-index order.
    pub fn replicates(&self) -> impl Iterator<Item = (ConfigPoint, &[f64])> + '_ {
        self.samples.iter().map(|(&i, v)| {
            (
                self.space.point_at(i).expect("stored index is valid"),
                v.as_slice(),
            )
        })
    }

    /// Smallest aggregate value and where it occurs (first in index order on ties).
    pub fn minimum(&self) -> Option<(ConfigPoint, f64)> {
        let (idx, v) =
            self.means
                .iter()
                .fold(None::<(usize, f64)>, |best, (&i, &v)| match best {
                    Some((_, bv)) if bv <= v => best,
                    _ => Some((i, v)),
                })?;
        Some((self.space.point_at(idx).ok()?, v))
    }

    /// Mean of the per-configuration sample variances over configurations
    /// with at least two samples.
    pub fn pooled_noise_variance(&self) -> Option<f64> {
        let vars: Vec<f64> = self
            .samples
            .values()
            .filter(|s| s.len() >= 2)
            .map(|s| sample_variance(s))
            .collect();
        if vars.is_empty() {
            None
        } else {
            Some(vars.iter().sum::<f64>() / vars.len() as f64)
        }
    }
}

pub(crate) fn sample_variance(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Derives a space from a dataset CSV when no declaration is given: columns
/// whose values all parse as numbers become integer grids over their sorted
/// distinct values, other columns become categorical in first-seen order.
pub fn infer_space<R: Read>(source: R) -> Result<ConfigSpace, SpaceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| SpaceError::Parse {
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.len() < 2 || &header[header.len() - 1] != "latency" {
        return Err(SpaceError::Parse {
            row: 1,
            msg: "header must list parameters followed by `latency`".into(),
        });
    }
    let d = header.len() - 1;
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); d];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SpaceError::Parse {
            row: i + 2,
            msg: e.to_string(),
        })?;
        for (c, col) in columns.iter_mut().enumerate() {
            let v = record.get(c).unwrap_or("").to_string();
            if !col.contains(&v) {
                col.push(v);
            }
        }
    }
    if columns[0].is_empty() {
        return Err(SpaceError::Dataset("no data rows".into()));
    }
    let params = header
        .iter()
        .take(d)
        .zip(columns)
        .map(|(name, values)| {
            let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse().ok()).collect();
            match numeric {
                Some(mut nums) => {
                    nums.sort_by(f64::total_cmp);
                    nums.dedup();
                    ParameterDef::integer(name, nums)
                }
                None => ParameterDef::categorical(name, values),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    ConfigSpace::new(params)
}

/// Reads a dataset CSV: a header naming every parameter of `space` (any
/// order) followed by a final `latency` column, then one measurement per row.
///
/// Row numbers in errors are 1-based file lines, the header being line 1.
pub fn load_dataset<R: Read>(source: R, space: &ConfigSpace) -> Result<TabularDataset, SpaceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| SpaceError::Parse {
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.is_empty() || header.len() < 2 {
        return Err(SpaceError::Parse {
            row: 1,
            msg: "header must list parameters followed by `latency`".into(),
        });
    }
    let last = header.len() - 1;
    if &header[last] != "latency" {
        return Err(SpaceError::Parse {
            row: 1,
            msg: format!("last column must be `latency`, found `{}`", &header[last]),
        });
    }
    let mut column_param = Vec::with_capacity(last);
    for name in header.iter().take(last) {
        let idx = space.param_index(name).ok_or_else(|| SpaceError::Parse {
            row: 1,
            msg: format!("unknown parameter column `{name}`"),
        })?;
        if column_param.contains(&idx) {
            return Err(SpaceError::Parse {
                row: 1,
                msg: format!("parameter column `{name}` repeated"),
            });
        }
        column_param.push(idx);
    }
    if column_param.len() != space.dim() {
        let missing: Vec<&str> = space
            .params()
            .iter()
            .enumerate()
            .filter(|(i, _)| !column_param.contains(i))
            .map(|(_, p)| p.name.as_str())
            .collect();
        return Err(SpaceError::Parse {
            row: 1,
            msg: format!("missing parameter columns: {}", missing.join(", ")),
        });
    }

    let mut data = TabularDataset::new(space.clone());
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| SpaceError::Parse {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(SpaceError::Parse {
                row,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut coords = vec![0usize; space.dim()];
        for (col, &p) in column_param.iter().enumerate() {
            let param = &space.params()[p];
            coords[p] = param
                .find_option(&record[col])
                .ok_or_else(|| SpaceError::Parse {
                    row,
                    msg: format!(
                        "value `{}` is not an option of `{}`",
                        &record[col], param.name
                    ),
                })?;
        }
        let latency: f64 = record[last].parse().map_err(|_| SpaceError::Parse {
            row,
            msg: format!("latency `{}` is not a number", &record[last]),
        })?;
        if !latency.is_finite() {
            return Err(SpaceError::Parse {
                row,
                msg: "latency must be finite".into(),
            });
        }
        data.add_sample(&ConfigPoint(coords), latency)?;
    }
    Ok(data)
}
