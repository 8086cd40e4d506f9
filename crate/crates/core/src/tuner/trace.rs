//! CSV layouts for run traces.
//!
//! Trace files hold only deterministic columns so that equal seeds give
//! byte-identical files; timings go to a separate overhead file.

use super::{Phase, RunTrace};
use crate::space::{ConfigPoint, ConfigSpace};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// One line of a trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub method: String,
    pub seed: u64,
    pub t: usize,
    pub phase: Phase,
    /// Linear index of the point.
    pub index: usize,
    /// Option indices joined by `;`.
    pub point: String,
    pub y: f64,
    pub kappa: Option<f64>,
    pub best: f64,
    pub relearned: bool,
}

impl TraceRow {
    pub fn config_point(&self) -> Result<ConfigPoint, std::num::ParseIntError> {
        self.point
            .split(';')
            .map(str::parse)
            .collect::<Result<Vec<usize>, _>>()
            .map(ConfigPoint)
    }
}

#[derive(Serialize)]
struct OverheadRow<'a> {
    method: &'a str,
    seed: u64,
    t: usize,
    learn_ms: f64,
    select_ms: f64,
    refit_ms: f64,
    overhead_ms: f64,
}

fn join(x: &ConfigPoint) -> String {
    x.0.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

const TRACE_HEADER: [&str; 10] = [
    "method",
    "seed",
    "t",
    "phase",
    "index",
    "point",
    "y",
    "kappa",
    "best",
    "relearned",
];
const OVERHEAD_HEADER: [&str; 7] = [
    "method",
    "seed",
    "t",
    "learn_ms",
    "select_ms",
    "refit_ms",
    "overhead_ms",
];

/// Writer that emits `header` even when no rows follow.
fn headed_writer<W: Write>(out: W, header: &[&str]) -> csv::Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

pub fn write_trace_csv<W: Write>(trace: &RunTrace, space: &ConfigSpace, out: W) -> csv::Result<()> {
    let mut w = headed_writer(out, &TRACE_HEADER)?;
    for r in &trace.records {
        w.serialize(TraceRow {
            method: trace.method.clone(),
            seed: trace.seed,
            t: r.t,
            phase: r.phase,
            index: space.linear_index(&r.point).expect("traced point in space"),
            point: join(&r.point),
            y: r.y,
            kappa: r.kappa,
            best: r.best,
            relearned: r.relearned,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> csv::Result<Vec<TraceRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Timings of the search iterations; design evaluations are omitted.
pub fn write_overhead_csv<W: Write>(trace: &RunTrace, out: W) -> csv::Result<()> {
    let mut w = headed_writer(out, &OVERHEAD_HEADER)?;
    for r in trace.records.iter().filter(|r| r.phase == Phase::Search) {
        w.serialize(OverheadRow {
            method: &trace.method,
            seed: trace.seed,
            t: r.t,
            learn_ms: r.overhead.learn_ms,
            select_ms: r.overhead.select_ms,
            refit_ms: r.overhead.refit_ms,
            overhead_ms: r.overhead.per_iteration_ms(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParameterDef;
    use crate::tuner::Overhead;

    #[test]
    fn round_trip_with_failures() {
        let space = ConfigSpace::new(vec![
            ParameterDef::integer("a", vec![1.0, 2.0, 3.0]).unwrap(),
            ParameterDef::categorical("b", ["x", "y"]).unwrap(),
        ])
        .unwrap();
        let mut trace = RunTrace::new("bo4co", 7);
        trace.push(
            Phase::Design,
            ConfigPoint(vec![2, 1]),
            3.5,
            None,
            false,
            Overhead::default(),
        );
        trace.push(
            Phase::Search,
            ConfigPoint(vec![0, 0]),
            f64::INFINITY,
            Some(2.25),
            true,
            Overhead::default(),
        );
        trace.push(
            Phase::Search,
            ConfigPoint(vec![1, 1]),
            0.1,
            Some(2.5),
            false,
            Overhead::default(),
        );
        let mut buf = Vec::new();
        write_trace_csv(&trace, &space, &mut buf).unwrap();
        let rows = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].index, 5);
        assert_eq!(rows[0].kappa, None);
        assert!(rows[1].y.is_infinite());
        assert_eq!(rows[1].best, 3.5);
        assert_eq!(rows[2].best, 0.1);
        assert_eq!(rows[2].config_point().unwrap(), ConfigPoint(vec![1, 1]));
        assert!(rows[1].relearned);

        let mut empty = Vec::new();
        write_overhead_csv(&RunTrace::new("bo4co", 1), &mut empty).unwrap();
        assert_eq!(
            String::from_utf8(empty).unwrap(),
            "method,seed,t,learn_ms,select_ms,refit_ms,overhead_ms\n"
        );

        let mut buf = Vec::new();
        write_overhead_csv(&trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
