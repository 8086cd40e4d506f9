//! Subcommand implementations.

use crate::config::{read_dataset, Algorithm, ExperimentSpec, SourceSpec};
use crate::{AggregateArgs, CliError, CommonArgs, ScreenArgs};
use autotune_core::analysis::{
    configuration_families, distance_curve, median, rank_subsets, snr, write_aggregate_csv,
    AggregateReport,
};
use autotune_core::benchfn::{
    make_grid_source, CommandSource, MeasureError, PlaybackSource, ResponseSource,
};
use autotune_core::gp::Hyperparams;
use autotune_core::tuner::{
    read_trace_csv, run_baseline, run_bo4co, write_overhead_csv, write_trace_csv, BudgetConfig,
    RunTrace, TunerError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Offset separating the noise stream of a source from the tuner's streams.
const SOURCE_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Contents of `summary.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub methods: Vec<String>,
    pub replications: usize,
    pub seed: u64,
    pub space_size: usize,
    pub parameters: Vec<String>,
    /// Reference value for distance-to-optimum.
    pub optimum: Option<f64>,
    /// `grid`, `dataset` or `observed` (best value seen by any run).
    pub optimum_kind: String,
    pub optimum_point: Option<BTreeMap<String, String>>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub replication: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub exhausted: bool,
    pub best_value: Option<f64>,
    pub best_point: Option<BTreeMap<String, String>>,
    pub hyperparams: Option<Hyperparams>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn tuner_err(e: TunerError) -> CliError {
    match e {
        TunerError::Budget(m) => CliError::Config(m),
        TunerError::Measure(e @ MeasureError::Incomplete { .. }) => CliError::Config(e.to_string()),
        TunerError::Measure(e) => CliError::Measure(e.to_string()),
        e => CliError::Runtime(e.to_string()),
    }
}

fn build_source(
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<Box<dyn ResponseSource + Send>, CliError> {
    let seed = seed.wrapping_add(SOURCE_SEED_OFFSET);
    Ok(match &spec.source {
        SourceSpec::Function {
            function,
            grid,
            noise,
        } => {
            let (_, src) = make_grid_source(*function, grid, *noise, seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            Box::new(src)
        }
        SourceSpec::Dataset { dataset, noise } => Box::new(
            PlaybackSource::new(dataset.clone(), *noise, seed)
                .map_err(|e| CliError::Config(e.to_string()))?,
        ),
        SourceSpec::Command { space, argv } => Box::new(CommandSource::new(
            space.clone(),
            &argv[0],
            argv[1..].to_vec(),
        )),
    })
}

/// Seed of replication `rep`.
fn replication_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}

fn run_one(spec: &ExperimentSpec, algorithm: &Algorithm, rep: usize) -> Result<RunTrace, CliError> {
    let seed = replication_seed(spec.seed, rep);
    let mut source = build_source(spec, seed)?;
    let budget = BudgetConfig {
        seed,
        ..spec.budget
    };
    log::info!("{} replication {rep} (seed {seed})", algorithm.name());
    let trace = match algorithm {
        Algorithm::Bo4co => run_bo4co(&spec.space, source.as_mut(), &budget, &spec.surrogate),
        Algorithm::Baseline(kind) => run_baseline(*kind, &spec.space, source.as_mut(), &budget),
    }
    .map_err(tuner_err)?;
    if trace.best().is_none() {
        return Err(CliError::Measure(format!(
            "{} replication {rep}: no measurement succeeded",
            algorithm.name()
        )));
    }
    Ok(trace)
}

/// Every algorithm for every replication, at most `spec.jobs` at a time.
/// Results are ordered by replication, then by algorithm.
fn run_all(
    spec: &ExperimentSpec,
    algorithms: &[Algorithm],
) -> Result<Vec<(usize, RunTrace)>, CliError> {
    let tasks: Vec<(usize, &Algorithm)> = (0..spec.replications)
        .flat_map(|rep| algorithms.iter().map(move |a| (rep, a)))
        .collect();
    let results: Vec<Mutex<Option<Result<RunTrace, CliError>>>> =
        tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = spec.jobs.min(tasks.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(rep, alg)) = tasks.get(i) else {
                    break;
                };
                let r = run_one(spec, alg, rep);
                let failed = r.is_err();
                *results[i].lock().expect("no poisoned result slot") = Some(r);
                if failed {
                    // stop handing out work; running tasks finish normally
                    next.store(tasks.len(), Ordering::Relaxed);
                }
            });
        }
    });
    let mut out = Vec::with_capacity(tasks.len());
    for ((rep, _), slot) in tasks.iter().zip(results) {
        match slot.into_inner().expect("no poisoned result slot") {
            Some(r) => out.push((*rep, r?)),
            None => continue,
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn trace_path(out: &Path, method: &str, rep: usize) -> PathBuf {
    out.join("traces").join(format!("{method}_rep{rep}.csv"))
}

fn overhead_path(out: &Path, method: &str, rep: usize) -> PathBuf {
    out.join("overhead").join(format!("{method}_rep{rep}.csv"))
}

fn labelled(
    spec: &ExperimentSpec,
    x: &autotune_core::space::ConfigPoint,
) -> BTreeMap<String, String> {
    spec.space.describe(x).into_iter().collect()
}

/// Aggregate curves per method, in `methods` order.
fn aggregate_reports(
    methods: &[String],
    curves: &BTreeMap<String, Vec<Vec<f64>>>,
    optimum: f64,
) -> Vec<AggregateReport> {
    methods
        .iter()
        .map(|m| distance_curve(m, curves.get(m).map_or(&[][..], Vec::as_slice), optimum))
        .collect()
}

fn write_aggregate(out: &Path, reports: &[AggregateReport]) -> Result<(), CliError> {
    let path = out.join("aggregate.csv");
    let mut w = create(&path)?;
    write_aggregate_csv(reports, &mut w).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))
}

pub fn tune(args: &CommonArgs) -> Result<(), CliError> {
    let spec = ExperimentSpec::resolve(args)?;
    let runs = run_all(&spec, &spec.algorithms)?;

    let truth = build_source(&spec, spec.seed)?.ground_truth();
    let (optimum, optimum_kind, optimum_point) = match (&truth, &spec.source) {
        (Some(g), SourceSpec::Function { .. }) => {
            (g.value, "grid", Some(labelled(&spec, &g.point)))
        }
        (Some(g), _) => (g.value, "dataset", Some(labelled(&spec, &g.point))),
        (None, _) => {
            let best = runs
                .iter()
                .filter_map(|(_, t)| t.best().map(|(_, y)| y))
                .fold(f64::INFINITY, f64::min);
            (best, "observed", None)
        }
    };

    let methods: Vec<String> = spec
        .algorithms
        .iter()
        .map(|a| a.name().to_string())
        .collect();
    let mut curves: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut summaries = Vec::new();
    for (rep, trace) in &runs {
        curves
            .entry(trace.method.clone())
            .or_default()
            .push(trace.best_curve());
        let best = trace.best();
        summaries.push(RunSummary {
            method: trace.method.clone(),
            replication: *rep,
            seed: trace.seed,
            evaluations: trace.len(),
            exhausted: trace.exhausted,
            best_value: best.map(|(_, y)| y),
            best_point: best.map(|(x, _)| labelled(&spec, x)),
            hyperparams: trace.hyperparams.clone(),
        });
    }
    let reports = aggregate_reports(&methods, &curves, optimum);

    println!(
        "space: {} configurations, {} parameters; optimum {optimum} ({optimum_kind})",
        spec.space.size(),
        spec.space.dim()
    );
    println!(
        "{:<8} {:>5} {:>14} {:>14} {:>14}",
        "method", "runs", "best", "median best", "median dist"
    );
    for r in &reports {
        let finals: Vec<f64> = summaries
            .iter()
            .filter(|s| s.method == r.method)
            .filter_map(|s| s.best_value)
            .collect();
        let best = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let dist = r.curve.last().map_or(f64::NAN, |p| p.median);
        println!(
            "{:<8} {:>5} {:>14.6} {:>14.6} {:>14.6}",
            r.method,
            r.replications,
            best,
            median(&finals),
            dist
        );
    }

    if let Some(out) = &spec.out {
        for (rep, trace) in &runs {
            let path = trace_path(out, &trace.method, *rep);
            let mut w = create(&path)?;
            write_trace_csv(trace, &spec.space, &mut w).map_err(|e| io_err(&path, e))?;
            w.flush().map_err(|e| io_err(&path, e))?;
            if trace.method == "bo4co" {
                let path = overhead_path(out, &trace.method, *rep);
                let mut w = create(&path)?;
                write_overhead_csv(trace, &mut w).map_err(|e| io_err(&path, e))?;
                w.flush().map_err(|e| io_err(&path, e))?;
            }
        }
        write_aggregate(out, &reports)?;
        let summary = Summary {
            methods,
            replications: spec.replications,
            seed: spec.seed,
            space_size: spec.space.size(),
            parameters: spec.space.params().iter().map(|p| p.name.clone()).collect(),
            optimum: optimum.is_finite().then_some(optimum),
            optimum_kind: optimum_kind.to_string(),
            optimum_point,
            runs: summaries,
        };
        let path = out.join("summary.json");
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| io_err(&path, e))?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&path, e))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn aggregate(args: &AggregateArgs) -> Result<(), CliError> {
    let path = args.out.join("summary.json");
    let file =
        File::open(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let summary: Summary = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let optimum = summary
        .optimum
        .ok_or_else(|| CliError::Config(format!("{}: no optimum recorded", path.display())))?;
    let mut curves: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for method in &summary.methods {
        for rep in 0..summary.replications {
            let path = trace_path(&args.out, method, rep);
            let file = File::open(&path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let rows = read_trace_csv(file)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            curves
                .entry(method.clone())
                .or_default()
                .push(rows.iter().map(|r| r.best).collect());
        }
    }
    write_aggregate(
        &args.out,
        &aggregate_reports(&summary.methods, &curves, optimum),
    )?;
    println!("wrote {}", args.out.join("aggregate.csv").display());
    Ok(())
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

pub fn overhead(args: &CommonArgs) -> Result<(), CliError> {
    let spec = ExperimentSpec::resolve(args)?;
    let runs = run_all(&spec, &[Algorithm::Bo4co])?;

    // per-iteration medians across replications
    let mut by_t: BTreeMap<usize, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (_, trace) in &runs {
        for r in trace
            .records
            .iter()
            .filter(|r| r.phase == autotune_core::tuner::Phase::Search)
        {
            by_t.entry(r.t).or_default().push((
                r.overhead.refit_ms,
                r.overhead.select_ms,
                r.overhead.learn_ms,
            ));
        }
    }
    if by_t.is_empty() {
        println!("no search iterations: the initial design used the whole budget");
    } else {
        println!(
            "{:>5} {:>12} {:>12} {:>14} {:>12}",
            "t", "refit_ms", "select_ms", "overhead_ms", "learn_ms"
        );
        let mut ts = Vec::new();
        let mut totals = Vec::new();
        for (t, v) in &by_t {
            let refit = median(&v.iter().map(|s| s.0).collect::<Vec<_>>());
            let select = median(&v.iter().map(|s| s.1).collect::<Vec<_>>());
            let total = median(&v.iter().map(|s| s.0 + s.1).collect::<Vec<_>>());
            let learn = median(&v.iter().map(|s| s.2).collect::<Vec<_>>());
            println!("{t:>5} {refit:>12.3} {select:>12.3} {total:>14.3} {learn:>12.3}");
            ts.push(*t as f64);
            totals.push(total);
        }
        let max = totals.iter().copied().fold(0.0, f64::max);
        println!(
            "max median overhead {max:.3} ms; trend {:+.5} ms per iteration",
            slope(&ts, &totals)
        );
    }
    if let Some(out) = &spec.out {
        for (rep, trace) in &runs {
            let path = overhead_path(out, &trace.method, *rep);
            let mut w = create(&path)?;
            write_overhead_csv(trace, &mut w).map_err(|e| io_err(&path, e))?;
            w.flush().map_err(|e| io_err(&path, e))?;
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn screen(args: &ScreenArgs) -> Result<(), CliError> {
    let dataset = read_dataset(&args.dataset, args.space.as_deref())?;
    let space = dataset.space();
    let max = args.max_subset.unwrap_or_else(|| space.dim().min(3));
    let ranking = rank_subsets(&dataset, max).map_err(|e| CliError::Config(e.to_string()))?;
    let rows = snr(&configuration_families(&dataset), args.confidence)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let names: Vec<&str> = space.params().iter().map(|p| p.name.as_str()).collect();
    let subset_label = |s: &[usize]| s.iter().map(|&i| names[i]).collect::<Vec<_>>().join("+");

    println!("{} subsets of at most {max} parameters", ranking.len());
    println!("{:>4} {:>8}  subset", "rank", "merit");
    for (i, r) in ranking.iter().take(args.top).enumerate() {
        println!("{:>4} {:>8.4}  {}", i + 1, r.merit, subset_label(&r.subset));
    }
    if rows.is_empty() {
        println!("no configuration has replicated measurements; SNR table omitted");
    } else {
        println!(
            "{:>10} {:>12} {:>10} {:>4}  configuration",
            "snr", "mean", "sd", "n"
        );
        for r in &rows {
            println!(
                "{:>10.3} {:>12.4} {:>10.4} {:>4}  {}",
                r.ratio, r.mean, r.sd, r.samples, r.family
            );
        }
    }

    if let Some(out) = &args.out {
        let path = out.join("merit.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record([
            "rank",
            "subset",
            "size",
            "merit",
            "mean_response_corr",
            "mean_inter_corr",
        ])
        .map_err(|e| io_err(&path, e))?;
        for (i, r) in ranking.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                subset_label(&r.subset),
                r.subset.len().to_string(),
                r.merit.to_string(),
                r.mean_response_corr.to_string(),
                r.mean_inter_corr.to_string(),
            ])
            .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;

        let path = out.join("snr.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record([
            "configuration",
            "samples",
            "mean",
            "sd",
            "snr",
            "mean_lo",
            "mean_hi",
            "sd_lo",
            "sd_hi",
        ])
        .map_err(|e| io_err(&path, e))?;
        for r in &rows {
            w.write_record([
                r.family.clone(),
                r.samples.to_string(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.ratio.to_string(),
                r.mean_ci.0.to_string(),
                r.mean_ci.1.to_string(),
                r.sd_ci.0.to_string(),
                r.sd_ci.1.to_string(),
            ])
            .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        assert!((slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-12);
        assert_eq!(slope(&[1.0], &[5.0]), 0.0);
    }

    #[test]
    fn replication_seeds_are_offsets() {
        assert_eq!(replication_seed(10, 3), 13);
        assert_eq!(replication_seed(u64::MAX, 1), 0);
    }
}
