//! Experiment description: TOML file merged with command-line flags.

use crate::{CliError, CommonArgs};
use autotune_core::acquisition::{Criterion, KappaSchedule};
use autotune_core::benchfn::{BenchFunction, PlaybackNoise};
use autotune_core::gp::{KernelFamily, MeanForm, NoiseMode};
use autotune_core::space::{infer_space, load_dataset, ConfigSpace, TabularDataset};
use autotune_core::tuner::{BaselineKind, BudgetConfig, SurrogateConfig};
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

/// On-disk experiment file. Every key is optional; flags take precedence.
///
/// ```toml
/// seed = 1
/// replications = 30
/// jobs = 1
/// out = "runs/branin"
/// algorithms = ["bo4co", "random"]
///
/// [source]
/// function = "branin"          # or: dataset = "wc.csv", space = "wc.toml"
/// grid = [51, 51]              #     command = ["./measure.sh"], space = "..."
/// noise = 0.0
/// playback_noise = "off"       # "off", "replicates" or a standard deviation
///
/// [budget]
/// max_evals = 100
/// initial = 9
/// learn_every = 10
/// restarts = 3
///
/// [surrogate]
/// kernel = "matern"            # matern, categorical, product
/// mean = "linear"              # const, linear
/// kappa = "adaptive:0.1,2"     # or "const:2.0"
/// criterion = "lcb"            # lcb, ignore-mean
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub algorithms: Option<Vec<String>>,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub surrogate: SurrogateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub function: Option<String>,
    pub grid: Option<Vec<usize>>,
    pub noise: Option<f64>,
    pub dataset: Option<PathBuf>,
    pub space: Option<PathBuf>,
    pub command: Option<Vec<String>>,
    pub playback_noise: Option<toml::Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub max_evals: Option<usize>,
    pub initial: Option<usize>,
    pub learn_every: Option<usize>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    pub kernel: Option<String>,
    pub mean: Option<String>,
    pub kappa: Option<String>,
    pub criterion: Option<String>,
}

#[derive(Clone, Debug)]
pub enum SourceSpec {
    Function {
        function: BenchFunction,
        grid: Vec<usize>,
        noise: f64,
    },
    Dataset {
        dataset: TabularDataset,
        noise: PlaybackNoise,
    },
    Command {
        space: ConfigSpace,
        argv: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Bo4co,
    Baseline(BaselineKind),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bo4co => "bo4co",
            Algorithm::Baseline(k) => k.name(),
        }
    }
}

/// Fully resolved experiment.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub space: ConfigSpace,
    pub source: SourceSpec,
    pub algorithms: Vec<Algorithm>,
    pub budget: BudgetConfig,
    pub surrogate: SurrogateConfig,
    pub replications: usize,
    pub jobs: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn resolve(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

pub fn read_space(path: &Path) -> Result<ConfigSpace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    ConfigSpace::from_toml(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Loads a dataset against `space`, or against a space inferred from the
/// CSV itself when none is given.
pub fn read_dataset(path: &Path, space: Option<&Path>) -> Result<TabularDataset, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let space = match space {
        Some(p) => read_space(p)?,
        None => infer_space(text.as_bytes())
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?,
    };
    let data = load_dataset(text.as_bytes(), &space)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    if data.is_empty() {
        return Err(config_err(format!(
            "{}: dataset has no rows",
            path.display()
        )));
    }
    Ok(data)
}

pub fn parse_kappa(text: &str, space_size: usize) -> Result<KappaSchedule, CliError> {
    let bad = || {
        config_err(format!(
            "invalid kappa `{text}`: use const:<v> or adaptive:<eps>,<r>"
        ))
    };
    let (mode, rest) = text.split_once(':').ok_or_else(bad)?;
    match mode {
        "const" => {
            let v: f64 = rest.trim().parse().map_err(|_| bad())?;
            KappaSchedule::constant(v).map_err(|e| config_err(e.to_string()))
        }
        "adaptive" => {
            let (eps, r) = rest.split_once(',').ok_or_else(bad)?;
            let eps: f64 = eps.trim().parse().map_err(|_| bad())?;
            let r: u32 = r.trim().parse().map_err(|_| bad())?;
            KappaSchedule::adaptive(eps, r, space_size).map_err(|e| config_err(e.to_string()))
        }
        _ => Err(bad()),
    }
}

pub fn parse_kernel(text: &str) -> Result<KernelFamily, CliError> {
    match text {
        "matern" => Ok(KernelFamily::Matern12),
        "categorical" => Ok(KernelFamily::Categorical),
        "product" => Ok(KernelFamily::Product),
        _ => Err(config_err(format!(
            "unknown kernel `{text}`: use matern, categorical or product"
        ))),
    }
}

pub fn parse_mean(text: &str) -> Result<MeanForm, CliError> {
    match text {
        "const" | "constant" => Ok(MeanForm::Constant),
        "linear" => Ok(MeanForm::Linear),
        _ => Err(config_err(format!(
            "unknown mean `{text}`: use const or linear"
        ))),
    }
}

fn parse_criterion(text: &str) -> Result<Criterion, CliError> {
    match text {
        "lcb" => Ok(Criterion::Lcb),
        "ignore-mean" => Ok(Criterion::IgnoreMean),
        _ => Err(config_err(format!(
            "unknown criterion `{text}`: use lcb or ignore-mean"
        ))),
    }
}

pub fn parse_playback_noise(value: &toml::Value) -> Result<PlaybackNoise, CliError> {
    match value {
        toml::Value::String(s) if s == "off" => Ok(PlaybackNoise::Off),
        toml::Value::String(s) if s == "replicates" => Ok(PlaybackNoise::Replicates),
        toml::Value::String(s) => s
            .parse::<f64>()
            .map(PlaybackNoise::Fixed)
            .map_err(|_| config_err(format!("invalid playback noise `{s}`"))),
        toml::Value::Float(v) => Ok(PlaybackNoise::Fixed(*v)),
        toml::Value::Integer(v) => Ok(PlaybackNoise::Fixed(*v as f64)),
        other => Err(config_err(format!("invalid playback noise `{other}`"))),
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| config_err(format!("invalid grid `{text}`: use sizes like 51,51")))
        })
        .collect()
}

fn parse_algorithm(name: &str) -> Result<Algorithm, CliError> {
    if name == "bo4co" {
        return Ok(Algorithm::Bo4co);
    }
    name.parse::<BaselineKind>()
        .map(Algorithm::Baseline)
        .map_err(|_| {
            config_err(format!(
                "unknown algorithm `{name}`: use bo4co, sa, hill, ps, drift or random"
            ))
        })
}

impl ExperimentSpec {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let (file, base) = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
                let file: ConfigFile = toml::from_str(&text)
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                (file, path.parent().map(Path::to_path_buf))
            }
            None => (ConfigFile::default(), None),
        };
        let base = base.as_deref();
        let src = &file.source;

        let space_path = args
            .space
            .clone()
            .or_else(|| src.space.clone().map(|p| resolve(base, p)));
        let dataset_path = args
            .dataset
            .clone()
            .or_else(|| src.dataset.clone().map(|p| resolve(base, p)));
        let command = match &args.command {
            Some(c) => Some(c.split_whitespace().map(String::from).collect()),
            None => src.command.clone(),
        };
        let function = args.function.clone().or_else(|| src.function.clone());

        let chosen = [
            dataset_path.is_some(),
            command.is_some(),
            function.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if chosen != 1 {
            return Err(config_err(
                "choose exactly one source: --function, --dataset or --command",
            ));
        }

        let (space, source) = if let Some(path) = dataset_path {
            let dataset = read_dataset(&path, space_path.as_deref())?;
            let noise = match (&args.playback_noise, &src.playback_noise) {
                (Some(s), _) => parse_playback_noise(&toml::Value::String(s.clone()))?,
                (None, Some(v)) => parse_playback_noise(v)?,
                (None, None) => PlaybackNoise::Off,
            };
            (
                dataset.space().clone(),
                SourceSpec::Dataset { dataset, noise },
            )
        } else if let Some(argv) = command {
            if argv.is_empty() {
                return Err(config_err("measurement command is empty"));
            }
            let path = space_path
                .ok_or_else(|| config_err("a measurement command needs --space <toml>"))?;
            let space = read_space(&path)?;
            (space.clone(), SourceSpec::Command { space, argv })
        } else {
            let name = function.expect("one source chosen");
            let function: BenchFunction = name.parse().map_err(config_err)?;
            let grid = match &args.grid {
                Some(g) => parse_grid(g)?,
                None => src.grid.clone().unwrap_or_else(|| function.default_grid()),
            };
            if grid.len() != function.dim() {
                return Err(config_err(format!(
                    "{} needs {} grid sizes, got {}",
                    function.name(),
                    function.dim(),
                    grid.len()
                )));
            }
            if grid.iter().any(|&n| n < 2) {
                return Err(config_err("grid sizes must be at least 2"));
            }
            let noise = args.noise.or(src.noise).unwrap_or(0.0);
            if !(noise >= 0.0) || !noise.is_finite() {
                return Err(config_err(format!(
                    "noise must be nonnegative, got {noise}"
                )));
            }
            let (space, _) = autotune_core::benchfn::make_grid_source(function, &grid, noise, 0)
                .map_err(|e| config_err(e.to_string()))?;
            (
                space,
                SourceSpec::Function {
                    function,
                    grid,
                    noise,
                },
            )
        };

        let seed = args.seed.or(file.seed).unwrap_or(0);
        let max_evals = args
            .budget
            .or(file.budget.max_evals)
            .unwrap_or_else(|| 100.min(space.size()));
        let mut budget = BudgetConfig::with_defaults(&space, max_evals, seed);
        if let Some(n) = args.init_design.or(file.budget.initial) {
            budget.initial = n;
        }
        if let Some(n) = args.learn_cycle.or(file.budget.learn_every) {
            budget.learn_every = n;
        }
        if let Some(n) = args.restarts.or(file.budget.restarts) {
            budget.restarts = n;
        }
        budget
            .validate(&space)
            .map_err(|e| config_err(e.to_string()))?;

        let mut surrogate = SurrogateConfig::for_space(&space);
        let sur = &file.surrogate;
        if let Some(k) = args.kernel.as_deref().or(sur.kernel.as_deref()) {
            surrogate.family = parse_kernel(k)?;
        } else if space
            .params()
            .iter()
            .any(|p| p.kind() == autotune_core::space::ParamKind::Categorical)
        {
            surrogate.family = KernelFamily::Product;
        }
        if let Some(m) = args.mean.as_deref().or(sur.mean.as_deref()) {
            surrogate.mean = parse_mean(m)?;
        }
        if let Some(k) = args.kappa.as_deref().or(sur.kappa.as_deref()) {
            surrogate.kappa = parse_kappa(k, space.size())?;
        }
        if let Some(c) = sur.criterion.as_deref() {
            surrogate.criterion = parse_criterion(c)?;
        }
        if let SourceSpec::Dataset {
            noise: PlaybackNoise::Fixed(sd),
            ..
        } = &source
        {
            // measurement noise is known: do not learn it
            surrogate.noise = NoiseMode::Fixed(sd * sd);
        }

        let names: Vec<String> = match (&args.algorithms, &file.algorithms) {
            (Some(list), _) => list.split(',').map(|s| s.trim().to_string()).collect(),
            (None, Some(list)) => list.clone(),
            (None, None) => vec!["bo4co".to_string()],
        };
        let mut algorithms = Vec::new();
        for n in names.iter().filter(|n| !n.is_empty()) {
            let a = parse_algorithm(n)?;
            if !algorithms.contains(&a) {
                algorithms.push(a);
            }
        }
        if algorithms.is_empty() {
            return Err(config_err("no algorithms selected"));
        }

        let replications = args.replications.or(file.replications).unwrap_or(1);
        if replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        let jobs = args.jobs.or(file.jobs).unwrap_or(1).max(1);
        let out = args
            .out
            .clone()
            .or_else(|| file.out.clone().map(|p| resolve(base, p)));

        Ok(ExperimentSpec {
            space,
            source,
            algorithms,
            budget,
            surrogate,
            replications,
            jobs,
            seed,
            out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_forms() {
        assert_eq!(
            parse_kappa("const:2.5", 10).unwrap(),
            KappaSchedule::Constant { kappa: 2.5 }
        );
        assert_eq!(
            parse_kappa("adaptive:0.5,3", 10).unwrap(),
            KappaSchedule::Adaptive {
                epsilon: 0.5,
                r: 3,
                space_size: 10
            }
        );
        for bad in [
            "2.5",
            "const:x",
            "adaptive:0.5",
            "adaptive:1.5,2",
            "other:1",
        ] {
            assert!(parse_kappa(bad, 10).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_and_noise_forms() {
        assert_eq!(parse_grid("51, 51").unwrap(), vec![51, 51]);
        assert!(parse_grid("51,x").is_err());
        assert_eq!(
            parse_playback_noise(&toml::Value::Float(0.25)).unwrap(),
            PlaybackNoise::Fixed(0.25)
        );
        assert_eq!(
            parse_playback_noise(&toml::Value::String("replicates".into())).unwrap(),
            PlaybackNoise::Replicates
        );
    }
}
