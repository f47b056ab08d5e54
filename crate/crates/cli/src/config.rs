//! Command-line surface and config-file merging.
//!
//! Values resolve as: flag, else config file (`--config`, JSON), else the
//! default.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use ufrank::ensemble::{EnsembleConfig, EnsembleMethod, SubsetRule};
use ufrank::urelief::{Iterations, UReliefConfig};
use ufrank::RankingMethod;

#[derive(Debug)]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "ufrank", version, about = "Unsupervised feature ranking and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the features of a dataset.
    Rank {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Cross-validated 1NN error using the top-k ranked features.
    Eval(EvalArgs),
    /// Cross-validated 1NN error over a grid of k.
    Curve(EvalArgs),
    /// Friedman/Nemenyi comparison of eval artifacts.
    Compare(CompareArgs),
    /// Write a synthetic dataset with planted informative features.
    Synth(SynthArgs),
    /// Median ARI between k-means clusters and the class labels.
    AriCheck(AriArgs),
}

impl Command {
    pub fn workers(&self) -> Option<usize> {
        match self {
            Command::Rank { data, .. } => data.workers,
            Command::Eval(a) | Command::Curve(a) => a.data.workers,
            Command::Compare(a) => a.workers,
            Command::Synth(a) => a.workers,
            Command::AriCheck(a) => a.data.workers,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Target column, excluded from the features [default: class].
    #[arg(long)]
    pub target: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// JSON file with default values for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Genie3,
    Symbolic,
    RfScore,
    Urelief,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Log2,
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleName {
    Bagging,
    Rf,
    Et,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    /// Ranking method [default: genie3].
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    /// Trees per ensemble [default: 100].
    #[arg(long)]
    pub trees: Option<usize>,
    /// Candidate attributes per node for rf/et [default: log2].
    #[arg(long, value_enum)]
    pub subset_rule: Option<RuleName>,
    /// Ensemble type [default: et].
    #[arg(long, value_enum)]
    pub ensemble: Option<EnsembleName>,
    /// URelief neighbors K [default: min(30, m-1)].
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// URelief iterations: `m`, a fraction such as `0.5m`, or a count [default: m].
    #[arg(long)]
    pub iterations: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl MethodArgs {
    pub fn resolve(&self, file: &FileConfig) -> Result<RankingMethod, UsageError> {
        let name = self.method.or(file.method).unwrap_or(MethodName::Genie3);
        let seed = self.seed.or(file.seed).unwrap_or(0);
        let urelief = name == MethodName::Urelief;
        let misplaced: &[(&str, bool)] = if urelief {
            &[
                ("--trees", self.trees.is_some()),
                ("--subset-rule", self.subset_rule.is_some()),
                ("--ensemble", self.ensemble.is_some()),
            ]
        } else {
            &[
                ("--neighbors", self.neighbors.is_some()),
                ("--iterations", self.iterations.is_some()),
            ]
        };
        if let Some((flag, _)) = misplaced.iter().find(|(_, set)| *set) {
            return Err(UsageError(format!(
                "{flag} does not apply to --method {}",
                name.to_possible_value().expect("no skipped variants").get_name()
            )));
        }

        if urelief {
            let iterations = match self.iterations.as_ref().or(file.iterations.as_ref()) {
                Some(text) => parse_iterations(text)?,
                None => Iterations::All,
            };
            return Ok(RankingMethod::Urelief(UReliefConfig {
                neighbors: self.neighbors.or(file.neighbors),
                iterations,
                seed,
            }));
        }
        let trees = self.trees.or(file.trees).unwrap_or(100);
        if trees == 0 {
            return Err(UsageError("--trees must be at least 1".into()));
        }
        let cfg = EnsembleConfig {
            method: match self.ensemble.or(file.ensemble).unwrap_or(EnsembleName::Et) {
                EnsembleName::Bagging => EnsembleMethod::Bagging,
                EnsembleName::Rf => EnsembleMethod::RandomForest,
                EnsembleName::Et => EnsembleMethod::ExtraTrees,
            },
            trees,
            subset_rule: match self.subset_rule.or(file.subset_rule).unwrap_or(RuleName::Log2) {
                RuleName::Log2 => SubsetRule::Log2,
                RuleName::Sqrt => SubsetRule::Sqrt,
                RuleName::All => SubsetRule::All,
            },
            seed,
        };
        Ok(match name {
            MethodName::Genie3 => RankingMethod::Genie3(cfg),
            MethodName::Symbolic => RankingMethod::Symbolic(cfg),
            MethodName::RfScore => RankingMethod::RfScore(cfg),
            MethodName::Urelief => unreachable!("handled above"),
        })
    }
}

/// `m` / `all`, `<fraction>m` or a bare fraction with a decimal point, or an
/// integer count.
pub fn parse_iterations(text: &str) -> Result<Iterations, UsageError> {
    let t = text.trim();
    let bad = || {
        UsageError(format!(
            "invalid --iterations '{text}': use m, a fraction like 0.5m, or a count"
        ))
    };
    if t == "m" || t == "all" {
        return Ok(Iterations::All);
    }
    if let Some(frac) = t.strip_suffix('m') {
        return frac.parse::<f64>().map(Iterations::Fraction).map_err(|_| bad());
    }
    if t.contains('.') {
        return t.parse::<f64>().map(Iterations::Fraction).map_err(|_| bad());
    }
    t.parse::<usize>().map(Iterations::Count).map_err(|_| bad())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Cross-validation folds [default: 10].
    #[arg(long)]
    pub folds: Option<usize>,
    /// Features kept for the 1NN regressor [default: 16].
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Eval artifacts (JSON) to compare.
    pub inputs: Vec<PathBuf>,
    /// Significance level for the Nemenyi critical distance [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Name used in place of the dataset in the output file name.
    #[arg(long, default_value = "benchmark")]
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Examples [default: 200].
    #[arg(long)]
    pub m: Option<usize>,
    /// Informative features [default: 5].
    #[arg(long)]
    pub informative: Option<usize>,
    /// Uniform noise features [default: 45].
    #[arg(long)]
    pub noise: Option<usize>,
    /// Mixture components [default: 4].
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Spacing of component levels in standard deviations [default: 6].
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AriArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// k-means restarts [default: 10].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Clusters to form [default: number of classes].
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Contents of a `--config` file. Keys mirror the long flag names with
/// underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<MethodName>,
    pub trees: Option<usize>,
    pub subset_rule: Option<RuleName>,
    pub ensemble: Option<EnsembleName>,
    pub neighbors: Option<usize>,
    pub iterations: Option<String>,
    pub folds: Option<usize>,
    pub top_k: Option<usize>,
    pub seed: Option<u64>,
    pub target: Option<String>,
    pub runs: Option<usize>,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub informative: Option<usize>,
    pub noise: Option<usize>,
    pub clusters: Option<usize>,
    pub separation: Option<f64>,
}

impl FileConfig {
    pub fn read(path: Option<&Path>) -> Result<FileConfig, UsageError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))
    }
}
