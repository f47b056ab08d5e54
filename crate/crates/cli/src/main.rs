//! `ufrank` command-line driver.
//!
//! Every command writes a JSON artifact (plus a CSV mirror where a table makes
//! sense) named `<dataset>_<method>_<command>_<seed>`, embedding the fully
//! resolved configuration. Failures print a JSON error record on stderr and
//! exit with 1 (usage), 2 (data) or 3 (computation).

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};
use ufrank::eval::{self, compare_methods, CvResult, FoldPlan};
use ufrank::synth::{make_planted, SynthSpec};
use ufrank::{load_csv, Dataset, Error, ErrorKind, LoadOptions};

use config::{
    AriArgs, Cli, Command, CompareArgs, DataArgs, EvalArgs, FileConfig, MethodArgs, SynthArgs,
    UsageError,
};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as Clap;
            if matches!(e.kind(), Clap::DisplayHelp | Clap::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(ErrorKind::Usage, &e.render().to_string());
        }
    };
    match run(cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => fail(ErrorKind::Usage, &msg),
        Err(Failure::Lib(e)) => fail(e.kind(), &e.to_string()),
    }
}

fn fail(kind: ErrorKind, message: &str) -> ExitCode {
    let code: u8 = match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Computation => 3,
    };
    let record = json!({
        "error": {
            "kind": kind.as_str(),
            "exit_code": code,
            "message": message.trim_end(),
        }
    });
    eprintln!("{record}");
    ExitCode::from(code)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

type Outcome = Result<Vec<PathBuf>, Failure>;

fn run(cli: Cli) -> Outcome {
    let workers = cli.command.workers();
    if workers == Some(0) {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Lib(Error::Computation(e.to_string())))?;
    pool.install(|| match cli.command {
        Command::Rank { data, method } => rank(&data, &method),
        Command::Eval(args) => evaluate(&args),
        Command::Curve(args) => curve(&args),
        Command::Compare(args) => compare(&args),
        Command::Synth(args) => synth(&args),
        Command::AriCheck(args) => ari_check(&args),
    })
}

fn load(data: &DataArgs, file: &FileConfig, target_optional: bool) -> Result<(Dataset, Value), Failure> {
    let target = data
        .target
        .clone()
        .or_else(|| file.target.clone())
        .unwrap_or_else(|| "class".to_owned());
    let dataset = load_csv(
        &data.data,
        &LoadOptions {
            target: Some(target.clone()),
            target_optional,
            ..Default::default()
        },
    )?;
    let echo = json!({
        "dataset": dataset.name(),
        "path": data.data.to_string_lossy(),
        "target": dataset.target_name(),
        "m": dataset.m(),
        "n": dataset.n(),
    });
    Ok((dataset, echo))
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    command: &'a str,
    config: Value,
    result: T,
}

fn emit<T: Serialize>(
    out: &Path,
    stem: &str,
    command: &str,
    config: Value,
    result: &T,
    csv: Option<String>,
) -> Outcome {
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut written = Vec::new();
    let json_path = out.join(format!("{stem}.json"));
    let mut body = serde_json::to_string_pretty(&Artifact {
        command,
        config,
        result,
    })
    .map_err(Error::from)?;
    body.push('\n');
    fs::write(&json_path, body).map_err(|e| io_error(&json_path, e))?;
    written.push(json_path);
    if let Some(csv) = csv {
        let csv_path = out.join(format!("{stem}.csv"));
        fs::write(&csv_path, csv).map_err(|e| io_error(&csv_path, e))?;
        written.push(csv_path);
    }
    Ok(written)
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Lib(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn stem(dataset: &str, method: &str, command: &str, seed: u64) -> String {
    format!("{dataset}_{method}_{command}_{seed}")
}

fn rank(data: &DataArgs, method_args: &MethodArgs) -> Outcome {
    let file = FileConfig::read(data.config.as_deref())?;
    let method = method_args.resolve(&file)?;
    let (dataset, echo) = load(data, &file, true)?;
    let ranking = method.rank(dataset.features(), dataset.name())?;
    let config = json!({ "data": echo, "ranker": method });
    emit(
        &data.out,
        &stem(dataset.name(), method.name(), "rank", method.seed()),
        "rank",
        config,
        &ranking,
        Some(ranking.to_csv()),
    )
}

struct EvalSetup {
    dataset: Dataset,
    method: ufrank::RankingMethod,
    plan: FoldPlan,
    top_k: usize,
    config: Value,
}

fn eval_setup(args: &EvalArgs) -> Result<EvalSetup, Failure> {
    let file = FileConfig::read(args.data.config.as_deref())?;
    let method = args.method.resolve(&file)?;
    let folds = args.folds.or(file.folds).unwrap_or(eval::DEFAULT_FOLDS);
    let top_k = args.top_k.or(file.top_k).unwrap_or(eval::DEFAULT_TOP_K);
    let (dataset, echo) = load(&args.data, &file, false)?;
    let plan = FoldPlan::new(dataset.m(), folds, method.seed())?;
    let config = json!({
        "data": echo,
        "ranker": method,
        "folds": folds,
        "fold_seed": method.seed(),
        "top_k": top_k,
    });
    Ok(EvalSetup {
        dataset,
        method,
        plan,
        top_k,
        config,
    })
}

fn evaluate(args: &EvalArgs) -> Outcome {
    let s = eval_setup(args)?;
    if s.top_k == 0 || s.top_k > s.dataset.n() {
        return Err(Failure::Usage(format!(
            "--top-k must be in 1..={} for this dataset, got {}",
            s.dataset.n(),
            s.top_k
        )));
    }
    let result = eval::cv_mse(&s.dataset, &s.method, s.top_k, &s.plan)?;
    let mut csv = String::from("fold,mse\n");
    for (f, v) in result.per_fold.iter().enumerate() {
        csv.push_str(&format!("{f},{v}\n"));
    }
    csv.push_str(&format!("mean,{}\n", result.mean));
    emit(
        &args.data.out,
        &stem(s.dataset.name(), s.method.name(), "eval", s.method.seed()),
        "eval",
        s.config,
        &result,
        Some(csv),
    )
}

fn curve(args: &EvalArgs) -> Outcome {
    let s = eval_setup(args)?;
    let mut config = s.config;
    // The curve covers the whole k grid; top-k does not apply.
    if let Some(obj) = config.as_object_mut() {
        obj.remove("top_k");
    }
    let report = eval::error_curve(&s.dataset, &s.method, &s.plan)?;
    let csv = report.to_csv();
    emit(
        &args.data.out,
        &stem(s.dataset.name(), s.method.name(), "curve", s.method.seed()),
        "curve",
        config,
        &report,
        Some(csv),
    )
}

fn compare(args: &CompareArgs) -> Outcome {
    if args.inputs.is_empty() {
        return Err(Failure::Usage("compare needs eval artifacts as inputs".into()));
    }
    let file = FileConfig::read(args.config.as_deref())?;
    let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Usage(format!("--alpha must be in (0, 1), got {alpha}")));
    }

    let mut results: Vec<(String, CvResult)> = Vec::new();
    for path in &args.inputs {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(Error::from)?;
        if value.get("command").and_then(Value::as_str) != Some("eval") {
            return Err(Failure::Lib(Error::InvalidData(format!(
                "{} is not an eval artifact",
                path.display()
            ))));
        }
        let result: CvResult =
            serde_json::from_value(value["result"].clone()).map_err(Error::from)?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        results.push((name, result));
    }

    let mut datasets: Vec<String> = results.iter().map(|(_, r)| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();
    let mut methods: Vec<String> = results.iter().map(|(_, r)| r.label.clone()).collect();
    methods.sort();
    methods.dedup();
    let mut scores = vec![vec![None; methods.len()]; datasets.len()];
    for (name, r) in &results {
        let d = datasets.binary_search(&r.dataset).expect("collected above");
        let j = methods.binary_search(&r.label).expect("collected above");
        if scores[d][j].replace(r.mean).is_some() {
            return Err(Failure::Lib(Error::InvalidData(format!(
                "{name}: second result for {} on {}",
                r.label, r.dataset
            ))));
        }
    }
    let scores = scores
        .into_iter()
        .zip(&datasets)
        .map(|(row, d)| {
            row.into_iter()
                .zip(&methods)
                .map(|(v, m)| {
                    v.ok_or_else(|| {
                        Failure::Lib(Error::InvalidData(format!("no result for {m} on {d}")))
                    })
                })
                .collect::<Result<Vec<f64>, Failure>>()
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let report = compare_methods(&datasets, &methods, &scores, alpha)?;
    let mut inputs: Vec<String> = results.into_iter().map(|(name, _)| name).collect();
    inputs.sort();
    let config = json!({ "inputs": inputs, "alpha": alpha });
    let csv = report.to_csv();
    emit(
        &args.out,
        &stem(&args.name, "methods", "compare", 0),
        "compare",
        config,
        &report,
        Some(csv),
    )
}

fn synth(args: &SynthArgs) -> Outcome {
    let file = FileConfig::read(args.config.as_deref())?;
    let spec = SynthSpec {
        m: args.m.or(file.m).unwrap_or(200),
        n_informative: args.informative.or(file.informative).unwrap_or(5),
        n_noise: args.noise.or(file.noise).unwrap_or(45),
        clusters: args.clusters.or(file.clusters).unwrap_or(4),
        separation: args.separation.or(file.separation).unwrap_or(6.0),
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    let planted = make_planted(&spec)?;
    let name = planted.dataset.name().to_owned();
    planted.save(&args.out, &name)?;
    let mut written = vec![
        args.out.join(format!("{name}.csv")),
        args.out.join(format!("{name}.truth.json")),
    ];
    written.extend(emit(
        &args.out,
        &stem(&name, "planted", "synth", spec.seed),
        "synth",
        json!({ "spec": spec }),
        &planted.ground_truth(),
        None,
    )?);
    Ok(written)
}

fn ari_check(args: &AriArgs) -> Outcome {
    let file = FileConfig::read(args.data.config.as_deref())?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let runs = args.runs.or(file.runs).unwrap_or(10);
    let (dataset, echo) = load(&args.data, &file, false)?;
    let report = eval::clustering_hypothesis_ari(&dataset, args.classes, runs, seed)?;
    let mut csv = String::from("run,ari\n");
    for (r, v) in report.runs.iter().enumerate() {
        csv.push_str(&format!("{r},{v}\n"));
    }
    csv.push_str(&format!("median,{}\n", report.median));
    let config = json!({
        "data": echo,
        "runs": runs,
        "classes": report.class_count,
        "seed": seed,
    });
    emit(
        &args.data.out,
        &stem(dataset.name(), "kmeans", "ari-check", seed),
        "ari-check",
        config,
        &report,
        Some(csv),
    )
}
