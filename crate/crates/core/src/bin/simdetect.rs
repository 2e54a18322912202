use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use simdetect::io::{read_dataset_file, write_atomic, SparseDatasetFile};
use simdetect::protocol::DEFAULT_ALPHA_GRID;
use simdetect::{
    compute_metrics, confusion, fit_forest_importance, generate_synthetic, run_maa, run_protocol,
    select_top_fraction, toy, Algorithm, ClassifierConfig, Error, ExperimentSpec, FeatureProjection,
    ForestConfig, Model, RankingMode, SyntheticSpec, TieRule,
};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_SOFTWARE: u8 = 70;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "simdetect", version, about = "Nearest-neighbor malware detection on sparse binary features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank features by random-forest importance.
    Rank(RankArgs),
    /// Classify every sample of a query file against a training file.
    Classify(ClassifyArgs),
    /// Repeated holdout evaluation over algorithms and feature fractions.
    Evaluate(EvaluateArgs),
    /// ROC points of the test fold of the first repeat.
    Roc(RocArgs),
    /// Maximum achievable accuracy bounds per repeat.
    Maa(MaaArgs),
    /// Write a seeded planted-block dataset.
    Synth(SynthArgs),
    /// Replay the ten-sample worked example with every intermediate table.
    Toy(ToyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ToyFormat {
    Text,
    Json,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write here (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifierArgs {
    /// Fraction of the KMNN neighbor set trimmed before voting.
    #[arg(long, default_value_t = 0.10)]
    trim_fraction: f64,
    #[arg(long, default_value = "malware")]
    tie: TieRule,
    /// Logarithm base of the PDME entropy.
    #[arg(long, default_value_t = std::f64::consts::E)]
    log_base: f64,
}

impl ClassifierArgs {
    fn config(&self) -> ClassifierConfig {
        ClassifierConfig {
            tie_rule: self.tie,
            trim_fraction: self.trim_fraction,
            log_base: self.log_base,
        }
    }
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
}

impl ForestArgs {
    fn config(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.trees,
            max_depth: self.max_depth,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Feature percentages: one value, a comma list, or `grid` (10..100 by 10).
    #[arg(long, default_value = "100", value_parser = parse_alphas)]
    alpha: Alphas,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.6)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    valid_fraction: f64,
    /// Rank features once on the whole dataset instead of per training fold.
    #[arg(long)]
    global_ranking: bool,
    #[command(flatten)]
    forest: ForestArgs,
}

#[derive(Clone)]
struct Alphas(Vec<u32>);

fn parse_alphas(s: &str) -> Result<Alphas, String> {
    if s.eq_ignore_ascii_case("grid") {
        return Ok(Alphas(DEFAULT_ALPHA_GRID.to_vec()));
    }
    s.split(',')
        .map(|t| match t.trim().parse::<u32>() {
            Ok(a) if (1..=100).contains(&a) => Ok(a),
            _ => Err(format!("alpha must be an integer in 1..=100 or `grid`, got `{t}`")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Alphas)
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    data: PathBuf,
    /// Keep only the top alpha percent of features.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=100))]
    alpha: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ann")]
    algo: Vec<Algorithm>,
    /// Project both files onto the top alpha percent of training features.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..=100))]
    alpha: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "fnn,ann,wann,kmnn")]
    algo: Vec<Algorithm>,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Keep test-fold ROC points in the JSON report.
    #[arg(long)]
    roc: bool,
    /// Also write one CSV line per (repeat, alpha, algorithm, fold).
    #[arg(long)]
    runs_csv: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ann,wann,kmnn,pdme")]
    algo: Vec<Algorithm>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..=100))]
    alpha: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MaaArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    n_per_class: usize,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    /// Width of each class's planted block; blocks are adjacent from feature 0.
    #[arg(long, default_value_t = 20)]
    block: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 0.25)]
    trim_fraction: f64,
    #[arg(long, default_value = "malware")]
    tie: TieRule,
    #[arg(long, value_enum, default_value = "text")]
    format: ToyFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    File { path: PathBuf, err: Error },
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) | CliError::File { err: e, .. } => match e {
                Error::InvalidParameter(_) => EXIT_USAGE,
                Error::Io(_) => EXIT_IO,
                Error::Json(_) => EXIT_SOFTWARE,
                _ => EXIT_DATA,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => e.fmt(f),
            CliError::File { path, err } => write!(f, "{}: {err}", path.display()),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load(path: &Path) -> CliResult<SparseDatasetFile> {
    read_dataset_file(path).map_err(|err| CliError::File {
        path: path.to_path_buf(),
        err,
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn to_json(v: &impl Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn experiment(algorithms: Vec<Algorithm>, split: &SplitArgs, classifier: ClassifierConfig) -> ExperimentSpec {
    ExperimentSpec {
        algorithms,
        alphas: split.alpha.0.clone(),
        repeats: split.repeats,
        master_seed: split.seed,
        seeds: None,
        train_fraction: split.train_fraction,
        valid_fraction: split.valid_fraction,
        classifier,
        forest: split.forest.config(0),
        ranking: if split.global_ranking {
            RankingMode::Global
        } else {
            RankingMode::PerFold
        },
        keep_roc: false,
    }
}

fn cmd_rank(a: RankArgs) -> CliResult<()> {
    let file = load(&a.data)?;
    let ranked = fit_forest_importance(&file.dataset, &a.forest.config(a.seed))?;
    let keep = match a.alpha {
        Some(alpha) => select_top_fraction(&ranked, alpha)?.target_dim(),
        None => ranked.dim(),
    };
    let base = file.one_based as u32;
    let rows: Vec<_> = ranked.order[..keep]
        .iter()
        .enumerate()
        .map(|(r, &j)| {
            (
                r + 1,
                j + base as usize,
                file.feature_names.get(&(j as u32)).cloned().unwrap_or_default(),
                ranked.importances[j],
            )
        })
        .collect();
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("rank,feature,name,importance\n");
            for (r, j, name, imp) in &rows {
                s.push_str(&format!("{r},{j},{},{imp}\n", csv_field(name)));
            }
            s
        }
        Format::Json => to_json(&json!({
            "dim": ranked.dim(),
            "index_base": base,
            "alpha": a.alpha,
            "features": rows
                .iter()
                .map(|(r, j, name, imp)| json!({"rank": r, "feature": j, "name": name, "importance": imp}))
                .collect::<Vec<_>>(),
        }))?,
    };
    emit(a.output.out.as_deref(), &text)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_classify(a: ClassifyArgs) -> CliResult<()> {
    let train_file = load(&a.train)?;
    let query_file = load(&a.query)?;
    let (train, queries) = (&train_file.dataset, &query_file.dataset);
    if train.dim() != queries.dim() {
        return Err(Error::DimensionMismatch {
            left: train.dim(),
            right: queries.dim(),
        }
        .into());
    }
    let projection = if a.alpha == 100 {
        FeatureProjection::identity(train.dim())
    } else {
        select_top_fraction(&fit_forest_importance(train, &a.forest.config(a.seed))?, a.alpha)?
    };
    let ptrain = projection.project_dataset(train)?;
    let pquery = projection.project_dataset(queries)?;
    let cfg = a.classifier.config();

    let mut predictions = Vec::new();
    let mut metrics = serde_json::Map::new();
    for &algo in &a.algo {
        let decisions = Model::fit(algo, &ptrain, cfg)?.decide_all(&pquery)?;
        let predicted: Vec<_> = decisions.iter().map(|d| d.label).collect();
        let m = compute_metrics(&confusion(&predicted, pquery.labels())?)?;
        metrics.insert(algo.name().into(), serde_json::to_value(m).map_err(Error::from)?);
        for (i, d) in decisions.into_iter().enumerate() {
            predictions.push((i, algo, pquery.labels()[i], d));
        }
    }
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("query,algorithm,actual,predicted,malware_share,voters\n");
            for (i, algo, actual, d) in &predictions {
                s.push_str(&format!(
                    "{i},{algo},{actual},{},{},{}\n",
                    d.label,
                    d.malware_share,
                    d.voters.len()
                ));
            }
            s
        }
        Format::Json => to_json(&json!({
            "alpha": a.alpha,
            "features": projection.target_dim(),
            "metrics": metrics,
            "predictions": predictions
                .iter()
                .map(|(i, algo, actual, d)| json!({
                    "query": i,
                    "algorithm": algo,
                    "actual": actual,
                    "predicted": d.label,
                    "malware_share": d.malware_share,
                    "voters": d.voters,
                }))
                .collect::<Vec<_>>(),
        }))?,
    };
    emit(a.output.out.as_deref(), &text)
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult<()> {
    let file = load(&a.data)?;
    let mut spec = experiment(a.algo, &a.split, a.classifier.config());
    spec.keep_roc = a.roc;
    let report = run_protocol(&file.dataset, &spec)?;
    if let Some(p) = &a.runs_csv {
        write_atomic(p, report.to_runs_csv().as_bytes())?;
    }
    let text = match a.output.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_table_csv(),
    };
    emit(a.output.out.as_deref(), &text)
}

fn cmd_roc(a: RocArgs) -> CliResult<()> {
    let file = load(&a.data)?;
    let split = SplitArgs {
        alpha: Alphas(vec![a.alpha]),
        repeats: 1,
        seed: a.seed,
        train_fraction: 0.6,
        valid_fraction: 0.2,
        global_ranking: false,
        forest: a.forest,
    };
    let mut spec = experiment(a.algo.clone(), &split, a.classifier.config());
    spec.keep_roc = true;
    let report = run_protocol(&file.dataset, &spec)?;
    let curves: Vec<_> = report.runs.iter().filter(|r| r.roc.is_some()).collect();
    if curves.is_empty() {
        return Err(CliError::Usage("no selected algorithm has a graded score (FNN has none)".into()));
    }
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("algorithm,threshold,fpr,tpr\n");
            for r in &curves {
                for p in r.roc.as_deref().unwrap_or_default() {
                    let t = if p.threshold.is_finite() { p.threshold.to_string() } else { "inf".into() };
                    s.push_str(&format!("{},{t},{},{}\n", r.algorithm, p.fpr, p.tpr));
                }
            }
            s
        }
        Format::Json => to_json(
            &curves
                .iter()
                .map(|r| json!({"algorithm": r.algorithm, "auc": r.auc_roc, "points": r.roc}))
                .collect::<Vec<_>>(),
        )?,
    };
    emit(a.output.out.as_deref(), &text)
}

fn cmd_maa(a: MaaArgs) -> CliResult<()> {
    let file = load(&a.data)?;
    let spec = experiment(vec![Algorithm::Ann], &a.split, ClassifierConfig::default());
    let rows = run_maa(&file.dataset, &spec)?;
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("repeat,seed,alpha,fold,max_accuracy,min_fpr,max_auc\n");
            for r in &rows {
                for (fold, b) in [("valid", &r.valid), ("test", &r.test)] {
                    s.push_str(&format!(
                        "{},{},{},{fold},{},{},{}\n",
                        r.repeat, r.seed, r.alpha, b.max_accuracy, b.min_fpr, b.max_auc
                    ));
                }
            }
            s
        }
        Format::Json => to_json(&rows)?,
    };
    emit(a.output.out.as_deref(), &text)
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    if 2 * a.block > a.dim {
        return Err(CliError::Usage(format!(
            "two blocks of {} do not fit in dimension {}",
            a.block, a.dim
        )));
    }
    let spec = SyntheticSpec::two_blocks(a.n_per_class, a.dim, a.block, a.noise, a.seed);
    let data = generate_synthetic(&spec)?;
    emit(a.out.as_deref(), &SparseDatasetFile::new(data).to_text())
}

fn cmd_toy(a: ToyArgs) -> CliResult<()> {
    let cfg = ClassifierConfig {
        tie_rule: a.tie,
        trim_fraction: a.trim_fraction,
        ..Default::default()
    };
    let (train, query) = (toy::dataset(), toy::query());
    let w = toy::walkthrough(&train, &query, &cfg)?;
    let text = match a.format {
        ToyFormat::Text => w.render(&train, &query),
        ToyFormat::Json => to_json(&w)?,
    };
    emit(a.out.as_deref(), &text)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Rank(a) => cmd_rank(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Roc(a) => cmd_roc(a),
        Command::Maa(a) => cmd_maa(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Toy(a) => cmd_toy(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simdetect: {e}");
            ExitCode::from(e.code())
        }
    }
}
