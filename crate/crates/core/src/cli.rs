//! Command-line front end. Each subcommand parses flags, calls the library
//! and writes the result; no numeric work happens here.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classify::{evaluate, ClassifierConfig, ClassifierKind, Metric, Scaling};
use crate::dataset::{load_csv, stratified_split, Dataset, Imputation, LoadOptions, SplitSpec};
use crate::error::Error;
use crate::experiment::{export_report, run_experiment, ExperimentSpec, ReportFormat};
use crate::overlap::{overlap_table, BinMode, BinSpec};
use crate::selection::{
    default_grid, heuristic_threshold, rank_features, select_by_threshold, SelectionResult,
    DEFAULT_THRESHOLD,
};

#[derive(Debug, Parser)]
#[command(
    name = "overlap-fs",
    version,
    about = "Overlap-area feature selection toolkit"
)]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Overlap table of the training partition (or the whole file with --whole).
    Overlap(OverlapArgs),
    /// Attributes whose minimum overlap is below a threshold.
    Select(SelectArgs),
    /// Selected attributes ranked by individual leave-one-out accuracy.
    Rank(RankArgs),
    /// Train on the training partition, test on the test partition.
    Evaluate(EvaluateArgs),
    /// Leave-one-out accuracy over a threshold grid on the training partition.
    Sweep(SweepArgs),
    /// Run a repeated-split experiment described by a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Label column index (default: last column).
    #[arg(long)]
    pub label_column: Option<usize>,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value = "?")]
    pub missing: String,
    #[arg(long, value_enum, default_value_t = ImputeArg::Median)]
    pub impute: ImputeArg,
    /// Comma-separated column indices to ignore.
    #[arg(long, value_delimiter = ',')]
    pub skip_columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ImputeArg {
    Median,
    DropRow,
}

impl InputArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let options = LoadOptions {
            label_column: self.label_column,
            has_header: !self.no_header,
            missing_token: self.missing.clone(),
            imputation: match self.impute {
                ImputeArg::Median => Imputation::Median,
                ImputeArg::DropRow => Imputation::DropRow,
            },
            skip_columns: self.skip_columns.clone(),
        };
        load_csv(&self.input, &options)
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Which repetition's split to use.
    #[arg(long, default_value_t = 0)]
    pub repetition: usize,
}

impl SplitArgs {
    fn spec(&self) -> Result<SplitSpec, CliError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Usage(format!(
                "--train-fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
            repetitions: self.repetition + 1,
        })
    }

    fn split(&self, data: &Dataset) -> Result<(Dataset, Dataset), CliError> {
        Ok(stratified_split(data, &self.spec()?, self.repetition)?)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    /// Use the whole file instead of a training partition.
    #[arg(long)]
    pub whole: bool,
}

impl TrainArgs {
    fn train(&self, data: Dataset) -> Result<Dataset, CliError> {
        if self.whole {
            Ok(data)
        } else {
            Ok(self.split.split(&data)?.0)
        }
    }
}

#[derive(Debug, Args)]
pub struct BinArgs {
    #[arg(long, value_enum, default_value_t = BinArg::Auto)]
    pub bins: BinArg,
    /// Bin count for uniform bins.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub bin_count: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BinArg {
    Auto,
    Integer,
    Uniform,
}

impl BinArgs {
    fn spec(&self) -> BinSpec {
        BinSpec {
            mode: match self.bins {
                BinArg::Auto => BinMode::Auto,
                BinArg::Integer => BinMode::IntegerUnit,
                BinArg::Uniform => BinMode::UniformCount,
            },
            bin_count: self.bin_count.map(|n| n as usize),
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    #[arg(long, value_enum, default_value_t = ClassifierArg::Nn)]
    pub classifier: ClassifierArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value_t = ScalingArg::None)]
    pub scaling: ScalingArg,
    #[arg(long, default_value_t = 1e-9)]
    pub variance_floor: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassifierArg {
    Nn,
    Nb,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScalingArg {
    None,
    MinMax,
}

impl ClassifierArgs {
    fn config(&self) -> Result<ClassifierConfig, CliError> {
        let config = ClassifierConfig {
            kind: match self.classifier {
                ClassifierArg::Nn => ClassifierKind::NearestNeighbor,
                ClassifierArg::Nb => ClassifierKind::NaiveBayes,
            },
            metric: match self.metric {
                MetricArg::Euclidean => Metric::Euclidean,
                MetricArg::Manhattan => Metric::Manhattan,
            },
            scaling: match self.scaling {
                ScalingArg::None => Scaling::None,
                ScalingArg::MinMax => Scaling::MinMaxFromTrain,
            },
            variance_floor: self.variance_floor,
        };
        config
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub bins: BinArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub bins: BinArgs,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD, value_parser = parse_threshold)]
    pub threshold: f64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub bins: BinArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD, value_parser = parse_threshold)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Comma-separated attribute indices (default: all attributes).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<usize>,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub bins: BinArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Comma-separated ascending thresholds in [0, 1] (default 0.05,0.10,...,0.50).
    #[arg(long, value_delimiter = ',', value_parser = parse_threshold)]
    pub grid: Vec<f64>,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment spec; a relative dataset path is resolved against the spec's directory.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

/// Usage errors exit with 2, runtime errors with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// One-line diagnostic with a prefix per error class.
    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => format!("usage error: {m}"),
            CliError::Runtime(e) => format!("runtime error: {e}"),
        }
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush())
    } else {
        std::fs::write(path, bytes)
    }
    .map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(path, text.as_bytes())
}

#[derive(Serialize)]
struct SelectOutput<'a> {
    selected_names: Vec<&'a str>,
    #[serde(flatten)]
    selection: &'a SelectionResult,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        // Fails only if a global pool already exists (e.g. called twice in one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global();
    }
    match cli.command {
        Command::Overlap(args) => {
            let train = args.train.train(args.input.load()?)?;
            let table = overlap_table(&train, &args.bins.spec())?;
            match args.format {
                FormatArg::Json => write_json(&args.out, &table)?,
                FormatArg::Csv => {
                    let mut buf = Vec::new();
                    table.write_csv(&mut buf)?;
                    write_output(&args.out, &buf)?;
                }
            }
        }
        Command::Select(args) => {
            let train = args.train.train(args.input.load()?)?;
            let table = overlap_table(&train, &args.bins.spec())?;
            let selection = select_by_threshold(&table, args.threshold)?;
            let out = SelectOutput {
                selected_names: selection.selected_names(),
                selection: &selection,
            };
            write_json(&args.out, &out)?;
        }
        Command::Rank(args) => {
            let config = args.classifier.config()?;
            let train = args.train.train(args.input.load()?)?;
            let table = overlap_table(&train, &args.bins.spec())?;
            let selection = select_by_threshold(&table, args.threshold)?;
            let ranked = rank_features(&train, &selection, &config)?;
            match args.format {
                FormatArg::Json => write_json(&args.out, &ranked)?,
                FormatArg::Csv => {
                    let mut buf = Vec::new();
                    ranked.write_csv(&mut buf)?;
                    write_output(&args.out, &buf)?;
                }
            }
        }
        Command::Evaluate(args) => {
            let config = args.classifier.config()?;
            let data = args.input.load()?;
            let (train, test) = args.split.split(&data)?;
            let features: Vec<usize> = if args.features.is_empty() {
                (0..data.n_attributes()).collect()
            } else {
                args.features.clone()
            };
            let result = evaluate(&train, &test, &features, &config)?;
            write_json(&args.out, &result)?;
        }
        Command::Sweep(args) => {
            let config = args.classifier.config()?;
            let grid = if args.grid.is_empty() {
                default_grid()
            } else {
                args.grid.clone()
            };
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Usage("--grid must be strictly ascending".into()));
            }
            let train = args.train.train(args.input.load()?)?;
            let search = heuristic_threshold(&train, &args.bins.spec(), &grid, &config)?;
            write_json(&args.out, &search)?;
        }
        Command::Experiment(args) => {
            let mut spec = ExperimentSpec::from_json_file(&args.spec)?;
            if spec.dataset.path.is_relative() {
                if let Some(dir) = args.spec.parent() {
                    spec.dataset.path = dir.join(&spec.dataset.path);
                }
            }
            let report = run_experiment(&spec)?;
            let format = match args.format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            export_report(&report, format, &args.out)?;
        }
    }
    Ok(())
}
