//! Repeated-split experiment protocols and their reports.
//!
//! Each repetition draws a stratified split, computes the overlap table on
//! the training partition only, selects (and for the top-k protocol, ranks)
//! attributes on the training partition, and evaluates every configured
//! classifier on the test partition. Repetitions run in parallel and are
//! merged in repetition order, so reports do not depend on thread count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate, ClassifierConfig};
use crate::dataset::{load_csv, stratified_split, Dataset, LoadOptions, SplitSpec};
use crate::error::{Error, Result};
use crate::overlap::{overlap_table_with, OverlapConfig, OverlapTable};
use crate::selection::{
    default_grid, rank_features, select_below, select_by_threshold, threshold_search, top_k,
    DEFAULT_THRESHOLD,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub path: PathBuf,
    #[serde(default)]
    pub load: LoadOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    FixedThreshold {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    ThresholdSweep {
        #[serde(default = "default_grid")]
        grid: Vec<f64>,
    },
    TopKRanked {
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_k")]
        k: usize,
        /// Prefix sizes to evaluate; `None` means `1..=k`.
        #[serde(default)]
        prefixes: Option<Vec<usize>>,
    },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::FixedThreshold { .. } => "fixed-threshold",
            Protocol::ThresholdSweep { .. } => "threshold-sweep",
            Protocol::TopKRanked { .. } => "top-k-ranked",
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_k() -> usize {
    DEFAULT_TOP_K
}

/// How the per-repetition threshold is obtained for the fixed and top-k protocols.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Use the protocol's threshold in every repetition.
    #[default]
    Fixed,
    /// Re-derive the threshold in each repetition by leave-one-out search
    /// on the training partition, scored with the ranking classifier.
    Heuristic {
        #[serde(default = "default_grid")]
        grid: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub overlap: OverlapConfig,
    pub protocol: Protocol,
    #[serde(default)]
    pub threshold_mode: ThresholdMode,
    /// Classifiers evaluated on the test partition.
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierConfig>,
    /// Classifier used for individual-attribute ranking and threshold search.
    #[serde(default)]
    pub ranking_classifier: ClassifierConfig,
}

fn default_classifiers() -> Vec<ClassifierConfig> {
    vec![ClassifierConfig::default()]
}

impl ExperimentSpec {
    pub fn new(path: impl Into<PathBuf>, protocol: Protocol) -> Self {
        Self {
            dataset: DatasetSource {
                path: path.into(),
                load: LoadOptions::default(),
            },
            split: SplitSpec::default(),
            overlap: OverlapConfig::default(),
            protocol,
            threshold_mode: ThresholdMode::Fixed,
            classifiers: default_classifiers(),
            ranking_classifier: ClassifierConfig::default(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.overlap.bins.validate()?;
        if self.classifiers.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one classifier is required".into(),
            ));
        }
        for c in self
            .classifiers
            .iter()
            .chain(std::iter::once(&self.ranking_classifier))
        {
            c.validate()?;
        }
        match &self.protocol {
            Protocol::FixedThreshold { threshold } => check_threshold(*threshold)?,
            Protocol::ThresholdSweep { grid } => {
                check_grid(grid)?;
                if self.threshold_mode != ThresholdMode::Fixed {
                    return Err(Error::InvalidConfig(
                        "heuristic threshold mode does not apply to a threshold sweep".into(),
                    ));
                }
            }
            Protocol::TopKRanked {
                threshold,
                k,
                prefixes,
            } => {
                check_threshold(*threshold)?;
                if *k == 0 {
                    return Err(Error::InvalidConfig("k must be at least 1".into()));
                }
                if let Some(p) = prefixes {
                    if p.is_empty() || p[0] == 0 || p.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::InvalidConfig(
                            "prefixes must be nonempty, positive and strictly ascending".into(),
                        ));
                    }
                }
            }
        }
        if let ThresholdMode::Heuristic { grid } = &self.threshold_mode {
            check_grid(grid)?;
        }
        Ok(())
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid threshold {t}")));
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "grid must be nonempty and strictly ascending".into(),
        ));
    }
    grid.iter().try_for_each(|&t| check_threshold(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub instances: usize,
    pub attributes: usize,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
}

/// One evaluated configuration of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub threshold: f64,
    /// Prefix size for the top-k protocol.
    pub prefix: Option<usize>,
    /// Attributes under the threshold on this repetition's training partition.
    pub available: usize,
    /// Attributes used for evaluation.
    pub selected: Vec<usize>,
    pub selected_count: usize,
    /// `selected_count / attribute count`.
    pub normalized_count: f64,
    /// Nothing passed the threshold; accuracies are 0.
    pub empty_selection: bool,
    /// Fewer attributes were available than the prefix asked for.
    pub truncated: bool,
    /// Test accuracy per classifier, in spec order.
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Aggregate over repetitions for one threshold (or one prefix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `None` when the threshold varied across repetitions.
    pub threshold: Option<f64>,
    pub prefix: Option<usize>,
    pub repetitions: usize,
    pub mean_selected_count: f64,
    pub mean_normalized_count: f64,
    pub empty_selections: usize,
    pub truncated: usize,
    pub accuracy: Vec<MeanStd>,
}

/// Best prefix per classifier for the top-k protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPrefix {
    pub classifier: String,
    pub prefix: usize,
    pub accuracy: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub protocol: String,
    pub spec: ExperimentSpec,
    pub dataset: DatasetSummary,
    pub classifiers: Vec<String>,
    pub records: Vec<RepetitionRecord>,
    pub summary: Vec<SummaryRow>,
    pub best: Vec<BestPrefix>,
}

impl ExperimentReport {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Loads the spec's dataset and runs its protocol.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let data = load_csv(&spec.dataset.path, &spec.dataset.load)?;
    run(spec, &data)
}

/// Runs the spec's protocol on an already loaded dataset.
pub fn run(spec: &ExperimentSpec, data: &Dataset) -> Result<ExperimentReport> {
    match spec.protocol {
        Protocol::FixedThreshold { .. } => run_fixed_threshold(spec, data),
        Protocol::ThresholdSweep { .. } => run_threshold_sweep(spec, data),
        Protocol::TopKRanked { .. } => run_top_k(spec, data),
    }
}

struct Repetition {
    train: Dataset,
    test: Dataset,
    table: OverlapTable,
}

fn prepare(spec: &ExperimentSpec, data: &Dataset, repetition: usize) -> Result<Repetition> {
    let (train, test) = stratified_split(data, &spec.split, repetition)?;
    let table = overlap_table_with(&train, &spec.overlap)?;
    Ok(Repetition { train, test, table })
}

impl Repetition {
    fn threshold(&self, spec: &ExperimentSpec, fixed: f64) -> Result<f64> {
        match &spec.threshold_mode {
            ThresholdMode::Fixed => Ok(fixed),
            ThresholdMode::Heuristic { grid } => {
                threshold_search(&self.train, &self.table, grid, &spec.ranking_classifier)
                    .map(|s| s.best_threshold)
            }
        }
    }

    fn accuracies(&self, features: &[usize], classifiers: &[ClassifierConfig]) -> Result<Vec<f64>> {
        if features.is_empty() {
            return Ok(vec![0.0; classifiers.len()]);
        }
        classifiers
            .iter()
            .map(|c| evaluate(&self.train, &self.test, features, c).map(|r| r.accuracy))
            .collect()
    }
}

fn per_repetition<F>(spec: &ExperimentSpec, data: &Dataset, f: F) -> Result<Vec<RepetitionRecord>>
where
    F: Fn(usize, Repetition) -> Result<Vec<RepetitionRecord>> + Sync,
{
    spec.validate()?;
    let nested = (0..spec.split.repetitions)
        .into_par_iter()
        .map(|r| prepare(spec, data, r).and_then(|rep| f(r, rep)))
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn record(
    repetition: usize,
    threshold: f64,
    prefix: Option<usize>,
    available: usize,
    selected: Vec<usize>,
    n_attributes: usize,
    accuracies: Vec<f64>,
) -> RepetitionRecord {
    let count = selected.len();
    RepetitionRecord {
        repetition,
        threshold,
        prefix,
        available,
        selected_count: count,
        normalized_count: count as f64 / n_attributes as f64,
        empty_selection: available == 0,
        truncated: prefix.is_some_and(|p| available < p),
        selected,
        accuracies,
    }
}

/// Fixed (or per-repetition heuristic) threshold, all selected attributes evaluated.
pub fn run_fixed_threshold(spec: &ExperimentSpec, data: &Dataset) -> Result<ExperimentReport> {
    let Protocol::FixedThreshold { threshold } = spec.protocol else {
        return Err(Error::InvalidConfig(
            "spec protocol is not fixed-threshold".into(),
        ));
    };
    let n_attr = data.n_attributes();
    let records = per_repetition(spec, data, |r, rep| {
        let t = rep.threshold(spec, threshold)?;
        let selected = select_by_threshold(&rep.table, t)?.selected;
        let acc = rep.accuracies(&selected, &spec.classifiers)?;
        Ok(vec![record(
            r,
            t,
            None,
            selected.len(),
            selected,
            n_attr,
            acc,
        )])
    })?;
    Ok(assemble(spec, data, records, |_| 0))
}

/// The fixed-threshold protocol at every grid threshold.
pub fn run_threshold_sweep(spec: &ExperimentSpec, data: &Dataset) -> Result<ExperimentReport> {
    let Protocol::ThresholdSweep { grid } = &spec.protocol else {
        return Err(Error::InvalidConfig(
            "spec protocol is not threshold-sweep".into(),
        ));
    };
    let n_attr = data.n_attributes();
    let records = per_repetition(spec, data, |r, rep| {
        let mut out: Vec<RepetitionRecord> = Vec::with_capacity(grid.len());
        for &t in grid {
            let selected = select_below(&rep.table.minimum, t);
            // Selection is monotone in the threshold: equal size means equal set.
            let acc = match out.last() {
                Some(prev) if prev.selected_count == selected.len() => prev.accuracies.clone(),
                _ => rep.accuracies(&selected, &spec.classifiers)?,
            };
            out.push(record(r, t, None, selected.len(), selected, n_attr, acc));
        }
        Ok(out)
    })?;
    let grid = grid.clone();
    Ok(assemble(spec, data, records, |rec| {
        grid.iter().position(|&g| g == rec.threshold).unwrap_or(0)
    }))
}

/// Threshold, rank on train, evaluate ranked prefixes on test.
///
/// When fewer than `p` attributes pass the threshold, prefix `p` uses all
/// of them and the record is flagged as truncated.
pub fn run_top_k(spec: &ExperimentSpec, data: &Dataset) -> Result<ExperimentReport> {
    let Protocol::TopKRanked {
        threshold,
        k,
        prefixes,
    } = &spec.protocol
    else {
        return Err(Error::InvalidConfig(
            "spec protocol is not top-k-ranked".into(),
        ));
    };
    let prefixes: Vec<usize> = prefixes.clone().unwrap_or_else(|| (1..=*k).collect());
    let n_attr = data.n_attributes();
    let records = per_repetition(spec, data, |r, rep| {
        let t = rep.threshold(spec, *threshold)?;
        let selection = select_by_threshold(&rep.table, t)?;
        let available = selection.selected.len();
        if available == 0 {
            return Ok(prefixes
                .iter()
                .map(|&p| {
                    record(
                        r,
                        t,
                        Some(p),
                        0,
                        Vec::new(),
                        n_attr,
                        vec![0.0; spec.classifiers.len()],
                    )
                })
                .collect());
        }
        let ranked = rank_features(&rep.train, &selection, &spec.ranking_classifier)?;
        let mut out: Vec<RepetitionRecord> = Vec::with_capacity(prefixes.len());
        for &p in &prefixes {
            let features = top_k(&ranked, p);
            let acc = match out.last() {
                Some(prev) if prev.selected_count == features.len() => prev.accuracies.clone(),
                _ => rep.accuracies(&features, &spec.classifiers)?,
            };
            out.push(record(r, t, Some(p), available, features, n_attr, acc));
        }
        Ok(out)
    })?;
    let positions = prefixes.clone();
    let mut report = assemble(spec, data, records, |rec| {
        positions
            .iter()
            .position(|&p| Some(p) == rec.prefix)
            .unwrap_or(0)
    });
    report.best = best_prefixes(&report);
    Ok(report)
}

fn best_prefixes(report: &ExperimentReport) -> Vec<BestPrefix> {
    report
        .classifiers
        .iter()
        .enumerate()
        .filter_map(|(ci, label)| {
            let mut best: Option<&SummaryRow> = None;
            for row in &report.summary {
                if best.is_none_or(|b| row.accuracy[ci].mean > b.accuracy[ci].mean) {
                    best = Some(row);
                }
            }
            best.map(|row| BestPrefix {
                classifier: label.clone(),
                prefix: row.prefix.unwrap_or(0),
                accuracy: row.accuracy[ci],
            })
        })
        .collect()
}

/// Groups records by `slot` (threshold or prefix position) and aggregates.
fn assemble<F>(
    spec: &ExperimentSpec,
    data: &Dataset,
    records: Vec<RepetitionRecord>,
    slot: F,
) -> ExperimentReport
where
    F: Fn(&RepetitionRecord) -> usize,
{
    let n_slots = records.iter().map(&slot).max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<&RepetitionRecord>> = vec![Vec::new(); n_slots];
    for rec in &records {
        groups[slot(rec)].push(rec);
    }
    let n_classifiers = spec.classifiers.len();
    let summary = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let first = g[0].threshold;
            let n = g.len() as f64;
            SummaryRow {
                threshold: g.iter().all(|r| r.threshold == first).then_some(first),
                prefix: g[0].prefix,
                repetitions: g.len(),
                mean_selected_count: g.iter().map(|r| r.selected_count as f64).sum::<f64>() / n,
                mean_normalized_count: g.iter().map(|r| r.normalized_count).sum::<f64>() / n,
                empty_selections: g.iter().filter(|r| r.empty_selection).count(),
                truncated: g.iter().filter(|r| r.truncated).count(),
                accuracy: (0..n_classifiers)
                    .map(|ci| MeanStd::of(&g.iter().map(|r| r.accuracies[ci]).collect::<Vec<_>>()))
                    .collect(),
            }
        })
        .collect();
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        protocol: spec.protocol.name().to_string(),
        spec: spec.clone(),
        dataset: DatasetSummary {
            instances: data.n_instances(),
            attributes: data.n_attributes(),
            class_names: data.class_names().to_vec(),
            class_counts: data.class_counts(),
        },
        classifiers: spec
            .classifiers
            .iter()
            .map(ClassifierConfig::label)
            .collect(),
        records,
        summary,
        best: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(std::io::stdout().lock()));
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Writes a report. JSON goes to `path`. CSV writes the summary curve to
/// `path`, plus `<stem>.records.csv` and, for top-k reports,
/// `<stem>.best.csv` next to it; with `path == "-"` only the summary is
/// written, to stdout. Returns the files written.
pub fn export_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: &Path,
) -> Result<Vec<PathBuf>> {
    let to_stdout = path.as_os_str() == "-";
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let mut w = open_output(path)?;
            w.write_all(report.to_json()?.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))?;
            written.push(path.to_path_buf());
        }
        ReportFormat::Csv => {
            write_summary_csv(report, open_output(path)?)?;
            written.push(path.to_path_buf());
            if !to_stdout {
                let records = sibling(path, "records");
                write_records_csv(report, open_output(&records)?)?;
                written.push(records);
                if !report.best.is_empty() {
                    let best = sibling(path, "best");
                    write_best_csv(report, open_output(&best)?)?;
                    written.push(best);
                }
            }
        }
    }
    Ok(written)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per threshold (or prefix): counts and per-classifier mean/std accuracy.
pub fn write_summary_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "threshold",
        "prefix",
        "repetitions",
        "mean_selected_count",
        "mean_normalized_count",
        "empty_selections",
        "truncated",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for c in &report.classifiers {
        header.push(format!("{c}_mean_accuracy"));
        header.push(format!("{c}_std_accuracy"));
    }
    w.write_record(&header)?;
    for row in &report.summary {
        let mut rec = vec![
            opt(row.threshold),
            opt(row.prefix),
            row.repetitions.to_string(),
            row.mean_selected_count.to_string(),
            row.mean_normalized_count.to_string(),
            row.empty_selections.to_string(),
            row.truncated.to_string(),
        ];
        for a in &row.accuracy {
            rec.push(a.mean.to_string());
            rec.push(a.std.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_records_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "repetition",
        "threshold",
        "prefix",
        "available",
        "selected_count",
        "normalized_count",
        "empty_selection",
        "truncated",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.classifiers.iter().map(|c| format!("{c}_accuracy")));
    header.push("selected".into());
    w.write_record(&header)?;
    for r in &report.records {
        let mut rec = vec![
            r.repetition.to_string(),
            r.threshold.to_string(),
            opt(r.prefix),
            r.available.to_string(),
            r.selected_count.to_string(),
            r.normalized_count.to_string(),
            r.empty_selection.to_string(),
            r.truncated.to_string(),
        ];
        rec.extend(r.accuracies.iter().map(f64::to_string));
        rec.push(
            r.selected
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_best_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["classifier", "prefix", "mean_accuracy", "std_accuracy"])?;
    for b in &report.best {
        w.write_record([
            b.classifier.clone(),
            b.prefix.to_string(),
            b.accuracy.mean.to_string(),
            b.accuracy.std.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
