//! Labeled tabular datasets: CSV loading, missing-value imputation and
//! seeded stratified splitting.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of instances per class; intra-class differences need a pair.
pub const MIN_CLASS_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Imputation {
    /// Replace missing cells with the median of the observed cells of the column.
    #[default]
    Median,
    /// Discard every row that has a missing cell.
    DropRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    /// Label column index; `None` means the last column.
    pub label_column: Option<usize>,
    pub has_header: bool,
    pub missing_token: String,
    pub imputation: Imputation,
    /// Columns ignored entirely (e.g. sample identifiers).
    pub skip_columns: Vec<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            label_column: None,
            has_header: true,
            missing_token: "?".to_string(),
            imputation: Imputation::Median,
            skip_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub imputation: Imputation,
    pub imputed_cells: usize,
    pub dropped_rows: usize,
}

/// Instances × attributes table with one class label per instance.
///
/// Values are stored row-major and are always complete: missing cells are
/// resolved at load time by the configured [`Imputation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n_attributes: usize,
    labels: Vec<usize>,
    attribute_names: Vec<String>,
    class_names: Vec<String>,
    provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset from rows. Checks shapes and label range only; class
    /// sizes are checked separately with [`Dataset::require_class_size`].
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        attribute_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let n_attributes = attribute_names.len();
        if n_attributes == 0 {
            return Err(Error::EmptyInput("no attribute columns"));
        }
        let mut values = Vec::with_capacity(rows.len() * n_attributes);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_attributes {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has {} values, expected {n_attributes}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has a non-finite value"
                )));
            }
            values.extend(row);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            values,
            n_attributes,
            labels,
            attribute_names,
            class_names,
            provenance: Provenance {
                source: None,
                imputation: Imputation::Median,
                imputed_cells: 0,
                dropped_rows: 0,
            },
        })
    }

    /// Convenience constructor with generated attribute and class names.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let n_attributes = rows.first().map_or(0, Vec::len);
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(
            rows,
            labels,
            (0..n_attributes).map(|j| format!("attr_{j}")).collect(),
            (0..n_classes).map(|c| format!("class_{c}")).collect(),
        )
    }

    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_attributes..(i + 1) * self.n_attributes]
    }

    pub fn value(&self, i: usize, attribute: usize) -> f64 {
        self.values[i * self.n_attributes + attribute]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values
            .chunks(self.n_attributes.max(1))
            .take(self.n_instances())
    }

    pub fn column(&self, attribute: usize) -> Vec<f64> {
        (0..self.n_instances())
            .map(|i| self.value(i, attribute))
            .collect()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Instance count per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices of one class, ascending.
    pub fn class_rows(&self, class_id: usize) -> Vec<usize> {
        (0..self.n_instances())
            .filter(|&i| self.labels[i] == class_id)
            .collect()
    }

    /// Values of `attribute` for the rows of `class_id` (`in_class`) or of
    /// every other class (`!in_class`), in row order.
    pub fn attribute_values(&self, attribute: usize, class_id: usize, in_class: bool) -> Vec<f64> {
        (0..self.n_instances())
            .filter(|&i| (self.labels[i] == class_id) == in_class)
            .map(|i| self.value(i, attribute))
            .collect()
    }

    pub fn require_class_size(&self, min: usize) -> Result<()> {
        for (c, &n) in self.class_counts().iter().enumerate() {
            if n < min {
                return Err(Error::ClassTooSmall {
                    class: self.class_names[c].clone(),
                    count: n,
                    required: min,
                });
            }
        }
        Ok(())
    }

    /// New dataset holding the given rows in the given order. Keeps the full
    /// class vocabulary even if some class ends up empty.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.n_attributes);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            values,
            n_attributes: self.n_attributes,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            attribute_names: self.attribute_names.clone(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Dataset restricted to a subset of attribute columns.
    pub fn select_attributes(&self, attributes: &[usize]) -> Result<Dataset> {
        for &a in attributes {
            if a >= self.n_attributes {
                return Err(Error::FeatureOutOfRange {
                    index: a,
                    count: self.n_attributes,
                });
            }
        }
        let mut values = Vec::with_capacity(self.n_instances() * attributes.len());
        for row in self.rows() {
            values.extend(attributes.iter().map(|&a| row[a]));
        }
        Ok(Dataset {
            values,
            n_attributes: attributes.len(),
            labels: self.labels.clone(),
            attribute_names: attributes
                .iter()
                .map(|&a| self.attribute_names[a].clone())
                .collect(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        })
    }
}

/// Loads a labeled CSV file. See [`load_csv_reader`].
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = load_csv_reader(file, options)?;
    ds.provenance.source = Some(path.to_path_buf());
    Ok(ds)
}

/// Parses a labeled CSV stream.
///
/// Class tokens become dense ids in first-appearance order. Cells equal to
/// `missing_token` are imputed per `options.imputation`; any other
/// non-numeric cell is a schema error. Every class must end up with at
/// least [`MIN_CLASS_SIZE`] instances.
pub fn load_csv_reader<R: Read>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut layout: Option<(usize, Vec<usize>)> = None;

    for (idx, record) in rdr.records().enumerate() {
        let line = idx as u64 + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        let (label_col, attr_cols) = match &layout {
            Some(l) => l,
            None => {
                let width = record.len();
                let label_col = options.label_column.unwrap_or(width.saturating_sub(1));
                if label_col >= width {
                    return Err(Error::InvalidConfig(format!(
                        "label column {label_col} out of range for {width} columns"
                    )));
                }
                let attr_cols = (0..width)
                    .filter(|&c| c != label_col && !options.skip_columns.contains(&c))
                    .collect();
                layout.insert((label_col, attr_cols))
            }
        };
        if idx == 0 && options.has_header {
            header = Some(attr_cols.iter().map(|&c| record[c].to_string()).collect());
            continue;
        }

        let token = &record[*label_col];
        if token.is_empty() || token == options.missing_token {
            return Err(Error::MalformedRow {
                line,
                message: format!("missing class label in column {label_col}"),
            });
        }
        let id = *class_ids.entry(token.to_string()).or_insert_with(|| {
            class_names.push(token.to_string());
            class_names.len() - 1
        });
        labels.push(id);

        let mut row = Vec::with_capacity(attr_cols.len());
        for &c in attr_cols.iter() {
            let cell = &record[c];
            if cell == options.missing_token {
                row.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    line,
                    column: c,
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumeric {
                        line,
                        column: c,
                        value: cell.to_string(),
                    });
                }
                row.push(Some(v));
            }
        }
        cells.push(row);
    }

    let Some((_, attr_cols)) = layout else {
        return Err(Error::EmptyInput("csv has no rows"));
    };
    if cells.is_empty() {
        return Err(Error::EmptyInput("csv has no data rows"));
    }
    let attribute_names =
        header.unwrap_or_else(|| attr_cols.iter().map(|c| format!("attr_{c}")).collect());

    let (rows, labels, imputed_cells, dropped_rows) = match options.imputation {
        Imputation::Median => {
            let (rows, imputed) = impute_median(cells, &attr_cols)?;
            (rows, labels, imputed, 0)
        }
        Imputation::DropRow => {
            let before = cells.len();
            let (rows, labels): (Vec<_>, Vec<_>) = cells
                .into_iter()
                .zip(labels)
                .filter_map(|(row, l)| {
                    row.into_iter()
                        .collect::<Option<Vec<f64>>>()
                        .map(|r| (r, l))
                })
                .unzip();
            let dropped = before - rows.len();
            (rows, labels, 0, dropped)
        }
    };

    let mut ds = Dataset::new(rows, labels, attribute_names, class_names)?;
    ds.provenance = Provenance {
        source: None,
        imputation: options.imputation,
        imputed_cells,
        dropped_rows,
    };
    ds.require_class_size(MIN_CLASS_SIZE)?;
    Ok(ds)
}

fn impute_median(
    cells: Vec<Vec<Option<f64>>>,
    attr_cols: &[usize],
) -> Result<(Vec<Vec<f64>>, usize)> {
    let n_attr = attr_cols.len();
    let mut medians = Vec::with_capacity(n_attr);
    for (j, &col) in attr_cols.iter().enumerate() {
        let mut observed: Vec<f64> = cells.iter().filter_map(|r| r[j]).collect();
        if observed.len() == cells.len() {
            medians.push(f64::NAN); // never read
            continue;
        }
        if observed.is_empty() {
            return Err(Error::EmptyColumn { column: col });
        }
        medians.push(median(&mut observed));
    }
    let mut imputed = 0;
    let rows = cells
        .into_iter()
        .map(|r| {
            r.into_iter()
                .enumerate()
                .map(|(j, v)| {
                    v.unwrap_or_else(|| {
                        imputed += 1;
                        medians[j]
                    })
                })
                .collect()
        })
        .collect();
    Ok((rows, imputed))
}

/// Median of a nonempty slice; mean of the two middle values for even sizes.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Parameters of the repeated stratified split protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.5,
            seed: 0,
            repetitions: 30,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be positive".into()));
        }
        Ok(())
    }

    /// Number of training instances taken from a class of size `n`.
    pub fn train_count(&self, n: usize) -> usize {
        (n as f64 * self.train_fraction).floor() as usize
    }

    /// Generator for one repetition: the root seed keys the ChaCha key and
    /// the repetition index selects the stream, so repetitions can be drawn
    /// in any order.
    fn rng(&self, repetition: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(repetition as u64);
        rng
    }
}

/// Row indices of a train/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified partition for one repetition: per class `c`,
/// `floor(n_c * train_fraction)` instances go to train, the rest to test.
pub fn stratified_split_indices(
    dataset: &Dataset,
    spec: &SplitSpec,
    repetition: usize,
) -> Result<SplitIndices> {
    spec.validate()?;
    if repetition >= spec.repetitions {
        return Err(Error::InvalidConfig(format!(
            "repetition {repetition} out of range for {} repetitions",
            spec.repetitions
        )));
    }
    let mut rng = spec.rng(repetition);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class_id in 0..dataset.n_classes() {
        let mut rows = dataset.class_rows(class_id);
        let take = spec.train_count(rows.len());
        if take < MIN_CLASS_SIZE {
            return Err(Error::ClassTooSmall {
                class: dataset.class_names()[class_id].clone(),
                count: take,
                required: MIN_CLASS_SIZE,
            });
        }
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..take]);
        test.extend_from_slice(&rows[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Stratified train/test datasets for one repetition. Both keep the
/// original row order of `dataset`.
pub fn stratified_split(
    dataset: &Dataset,
    spec: &SplitSpec,
    repetition: usize,
) -> Result<(Dataset, Dataset)> {
    let idx = stratified_split_indices(dataset, spec, repetition)?;
    Ok((dataset.subset(&idx.train), dataset.subset(&idx.test)))
}
