//! Threshold selection on minimum overlap, cross-validated threshold
//! search, and ranking of selected attributes by individual accuracy.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{loocv_accuracy, ClassifierConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::overlap::{overlap_table, BinSpec, OverlapTable};

pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// `0.05, 0.10, ..., 0.50`.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub threshold: f64,
    /// Ascending attribute indices with minimum overlap strictly below the threshold.
    pub selected: Vec<usize>,
    pub table: OverlapTable,
}

impl SelectionResult {
    pub fn selected_names(&self) -> Vec<&str> {
        self.selected
            .iter()
            .map(|&a| self.table.attribute_names[a].as_str())
            .collect()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be a finite nonnegative number, got {threshold}"
        )));
    }
    Ok(())
}

/// Indices `a` with `minimum[a] < threshold`, ascending.
pub fn select_below(minimum: &[f64], threshold: f64) -> Vec<usize> {
    minimum
        .iter()
        .enumerate()
        .filter(|(_, &m)| m < threshold)
        .map(|(a, _)| a)
        .collect()
}

/// Attributes whose minimum overlap is strictly below `threshold`. An empty
/// selection is a valid result.
pub fn select_by_threshold(table: &OverlapTable, threshold: f64) -> Result<SelectionResult> {
    check_threshold(threshold)?;
    Ok(SelectionResult {
        threshold,
        selected: select_below(&table.minimum, threshold),
        table: table.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub selected_count: usize,
    /// Leave-one-out accuracy on the training set; 0 when nothing is selected.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub best_threshold: f64,
    pub best_accuracy: f64,
    pub curve: Vec<ThresholdPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("threshold grid is empty".into()));
    }
    for &t in grid {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!(
                "grid threshold {t} outside [0, 1]"
            )));
        }
    }
    if grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidConfig(
            "threshold grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Picks the grid threshold with the best leave-one-out accuracy on `train`.
/// Ties go to the smaller threshold.
pub fn heuristic_threshold(
    train: &Dataset,
    bins: &BinSpec,
    grid: &[f64],
    classifier: &ClassifierConfig,
) -> Result<ThresholdSearch> {
    let table = overlap_table(train, bins)?;
    threshold_search(train, &table, grid, classifier)
}

/// [`heuristic_threshold`] with a precomputed overlap table of `train`.
pub fn threshold_search(
    train: &Dataset,
    table: &OverlapTable,
    grid: &[f64],
    classifier: &ClassifierConfig,
) -> Result<ThresholdSearch> {
    check_grid(grid)?;
    classifier.validate()?;
    let mut curve: Vec<ThresholdPoint> = Vec::with_capacity(grid.len());
    for &threshold in grid {
        let selected = select_below(&table.minimum, threshold);
        // Identical subsets score identically; reuse the previous point.
        let accuracy = match curve.last() {
            Some(prev) if prev.selected_count == selected.len() => prev.accuracy,
            _ if selected.is_empty() => 0.0,
            _ => loocv_accuracy(train, &selected, classifier)?,
        };
        curve.push(ThresholdPoint {
            threshold,
            selected_count: selected.len(),
            accuracy,
        });
    }
    let best = curve
        .iter()
        .fold(None::<&ThresholdPoint>, |best, p| match best {
            Some(b) if p.accuracy <= b.accuracy => Some(b),
            _ => Some(p),
        })
        .expect("grid is nonempty");
    Ok(ThresholdSearch {
        best_threshold: best.threshold,
        best_accuracy: best.accuracy,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub attribute: usize,
    pub name: String,
    pub accuracy: f64,
    pub minimum_overlap: f64,
}

/// Selected attributes by descending individual accuracy, ties by ascending index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub entries: Vec<RankedFeature>,
}

impl RankedFeatures {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.attribute).collect()
    }

    /// Ranked attributes with their accuracy and minimum overlap.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "attribute",
            "name",
            "individual_accuracy",
            "minimum_overlap",
        ])?;
        for e in &self.entries {
            w.write_record([
                e.attribute.to_string(),
                e.name.clone(),
                e.accuracy.to_string(),
                e.minimum_overlap.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Scores each selected attribute alone by leave-one-out accuracy on `train`.
pub fn rank_features(
    train: &Dataset,
    selection: &SelectionResult,
    classifier: &ClassifierConfig,
) -> Result<RankedFeatures> {
    if selection.selected.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let scores = selection
        .selected
        .par_iter()
        .map(|&a| loocv_accuracy(train, &[a], classifier))
        .collect::<Result<Vec<f64>>>()?;
    let mut entries: Vec<RankedFeature> = selection
        .selected
        .iter()
        .zip(scores)
        .map(|(&a, accuracy)| RankedFeature {
            attribute: a,
            name: selection.table.attribute_names[a].clone(),
            accuracy,
            minimum_overlap: selection.table.minimum[a],
        })
        .collect();
    entries.sort_by(|x, y| {
        y.accuracy
            .total_cmp(&x.accuracy)
            .then(x.attribute.cmp(&y.attribute))
    });
    Ok(RankedFeatures { entries })
}

/// Attribute indices of the first `min(k, len)` ranked entries, ascending.
pub fn top_k(ranked: &RankedFeatures, k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = ranked.entries.iter().take(k).map(|e| e.attribute).collect();
    out.sort_unstable();
    out
}
