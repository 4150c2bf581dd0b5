//! Intra-class and inter-class difference distributions and their overlap area.
//!
//! For one attribute and one class, the intra-class set holds `|f_i - f_j|`
//! over unordered pairs inside the class and the inter-class set holds the
//! same over every (class, complement) pair. Both sets are histogrammed over
//! shared edges and normalized to unit area. The overlap area is the
//! trapezoid-rule integral of the pointwise minimum of the two densities,
//! sampled at bin centers, with zero-height points at the outer edges.
//!
//! On bins of equal width `w` that integral reduces to
//! `sum(min_k) * w - w * (min_first + min_last) / 4`, i.e. the discrete
//! min-sum minus a quarter of the two end bins.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MIN_CLASS_SIZE};
use crate::error::{Error, Result};

pub const MIN_UNIFORM_BINS: usize = 10;
pub const MAX_UNIFORM_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinMode {
    /// Integer-unit bins for integral attributes whose largest difference
    /// fits in [`MAX_UNIFORM_BINS`] bins, uniform-count bins otherwise.
    #[default]
    Auto,
    /// Unit-width bins centered on 0, 1, ..., max difference.
    IntegerUnit,
    /// Equal-width bins over [0, max difference].
    UniformCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BinSpec {
    pub mode: BinMode,
    /// Bin count for uniform bins. `None` uses `ceil(sqrt(m))` clamped to
    /// `[10, 256]`, where `m` is the smaller of the two difference-set sizes.
    pub bin_count: Option<usize>,
}

impl BinSpec {
    pub fn integer() -> Self {
        Self {
            mode: BinMode::IntegerUnit,
            bin_count: None,
        }
    }

    pub fn uniform(bin_count: Option<usize>) -> Self {
        Self {
            mode: BinMode::UniformCount,
            bin_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_count == Some(0) {
            return Err(Error::InvalidConfig("bin_count must be positive".into()));
        }
        Ok(())
    }

    /// Shared edges for one intra/inter pair of difference sets.
    pub fn edges(&self, attribute: usize, intra: &[f64], inter: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let max = intra.iter().chain(inter).copied().fold(0.0_f64, f64::max);
        let integral = intra.iter().chain(inter).all(|v| v.fract() == 0.0);
        let mode = match self.mode {
            BinMode::Auto if integral && max < MAX_UNIFORM_BINS as f64 => BinMode::IntegerUnit,
            BinMode::Auto => BinMode::UniformCount,
            m => m,
        };
        match mode {
            BinMode::IntegerUnit => {
                if !integral {
                    return Err(Error::NonIntegral { attribute });
                }
                Ok(integer_unit_edges(max as usize))
            }
            _ => {
                let count = self.bin_count.unwrap_or_else(|| {
                    let m = intra.len().min(inter.len()) as f64;
                    (m.sqrt().ceil() as usize).clamp(MIN_UNIFORM_BINS, MAX_UNIFORM_BINS)
                });
                let span = if max > 0.0 { max } else { 1.0 };
                Ok(uniform_edges(span, count))
            }
        }
    }
}

/// Edges `-0.5, 0.5, ..., max + 0.5`.
pub fn integer_unit_edges(max_difference: usize) -> Vec<f64> {
    (0..=max_difference + 1).map(|k| k as f64 - 0.5).collect()
}

/// `bins + 1` equal-width edges over `[0, span]`; the last edge is exactly `span`.
pub fn uniform_edges(span: f64, bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=bins).map(|k| span * k as f64 / bins as f64).collect();
    edges[bins] = span;
    edges
}

/// Area-normalized histogram of absolute differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceDistribution {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub sample_count: usize,
}

impl DifferenceDistribution {
    pub fn bin_count(&self) -> usize {
        self.densities.len()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| w[1] - w[0])
    }

    /// Total area `sum(density * width)`; 1 up to rounding.
    pub fn area(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.widths())
            .map(|(d, w)| d * w)
            .sum()
    }
}

/// `|f_i - f_j|` over unordered pairs `i < j` of the class's instances.
pub fn intra_differences(train: &Dataset, class_id: usize, attribute: usize) -> Result<Vec<f64>> {
    check_attribute(train, attribute)?;
    let values = train.attribute_values(attribute, class_id, true);
    if values.len() < MIN_CLASS_SIZE {
        return Err(class_too_small(train, class_id, values.len()));
    }
    Ok(pairwise_within(&values))
}

/// `|f_i - f_j|` for every instance `i` of the class and `j` of any other class.
pub fn inter_differences(train: &Dataset, class_id: usize, attribute: usize) -> Result<Vec<f64>> {
    check_attribute(train, attribute)?;
    if class_id >= train.n_classes() {
        return Err(Error::InvalidConfig(format!(
            "class id {class_id} out of range"
        )));
    }
    let inside = train.attribute_values(attribute, class_id, true);
    let outside = train.attribute_values(attribute, class_id, false);
    if outside.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok(pairwise_between(&inside, &outside))
}

fn pairwise_within(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for (i, &a) in values.iter().enumerate() {
        out.extend(values[i + 1..].iter().map(|&b| (a - b).abs()));
    }
    out
}

fn pairwise_between(inside: &[f64], outside: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(inside.len() * outside.len());
    for &a in inside {
        out.extend(outside.iter().map(|&b| (a - b).abs()));
    }
    out
}

fn check_attribute(train: &Dataset, attribute: usize) -> Result<()> {
    if attribute >= train.n_attributes() {
        return Err(Error::FeatureOutOfRange {
            index: attribute,
            count: train.n_attributes(),
        });
    }
    Ok(())
}

fn class_too_small(train: &Dataset, class_id: usize, count: usize) -> Error {
    Error::ClassTooSmall {
        class: train
            .class_names()
            .get(class_id)
            .cloned()
            .unwrap_or_else(|| class_id.to_string()),
        count,
        required: MIN_CLASS_SIZE,
    }
}

/// Histogram of `differences` over `edges`, normalized so that
/// `sum(density * width) == 1`. Bins are half-open except the last, which
/// is closed on the right.
pub fn build_histogram(differences: &[f64], edges: &[f64]) -> Result<DifferenceDistribution> {
    if differences.is_empty() {
        return Err(Error::EmptyInput("no differences to histogram"));
    }
    if edges.len() < 2
        || edges
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidConfig(
            "bin edges must be strictly ascending".into(),
        ));
    }
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0usize; bins];
    for &v in differences {
        if !(v >= lo && v <= hi) {
            return Err(Error::ValueOutsideEdges { value: v, lo, hi });
        }
        let k = edges.partition_point(|&e| e <= v).clamp(1, bins) - 1;
        counts[k] += 1;
    }
    let n = differences.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    Ok(DifferenceDistribution {
        bin_edges: edges.to_vec(),
        densities,
        sample_count: differences.len(),
    })
}

/// Composite trapezoid rule over sampled points.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[1] + y[0]))
        .sum()
}

/// Overlap area of two distributions on identical edges, in `[0, 1]`.
///
/// A single-bin pair puts all mass of both distributions in the same bin
/// and is reported as full overlap.
pub fn overlap_area(intra: &DifferenceDistribution, inter: &DifferenceDistribution) -> Result<f64> {
    if intra.bin_edges != inter.bin_edges {
        return Err(Error::MismatchedEdges);
    }
    let bins = intra.bin_count();
    if bins == 1 {
        return Ok(1.0);
    }
    let edges = &intra.bin_edges;
    let mut xs = Vec::with_capacity(bins + 2);
    let mut ys = Vec::with_capacity(bins + 2);
    xs.push(edges[0]);
    ys.push(0.0);
    for ((x, &p), &q) in intra.centers().zip(&intra.densities).zip(&inter.densities) {
        xs.push(x);
        ys.push(p.min(q));
    }
    xs.push(edges[bins]);
    ys.push(0.0);
    Ok(trapezoid(&xs, &ys).clamp(0.0, 1.0))
}

/// Uniform subsampling of difference pairs for very large classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCap {
    pub max_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapConfig {
    pub bins: BinSpec,
    /// Off by default: every pair is enumerated.
    pub pair_cap: Option<PairCap>,
}

impl From<BinSpec> for OverlapConfig {
    fn from(bins: BinSpec) -> Self {
        Self {
            bins,
            pair_cap: None,
        }
    }
}

/// Intra and inter distributions plus their overlap for one (attribute, class).
pub fn overlap_cell(
    train: &Dataset,
    attribute: usize,
    class_id: usize,
    config: &OverlapConfig,
) -> Result<(DifferenceDistribution, DifferenceDistribution, f64)> {
    let (intra, inter) = match config.pair_cap {
        None => (
            intra_differences(train, class_id, attribute)?,
            inter_differences(train, class_id, attribute)?,
        ),
        Some(cap) => sampled_differences(train, class_id, attribute, cap)?,
    };
    let edges = config.bins.edges(attribute, &intra, &inter)?;
    let p = build_histogram(&intra, &edges)?;
    let q = build_histogram(&inter, &edges)?;
    let area = overlap_area(&p, &q)?;
    Ok((p, q, area))
}

fn sampled_differences(
    train: &Dataset,
    class_id: usize,
    attribute: usize,
    cap: PairCap,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_attribute(train, attribute)?;
    let inside = train.attribute_values(attribute, class_id, true);
    let outside = train.attribute_values(attribute, class_id, false);
    if inside.len() < MIN_CLASS_SIZE {
        return Err(class_too_small(train, class_id, inside.len()));
    }
    if outside.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cap.seed);
    rng.set_stream(((attribute as u64) << 20) ^ class_id as u64);

    let n = inside.len();
    let intra = if n * (n - 1) / 2 <= cap.max_pairs {
        pairwise_within(&inside)
    } else {
        (0..cap.max_pairs)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (inside[i] - inside[j]).abs()
            })
            .collect()
    };
    let inter = if n * outside.len() <= cap.max_pairs {
        pairwise_between(&inside, &outside)
    } else {
        (0..cap.max_pairs)
            .map(|_| {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..outside.len());
                (inside[i] - outside[j]).abs()
            })
            .collect()
    };
    Ok((intra, inter))
}

/// Per-attribute, per-class overlap areas with relative and minimum overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub attribute_names: Vec<String>,
    pub class_names: Vec<String>,
    /// `overlap[a][c]`: overlap area of attribute `a` for class `c`.
    pub overlap: Vec<Vec<f64>>,
    /// `relative[a][c] = overlap[a][c] - min_a' overlap[a'][c]`.
    pub relative: Vec<Vec<f64>>,
    /// `minimum[a] = min_c relative[a][c]`.
    pub minimum: Vec<f64>,
}

impl OverlapTable {
    /// Derives relative and minimum overlap from raw overlap areas.
    pub fn from_overlap(
        attribute_names: Vec<String>,
        class_names: Vec<String>,
        overlap: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_classes = class_names.len();
        if overlap.len() != attribute_names.len() || overlap.iter().any(|r| r.len() != n_classes) {
            return Err(Error::InvalidConfig("overlap matrix shape mismatch".into()));
        }
        if overlap.is_empty() || n_classes == 0 {
            return Err(Error::EmptyInput(
                "overlap table needs attributes and classes",
            ));
        }
        let class_min: Vec<f64> = (0..n_classes)
            .map(|c| overlap.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min))
            .collect();
        let relative: Vec<Vec<f64>> = overlap
            .iter()
            .map(|r| r.iter().zip(&class_min).map(|(v, m)| v - m).collect())
            .collect();
        let minimum = relative
            .iter()
            .map(|r: &Vec<f64>| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        Ok(Self {
            attribute_names,
            class_names,
            overlap,
            relative,
            minimum,
        })
    }

    pub fn n_attributes(&self) -> usize {
        self.minimum.len()
    }

    /// One row per attribute: name, overlap per class, relative overlap per
    /// class, minimum overlap.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["attribute".to_string()];
        header.extend(self.class_names.iter().map(|c| format!("overlap_{c}")));
        header.extend(self.class_names.iter().map(|c| format!("relative_{c}")));
        header.push("minimum_overlap".into());
        w.write_record(&header)?;
        for (a, name) in self.attribute_names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.overlap[a].iter().map(f64::to_string));
            rec.extend(self.relative[a].iter().map(f64::to_string));
            rec.push(self.minimum[a].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Overlap table over all attributes and classes of `train`, enumerating every pair.
pub fn overlap_table(train: &Dataset, bins: &BinSpec) -> Result<OverlapTable> {
    overlap_table_with(train, &OverlapConfig::from(*bins))
}

/// Overlap table with an explicit configuration. Attributes are processed
/// in parallel; each cell is computed sequentially so results do not depend
/// on the thread count.
pub fn overlap_table_with(train: &Dataset, config: &OverlapConfig) -> Result<OverlapTable> {
    config.bins.validate()?;
    if train.n_classes() < 2 {
        return Err(Error::SingleClass);
    }
    if train.n_attributes() == 0 {
        return Err(Error::EmptyInput("dataset has no attributes"));
    }
    train.require_class_size(MIN_CLASS_SIZE)?;
    let overlap = (0..train.n_attributes())
        .into_par_iter()
        .map(|a| {
            (0..train.n_classes())
                .map(|c| overlap_cell(train, a, c, config).map(|(_, _, area)| area))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    OverlapTable::from_overlap(
        train.attribute_names().to_vec(),
        train.class_names().to_vec(),
        overlap,
    )
}
