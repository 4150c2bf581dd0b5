//! Evaluation classifiers: 1-nearest-neighbour and Gaussian naive Bayes,
//! leave-one-out cross-validation and train/test evaluation on a feature
//! subset.
//!
//! Every tie (equal distances, equal log posteriors) resolves to the
//! smallest index: the earliest training row for nearest neighbour, the
//! smallest class id for naive Bayes.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MIN_CLASS_SIZE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    #[default]
    NearestNeighbor,
    NaiveBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    #[default]
    None,
    /// Min-max scaling with statistics from the training partition only.
    /// Applied to nearest-neighbour distances.
    MinMaxFromTrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub metric: Metric,
    pub variance_floor: f64,
    pub scaling: Scaling,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::NearestNeighbor,
            metric: Metric::Euclidean,
            variance_floor: 1e-9,
            scaling: Scaling::None,
        }
    }
}

impl ClassifierConfig {
    pub fn nearest_neighbor() -> Self {
        Self::default()
    }

    pub fn naive_bayes() -> Self {
        Self {
            kind: ClassifierKind::NaiveBayes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "variance_floor must be positive, got {}",
                self.variance_floor
            )));
        }
        Ok(())
    }

    /// Short label used in report columns, e.g. `nn-euclidean` or `nb`.
    pub fn label(&self) -> String {
        match self.kind {
            ClassifierKind::NearestNeighbor => {
                let metric = match self.metric {
                    Metric::Euclidean => "euclidean",
                    Metric::Manhattan => "manhattan",
                };
                match self.scaling {
                    Scaling::None => format!("nn-{metric}"),
                    Scaling::MinMaxFromTrain => format!("nn-{metric}-minmax"),
                }
            }
            ClassifierKind::NaiveBayes => "nb".to_string(),
        }
    }
}

fn check_features(features: &[usize], n_attributes: usize) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if let Some(&index) = features.iter().find(|&&f| f >= n_attributes) {
        return Err(Error::FeatureOutOfRange {
            index,
            count: n_attributes,
        });
    }
    Ok(())
}

/// Per-feature affine map `(x - offset) * scale`.
#[derive(Debug, Clone)]
struct FeatureScaler {
    offset: Vec<f64>,
    scale: Vec<f64>,
}

impl FeatureScaler {
    fn fit(train: &Dataset, features: &[usize], scaling: Scaling) -> Self {
        match scaling {
            Scaling::None => Self {
                offset: vec![0.0; features.len()],
                scale: vec![1.0; features.len()],
            },
            Scaling::MinMaxFromTrain => {
                let mut offset = Vec::with_capacity(features.len());
                let mut scale = Vec::with_capacity(features.len());
                for &f in features {
                    let (lo, hi) = train
                        .rows()
                        .map(|r| r[f])
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                            (lo.min(v), hi.max(v))
                        });
                    offset.push(lo);
                    scale.push(if hi > lo { 1.0 / (hi - lo) } else { 0.0 });
                }
                Self { offset, scale }
            }
        }
    }

    fn project(&self, row: &[f64], features: &[usize]) -> Vec<f64> {
        features
            .iter()
            .enumerate()
            .map(|(k, &f)| (row[f] - self.offset[k]) * self.scale[k])
            .collect()
    }
}

fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        // Squared distance: same ordering, no rounding from sqrt.
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

/// Training rows projected onto a feature subset, ready for 1-NN queries.
#[derive(Debug, Clone)]
pub struct NearestNeighborIndex {
    features: Vec<usize>,
    scaler: FeatureScaler,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    metric: Metric,
}

impl NearestNeighborIndex {
    pub fn build(train: &Dataset, features: &[usize], config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        check_features(features, train.n_attributes())?;
        if train.n_instances() == 0 {
            return Err(Error::EmptyInput(
                "nearest neighbour needs training instances",
            ));
        }
        let scaler = FeatureScaler::fit(train, features, config.scaling);
        let points = train.rows().map(|r| scaler.project(r, features)).collect();
        Ok(Self {
            features: features.to_vec(),
            scaler,
            points,
            labels: train.labels().to_vec(),
            metric: config.metric,
        })
    }

    /// Index of the nearest training row, skipping `exclude`.
    fn nearest(&self, point: &[f64], exclude: Option<usize>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            let d = distance(self.metric, point, p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Predicted class for a full-width instance row.
    pub fn predict(&self, query: &[f64]) -> usize {
        let point = self.scaler.project(query, &self.features);
        let i = self.nearest(&point, None).expect("index is nonempty");
        self.labels[i]
    }
}

/// Label of the nearest training instance on `features`.
pub fn nn_predict(
    train: &Dataset,
    query: &[f64],
    features: &[usize],
    config: &ClassifierConfig,
) -> Result<usize> {
    if query.len() != train.n_attributes() {
        return Err(Error::Incompatible(format!(
            "query has {} values, dataset has {} attributes",
            query.len(),
            train.n_attributes()
        )));
    }
    Ok(NearestNeighborIndex::build(train, features, config)?.predict(query))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class_id: usize,
    pub prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Gaussian naive Bayes over a feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub features: Vec<usize>,
    /// Classes present in the training data, by ascending id.
    pub classes: Vec<ClassModel>,
}

/// Fits a naive Bayes model; every class needs at least two instances.
pub fn nb_fit(train: &Dataset, features: &[usize], variance_floor: f64) -> Result<NaiveBayesModel> {
    train.require_class_size(MIN_CLASS_SIZE)?;
    fit_naive_bayes(train, features, variance_floor, None)
}

/// Fit over all rows except `exclude`. Classes without instances are left
/// out of the model; a class with one instance gets the variance floor.
fn fit_naive_bayes(
    train: &Dataset,
    features: &[usize],
    variance_floor: f64,
    exclude: Option<usize>,
) -> Result<NaiveBayesModel> {
    check_features(features, train.n_attributes())?;
    if variance_floor.is_nan() || variance_floor <= 0.0 {
        return Err(Error::InvalidConfig(
            "variance_floor must be positive".into(),
        ));
    }
    let k = train.n_classes();
    let m = features.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; m]; k];
    for (i, row) in train.rows().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        let c = train.label(i);
        counts[c] += 1;
        for (s, &f) in sums[c].iter_mut().zip(features) {
            *s += row[f];
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput("naive Bayes needs training instances"));
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect())
        .collect();
    let mut sq = vec![vec![0.0; m]; k];
    for (i, row) in train.rows().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        let c = train.label(i);
        for ((s, &f), mu) in sq[c].iter_mut().zip(features).zip(&means[c]) {
            let d = row[f] - mu;
            *s += d * d;
        }
    }
    let classes = (0..k)
        .filter(|&c| counts[c] > 0)
        .map(|c| ClassModel {
            class_id: c,
            prior: counts[c] as f64 / total as f64,
            means: means[c].clone(),
            variances: sq[c]
                .iter()
                .map(|s| {
                    let v = if counts[c] > 1 {
                        s / (counts[c] - 1) as f64
                    } else {
                        0.0
                    };
                    v.max(variance_floor)
                })
                .collect(),
        })
        .collect();
    Ok(NaiveBayesModel {
        features: features.to_vec(),
        classes,
    })
}

impl NaiveBayesModel {
    /// `ln prior + sum ln N(x_f; mean, variance)` for each class in the model.
    pub fn log_posteriors(&self, query: &[f64]) -> Vec<(usize, f64)> {
        const LN_2PI: f64 = 1.837_877_066_409_345_5;
        self.classes
            .iter()
            .map(|cm| {
                let ll: f64 = self
                    .features
                    .iter()
                    .zip(cm.means.iter().zip(&cm.variances))
                    .map(|(&f, (mu, var))| {
                        let d = query[f] - mu;
                        -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
                    })
                    .sum();
                (cm.class_id, cm.prior.ln() + ll)
            })
            .collect()
    }

    pub fn predict(&self, query: &[f64]) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (c, lp) in self.log_posteriors(query) {
            if best.is_none_or(|(_, b)| lp > b) {
                best = Some((c, lp));
            }
        }
        best.expect("model has at least one class").0
    }
}

pub fn nb_predict(model: &NaiveBayesModel, query: &[f64]) -> usize {
    model.predict(query)
}

/// Leave-one-out outcome with fold diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvOutcome {
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    /// Folds whose held-out instance was the last of its class in the
    /// training part; the prediction is still made.
    pub empty_class_folds: Vec<usize>,
}

/// Leave-one-out cross-validation: each instance predicted from the other `n - 1`.
///
/// Min-max scaling, when configured, uses statistics of the whole set.
pub fn loocv(
    train: &Dataset,
    features: &[usize],
    config: &ClassifierConfig,
) -> Result<LoocvOutcome> {
    config.validate()?;
    check_features(features, train.n_attributes())?;
    let n = train.n_instances();
    if n < 2 {
        return Err(Error::EmptyInput(
            "leave-one-out needs at least two instances",
        ));
    }
    let counts = train.class_counts();
    let empty_class_folds = (0..n).filter(|&i| counts[train.label(i)] == 1).collect();
    let predictions: Vec<usize> = match config.kind {
        ClassifierKind::NearestNeighbor => {
            let index = NearestNeighborIndex::build(train, features, config)?;
            (0..n)
                .map(|i| {
                    let j = index.nearest(&index.points[i], Some(i)).expect("n >= 2");
                    index.labels[j]
                })
                .collect()
        }
        ClassifierKind::NaiveBayes => (0..n)
            .map(|i| {
                fit_naive_bayes(train, features, config.variance_floor, Some(i))
                    .map(|m| m.predict(train.row(i)))
            })
            .collect::<Result<_>>()?,
    };
    let correct = predictions
        .iter()
        .zip(train.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(LoocvOutcome {
        accuracy: correct as f64 / n as f64,
        predictions,
        empty_class_folds,
    })
}

pub fn loocv_accuracy(
    train: &Dataset,
    features: &[usize],
    config: &ClassifierConfig,
) -> Result<f64> {
    loocv(train, features, config).map(|o| o.accuracy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

/// Fits on `train` only and predicts every instance of `test`.
pub fn evaluate(
    train: &Dataset,
    test: &Dataset,
    features: &[usize],
    config: &ClassifierConfig,
) -> Result<EvaluationResult> {
    config.validate()?;
    if train.n_attributes() != test.n_attributes() {
        return Err(Error::Incompatible(format!(
            "{} vs {} attributes",
            train.n_attributes(),
            test.n_attributes()
        )));
    }
    if train.class_names() != test.class_names() {
        return Err(Error::Incompatible("class vocabularies differ".into()));
    }
    check_features(features, train.n_attributes())?;
    if test.n_instances() == 0 {
        return Err(Error::EmptyInput("test partition is empty"));
    }
    let predictions: Vec<usize> = match config.kind {
        ClassifierKind::NearestNeighbor => {
            let index = NearestNeighborIndex::build(train, features, config)?;
            test.rows().map(|r| index.predict(r)).collect()
        }
        ClassifierKind::NaiveBayes => {
            let model = fit_naive_bayes(train, features, config.variance_floor, None)?;
            test.rows().map(|r| model.predict(r)).collect()
        }
    };
    let k = train.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predictions.iter().zip(test.labels()) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvaluationResult {
        accuracy: correct as f64 / test.n_instances() as f64,
        confusion,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]], labels: &[usize]) -> Dataset {
        Dataset::from_rows(rows.iter().map(|r| r.to_vec()).collect(), labels.to_vec()).unwrap()
    }

    #[test]
    fn single_training_instance_always_wins() {
        let train = ds(&[&[3.0, 4.0]], &[0]);
        let nn = ClassifierConfig::nearest_neighbor();
        assert_eq!(nn_predict(&train, &[100.0, -7.0], &[0, 1], &nn).unwrap(), 0);
    }

    #[test]
    fn exact_match_and_lowest_index_tie() {
        let train = Dataset::from_rows(
            vec![vec![1.0], vec![5.0], vec![5.0], vec![9.0]],
            vec![0, 2, 1, 0],
        )
        .unwrap();
        let nn = ClassifierConfig::nearest_neighbor();
        assert_eq!(nn_predict(&train, &[5.0], &[0], &nn).unwrap(), 2);
        // 3 is equidistant from rows 0 (label 0) and 1 (label 2)
        assert_eq!(nn_predict(&train, &[3.0], &[0], &nn).unwrap(), 0);
    }

    #[test]
    fn hand_computed_one_dimensional_query() {
        // |0.9 - 0| = 0.9 < |0.9 - 2| = 1.1
        let train = ds(&[&[0.0], &[2.0], &[10.0]], &[0, 1, 1]);
        let nn = ClassifierConfig::nearest_neighbor();
        assert_eq!(nn_predict(&train, &[0.9], &[0], &nn).unwrap(), 0);
        assert_eq!(nn_predict(&train, &[1.1], &[0], &nn).unwrap(), 1);
    }

    #[test]
    fn metric_changes_the_neighbour() {
        // from (0,0): A=(3,3) euclid^2 18 manhattan 6; B=(0,4.5) euclid^2 20.25 manhattan 4.5
        let train = ds(&[&[3.0, 3.0], &[0.0, 4.5]], &[0, 1]);
        let euclid = ClassifierConfig::nearest_neighbor();
        let manhattan = ClassifierConfig {
            metric: Metric::Manhattan,
            ..euclid
        };
        assert_eq!(
            nn_predict(&train, &[0.0, 0.0], &[0, 1], &euclid).unwrap(),
            0
        );
        assert_eq!(
            nn_predict(&train, &[0.0, 0.0], &[0, 1], &manhattan).unwrap(),
            1
        );
    }

    #[test]
    fn min_max_scaling_uses_train_ranges() {
        // Unscaled, feature 1 dominates. Scaled to [0,1], feature 0 decides.
        let train = ds(&[&[0.0, 0.0], &[1.0, 1000.0], &[0.0, 1000.0]], &[0, 1, 0]);
        let scaled = ClassifierConfig {
            scaling: Scaling::MinMaxFromTrain,
            ..Default::default()
        };
        let plain = ClassifierConfig::default();
        let q = [1.0, 400.0];
        assert_eq!(nn_predict(&train, &q, &[0, 1], &plain).unwrap(), 0);
        assert_eq!(nn_predict(&train, &q, &[0, 1], &scaled).unwrap(), 1);
    }

    #[test]
    fn empty_feature_set_is_an_error() {
        let train = ds(&[&[1.0]], &[0]);
        let err = nn_predict(&train, &[1.0], &[], &ClassifierConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyFeatureSet));
    }

    #[test]
    fn nb_fit_priors_means_and_floored_variances() {
        let train = ds(
            &[&[1.0, 7.0], &[3.0, 7.0], &[10.0, 1.0], &[12.0, 2.0]],
            &[0, 0, 1, 1],
        );
        let model = nb_fit(&train, &[0, 1], 1e-9).unwrap();
        let c0 = &model.classes[0];
        assert_eq!(c0.prior, 0.5);
        assert_eq!(c0.means, vec![2.0, 7.0]);
        // {1,3}: unbiased variance 2; constant feature gets the floor
        assert_eq!(c0.variances, vec![2.0, 1e-9]);
        assert_eq!(model.classes[1].prior, 0.5);
    }

    #[test]
    fn nb_fit_requires_two_per_class() {
        let train = ds(&[&[1.0], &[3.0], &[10.0]], &[0, 0, 1]);
        assert!(matches!(
            nb_fit(&train, &[0], 1e-9),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn nb_predicts_the_closer_mean_and_breaks_symmetry_to_class_zero() {
        let train = ds(&[&[-1.0], &[1.0], &[9.0], &[11.0]], &[0, 0, 1, 1]);
        let model = nb_fit(&train, &[0], 1e-9).unwrap();
        assert_eq!(nb_predict(&model, &[0.0]), 0);
        assert_eq!(nb_predict(&model, &[10.0]), 1);
        assert_eq!(nb_predict(&model, &[5.0]), 0);
    }

    #[test]
    fn nb_log_posterior_matches_hand_computation() {
        // class 0: {0, 2} mean 1 var 2, prior 2/5
        // class 1: {4, 6, 8} mean 6 var 4, prior 3/5
        let train = ds(&[&[0.0], &[2.0], &[4.0], &[6.0], &[8.0]], &[0, 0, 1, 1, 1]);
        let model = nb_fit(&train, &[0], 1e-9).unwrap();
        let x = 3.0;
        let ln_pdf = |mu: f64, var: f64| {
            let pdf = (-(x - mu) * (x - mu) / (2.0 * var)).exp()
                / (2.0 * std::f64::consts::PI * var).sqrt();
            pdf.ln()
        };
        let expected0 = (0.4f64).ln() + ln_pdf(1.0, 2.0);
        let expected1 = (0.6f64).ln() + ln_pdf(6.0, 4.0);
        let lp = model.log_posteriors(&[x]);
        assert!((lp[0].1 - expected0).abs() < 1e-12);
        assert!((lp[1].1 - expected1).abs() < 1e-12);
        // expected0 ≈ -3.1818, expected1 ≈ -3.2479
        assert_eq!(model.predict(&[x]), 0);
    }

    #[test]
    fn loocv_trivial_pairs() {
        let same = ds(&[&[1.0], &[1.0]], &[0, 0]);
        let nn = ClassifierConfig::nearest_neighbor();
        assert_eq!(loocv_accuracy(&same, &[0], &nn).unwrap(), 1.0);
        let adversarial = ds(&[&[1.0], &[2.0]], &[0, 1]);
        let out = loocv(&adversarial, &[0], &nn).unwrap();
        assert_eq!(out.accuracy, 0.0);
        assert_eq!(out.predictions, vec![1, 0]);
        assert_eq!(out.empty_class_folds, vec![0, 1]);
    }

    #[test]
    fn loocv_naive_bayes_drops_empty_class() {
        let train = ds(&[&[0.0], &[0.2], &[0.1], &[5.0]], &[0, 0, 0, 1]);
        let out = loocv(&train, &[0], &ClassifierConfig::naive_bayes()).unwrap();
        assert_eq!(out.predictions, vec![0, 0, 0, 0]);
        assert_eq!(out.empty_class_folds, vec![3]);
        assert_eq!(out.accuracy, 0.75);
    }

    #[test]
    fn self_evaluation_is_perfect_and_confusion_is_consistent() {
        let train = ds(
            &[&[0.0, 1.0], &[2.0, 2.0], &[5.0, 1.0], &[7.0, 3.0]],
            &[0, 1, 1, 0],
        );
        let r = evaluate(&train, &train, &[0, 1], &ClassifierConfig::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, vec![vec![2, 0], vec![0, 2]]);
    }

    #[test]
    fn evaluate_rejects_out_of_range_feature() {
        let train = ds(&[&[0.0]], &[0]);
        assert!(matches!(
            evaluate(&train, &train, &[1], &ClassifierConfig::default()),
            Err(Error::FeatureOutOfRange { index: 1, count: 1 })
        ));
    }

    #[test]
    fn variance_floor_must_be_positive() {
        let cfg = ClassifierConfig {
            variance_floor: 0.0,
            ..ClassifierConfig::naive_bayes()
        };
        assert!(cfg.validate().is_err());
    }
}
