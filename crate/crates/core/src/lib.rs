//! Filter-based feature selection by the overlap area between intra-class
//! and inter-class attribute difference distributions.
//!
//! Pipeline:
//!
//! 1. [`dataset`]: load a labeled CSV, impute missing cells, draw seeded
//!    stratified train/test splits.
//! 2. [`overlap`]: per attribute and class, histogram the within-class and
//!    between-class absolute differences on the training partition and
//!    integrate the minimum of the two densities. Subtracting each class's
//!    smallest overlap gives the relative overlap; its minimum over classes
//!    is the selection statistic.
//! 3. [`selection`]: keep attributes whose minimum overlap is below a
//!    threshold, search the threshold by leave-one-out accuracy, and rank
//!    selected attributes by their individual leave-one-out accuracy.
//! 4. [`classify`]: 1-nearest-neighbour and Gaussian naive Bayes evaluation.
//! 5. [`experiment`]: repeated-split protocols (fixed threshold, threshold
//!    sweep, top-k ranked prefixes) with mean ± sample-std reports.

pub mod classify;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod overlap;
pub mod selection;

pub use classify::{
    evaluate, loocv, loocv_accuracy, nb_fit, nb_predict, nn_predict, ClassifierConfig,
    ClassifierKind, EvaluationResult, Metric, NaiveBayesModel, Scaling,
};
pub use dataset::{
    load_csv, load_csv_reader, stratified_split, stratified_split_indices, Dataset, Imputation,
    LoadOptions, SplitSpec,
};
pub use error::{Error, Result};
pub use experiment::{
    export_report, run_experiment, run_fixed_threshold, run_threshold_sweep, run_top_k,
    ExperimentReport, ExperimentSpec, Protocol, ReportFormat, ThresholdMode,
};
pub use overlap::{
    build_histogram, inter_differences, intra_differences, overlap_area, overlap_table,
    overlap_table_with, BinMode, BinSpec, DifferenceDistribution, OverlapConfig, OverlapTable,
};
pub use selection::{
    heuristic_threshold, rank_features, select_by_threshold, top_k, RankedFeatures,
    SelectionResult, ThresholdSearch,
};
