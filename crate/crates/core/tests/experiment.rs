mod common;

use std::path::Path;

use overlap_fs::experiment::{
    run, write_best_csv, write_records_csv, write_summary_csv, SCHEMA_VERSION,
};
use overlap_fs::{
    export_report, load_csv, overlap_table, run_experiment, BinSpec, ClassifierConfig, Dataset,
    ExperimentReport, ExperimentSpec, LoadOptions, Protocol, ReportFormat, SplitSpec,
};

fn synthetic(dir: &Path, per_class: usize, n_features: usize) -> std::path::PathBuf {
    let (rows, labels) = common::synthetic_rows(11, per_class, n_features, 3);
    let path = dir.join("synthetic.csv");
    common::write_csv(&path, &rows, &labels);
    path
}

fn spec(path: &Path, protocol: Protocol, repetitions: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(path, protocol);
    s.split = SplitSpec {
        train_fraction: 0.5,
        seed: 3,
        repetitions,
    };
    s
}

#[test]
fn single_repetition_summary_equals_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 12, 8);
    let mut s = spec(&path, Protocol::FixedThreshold { threshold: 0.3 }, 1);
    s.classifiers = vec![ClassifierConfig::default(), ClassifierConfig::naive_bayes()];
    let report = run_experiment(&s).unwrap();
    assert_eq!(report.records.len(), 1);
    assert_eq!(report.summary.len(), 1);
    let (rec, row) = (&report.records[0], &report.summary[0]);
    for ci in 0..2 {
        assert_eq!(row.accuracy[ci].mean, rec.accuracies[ci]);
        assert_eq!(row.accuracy[ci].std, 0.0);
    }
    assert_eq!(row.mean_selected_count, rec.selected_count as f64);
    assert_eq!(report.classifiers, ["nn-euclidean", "nb"]);
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 10, 12);
    let s = spec(
        &path,
        Protocol::TopKRanked {
            threshold: 0.5,
            k: 6,
            prefixes: None,
        },
        4,
    );
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one
        .install(|| run_experiment(&s))
        .unwrap()
        .to_json()
        .unwrap();
    let b = many
        .install(|| run_experiment(&s))
        .unwrap()
        .to_json()
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_counts_grow_with_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 10, 15);
    let report = run_experiment(&spec(
        &path,
        Protocol::ThresholdSweep {
            grid: overlap_fs::selection::default_grid(),
        },
        3,
    ))
    .unwrap();
    assert_eq!(report.summary.len(), 10);
    for rep in 0..3 {
        let counts: Vec<usize> = report
            .records
            .iter()
            .filter(|r| r.repetition == rep)
            .map(|r| r.selected_count)
            .collect();
        assert_eq!(counts.len(), 10);
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    }
}

#[test]
fn threshold_above_every_minimum_selects_everything() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 10, 6);
    let report =
        run_experiment(&spec(&path, Protocol::FixedThreshold { threshold: 1.0 }, 2)).unwrap();
    for r in &report.records {
        assert_eq!(r.selected, (0..6).collect::<Vec<_>>());
        assert_eq!(r.normalized_count, 1.0);
    }
}

#[test]
fn zero_threshold_is_an_empty_selection() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 10, 6);
    let report =
        run_experiment(&spec(&path, Protocol::FixedThreshold { threshold: 0.0 }, 2)).unwrap();
    assert!(report
        .records
        .iter()
        .all(|r| r.empty_selection && r.accuracies == [0.0]));
    assert_eq!(report.summary[0].empty_selections, 2);
}

#[test]
fn short_selection_saturates_prefixes() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 10, 5);
    let report = run_experiment(&spec(
        &path,
        Protocol::TopKRanked {
            threshold: 1.0,
            k: 8,
            prefixes: None,
        },
        1,
    ))
    .unwrap();
    let recs = &report.records;
    assert_eq!(recs.len(), 8);
    for r in &recs[5..] {
        assert!(r.truncated);
        assert_eq!(r.selected_count, 5);
        assert_eq!(r.accuracies, recs[4].accuracies);
    }
    assert!(recs[..5].iter().all(|r| !r.truncated));
    assert_eq!(report.best.len(), 1);
}

#[test]
fn duplicate_column_does_not_change_prefix_accuracy() {
    // attribute 1 duplicates attribute 0, so the one-feature prefix scored
    // on either gives the same 1-NN predictions
    let (rows, labels) = common::synthetic_rows(5, 12, 3, 1);
    let wide: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[0], r[1], r[2]]).collect();
    let narrow = Dataset::from_rows(rows, labels.clone()).unwrap();
    let wide = Dataset::from_rows(wide, labels).unwrap();
    let s = |k| {
        let mut s = ExperimentSpec::new(
            "unused.csv",
            Protocol::TopKRanked {
                threshold: 1.0,
                k,
                prefixes: Some(vec![1]),
            },
        );
        s.split.repetitions = 3;
        s
    };
    let a = run(&s(1), &narrow).unwrap();
    let b = run(&s(1), &wide).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.accuracies, y.accuracies);
    }
}

#[test]
fn json_round_trip_and_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 8, 5);
    let report = run_experiment(&spec(
        &path,
        Protocol::TopKRanked {
            threshold: 0.6,
            k: 3,
            prefixes: None,
        },
        2,
    ))
    .unwrap();
    assert_eq!(report.schema_version, SCHEMA_VERSION);

    let json = dir.path().join("report.json");
    export_report(&report, ReportFormat::Json, &json).unwrap();
    let back = ExperimentReport::from_json_file(&json).unwrap();
    assert_eq!(back, report);

    let csv = dir.path().join("report.csv");
    let written = export_report(&report, ReportFormat::Csv, &csv).unwrap();
    assert_eq!(written.len(), 3);
    let summary = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "threshold,prefix,repetitions,mean_selected_count,mean_normalized_count,empty_selections,truncated,nn-euclidean_mean_accuracy,nn-euclidean_std_accuracy"
    );
    assert_eq!(summary.lines().count(), 1 + 3);

    let mut buf = Vec::new();
    write_records_csv(&report, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 6);
    let mut buf = Vec::new();
    write_best_csv(&report, &mut buf).unwrap();
    assert!(String::from_utf8(buf)
        .unwrap()
        .starts_with("classifier,prefix,mean_accuracy,std_accuracy\n"));
    let mut buf = Vec::new();
    write_summary_csv(&report, &mut buf).unwrap();
    assert_eq!(buf, std::fs::read(&csv).unwrap());
}

#[test]
fn toy_overlap_table_matches_golden_file() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let ds = load_csv(data.join("toy3.csv"), &LoadOptions::default()).unwrap();
    let table = overlap_table(&ds, &BinSpec::integer()).unwrap();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let golden = std::fs::read_to_string(data.join("toy3_overlap.golden.csv")).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), golden);

    let rows: Vec<Vec<i64>> = ds
        .rows()
        .map(|r| r.iter().map(|&v| v as i64).collect())
        .collect();
    let oracle = common::oracle_table(&rows, ds.labels());
    for a in 0..2 {
        for c in 0..3 {
            assert!((table.overlap[a][c] - oracle.overlap[a][c]).abs() < 1e-12);
        }
    }
    // attribute b, class x by hand: min-sum 6/18, end correction 1/72
    assert!((table.overlap[1][0] - 23.0 / 72.0).abs() < 1e-12);
}

#[test]
fn invalid_specs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic(dir.path(), 8, 3);
    let mut s = spec(&path, Protocol::FixedThreshold { threshold: -0.1 }, 1);
    assert!(run_experiment(&s).is_err());
    s.protocol = Protocol::ThresholdSweep {
        grid: vec![0.3, 0.2],
    };
    assert!(run_experiment(&s).is_err());
    s.protocol = Protocol::FixedThreshold { threshold: 0.2 };
    s.split.train_fraction = 1.5;
    assert!(run_experiment(&s).is_err());
    s.split.train_fraction = 0.5;
    s.classifiers.clear();
    assert!(run_experiment(&s).is_err());
}
