#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use overlap_fs::{load_csv, Dataset, LoadOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn wisconsin_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/wisconsin.csv")
}

pub fn wisconsin() -> Dataset {
    load_csv(wisconsin_path(), &LoadOptions::default()).expect("wisconsin fixture loads")
}

/// Random integer-valued dataset: every class gets at least two instances.
pub fn random_integer_dataset(rng: &mut ChaCha8Rng) -> (Vec<Vec<i64>>, Vec<usize>) {
    let n_classes = rng.random_range(2..=4);
    let n_attr = rng.random_range(1..=5);
    let n = rng.random_range(2 * n_classes..=30);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            if i < 2 * n_classes {
                i / 2
            } else {
                rng.random_range(0..n_classes)
            }
        })
        .collect();
    // shuffle so the forced pairs are not always first
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let spans: Vec<i64> = (0..n_attr).map(|_| rng.random_range(0..=12)).collect();
    let rows = (0..n)
        .map(|i| {
            spans
                .iter()
                .map(|&s| rng.random_range(0..=s) + labels[i] as i64 * rng.random_range(0..=2))
                .collect()
        })
        .collect();
    (rows, labels)
}

pub fn to_dataset(rows: &[Vec<i64>], labels: &[usize]) -> Dataset {
    Dataset::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect(),
        labels.to_vec(),
    )
    .unwrap()
}

/// Brute-force overlap table for integer data on unit bins.
///
/// Scans every unordered pair of the whole dataset once, tallying integer
/// differences into the class's intra map (both in class) or inter map
/// (exactly one in class). Overlap is the discrete min-sum of the two
/// probability vectors minus a quarter of the two end bins; a single bin
/// is full overlap.
pub struct OracleTable {
    pub overlap: Vec<Vec<f64>>,
    pub relative: Vec<Vec<f64>>,
    pub minimum: Vec<f64>,
}

pub fn oracle_table(rows: &[Vec<i64>], labels: &[usize]) -> OracleTable {
    let n_classes = labels.iter().max().unwrap() + 1;
    let n_attr = rows[0].len();
    let mut overlap = vec![vec![0.0; n_classes]; n_attr];
    for a in 0..n_attr {
        for c in 0..n_classes {
            let mut intra: BTreeMap<i64, u64> = BTreeMap::new();
            let mut inter: BTreeMap<i64, u64> = BTreeMap::new();
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let d = (rows[i][a] - rows[j][a]).abs();
                    match (labels[i] == c, labels[j] == c) {
                        (true, true) => *intra.entry(d).or_default() += 1,
                        (true, false) | (false, true) => *inter.entry(d).or_default() += 1,
                        _ => {}
                    }
                }
            }
            overlap[a][c] = oracle_overlap(&intra, &inter);
        }
    }
    let mut relative = overlap.clone();
    for c in 0..n_classes {
        let mut m = f64::INFINITY;
        for row in &overlap {
            if row[c] < m {
                m = row[c];
            }
        }
        for row in relative.iter_mut() {
            row[c] -= m;
        }
    }
    let minimum = relative
        .iter()
        .map(|r| {
            let mut m = f64::INFINITY;
            for &v in r {
                if v < m {
                    m = v;
                }
            }
            m
        })
        .collect();
    OracleTable {
        overlap,
        relative,
        minimum,
    }
}

/// Discrete min-sum `sum_k min(p_k, q_k)` over differences `0..=max`.
pub fn min_sum(intra: &BTreeMap<i64, u64>, inter: &BTreeMap<i64, u64>) -> (f64, f64, f64) {
    let n_intra: u64 = intra.values().sum();
    let n_inter: u64 = inter.values().sum();
    let max = *intra.keys().chain(inter.keys()).max().unwrap();
    let y = |k: i64| {
        let p = *intra.get(&k).unwrap_or(&0) as f64 / n_intra as f64;
        let q = *inter.get(&k).unwrap_or(&0) as f64 / n_inter as f64;
        if p < q {
            p
        } else {
            q
        }
    };
    let total: f64 = (0..=max).map(y).sum();
    (total, y(0), y(max))
}

pub fn oracle_overlap(intra: &BTreeMap<i64, u64>, inter: &BTreeMap<i64, u64>) -> f64 {
    let max = *intra.keys().chain(inter.keys()).max().unwrap();
    if max == 0 {
        return 1.0;
    }
    let (total, first, last) = min_sum(intra, inter);
    total - (first + last) / 4.0
}

pub fn count_map(values: &[f64]) -> BTreeMap<i64, u64> {
    let mut m = BTreeMap::new();
    for &v in values {
        *m.entry(v as i64).or_default() += 1;
    }
    m
}

/// Continuous `n_features`-wide, 3-class table with `informative`
/// class-shifted columns and uniform noise elsewhere.
pub fn synthetic_rows(
    seed: u64,
    per_class: usize,
    n_features: usize,
    informative: usize,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..3 * per_class {
        let c = i % 3;
        let row = (0..n_features)
            .map(|f| {
                let noise: f64 = (0..4).map(|_| rng.random::<f64>()).sum::<f64>() - 2.0;
                if f < informative {
                    noise + 1.5 * ((c + f) % 3) as f64
                } else {
                    noise
                }
            })
            .collect();
        rows.push(row);
        labels.push(c);
    }
    (rows, labels)
}

pub fn write_csv(path: &std::path::Path, rows: &[Vec<f64>], labels: &[usize]) {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    let header: Vec<String> = (0..rows[0].len())
        .map(|j| format!("f{j}"))
        .chain(["class".to_string()])
        .collect();
    writeln!(f, "{}", header.join(",")).unwrap();
    for (r, l) in rows.iter().zip(labels) {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(f, "{},c{}", cells.join(","), l).unwrap();
    }
}
