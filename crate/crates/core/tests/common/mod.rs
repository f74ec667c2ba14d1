//! Oracles shared by the integration targets.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simple_structures::data::Dataset;

/// Brute-force KNN lists with (distance, index) ordering.
pub fn knn_oracle(rows: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..rows.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..rows.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let s: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    (s.sqrt(), j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|x| x.1).collect()
        })
        .collect()
}

/// Breadth-first closure; `expand(x)` decides whether x's neighbors are added.
pub fn closure_oracle(knn: &[Vec<usize>], seed: usize, expand: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut seen = BTreeSet::from([seed]);
    let mut queue = VecDeque::from([seed]);
    while let Some(x) = queue.pop_front() {
        if x != seed && !expand(x) {
            continue;
        }
        for &j in &knn[x] {
            if seen.insert(j) {
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().collect()
}

/// Majority test against brute-force neighbor lists, ties counted as correct.
pub fn majority_correct(knn: &[Vec<usize>], labels: &[usize], x: usize) -> bool {
    let same = knn[x].iter().filter(|&&j| labels[j] == labels[x]).count();
    2 * same >= knn[x].len()
}

pub fn random_dataset(n: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Dataset::from_numeric(rows, labels).unwrap()
}

/// Jittered square lattices far apart, each split into two classes by x.
pub fn lattice_structures(count: usize, side: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut sid = Vec::new();
    for s in 0..count {
        let ox = 100.0 * s as f64;
        for a in 0..side {
            for b in 0..side {
                rows.push(vec![
                    ox + a as f64 + rng.random_range(-0.05..0.05),
                    b as f64 + rng.random_range(-0.05..0.05),
                ]);
                labels.push(usize::from(a >= side / 2) + 2 * (s % 2));
                sid.push(s);
            }
        }
    }
    Dataset::from_numeric(rows, labels)
        .unwrap()
        .with_structures(sid)
        .unwrap()
}

/// Mean over positives of the precision among everything scored at least
/// as high as that positive.
pub fn ap_oracle(positive: &[bool], scores: &[f64]) -> f64 {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let mut total = 0.0;
    for i in 0..positive.len() {
        if !positive[i] {
            continue;
        }
        let above = (0..scores.len()).filter(|&j| scores[j] >= scores[i]).count() as f64;
        let pos_above = (0..scores.len())
            .filter(|&j| scores[j] >= scores[i] && positive[j])
            .count() as f64;
        total += pos_above / above;
    }
    total / n_pos
}
