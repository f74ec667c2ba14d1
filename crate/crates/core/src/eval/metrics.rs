use serde::{Deserialize, Serialize};

use super::matching::{match_structures, Matching};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecovery {
    pub truth: usize,
    pub identified: Option<usize>,
    /// `|R ∩ S| / |R|`, zero when unmatched.
    pub precision: f64,
    /// `|R ∩ S| / |S|`, zero when unmatched.
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub matching: Matching,
    pub per_truth: Vec<TruthRecovery>,
}

fn intersection(a: &[usize], b: &[usize]) -> usize {
    let set: std::collections::HashSet<usize> = b.iter().copied().collect();
    a.iter().filter(|i| set.contains(i)).count()
}

/// Precision and recall for each truth structure under a given matching.
pub fn score_with(matching: &Matching, identified: &[Vec<usize>], truth: &[Vec<usize>]) -> RecoveryScore {
    let back = matching.truth_to_identified(truth.len());
    let per_truth = truth
        .iter()
        .enumerate()
        .map(|(b, s)| match back[b] {
            Some(a) => {
                let r = &identified[a];
                let both = intersection(r, s) as f64;
                TruthRecovery {
                    truth: b,
                    identified: Some(a),
                    precision: if r.is_empty() { 0.0 } else { both / r.len() as f64 },
                    recall: if s.is_empty() { 0.0 } else { both / s.len() as f64 },
                }
            }
            None => TruthRecovery {
                truth: b,
                identified: None,
                precision: 0.0,
                recall: 0.0,
            },
        })
        .collect();
    RecoveryScore {
        matching: matching.clone(),
        per_truth,
    }
}

pub fn recovery_scores(identified: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<RecoveryScore> {
    let matching = match_structures(identified, truth)?;
    Ok(score_with(&matching, identified, truth))
}

pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// `Σ size_j · metric_j / Σ size_j`.
pub fn size_weighted(sizes: &[usize], values: &[f64]) -> f64 {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return 0.0;
    }
    sizes.iter().zip(values).map(|(&s, v)| s as f64 * v).sum::<f64>() / total as f64
}

/// Average precision of one binary ranking: descending-score sweep with
/// tied scores grouped, precision taken at each group boundary and weighted
/// by the recall gained. `None` when there are no positives or no negatives.
pub fn average_precision(positive: &[bool], scores: &[f64]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == positive.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut g = 0;
    while g < order.len() {
        let mut end = g;
        let mut group_pos = 0;
        while end < order.len() && scores[order[end]] == scores[order[g]] {
            group_pos += usize::from(positive[order[end]]);
            end += 1;
        }
        tp += group_pos;
        seen += end - g;
        ap += (group_pos as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        g = end;
    }
    Some(ap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Auprc {
    /// Macro average over evaluated classes; `None` when every class is degenerate.
    pub value: Option<f64>,
    pub per_class: Vec<Option<f64>>,
    /// Classes left out because all or none of the instances belong to them.
    pub skipped: Vec<usize>,
}

/// Binary problems score the minority class as positive; otherwise each
/// class is scored one-vs-rest and the results are macro-averaged.
pub fn auprc(labels: &[usize], probs: &[Vec<f64>]) -> Auprc {
    let k = probs.first().map_or(0, Vec::len);
    let mut counts = vec![0usize; k];
    for &y in labels {
        counts[y] += 1;
    }
    let class_ap = |c: usize| {
        let pos: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        average_precision(&pos, &scores)
    };
    let per_class: Vec<Option<f64>> = (0..k).map(class_ap).collect();
    let skipped: Vec<usize> = (0..k).filter(|&c| per_class[c].is_none()).collect();
    let value = if k == 2 {
        // minority positive; ties go to the lower class id
        let c = usize::from(counts[1] < counts[0]);
        per_class[c]
    } else {
        let vals: Vec<f64> = per_class.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Auprc {
        value,
        per_class,
        skipped,
    }
}

/// Mean with a percentile interval.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        ci_low: percentile(&sorted, 0.025),
        ci_high: percentile(&sorted, 0.975),
        n: values.len(),
    }
}
