use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum-cost assignment of rows to columns on a rectangular cost matrix
/// (rows <= columns). Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // potentials and matching, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// `|identified[a] ∩ truth[b]|` for every pair.
pub fn overlap_matrix(identified: &[Vec<usize>], truth: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let universe = identified
        .iter()
        .chain(truth)
        .flatten()
        .max()
        .map_or(0, |&m| m + 1);
    let mut owner = vec![usize::MAX; universe];
    for (b, set) in truth.iter().enumerate() {
        for &i in set {
            owner[i] = b;
        }
    }
    identified
        .iter()
        .map(|set| {
            let mut row = vec![0; truth.len()];
            for &i in set {
                if owner[i] != usize::MAX {
                    row[owner[i]] += 1;
                }
            }
            row
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// Truth index for each identified structure, `None` when unmatched.
    pub identified_to_truth: Vec<Option<usize>>,
    pub total_overlap: usize,
}

impl Matching {
    pub fn truth_to_identified(&self, n_truth: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_truth];
        for (a, t) in self.identified_to_truth.iter().enumerate() {
            if let Some(b) = t {
                out[*b] = Some(a);
            }
        }
        out
    }
}

/// One-to-one matching maximizing total overlap. Pairs with zero overlap
/// are reported as unmatched.
pub fn match_structures(identified: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<Matching> {
    if identified.is_empty() || truth.is_empty() {
        return Err(Error::Domain("matching needs identified and truth structures".into()));
    }
    let overlap = overlap_matrix(identified, truth);
    let max = overlap.iter().flatten().copied().max().unwrap_or(0) as f64;
    let transpose = identified.len() > truth.len();
    let (rows, cols) = if transpose {
        (truth.len(), identified.len())
    } else {
        (identified.len(), truth.len())
    };
    let cost: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let o = if transpose { overlap[c][r] } else { overlap[r][c] };
                    max - o as f64
                })
                .collect()
        })
        .collect();
    let assign = hungarian(&cost);
    let mut identified_to_truth = vec![None; identified.len()];
    for (r, &c) in assign.iter().enumerate() {
        let (a, b) = if transpose { (c, r) } else { (r, c) };
        if overlap[a][b] > 0 {
            identified_to_truth[a] = Some(b);
        }
    }
    let total_overlap = identified_to_truth
        .iter()
        .enumerate()
        .filter_map(|(a, b)| b.map(|b| overlap[a][b]))
        .sum();
    Ok(Matching {
        identified_to_truth,
        total_overlap,
    })
}
