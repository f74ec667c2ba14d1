//! Exact K-nearest-neighbor index over an active subset of instances.
//!
//! Neighbor lists are computed by brute force and ordered by
//! `(distance, original index)`, so ties always resolve to the lower index
//! and results do not depend on the parallel schedule.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::data::Embedding;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NeighborIndex {
    active: Vec<usize>,
    slot: Vec<Option<usize>>,
    k_requested: usize,
    k: usize,
    neighbors: Vec<Vec<usize>>,
    same_class: Vec<usize>,
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest other members of `pool` to instance `i`, nearest first.
fn nearest(emb: &Embedding, i: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (emb.distance(i, j), j))
        .collect();
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by_distance_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_distance_then_index);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Smallest same-class neighbor count that makes an instance correctly
/// classified: `ceil(k / 2)`.
pub fn majority_threshold(k: usize) -> usize {
    k.div_ceil(2)
}

/// Build the exact index over `active` (deduplicated). `k` larger than
/// `|active| - 1` is truncated and reported by [`NeighborIndex::truncated`].
pub fn build_index(
    emb: &Embedding,
    labels: &[usize],
    active: &[usize],
    k: usize,
) -> Result<NeighborIndex> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let mut active = active.to_vec();
    active.sort_unstable();
    active.dedup();
    if active.len() < 2 {
        return Err(Error::Domain(format!(
            "neighbor index needs at least 2 active instances, got {}",
            active.len()
        )));
    }
    if let Some(&bad) = active.iter().find(|&&i| i >= emb.len()) {
        return Err(Error::Domain(format!("instance {bad} out of range")));
    }
    let k_eff = k.min(active.len() - 1);
    let neighbors: Vec<Vec<usize>> = active
        .par_iter()
        .map(|&i| nearest(emb, i, &active, k_eff))
        .collect();
    let same_class = active
        .iter()
        .zip(&neighbors)
        .map(|(&i, nb)| nb.iter().filter(|&&j| labels[j] == labels[i]).count())
        .collect();
    let mut slot = vec![None; emb.len()];
    for (s, &i) in active.iter().enumerate() {
        slot[i] = Some(s);
    }
    Ok(NeighborIndex {
        active,
        slot,
        k_requested: k,
        k: k_eff,
        neighbors,
        same_class,
    })
}

impl NeighborIndex {
    /// Sorted active instances.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.slot.get(i).copied().flatten().is_some()
    }

    /// Effective neighbor count.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn truncated(&self) -> bool {
        self.k < self.k_requested
    }

    /// Ordered neighbors of an active instance.
    pub fn neighbors(&self, i: usize) -> Option<&[usize]> {
        let s = self.slot.get(i).copied().flatten()?;
        Some(&self.neighbors[s])
    }

    /// Number of neighbors sharing the instance's class.
    pub fn same_class_count(&self, i: usize) -> Option<usize> {
        let s = self.slot.get(i).copied().flatten()?;
        Some(self.same_class[s])
    }

    /// Whether `i` has at least `ceil(K/2)` same-class neighbors.
    pub fn is_correctly_classified(&self, i: usize) -> Result<bool> {
        self.same_class_count(i)
            .map(|c| c >= majority_threshold(self.k))
            .ok_or_else(|| Error::Domain(format!("instance {i} is not active")))
    }
}

/// Leave-one-out KNN error of a member set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LooError {
    pub error: f64,
    /// Set when the member set was a singleton and the error is 0 by convention.
    pub singleton: bool,
}

/// Fraction of `members` whose K-neighbor majority vote, taken within
/// `members`, is not uniquely their own label. Vote ties count as errors.
pub fn loo_knn_error(
    emb: &Embedding,
    labels: &[usize],
    members: &[usize],
    k: usize,
) -> Result<LooError> {
    let distinct: HashSet<usize> = members.iter().copied().collect();
    if distinct.len() < 2 {
        return Ok(LooError {
            error: 0.0,
            singleton: true,
        });
    }
    let idx = build_index(emb, labels, members, k)?;
    let n_classes = idx.active.iter().map(|&i| labels[i]).max().unwrap_or(0) + 1;
    let errors = idx
        .active
        .iter()
        .zip(&idx.neighbors)
        .filter(|(&i, nb)| {
            let mut votes = vec![0usize; n_classes];
            for &j in nb.iter() {
                votes[labels[j]] += 1;
            }
            let own = votes[labels[i]];
            let best = *votes.iter().max().expect("at least one class");
            let winners = votes.iter().filter(|&&v| v == best).count();
            !(own == best && winners == 1)
        })
        .count();
    Ok(LooError {
        error: errors as f64 / idx.active.len() as f64,
        singleton: false,
    })
}

/// Percentage of `s1` whose K nearest neighbors, computed over `s1 ∪ s2`,
/// include at least one member of `s2`.
pub fn overlap_percentage(
    emb: &Embedding,
    labels: &[usize],
    s1: &[usize],
    s2: &[usize],
    k: usize,
) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::Domain("overlap needs two nonempty sets".into()));
    }
    let second: HashSet<usize> = s2.iter().copied().collect();
    if s1.iter().any(|i| second.contains(i)) {
        return Err(Error::Domain("overlap sets must be disjoint".into()));
    }
    let union: Vec<usize> = s1.iter().chain(s2).copied().collect();
    let idx = build_index(emb, labels, &union, k)?;
    let first: HashSet<usize> = s1.iter().copied().collect();
    let crossing = first
        .iter()
        .filter(|&&i| {
            idx.neighbors(i)
                .expect("active")
                .iter()
                .any(|j| second.contains(j))
        })
        .count();
    Ok(100.0 * crossing as f64 / first.len() as f64)
}
