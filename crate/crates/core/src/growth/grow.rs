use serde::{Deserialize, Serialize};

use crate::neighbors::NeighborIndex;

/// How misclassified frontier instances are treated during guarded growth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectPolicy {
    /// Keep the instance in the grown set but never expand from it.
    #[default]
    Admit,
    /// Leave the instance out of the grown set entirely.
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthRule {
    /// Expand from every reached instance.
    Vanilla,
    /// Expand only from instances whose neighbor majority matches their label.
    Guarded(RejectPolicy),
}

impl Default for GrowthRule {
    fn default() -> Self {
        GrowthRule::Guarded(RejectPolicy::Admit)
    }
}

/// One region being grown from a seed, advanced one frontier at a time.
#[derive(Clone, Debug)]
pub struct GrowthState {
    in_grown: Vec<bool>,
    visited: Vec<bool>,
    /// Grown set in insertion order.
    pub grown: Vec<usize>,
    /// Instances added in the last step, still to be classified.
    pub frontier: Vec<usize>,
    pub frontier_admitted: Vec<usize>,
    pub frontier_rejected: Vec<usize>,
    pub step: usize,
}

impl GrowthState {
    /// Seed plus its neighbors. The seed itself is always expanded.
    pub fn start(idx: &NeighborIndex, seed: usize) -> Self {
        let n = idx.active().last().map_or(0, |&m| m + 1).max(seed + 1);
        let mut state = GrowthState {
            in_grown: vec![false; n],
            visited: vec![false; n],
            grown: vec![seed],
            frontier: Vec::new(),
            frontier_admitted: Vec::new(),
            frontier_rejected: Vec::new(),
            step: 1,
        };
        state.in_grown[seed] = true;
        state.visited[seed] = true;
        for &j in idx.neighbors(seed).unwrap_or(&[]) {
            state.add(j);
        }
        state
    }

    fn add(&mut self, j: usize) {
        if !self.visited[j] {
            self.visited[j] = true;
            self.in_grown[j] = true;
            self.grown.push(j);
            self.frontier.push(j);
        }
    }

    /// Classify the current frontier and expand from its admitted part.
    /// Returns false once the frontier is empty.
    pub fn advance(&mut self, idx: &NeighborIndex, rule: GrowthRule) -> bool {
        if self.frontier.is_empty() {
            return false;
        }
        let frontier = std::mem::take(&mut self.frontier);
        let (admitted, rejected): (Vec<usize>, Vec<usize>) =
            frontier.iter().partition(|&&x| match rule {
                GrowthRule::Vanilla => true,
                GrowthRule::Guarded(_) => idx.is_correctly_classified(x).unwrap_or(false),
            });
        if rule == GrowthRule::Guarded(RejectPolicy::Drop) {
            for &x in &rejected {
                self.in_grown[x] = false;
            }
            self.grown.retain(|&x| self.in_grown[x]);
        }
        for &x in &admitted {
            for &j in idx.neighbors(x).unwrap_or(&[]) {
                self.add(j);
            }
        }
        self.frontier_admitted = admitted;
        self.frontier_rejected = rejected;
        self.step += 1;
        true
    }

    pub fn into_members(mut self) -> Vec<usize> {
        self.grown.sort_unstable();
        self.grown
    }
}

/// Grow from `seed` under `rule` until no new instances are reached.
/// Returns the sorted member set.
pub fn grow(idx: &NeighborIndex, seed: usize, rule: GrowthRule) -> Vec<usize> {
    let mut state = GrowthState::start(idx, seed);
    while state.advance(idx, rule) {}
    state.into_members()
}

/// Recursive closure of the seed over the KNN out-edge graph.
pub fn grow_vanilla(idx: &NeighborIndex, seed: usize) -> Vec<usize> {
    grow(idx, seed, GrowthRule::Vanilla)
}

/// Closure that expands only from correctly classified instances;
/// misclassified instances that are reached stay in the set.
pub fn grow_guarded(idx: &NeighborIndex, seed: usize) -> Vec<usize> {
    grow(idx, seed, GrowthRule::Guarded(RejectPolicy::Admit))
}
