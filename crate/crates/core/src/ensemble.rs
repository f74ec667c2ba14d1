//! One local model per structure, with test-time routing to the nearest
//! structure centroid under the identification metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{centroid, Dataset, DistanceConfig, MetricSpace};
use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, LocalModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureEnsemble {
    pub space: MetricSpace,
    /// Structure centroids in original units.
    pub centroids: Vec<Vec<f64>>,
    projected: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub local_models: Vec<LocalModel>,
    pub learner: LearnerSpec,
    pub n_classes: usize,
}

/// Fit `spec` on each member set. The routing space is fitted on the whole
/// of `ds` so it matches the identification embedding.
pub fn train_ensemble(
    ds: &Dataset,
    structures: &[Vec<usize>],
    distance: DistanceConfig,
    spec: &LearnerSpec,
) -> Result<StructureEnsemble> {
    if structures.is_empty() {
        return Err(Error::Domain("ensemble needs at least one structure".into()));
    }
    let space = MetricSpace::fit(ds, distance)?;
    let local_models = structures
        .par_iter()
        .enumerate()
        .map(|(s, members)| {
            LocalModel::fit(ds, members, spec).map_err(|e| Error::LocalFit {
                structure: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let centroids = structures
        .iter()
        .map(|m| centroid(ds, m).map(|c| c.values))
        .collect::<Result<Vec<_>>>()?;
    let projected = centroids.iter().map(|c| space.project(c)).collect();
    Ok(StructureEnsemble {
        space,
        centroids,
        projected,
        sizes: structures.iter().map(Vec::len).collect(),
        local_models,
        learner: *spec,
        n_classes: ds.n_classes(),
    })
}

/// A single model on every instance, wrapped as a one-route ensemble.
pub fn train_whole(ds: &Dataset, distance: DistanceConfig, spec: &LearnerSpec) -> Result<StructureEnsemble> {
    let all: Vec<usize> = (0..ds.n()).collect();
    train_ensemble(ds, &[all], distance, spec)
}

impl StructureEnsemble {
    pub fn len(&self) -> usize {
        self.local_models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_models.is_empty()
    }

    /// Nearest centroid; ties go to the lowest structure index.
    pub fn route(&self, row: &[f64]) -> usize {
        let p = self.space.project(row);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (s, c) in self.projected.iter().enumerate() {
            let d = self.space.distance(&p, c);
            if d < best_d {
                best_d = d;
                best = s;
            }
        }
        best
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        self.local_models[self.route(row)].predict(row)
    }

    /// Routed model's probabilities over all global classes, zero for
    /// classes its structure never contained.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        self.local_models[self.route(row)]
            .predict_proba(row)
            .extend_to(self.n_classes)
    }

    pub fn predict_all(&self, ds: &Dataset, rows: &[usize]) -> Vec<usize> {
        rows.par_iter().map(|&i| self.predict(ds.row(i))).collect()
    }

    pub fn predict_proba_all(&self, ds: &Dataset, rows: &[usize]) -> Vec<Vec<f64>> {
        rows.par_iter().map(|&i| self.predict_proba(ds.row(i))).collect()
    }
}
