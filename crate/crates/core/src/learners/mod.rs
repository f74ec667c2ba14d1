//! Interpretable local learners and the mixture baseline.

mod encode;
pub mod gmm;
pub mod logistic;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use encode::FeatureEncoder;
pub use gmm::{gmm_assign, gmm_fit, GmmConfig, GmmModel};
pub use logistic::{lr_fit, ClassCoefficients, LogisticModel, LogisticObjective, LrHyper};
pub use tree::{dt_fit, dt_predict, TreeHyper, TreeModel};

/// Probabilities over the classes a model saw during fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProbs {
    pub classes: Vec<usize>,
    pub probs: Vec<f64>,
    pub unseen_level: bool,
}

impl ClassProbs {
    /// Most probable class; ties go to the lowest class id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = j;
            }
        }
        self.classes[best]
    }

    /// Dense vector over `n_classes` with zeros for classes never seen.
    pub fn extend_to(&self, n_classes: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_classes];
        for (&c, &p) in self.classes.iter().zip(&self.probs) {
            out[c] = p;
        }
        out
    }
}

pub fn lr_predict_proba(model: &LogisticModel, row: &[f64]) -> ClassProbs {
    model.predict_proba(row)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Logistic(LrHyper),
    Tree(TreeHyper),
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::Logistic(LrHyper::default())
    }
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Logistic(_) => "logistic",
            LearnerSpec::Tree(_) => "tree",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::Logistic(h) => {
                if !(h.l2.is_finite() && h.l2 >= 0.0) {
                    return Err(Error::Config(format!("l2 must be a nonnegative number, got {}", h.l2)));
                }
                if h.max_iters == 0 {
                    return Err(Error::Config("max_iters must be at least 1".into()));
                }
                if !(h.tol > 0.0) {
                    return Err(Error::Config(format!("tol must be positive, got {}", h.tol)));
                }
            }
            LearnerSpec::Tree(h) => {
                if h.min_leaf == 0 {
                    return Err(Error::Config("min_leaf must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalModel {
    Logistic(LogisticModel),
    Tree(TreeModel),
}

impl LocalModel {
    pub fn fit(ds: &Dataset, members: &[usize], spec: &LearnerSpec) -> Result<Self> {
        Ok(match spec {
            LearnerSpec::Logistic(h) => LocalModel::Logistic(lr_fit(ds, members, h)?),
            LearnerSpec::Tree(h) => LocalModel::Tree(dt_fit(ds, members, h)?),
        })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        match self {
            LocalModel::Logistic(m) => m.predict(row),
            LocalModel::Tree(m) => m.predict(row),
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> ClassProbs {
        match self {
            LocalModel::Logistic(m) => m.predict_proba(row),
            LocalModel::Tree(m) => m.predict_proba(row),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extend_fills_missing_classes_with_zero() {
        let p = ClassProbs {
            classes: vec![0, 2],
            probs: vec![0.25, 0.75],
            unseen_level: false,
        };
        assert_eq!(p.extend_to(4), vec![0.25, 0.0, 0.75, 0.0]);
        assert_eq!(p.argmax(), 2);
    }

    #[test]
    fn argmax_ties_to_lowest_class() {
        let p = ClassProbs {
            classes: vec![1, 3],
            probs: vec![0.5, 0.5],
            unseen_level: false,
        };
        assert_eq!(p.argmax(), 1);
    }
}
