//! Identification followed by local-model training, shared by the
//! evaluation harnesses and the CLI.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::{train_ensemble, train_whole, StructureEnsemble};
use crate::error::Result;
use crate::growth::{identify_structures, IdentifyConfig, Identification};
use crate::learners::{LearnerSpec, LrHyper};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub identify: IdentifyConfig,
    pub learner: LearnerSpec,
    /// Candidate learner settings for out-of-bag tuning; when empty, logistic
    /// learners tune over [`default_lr_grid`] and trees use `learner` as is.
    pub grid: Vec<LearnerSpec>,
    /// Skip identification and fit a single whole-data model.
    pub whole_only: bool,
    /// Also fit the whole-data model for comparison.
    pub compare_whole: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            identify: IdentifyConfig::default(),
            learner: LearnerSpec::default(),
            grid: Vec::new(),
            whole_only: false,
            compare_whole: true,
        }
    }
}

/// l2 over {0.01, 0.1, 1, 10}.
pub fn default_lr_grid() -> Vec<LearnerSpec> {
    [0.01, 0.1, 1.0, 10.0]
        .into_iter()
        .map(|l2| LearnerSpec::Logistic(LrHyper { l2, ..LrHyper::default() }))
        .collect()
}

impl PipelineConfig {
    pub fn grid_or_default(&self) -> Vec<LearnerSpec> {
        if self.grid.is_empty() {
            match self.learner {
                LearnerSpec::Logistic(_) => default_lr_grid(),
                LearnerSpec::Tree(_) => vec![self.learner],
            }
        } else {
            self.grid.clone()
        }
    }

    pub fn with_seed(&self, global: u64) -> Self {
        let mut cfg = self.clone();
        cfg.identify.rng_seed = derive_seed(global, "identify");
        cfg
    }
}

#[derive(Clone, Debug)]
pub struct Fitted {
    pub identification: Option<Identification>,
    pub ensemble: StructureEnsemble,
    pub whole: Option<StructureEnsemble>,
}

pub fn fit_pipeline(ds: &Dataset, cfg: &PipelineConfig, learner: &LearnerSpec) -> Result<Fitted> {
    let distance = cfg.identify.distance;
    if cfg.whole_only {
        return Ok(Fitted {
            identification: None,
            ensemble: train_whole(ds, distance, learner)?,
            whole: None,
        });
    }
    let id = identify_structures(ds, &cfg.identify)?;
    let ensemble = train_ensemble(ds, &id.member_sets(), distance, learner)?;
    let whole = if cfg.compare_whole {
        Some(train_whole(ds, distance, learner)?)
    } else {
        None
    };
    Ok(Fitted {
        identification: Some(id),
        ensemble,
        whole,
    })
}
