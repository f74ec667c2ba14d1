//! Simple-structure identification.
//!
//! A structure is grown from a seed by repeatedly adding the K nearest
//! neighbors of newly reached instances. The guarded rule only expands from
//! instances that their own neighborhood classifies correctly, which keeps
//! growth from leaking across overlapping regions. [`identify_structures`]
//! runs the full multi-seed search with size regularization, coverage
//! stopping, K adaptation and nearest-centroid allocation.

mod assumptions;
mod grow;
mod identify;

use serde::{Deserialize, Serialize};

pub use assumptions::{check_assumptions, AssumptionReport};
pub use grow::{grow, grow_guarded, grow_vanilla, GrowthRule, GrowthState, RejectPolicy};
pub use identify::{
    allocate_unassigned, identify_structures, IdentifyConfig, Identification, IterationTrace,
    SimpleStructure,
};

/// Size-threshold penalty weights for candidate scoring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationParams {
    pub sst: usize,
    pub alpha_l: f64,
    pub alpha_u: f64,
}

impl Default for RegularizationParams {
    fn default() -> Self {
        RegularizationParams {
            sst: 250,
            alpha_l: 0.125,
            alpha_u: 0.3,
        }
    }
}

/// `error + alpha_l * (sst - size)` at or below the threshold,
/// `error + alpha_u * (size - sst)` above it.
pub fn regularized_score(error: f64, size: usize, reg: &RegularizationParams) -> f64 {
    if size <= reg.sst {
        error + reg.alpha_l * (reg.sst - size) as f64
    } else {
        error + reg.alpha_u * (size - reg.sst) as f64
    }
}
