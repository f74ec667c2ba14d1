//! Structure recovery scoring, prediction metrics and the bootstrap and
//! cross-validation harnesses.

mod harness;
mod matching;
mod metrics;

pub use harness::{
    bootstrap_eval, cross_validate, stratified_folds, EvaluationReport, Failure, FoldResult,
    RecoverySummary, ReplicateResult, UnassignedMode,
};
pub use matching::{hungarian, match_structures, overlap_matrix, Matching};
pub use metrics::{
    accuracy, auprc, average_precision, recovery_scores, score_with, size_weighted, summarize,
    Auprc, RecoveryScore, Summary, TruthRecovery,
};
