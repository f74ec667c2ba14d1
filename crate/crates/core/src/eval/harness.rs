use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::match_structures;
use super::metrics::{accuracy, auprc, score_with, size_weighted, summarize, RecoveryScore, Summary};
use crate::data::Dataset;
use crate::ensemble::{train_ensemble, train_whole, StructureEnsemble};
use crate::error::{Error, Result};
use crate::growth::identify_structures;
use crate::learners::LearnerSpec;
use crate::pipeline::{fit_pipeline, PipelineConfig};
use crate::rng::{derive_indexed, indexed_stream, stream};

/// How instances left without a structure are scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnassignedMode {
    /// Leave them out of scoring.
    Ignore,
    /// Count them as errors.
    Misclassified,
    /// Allocate them to the nearest centroid, then score everything.
    #[default]
    Centroid,
}

impl UnassignedMode {
    pub const ALL: [UnassignedMode; 3] = [
        UnassignedMode::Ignore,
        UnassignedMode::Misclassified,
        UnassignedMode::Centroid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnassignedMode::Ignore => "ignore",
            UnassignedMode::Misclassified => "misclassified",
            UnassignedMode::Centroid => "centroid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub structure_sizes: Vec<usize>,
    /// In-sample accuracy of each structure's model on its own members.
    pub structure_accuracy: Vec<f64>,
    pub unassigned: usize,
    pub mode_accuracy: BTreeMap<UnassignedMode, f64>,
    pub weighted_accuracy: f64,
    pub auprc: Option<f64>,
    pub whole_accuracy: Option<f64>,
    pub whole_auprc: Option<f64>,
    pub recovery_before: Option<RecoveryScore>,
    pub recovery_after: Option<RecoveryScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen: LearnerSpec,
    /// Mean out-of-bag accuracy per grid point.
    pub oob_accuracy: Vec<f64>,
    pub n_structures: usize,
    pub accuracy: f64,
    pub auprc: Option<f64>,
    pub whole_accuracy: Option<f64>,
    pub whole_auprc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub truth: usize,
    pub precision_before: Summary,
    pub recall_before: Summary,
    pub precision_after: Summary,
    pub recall_after: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: String,
    pub mode: Option<UnassignedMode>,
    pub learner: String,
    /// Ensemble accuracy (whole-data accuracy in whole-only runs).
    pub accuracy: Summary,
    pub auprc: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_accuracy: Option<Summary>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub mode_accuracy: BTreeMap<UnassignedMode, Summary>,
    pub whole_accuracy: Option<Summary>,
    pub whole_auprc: Option<Summary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub recovery: Vec<RecoverySummary>,
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub replicates: Vec<ReplicateResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<FoldResult>,
}

fn opt_summary(values: impl Iterator<Item = Option<f64>>) -> Option<Summary> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| summarize(&v))
}

/// In-sample predictions of each member by its own structure's model.
fn member_scores(ds: &Dataset, ens: &StructureEnsemble, sets: &[Vec<usize>]) -> (Vec<(usize, usize, Vec<f64>)>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut per_structure = Vec::new();
    for (s, members) in sets.iter().enumerate() {
        let model = &ens.local_models[s];
        let mut hits = 0;
        for &i in members {
            let pred = model.predict(ds.row(i));
            hits += usize::from(pred == ds.label(i));
            rows.push((i, pred, model.predict_proba(ds.row(i)).extend_to(ds.n_classes())));
        }
        per_structure.push(hits as f64 / members.len().max(1) as f64);
    }
    (rows, per_structure)
}

fn whole_scores(ds: &Dataset, cfg: &PipelineConfig, learner: &LearnerSpec) -> Result<(f64, Option<f64>)> {
    let whole = train_whole(ds, cfg.identify.distance, learner)?;
    let all: Vec<usize> = (0..ds.n()).collect();
    let pred = whole.predict_all(ds, &all);
    let probs = whole.predict_proba_all(ds, &all);
    Ok((accuracy(ds.labels(), &pred), auprc(ds.labels(), &probs).value))
}

fn run_replicate(
    ds: &Dataset,
    cfg: &PipelineConfig,
    mode: UnassignedMode,
    seed: u64,
    r: usize,
) -> Result<ReplicateResult> {
    let n = ds.n();
    let mut rng = indexed_stream(seed, "bootstrap", r);
    let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let boot = ds.subset(&sample)?;
    let learner = cfg.learner;
    let whole = if cfg.whole_only || cfg.compare_whole {
        Some(whole_scores(&boot, cfg, &learner)?)
    } else {
        None
    };
    if cfg.whole_only {
        let (acc, ap) = whole.expect("whole model fitted");
        return Ok(ReplicateResult {
            replicate: r,
            structure_sizes: Vec::new(),
            structure_accuracy: Vec::new(),
            unassigned: 0,
            mode_accuracy: BTreeMap::new(),
            weighted_accuracy: acc,
            auprc: ap,
            whole_accuracy: Some(acc),
            whole_auprc: ap,
            recovery_before: None,
            recovery_after: None,
        });
    }
    let mut icfg = cfg.identify.clone();
    icfg.rng_seed = derive_indexed(seed, "identify", r);
    let id = identify_structures(&boot, &icfg)?;
    let core = id.core_sets();
    let after = id.member_sets();
    let distance = icfg.distance;
    let core_ens = train_ensemble(&boot, &core, distance, &learner)?;
    let after_ens = train_ensemble(&boot, &after, distance, &learner)?;

    let (core_rows, _) = member_scores(&boot, &core_ens, &core);
    let (after_rows, structure_accuracy) = member_scores(&boot, &after_ens, &after);
    let hits = |rows: &[(usize, usize, Vec<f64>)]| rows.iter().filter(|(i, p, _)| boot.label(*i) == *p).count();
    let core_hits = hits(&core_rows);
    let mut mode_accuracy = BTreeMap::new();
    mode_accuracy.insert(UnassignedMode::Ignore, core_hits as f64 / core_rows.len().max(1) as f64);
    mode_accuracy.insert(UnassignedMode::Misclassified, core_hits as f64 / n as f64);
    mode_accuracy.insert(UnassignedMode::Centroid, hits(&after_rows) as f64 / n as f64);

    let ap = match mode {
        UnassignedMode::Ignore => {
            let labels: Vec<usize> = core_rows.iter().map(|r| boot.label(r.0)).collect();
            let probs: Vec<Vec<f64>> = core_rows.iter().map(|r| r.2.clone()).collect();
            auprc(&labels, &probs).value
        }
        UnassignedMode::Misclassified => {
            let mut probs = vec![vec![0.0; boot.n_classes()]; n];
            for (i, _, p) in &core_rows {
                probs[*i] = p.clone();
            }
            auprc(boot.labels(), &probs).value
        }
        UnassignedMode::Centroid => {
            let mut probs = vec![Vec::new(); n];
            for (i, _, p) in &after_rows {
                probs[*i] = p.clone();
            }
            auprc(boot.labels(), &probs).value
        }
    };

    let (recovery_before, recovery_after) = match boot.truth_structures() {
        Some(truth) => {
            let matching = match_structures(&after, &truth)?;
            (
                Some(score_with(&matching, &core, &truth)),
                Some(score_with(&matching, &after, &truth)),
            )
        }
        None => (None, None),
    };
    let sizes: Vec<usize> = after.iter().map(Vec::len).collect();
    Ok(ReplicateResult {
        replicate: r,
        weighted_accuracy: size_weighted(&sizes, &structure_accuracy),
        structure_sizes: sizes,
        structure_accuracy,
        unassigned: id.unassigned.len(),
        mode_accuracy,
        auprc: ap,
        whole_accuracy: whole.map(|w| w.0),
        whole_auprc: whole.and_then(|w| w.1),
        recovery_before,
        recovery_after,
    })
}

/// Resample, identify, train and score `n_boot` times. Replicate failures
/// are recorded in the report rather than aborting the run.
pub fn bootstrap_eval(
    ds: &Dataset,
    cfg: &PipelineConfig,
    n_boot: usize,
    rng_seed: u64,
    mode: UnassignedMode,
) -> Result<EvaluationReport> {
    if n_boot == 0 {
        return Err(Error::Config("n_boot must be at least 1".into()));
    }
    let outcomes: Vec<Result<ReplicateResult>> = (0..n_boot)
        .into_par_iter()
        .map(|r| run_replicate(ds, cfg, mode, rng_seed, r))
        .collect();
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rep) => replicates.push(rep),
            Err(e) => failures.push(Failure {
                replicate: r,
                message: e.to_string(),
            }),
        }
    }
    let mode_accuracy: BTreeMap<UnassignedMode, Summary> = if cfg.whole_only {
        BTreeMap::new()
    } else {
        UnassignedMode::ALL
            .iter()
            .map(|&m| {
                let v: Vec<f64> = replicates.iter().map(|r| r.mode_accuracy[&m]).collect();
                (m, summarize(&v))
            })
            .collect()
    };
    let accuracy = if cfg.whole_only {
        summarize(&replicates.iter().filter_map(|r| r.whole_accuracy).collect::<Vec<_>>())
    } else {
        mode_accuracy.get(&mode).cloned().unwrap_or_default()
    };
    let recovery = recovery_summaries(&replicates);
    Ok(EvaluationReport {
        protocol: "bootstrap".into(),
        mode: (!cfg.whole_only).then_some(mode),
        learner: cfg.learner.name().into(),
        accuracy,
        auprc: opt_summary(replicates.iter().map(|r| r.auprc)),
        weighted_accuracy: (!cfg.whole_only)
            .then(|| summarize(&replicates.iter().map(|r| r.weighted_accuracy).collect::<Vec<_>>())),
        mode_accuracy,
        whole_accuracy: opt_summary(replicates.iter().map(|r| r.whole_accuracy)),
        whole_auprc: opt_summary(replicates.iter().map(|r| r.whole_auprc)),
        recovery,
        failures,
        replicates,
        folds: Vec::new(),
    })
}

fn recovery_summaries(replicates: &[ReplicateResult]) -> Vec<RecoverySummary> {
    let n_truth = replicates
        .iter()
        .filter_map(|r| r.recovery_after.as_ref())
        .map(|s| s.per_truth.len())
        .max()
        .unwrap_or(0);
    (0..n_truth)
        .map(|t| {
            let pick = |before: bool, precision: bool| {
                let v: Vec<f64> = replicates
                    .iter()
                    .filter_map(|r| if before { r.recovery_before.as_ref() } else { r.recovery_after.as_ref() })
                    .filter_map(|s| s.per_truth.get(t))
                    .map(|x| if precision { x.precision } else { x.recall })
                    .collect();
                summarize(&v)
            };
            RecoverySummary {
                truth: t,
                precision_before: pick(true, true),
                recall_before: pick(true, false),
                precision_after: pick(false, true),
                recall_after: pick(false, false),
            }
        })
        .collect()
}

/// Test indices for each of `folds` stratified folds. Each class is
/// shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], folds: usize, rng: &mut impl Rng) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config(format!("folds must be at least 2, got {folds}")));
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < folds {
            return Err(Error::Stratification {
                class: class.to_string(),
                count: members.len(),
                folds,
            });
        }
    }
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for mut members in by_class {
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), rng);
        for i in members {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Mean out-of-bag accuracy of each grid point over `n_boot` resamples of `train`.
fn tune(ds: &Dataset, cfg: &PipelineConfig, grid: &[LearnerSpec], n_boot: usize, seed: u64, fold: usize) -> Result<Vec<f64>> {
    if grid.len() < 2 || n_boot == 0 {
        return Ok(vec![0.0; grid.len()]);
    }
    let n = ds.n();
    let per_boot: Vec<Option<Vec<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| -> Result<Option<Vec<f64>>> {
            let mut rng = indexed_stream(seed, &format!("tune/{fold}"), b);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            sample.iter().for_each(|&i| in_bag[i] = true);
            let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
            if oob.is_empty() {
                return Ok(None);
            }
            let boot = ds.subset(&sample)?;
            let mut icfg = cfg.identify.clone();
            icfg.rng_seed = derive_indexed(seed, &format!("tune-identify/{fold}"), b);
            let sets = if cfg.whole_only {
                vec![(0..boot.n()).collect()]
            } else {
                identify_structures(&boot, &icfg)?.member_sets()
            };
            let truth: Vec<usize> = oob.iter().map(|&i| ds.label(i)).collect();
            grid.iter()
                .map(|spec| {
                    let ens = train_ensemble(&boot, &sets, icfg.distance, spec)?;
                    let pred: Vec<usize> = oob.iter().map(|&i| ens.predict(ds.row(i))).collect();
                    Ok(accuracy(&truth, &pred))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;
    let used: Vec<Vec<f64>> = per_boot.into_iter().flatten().collect();
    let m = used.len().max(1) as f64;
    Ok((0..grid.len()).map(|g| used.iter().map(|v| v[g]).sum::<f64>() / m).collect())
}

/// Stratified k-fold evaluation with out-of-bag selection of the learner
/// setting inside each training split.
pub fn cross_validate(
    ds: &Dataset,
    cfg: &PipelineConfig,
    folds: usize,
    n_boot_tune: usize,
    rng_seed: u64,
) -> Result<EvaluationReport> {
    let mut rng = stream(rng_seed, "folds");
    let parts = stratified_folds(ds.labels(), folds, &mut rng)?;
    let grid = cfg.grid_or_default();
    let mut results = Vec::new();
    for (f, test) in parts.iter().enumerate() {
        let train: Vec<usize> = {
            let mut is_test = vec![false; ds.n()];
            test.iter().for_each(|&i| is_test[i] = true);
            (0..ds.n()).filter(|&i| !is_test[i]).collect()
        };
        let train_ds = ds.subset(&train)?;
        let oob = tune(&train_ds, cfg, &grid, n_boot_tune, rng_seed, f)?;
        let mut best = 0;
        for (g, &a) in oob.iter().enumerate() {
            if a > oob[best] {
                best = g;
            }
        }
        let chosen = grid[best];
        let mut fcfg = cfg.clone();
        fcfg.identify.rng_seed = derive_indexed(rng_seed, "cv-identify", f);
        let fitted = fit_pipeline(&train_ds, &fcfg, &chosen)?;
        let truth: Vec<usize> = test.iter().map(|&i| ds.label(i)).collect();
        let score = |ens: &StructureEnsemble| {
            let pred = ens.predict_all(ds, test);
            let probs = ens.predict_proba_all(ds, test);
            (accuracy(&truth, &pred), auprc(&truth, &probs).value)
        };
        let (acc, ap) = score(&fitted.ensemble);
        let whole = fitted.whole.as_ref().map(score);
        results.push(FoldResult {
            fold: f,
            n_train: train.len(),
            n_test: test.len(),
            chosen,
            oob_accuracy: oob,
            n_structures: fitted.ensemble.len(),
            accuracy: acc,
            auprc: ap,
            whole_accuracy: whole.map(|w| w.0),
            whole_auprc: whole.and_then(|w| w.1),
        });
    }
    Ok(EvaluationReport {
        protocol: "cross_validation".into(),
        mode: None,
        learner: cfg.learner.name().into(),
        accuracy: summarize(&results.iter().map(|r| r.accuracy).collect::<Vec<_>>()),
        auprc: opt_summary(results.iter().map(|r| r.auprc)),
        weighted_accuracy: None,
        mode_accuracy: BTreeMap::new(),
        whole_accuracy: opt_summary(results.iter().map(|r| r.whole_accuracy)),
        whole_auprc: opt_summary(results.iter().map(|r| r.whole_auprc)),
        recovery: Vec::new(),
        failures: Vec::new(),
        replicates: Vec::new(),
        folds: results,
    })
}
