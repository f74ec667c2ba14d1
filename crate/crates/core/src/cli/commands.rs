use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Protocol, RunConfig};
use crate::data::{save_csv, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    bootstrap_eval, cross_validate, match_structures, recovery_scores, score_with, EvaluationReport, RecoveryScore,
    Summary,
};
use crate::growth::{identify_structures, Identification, IterationTrace};
use crate::learners::{gmm_assign, gmm_fit, GmmModel};
use crate::rng::derive_seed;
use crate::synth::{generate, overlap_sweep};

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Create the output directory and echo the resolved configuration into it.
pub fn prepare_output(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("run_config.toml");
    fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(&path, e))
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let spec = cfg.scenario_spec()?;
    let ds = generate(&spec)?;
    save_csv(&ds, out.join("synth.csv"))?;
    write_json(&out.join("scenario.json"), &spec)?;
    Ok(json!({
        "command": "synth",
        "rows": ds.n(),
        "classes": ds.n_classes(),
        "structures": spec.structures.len(),
        "scenario": spec,
    }))
}

#[derive(Serialize)]
struct StructureSummary {
    id: usize,
    size: usize,
    core_size: usize,
    via_centroid: usize,
    seed: usize,
    score: f64,
    loo_error: f64,
    iteration: usize,
    k: usize,
    /// Class name to member count.
    classes: Vec<(String, usize)>,
}

#[derive(Serialize)]
struct IdentifyReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    rows: usize,
    sst: usize,
    min_structure_size: usize,
    k_schedule: &'a [usize],
    coverage: Vec<f64>,
    iterations: &'a [IterationTrace],
    structures: Vec<StructureSummary>,
    dissolved_sizes: Vec<usize>,
    unassigned_before_allocation: usize,
    warnings: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery_before: Option<RecoveryScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery_after: Option<RecoveryScore>,
}

fn recovery_pair(ds: &Dataset, id: &Identification) -> Result<(Option<RecoveryScore>, Option<RecoveryScore>)> {
    let Some(truth) = ds.truth_structures() else {
        return Ok((None, None));
    };
    let after = id.member_sets();
    let matching = match_structures(&after, &truth)?;
    Ok((
        Some(score_with(&matching, &id.core_sets(), &truth)),
        Some(score_with(&matching, &after, &truth)),
    ))
}

pub fn write_assignments(path: &Path, ds: &Dataset, id: &Identification) -> Result<()> {
    let mut via = vec![false; ds.n()];
    for st in &id.structures {
        for &i in &st.via_centroid {
            via[i] = true;
        }
    }
    let mut w = csv_writer(path)?;
    w.write_record(["instance_id", "structure_id", "via_centroid"])?;
    for (i, s) in id.assignments(ds.n()).into_iter().enumerate() {
        let s = s.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([i.to_string(), s, via[i].to_string()])?;
    }
    finish(w, path)
}

pub fn cmd_identify(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let ds = cfg.dataset()?;
    let pipeline = cfg.pipeline();
    let id = identify_structures(&ds, &pipeline.identify)?;
    write_assignments(&out.join("assignments.csv"), &ds, &id)?;
    let (recovery_before, recovery_after) = recovery_pair(&ds, &id)?;
    let structures = id
        .structures
        .iter()
        .enumerate()
        .map(|(s, st)| StructureSummary {
            id: s,
            size: st.len(),
            core_size: st.len() - st.via_centroid.len(),
            via_centroid: st.via_centroid.len(),
            seed: st.seed,
            score: st.score,
            loo_error: st.loo_error,
            iteration: st.iteration,
            k: st.k,
            classes: st
                .class_partition
                .iter()
                .map(|(c, m)| (ds.class_names()[*c].clone(), m.len()))
                .collect(),
        })
        .collect();
    let report = IdentifyReport {
        command: "identify",
        config: cfg,
        rows: ds.n(),
        sst: id.sst,
        min_structure_size: id.min_structure_size,
        k_schedule: &id.k_schedule,
        coverage: id.trace.iter().map(|t| t.coverage).collect(),
        iterations: &id.trace,
        structures,
        dissolved_sizes: id.dissolved.iter().map(|s| s.len()).collect(),
        unassigned_before_allocation: id.unassigned.len(),
        warnings: &id.warnings,
        recovery_before,
        recovery_after,
    };
    write_json(&out.join("identify_report.json"), &report)?;
    Ok(serde_json::to_value(&report)?)
}

#[derive(Serialize)]
struct GmmBaseline {
    n_components: usize,
    log_likelihood_trace: Vec<f64>,
    converged: bool,
    component_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery: Option<RecoveryScore>,
    model: GmmModel,
}

fn gmm_baseline(cfg: &RunConfig, ds: &Dataset) -> Result<(GmmBaseline, Vec<usize>)> {
    let gcfg = cfg.gmm.resolve(ds.n_classes(), cfg.seed);
    let all: Vec<usize> = (0..ds.n()).collect();
    let model = gmm_fit(ds, &all, &gcfg)?;
    let rows: Vec<&[f64]> = ds.rows().iter().map(Vec::as_slice).collect();
    let assign = gmm_assign(&model, &rows)?;
    let mut sets = vec![Vec::new(); gcfg.n_components];
    for (i, &c) in assign.iter().enumerate() {
        sets[c].push(i);
    }
    let recovery = match ds.truth_structures() {
        Some(truth) => {
            let nonempty: Vec<Vec<usize>> = sets.iter().filter(|s| !s.is_empty()).cloned().collect();
            Some(recovery_scores(&nonempty, &truth)?)
        }
        None => None,
    };
    let baseline = GmmBaseline {
        n_components: gcfg.n_components,
        log_likelihood_trace: model.trace.clone(),
        converged: model.converged,
        component_sizes: sets.iter().map(Vec::len).collect(),
        recovery,
        model,
    };
    Ok((baseline, assign))
}

fn recovery_rows(report: &EvaluationReport) -> Vec<(usize, &'static str, &'static str, &Summary)> {
    let mut rows = Vec::new();
    for r in &report.recovery {
        rows.push((r.truth, "before_allocation", "precision", &r.precision_before));
        rows.push((r.truth, "before_allocation", "recall", &r.recall_before));
        rows.push((r.truth, "after_allocation", "precision", &r.precision_after));
        rows.push((r.truth, "after_allocation", "recall", &r.recall_after));
    }
    rows
}

pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let ds = cfg.dataset()?;
    let pipeline = cfg.pipeline();
    let e = &cfg.evaluate;
    let seed = derive_seed(cfg.seed, "evaluate");
    let evaluation = match e.protocol {
        Protocol::Bootstrap => bootstrap_eval(&ds, &pipeline, e.n_boot, seed, e.mode)?,
        Protocol::Cv => cross_validate(&ds, &pipeline, e.folds, e.n_boot_tune, seed)?,
    };
    if !evaluation.recovery.is_empty() {
        let path = out.join("recovery.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["truth_structure", "stage", "metric", "mean", "ci_low", "ci_high", "n"])?;
        for (t, stage, metric, s) in recovery_rows(&evaluation) {
            w.write_record([
                t.to_string(),
                stage.into(),
                metric.into(),
                s.mean.to_string(),
                s.ci_low.to_string(),
                s.ci_high.to_string(),
                s.n.to_string(),
            ])?;
        }
        finish(w, &path)?;
    }
    let gmm = if e.gmm_baseline {
        Some(gmm_baseline(cfg, &ds)?.0)
    } else {
        None
    };
    let report = json!({
        "command": "evaluate",
        "config": cfg,
        "evaluation": evaluation,
        "gmm": gmm,
    });
    write_json(&out.join("evaluation.json"), &report)?;
    Ok(report)
}

pub fn cmd_robustness(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let spec = cfg.scenario_spec()?;
    let r = &cfg.robustness;
    let pipeline = cfg.pipeline();
    let points = overlap_sweep(&spec, &r.shifts, pipeline.identify.distance, r.overlap_k)?;
    let seed = derive_seed(cfg.seed, "robustness");
    let path = out.join("robustness.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["shift", "overlap", "metric", "mode", "mean", "ci_low", "ci_high", "n"])?;
    let mut summaries = Vec::new();
    for p in &points {
        let rep = bootstrap_eval(&p.dataset, &pipeline, r.n_boot, seed, cfg.evaluate.mode)?;
        let mut rows: Vec<(String, &str, &Summary)> = Vec::new();
        for (m, s) in &rep.mode_accuracy {
            rows.push(("accuracy".into(), m.name(), s));
        }
        if let Some(s) = &rep.weighted_accuracy {
            rows.push(("weighted_accuracy".into(), "centroid", s));
        }
        if let Some(s) = &rep.auprc {
            rows.push(("auprc".into(), cfg.evaluate.mode.name(), s));
        }
        if let Some(s) = &rep.whole_accuracy {
            rows.push(("accuracy".into(), "whole", s));
        }
        for (t, stage, metric, s) in recovery_rows(&rep) {
            let mode = if stage == "before_allocation" { "before_allocation" } else { "centroid" };
            rows.push((format!("{metric}_s{}", t + 1), mode, s));
        }
        for (metric, mode, s) in rows {
            w.write_record([
                p.shift.to_string(),
                p.overlap.to_string(),
                metric,
                mode.to_string(),
                s.mean.to_string(),
                s.ci_low.to_string(),
                s.ci_high.to_string(),
                s.n.to_string(),
            ])?;
        }
        summaries.push(json!({
            "shift": p.shift,
            "overlap": p.overlap,
            "failures": rep.failures,
            "accuracy": rep.accuracy,
            "whole_accuracy": rep.whole_accuracy,
            "recovery": rep.recovery,
        }));
    }
    finish(w, &path)?;
    let report = json!({
        "command": "robustness",
        "config": cfg,
        "points": summaries,
    });
    write_json(&out.join("robustness.json"), &report)?;
    Ok(report)
}

pub fn cmd_gmm_baseline(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let ds = cfg.dataset()?;
    let (baseline, assign) = gmm_baseline(cfg, &ds)?;
    let path = out.join("gmm_assignments.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["instance_id", "component"])?;
    for (i, c) in assign.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()])?;
    }
    finish(w, &path)?;
    // the identification result on the same data, for contrast
    let structures = if ds.truth_structures().is_some() {
        let id = identify_structures(&ds, &cfg.pipeline().identify)?;
        recovery_pair(&ds, &id)?.1
    } else {
        None
    };
    let report = json!({
        "command": "gmm-baseline",
        "config": cfg,
        "gmm": baseline,
        "structure_recovery": structures,
    });
    write_json(&out.join("gmm_report.json"), &report)?;
    Ok(report)
}
