use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grow::{grow, GrowthRule};
use super::{regularized_score, RegularizationParams};
use crate::data::{centroid, Centroid, Dataset, DistanceConfig, Embedding};
use crate::error::{Error, Result};
use crate::neighbors::{build_index, loo_knn_error, LooError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    pub k_initial: usize,
    pub distance: DistanceConfig,
    pub reg: RegularizationParams,
    /// When set, the size threshold is `ceil(sst_fraction * n)` instead of `reg.sst`.
    pub sst_fraction: Option<f64>,
    /// Seeds per outer iteration as a fraction of the remaining pool.
    pub seed_fraction: f64,
    pub coverage_stop: f64,
    pub k_adapt_threshold: f64,
    pub k_adapt_increment: usize,
    /// Structures smaller than this are minor; `None` means `ceil(0.05 * n)`.
    pub min_structure_size: Option<usize>,
    /// Release members of minor structures to centroid allocation.
    pub dissolve_minor: bool,
    pub growth: GrowthRule,
    pub rng_seed: u64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            k_initial: 6,
            distance: DistanceConfig::default(),
            reg: RegularizationParams::default(),
            sst_fraction: None,
            seed_fraction: 0.10,
            coverage_stop: 0.90,
            k_adapt_threshold: 0.40,
            k_adapt_increment: 2,
            min_structure_size: None,
            dissolve_minor: true,
            growth: GrowthRule::default(),
            rng_seed: 0,
        }
    }
}

impl IdentifyConfig {
    /// Settings used for the two-Gaussian robustness experiments:
    /// K=6 raised to 8 after 40% coverage, SST=250, alphas 0.125/0.3,
    /// 20% seeds and a minor-structure cutoff of 50.
    pub fn robustness_protocol() -> Self {
        IdentifyConfig {
            k_initial: 6,
            reg: RegularizationParams {
                sst: 250,
                alpha_l: 0.125,
                alpha_u: 0.3,
            },
            seed_fraction: 0.20,
            coverage_stop: 0.90,
            k_adapt_threshold: 0.40,
            k_adapt_increment: 2,
            min_structure_size: Some(50),
            ..IdentifyConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in (0, 1], got {v}")))
            }
        };
        if self.k_initial == 0 {
            return Err(Error::Config("k_initial must be at least 1".into()));
        }
        if self.reg.sst == 0 {
            return Err(Error::Config("sst must be at least 1".into()));
        }
        for (name, a) in [("alpha_l", self.reg.alpha_l), ("alpha_u", self.reg.alpha_u)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("{name} must be a nonnegative number")));
            }
        }
        if let Some(f) = self.sst_fraction {
            frac("sst_fraction", f)?;
        }
        frac("seed_fraction", self.seed_fraction)?;
        frac("coverage_stop", self.coverage_stop)?;
        frac("k_adapt_threshold", self.k_adapt_threshold)
    }

    fn resolved_reg(&self, n: usize) -> RegularizationParams {
        match self.sst_fraction {
            Some(f) => RegularizationParams {
                sst: ((f * n as f64).ceil() as usize).max(1),
                ..self.reg
            },
            None => self.reg,
        }
    }

    pub fn resolved_min_size(&self, n: usize) -> usize {
        self.min_structure_size
            .unwrap_or_else(|| (0.05 * n as f64).ceil() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleStructure {
    /// Sorted member instances, including those attached by allocation.
    pub members: Vec<usize>,
    pub centroid: Centroid,
    /// Class id to the sorted members of that class.
    pub class_partition: BTreeMap<usize, Vec<usize>>,
    pub seed: usize,
    pub score: f64,
    pub loo_error: f64,
    /// Outer-loop iteration that produced the structure.
    pub iteration: usize,
    pub k: usize,
    /// Members attached by nearest-centroid allocation.
    pub via_centroid: Vec<usize>,
}

impl SimpleStructure {
    fn new(ds: &Dataset, members: Vec<usize>, seed: usize, score: f64, loo: f64, iteration: usize, k: usize) -> Result<Self> {
        Ok(SimpleStructure {
            centroid: centroid(ds, &members)?,
            class_partition: partition_by_class(ds, &members),
            members,
            seed,
            score,
            loo_error: loo,
            iteration,
            k,
            via_centroid: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members found by growth, before allocation.
    pub fn core_members(&self) -> Vec<usize> {
        let attached: std::collections::HashSet<usize> = self.via_centroid.iter().copied().collect();
        self.members
            .iter()
            .copied()
            .filter(|i| !attached.contains(i))
            .collect()
    }

    fn refresh(&mut self, ds: &Dataset) -> Result<()> {
        self.members.sort_unstable();
        self.via_centroid.sort_unstable();
        self.centroid = centroid(ds, &self.members)?;
        self.class_partition = partition_by_class(ds, &self.members);
        Ok(())
    }
}

fn partition_by_class(ds: &Dataset, members: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut parts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in members {
        parts.entry(ds.label(i)).or_default().push(i);
    }
    parts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub k: usize,
    pub pool_size: usize,
    pub n_seeds: usize,
    /// Candidate scores in seed draw order.
    pub scores: Vec<f64>,
    pub chosen_seed: usize,
    pub chosen_size: usize,
    pub chosen_loo_error: f64,
    pub chosen_score: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Identification {
    /// Structures after allocation, in discovery order.
    pub structures: Vec<SimpleStructure>,
    /// Minor structures released to allocation.
    pub dissolved: Vec<SimpleStructure>,
    /// Instances left without a structure before allocation.
    pub unassigned: Vec<usize>,
    pub trace: Vec<IterationTrace>,
    pub k_schedule: Vec<usize>,
    pub sst: usize,
    pub min_structure_size: usize,
    pub warnings: Vec<String>,
}

impl Identification {
    /// Structure id per instance; `None` only if allocation was skipped.
    pub fn assignments(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (s, st) in self.structures.iter().enumerate() {
            for &i in &st.members {
                out[i] = Some(s);
            }
        }
        out
    }

    /// Member sets before allocation (growth result only).
    pub fn core_sets(&self) -> Vec<Vec<usize>> {
        self.structures.iter().map(SimpleStructure::core_members).collect()
    }

    pub fn member_sets(&self) -> Vec<Vec<usize>> {
        self.structures.iter().map(|s| s.members.clone()).collect()
    }
}

/// Run the multi-seed identification loop and allocate leftovers.
pub fn identify_structures(ds: &Dataset, cfg: &IdentifyConfig) -> Result<Identification> {
    cfg.validate()?;
    let n = ds.n();
    if n < 2 {
        return Err(Error::Domain("identification needs at least 2 instances".into()));
    }
    let emb = Embedding::new(ds, cfg.distance)?;
    let labels = ds.labels();
    let reg = cfg.resolved_reg(n);
    let min_size = cfg.resolved_min_size(n);
    let cap = 10 * (1.0 / cfg.seed_fraction).ceil() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut k = cfg.k_initial;
    let mut adapted = cfg.k_adapt_increment == 0;
    let mut found: Vec<SimpleStructure> = Vec::new();
    let mut trace = Vec::new();
    let mut k_schedule = Vec::new();
    let mut warnings = Vec::new();
    let mut assigned = 0usize;

    while (assigned as f64) < cfg.coverage_stop * n as f64 && remaining.len() >= 2 {
        let iteration = trace.len();
        if iteration >= cap {
            return Err(Error::IterationCap {
                iterations: iteration,
                assigned,
                total: n,
            });
        }
        let idx = build_index(&emb, labels, &remaining, k)?;
        if idx.truncated() {
            warnings.push(format!(
                "iteration {iteration}: K={k} truncated to {} for a pool of {}",
                idx.k(),
                remaining.len()
            ));
        }
        let p = (cfg.seed_fraction * remaining.len() as f64).ceil() as usize;
        if p == 0 {
            return Err(Error::Domain("no seeds could be drawn".into()));
        }
        let seeds: Vec<usize> = rand::seq::index::sample(&mut rng, remaining.len(), p)
            .into_iter()
            .map(|s| remaining[s])
            .collect();
        let candidates: Vec<Vec<usize>> = seeds
            .par_iter()
            .map(|&s| grow(&idx, s, cfg.growth))
            .collect();

        // identical closures are common; score each distinct set once
        let mut unique: HashMap<&[usize], usize> = HashMap::new();
        let mut distinct: Vec<&[usize]> = Vec::new();
        for c in &candidates {
            unique.entry(c.as_slice()).or_insert_with(|| {
                distinct.push(c.as_slice());
                distinct.len() - 1
            });
        }
        let errors: Vec<LooError> = distinct
            .par_iter()
            .map(|m| loo_knn_error(&emb, labels, m, k))
            .collect::<Result<_>>()?;
        let scored: Vec<(f64, f64)> = candidates
            .iter()
            .map(|c| {
                let e = errors[unique[c.as_slice()]].error;
                (e, regularized_score(e, c.len(), &reg))
            })
            .collect();
        let best = (0..candidates.len())
            .reduce(|b, p| if scored[p].1 < scored[b].1 { p } else { b })
            .expect("at least one seed");

        let members = candidates[best].clone();
        let (loo, score) = scored[best];
        assigned += members.len();
        let keep: std::collections::HashSet<usize> = members.iter().copied().collect();
        remaining.retain(|i| !keep.contains(i));
        k_schedule.push(k);
        trace.push(IterationTrace {
            iteration,
            k,
            pool_size: idx.active().len(),
            n_seeds: p,
            scores: scored.iter().map(|s| s.1).collect(),
            chosen_seed: seeds[best],
            chosen_size: members.len(),
            chosen_loo_error: loo,
            chosen_score: score,
            coverage: assigned as f64 / n as f64,
        });
        found.push(SimpleStructure::new(ds, members, seeds[best], score, loo, iteration, k)?);

        if !adapted && assigned as f64 >= cfg.k_adapt_threshold * n as f64 {
            k += cfg.k_adapt_increment;
            adapted = true;
        }
    }

    let mut unassigned = remaining;
    let any_major = found.iter().any(|s| s.len() >= min_size);
    let (mut structures, dissolved): (Vec<SimpleStructure>, Vec<SimpleStructure>) =
        if cfg.dissolve_minor && any_major {
            found.into_iter().partition(|s| s.len() >= min_size)
        } else {
            (found, Vec::new())
        };
    for s in &dissolved {
        unassigned.extend_from_slice(&s.members);
    }
    unassigned.sort_unstable();
    let unassigned_before = unassigned.clone();
    if !unassigned.is_empty() {
        warnings.extend(allocate_unassigned(
            ds,
            &emb,
            &mut structures,
            &unassigned,
            min_size,
        )?);
    }
    Ok(Identification {
        structures,
        dissolved,
        unassigned: unassigned_before,
        trace,
        k_schedule,
        sst: reg.sst,
        min_structure_size: min_size,
        warnings,
    })
}

/// Attach each unassigned instance to the structure whose centroid is
/// nearest, among structures with at least `min_structure_size` members
/// (all structures when none qualify). Centroids are frozen for the whole
/// pass and refreshed once at the end. Returns warnings.
pub fn allocate_unassigned(
    ds: &Dataset,
    emb: &Embedding,
    structures: &mut [SimpleStructure],
    unassigned: &[usize],
    min_structure_size: usize,
) -> Result<Vec<String>> {
    if unassigned.is_empty() {
        return Ok(Vec::new());
    }
    if structures.is_empty() {
        return Err(Error::Domain("no structures to allocate into".into()));
    }
    let mut warnings = Vec::new();
    let mut eligible: Vec<usize> = (0..structures.len())
        .filter(|&s| structures[s].len() >= min_structure_size)
        .collect();
    if eligible.is_empty() {
        warnings.push(format!(
            "no structure has at least {min_structure_size} members; all structures eligible for allocation"
        ));
        eligible = (0..structures.len()).collect();
    }
    let space = emb.space();
    let centers: Vec<Vec<f64>> = eligible
        .iter()
        .map(|&s| space.project(&structures[s].centroid.values))
        .collect();
    let choice: Vec<usize> = unassigned
        .iter()
        .map(|&i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (e, c) in centers.iter().enumerate() {
                let d = emb.distance_to(i, c);
                if d < best_d {
                    best_d = d;
                    best = e;
                }
            }
            eligible[best]
        })
        .collect();
    for (&i, &s) in unassigned.iter().zip(&choice) {
        structures[s].members.push(i);
        structures[s].via_centroid.push(i);
    }
    for &s in &eligible {
        structures[s].refresh(ds)?;
    }
    Ok(warnings)
}
