//! Two-dimensional synthetic scenarios with ground-truth structure ids.
//!
//! Each structure is drawn from one distribution and cut into horizontal
//! class bands at equal-count quantiles of its y coordinate. The first
//! structure can be shifted diagonally toward the second to control overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DistanceConfig, Embedding, FeatureSchema};
use crate::error::{Error, Result};
use crate::neighbors::overlap_percentage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    GaussianTwoStructure,
    GaussianSingle,
    ExponentialSingle,
    GaussianMulticlass,
    ExponentialMulticlass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    /// Isotropic Gaussian with per-axis variance.
    Gaussian { mean: [f64; 2], variance: f64 },
    /// `offset + Exp(rate)` independently on each axis.
    Exponential { offset: [f64; 2], rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub size: usize,
    pub distribution: Distribution,
    /// Class label of each band from bottom to top; labels start at 1.
    pub bands: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub structures: Vec<StructureSpec>,
    /// Added to both coordinates of the first structure's location.
    pub shift: f64,
    /// Fraction of each structure whose band label is replaced by a
    /// uniformly drawn different class.
    pub label_noise: f64,
    /// Relabeled instances come in pockets of this many nearest neighbors
    /// sharing one wrong class; 1 gives independent flips.
    #[serde(default = "one")]
    pub noise_cluster: usize,
    pub rng_seed: u64,
}

fn gaussian(size: usize, mean: f64, bands: &[usize]) -> StructureSpec {
    StructureSpec {
        size,
        distribution: Distribution::Gaussian {
            mean: [mean, mean],
            variance: 4.0,
        },
        bands: bands.to_vec(),
    }
}

fn exponential(size: usize, offset: [f64; 2], bands: &[usize]) -> StructureSpec {
    StructureSpec {
        size,
        distribution: Distribution::Exponential { offset, rate: 0.5 },
        bands: bands.to_vec(),
    }
}

fn one() -> usize {
    1
}

/// Shift that puts the first Gaussian's mean on the second's.
pub const FULL_SEPARATION: f64 = 14.0;

impl ScenarioSpec {
    /// Two Gaussians with variance 4 at (1,1) and (15,15), 286 and 283
    /// points, bands {1,2} and {2,3,1}, 20% label noise flipped in pockets of 20 neighbors.
    pub fn base() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::GaussianTwoStructure,
            structures: vec![gaussian(286, 1.0, &[1, 2]), gaussian(283, 15.0, &[2, 3, 1])],
            shift: 0.0,
            label_noise: 0.20,
            noise_cluster: 20,
            rng_seed: 0,
        }
    }

    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::GaussianTwoStructure => ScenarioSpec::base(),
            ScenarioKind::GaussianSingle => ScenarioSpec {
                kind,
                structures: vec![gaussian(286, 1.0, &[1]), gaussian(283, 15.0, &[2])],
                shift: 7.0,
                label_noise: 0.0,
                noise_cluster: 1,
                rng_seed: 0,
            },
            ScenarioKind::GaussianMulticlass => ScenarioSpec {
                kind,
                structures: vec![gaussian(286, 1.0, &[1, 2]), gaussian(283, 15.0, &[2, 3, 1])],
                shift: 5.0,
                label_noise: 0.0,
                noise_cluster: 1,
                rng_seed: 0,
            },
            ScenarioKind::ExponentialSingle => ScenarioSpec {
                kind,
                structures: vec![exponential(286, [0.0, 0.0], &[1]), exponential(283, [10.0, 10.0], &[2])],
                shift: 0.0,
                label_noise: 0.0,
                noise_cluster: 1,
                rng_seed: 0,
            },
            ScenarioKind::ExponentialMulticlass => ScenarioSpec {
                kind,
                structures: vec![
                    exponential(286, [0.0, 0.0], &[1, 2]),
                    exponential(283, [14.0, 0.0], &[2, 3, 1]),
                    exponential(280, [7.0, 14.0], &[3, 1]),
                ],
                shift: 0.0,
                label_noise: 0.0,
                noise_cluster: 1,
                rng_seed: 0,
            },
        }
    }

    pub fn n_classes(&self) -> usize {
        self.structures
            .iter()
            .flat_map(|s| s.bands.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Number of labeled bands across all structures.
    pub fn n_subsets(&self) -> usize {
        self.structures.iter().map(|s| s.bands.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.structures.is_empty() {
            return bad("scenario needs at least one structure".into());
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad(format!("label_noise must be in [0, 1], got {}", self.label_noise));
        }
        if !self.shift.is_finite() {
            return bad("shift must be finite".into());
        }
        for (s, st) in self.structures.iter().enumerate() {
            if st.size == 0 {
                return bad(format!("structure {s}: size must be positive"));
            }
            if st.bands.is_empty() || st.bands.contains(&0) {
                return bad(format!("structure {s}: bands need labels starting at 1"));
            }
            if st.bands.len() > st.size {
                return bad(format!("structure {s}: more bands than points"));
            }
            let ok = match st.distribution {
                Distribution::Gaussian { mean, variance } => {
                    variance > 0.0 && variance.is_finite() && mean.iter().all(|m| m.is_finite())
                }
                Distribution::Exponential { offset, rate } => {
                    rate > 0.0 && rate.is_finite() && offset.iter().all(|m| m.is_finite())
                }
            };
            if !ok {
                return bad(format!("structure {s}: invalid distribution parameters"));
            }
        }
        if self.noise_cluster == 0 {
            return bad("noise_cluster must be at least 1".into());
        }
        if self.label_noise > 0.0 && self.n_classes() < 2 {
            return bad("label noise needs at least two classes".into());
        }
        Ok(())
    }
}

fn draw(dist: Distribution, shift: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
    match dist {
        Distribution::Gaussian { mean, variance } => {
            let n = Normal::new(0.0, variance.sqrt()).expect("validated variance");
            [mean[0] + shift + n.sample(rng), mean[1] + shift + n.sample(rng)]
        }
        Distribution::Exponential { offset, rate } => {
            let e = Exp::new(rate).expect("validated rate");
            [offset[0] + shift + e.sample(rng), offset[1] + shift + e.sample(rng)]
        }
    }
}

/// Instances with structure ids; class names are the band labels.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n_classes = spec.n_classes();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut sid = Vec::new();
    for (s, st) in spec.structures.iter().enumerate() {
        let shift = if s == 0 { spec.shift } else { 0.0 };
        let pts: Vec<[f64; 2]> = (0..st.size).map(|_| draw(st.distribution, shift, &mut rng)).collect();
        let mut order: Vec<usize> = (0..st.size).collect();
        order.sort_by(|&a, &b| pts[a][1].total_cmp(&pts[b][1]));
        let mut band_label = vec![0usize; st.size];
        let nb = st.bands.len();
        for (rank, &i) in order.iter().enumerate() {
            band_label[i] = st.bands[rank * nb / st.size] - 1;
        }
        if spec.label_noise > 0.0 {
            relabel(&pts, &mut band_label, spec, n_classes, &mut rng);
        }
        for (p, y) in pts.into_iter().zip(band_label) {
            rows.push(p.to_vec());
            labels.push(y);
            sid.push(s);
        }
    }
    let schema = FeatureSchema::numeric(2, true);
    Dataset::from_parts(
        schema,
        rows,
        vec![Vec::new(), Vec::new()],
        labels,
        (1..=n_classes).map(|c| c.to_string()).collect(),
        Some((sid, (0..spec.structures.len()).map(|s| s.to_string()).collect())),
    )
}

/// Flip `round(label_noise * m)` labels in pockets around random centers.
fn relabel(pts: &[[f64; 2]], labels: &mut [usize], spec: &ScenarioSpec, n_classes: usize, rng: &mut ChaCha8Rng) {
    let m = pts.len();
    let budget = (spec.label_noise * m as f64).round() as usize;
    let mut flipped = vec![false; m];
    let mut done = 0;
    while done < budget {
        let center = rng.random_range(0..m);
        if flipped[center] {
            continue;
        }
        let wrong = {
            let other = rng.random_range(0..n_classes - 1);
            if other >= labels[center] { other + 1 } else { other }
        };
        let mut near: Vec<(f64, usize)> = (0..m)
            .filter(|&i| !flipped[i])
            .map(|i| ((pts[i][0] - pts[center][0]).hypot(pts[i][1] - pts[center][1]), i))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in near.iter().take(spec.noise_cluster.min(budget - done)) {
            flipped[i] = true;
            if labels[i] != wrong {
                labels[i] = wrong;
            } else {
                labels[i] = labels[center];
            }
            done += 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub shift: f64,
    pub dataset: Dataset,
    /// Percentage of the first structure with a neighbor in the second.
    pub overlap: f64,
}

/// Percentage of structure 0 whose K nearest neighbors reach structure 1.
pub fn measured_overlap(ds: &Dataset, distance: DistanceConfig, k: usize) -> Result<f64> {
    let truth = ds
        .truth_structures()
        .ok_or_else(|| Error::Domain("overlap needs structure ids".into()))?;
    if truth.len() < 2 {
        return Err(Error::Domain("overlap needs two structures".into()));
    }
    let emb = Embedding::new(ds, distance)?;
    overlap_percentage(&emb, ds.labels(), &truth[0], &truth[1], k)
}

pub fn overlap_sweep(base: &ScenarioSpec, shifts: &[f64], distance: DistanceConfig, k: usize) -> Result<Vec<SweepPoint>> {
    if shifts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("shifts must be sorted ascending".into()));
    }
    shifts
        .iter()
        .map(|&shift| {
            let spec = ScenarioSpec { shift, ..base.clone() };
            let dataset = generate(&spec)?;
            let overlap = measured_overlap(&dataset, distance, k)?;
            Ok(SweepPoint {
                shift,
                dataset,
                overlap,
            })
        })
        .collect()
}
