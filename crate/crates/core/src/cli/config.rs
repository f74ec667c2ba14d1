use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{infer_schema, load_csv, Column, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};
use crate::eval::UnassignedMode;
use crate::growth::IdentifyConfig;
use crate::learners::{GmmConfig, LearnerSpec};
use crate::pipeline::PipelineConfig;
use crate::rng::derive_seed;
use crate::synth::{generate, ScenarioKind, ScenarioSpec, StructureSpec};

/// Everything a command needs, read from a TOML file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every component derives its own stream from it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub data: Option<DataConfig>,
    pub scenario: Option<ScenarioConfig>,
    pub identify: IdentifyConfig,
    pub learner: LearnerSpec,
    pub grid: Vec<LearnerSpec>,
    pub evaluate: EvaluateConfig,
    pub robustness: RobustnessConfig,
    pub gmm: GmmSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub label: String,
    /// Ground-truth structure column, when known.
    pub structure: Option<String>,
    /// Columns read as categorical even if every value parses as a number.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Columns left out of the feature set.
    #[serde(default)]
    pub drop: Vec<String>,
}

/// A preset scenario with optional overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub shift: Option<f64>,
    pub label_noise: Option<f64>,
    pub noise_cluster: Option<usize>,
    pub structures: Option<Vec<StructureSpec>>,
    /// Defaults to a stream derived from the global seed.
    pub rng_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Bootstrap,
    Cv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub protocol: Protocol,
    pub n_boot: usize,
    pub mode: UnassignedMode,
    pub folds: usize,
    /// Bootstrap resamples per fold for out-of-bag tuning.
    pub n_boot_tune: usize,
    pub whole_only: bool,
    pub compare_whole: bool,
    /// Also fit the GMM baseline and report its structure recovery.
    pub gmm_baseline: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            protocol: Protocol::Bootstrap,
            n_boot: 20,
            mode: UnassignedMode::Centroid,
            folds: 5,
            n_boot_tune: 10,
            whole_only: false,
            compare_whole: true,
            gmm_baseline: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub shifts: Vec<f64>,
    pub n_boot: usize,
    /// Neighborhood size used to measure overlap.
    pub overlap_k: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            shifts: vec![0.0, 2.0, 4.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            n_boot: 20,
            overlap_k: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSettings {
    /// Defaults to the number of classes.
    pub n_components: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub jitter: f64,
    pub n_restarts: usize,
}

impl Default for GmmSettings {
    fn default() -> Self {
        let d = GmmConfig::default();
        GmmSettings {
            n_components: None,
            max_iters: d.max_iters,
            tol: d.tol,
            jitter: d.jitter,
            n_restarts: d.n_restarts,
        }
    }
}

impl GmmSettings {
    pub fn resolve(&self, n_classes: usize, seed: u64) -> GmmConfig {
        GmmConfig {
            n_components: self.n_components.unwrap_or(n_classes),
            max_iters: self.max_iters,
            tol: self.tol,
            jitter: self.jitter,
            n_restarts: self.n_restarts,
            rng_seed: derive_seed(seed, "gmm"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Range checks on every numeric setting, run before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.identify.validate()?;
        self.learner.validate()?;
        for g in &self.grid {
            g.validate()?;
        }
        let e = &self.evaluate;
        if e.n_boot == 0 {
            return Err(Error::Config("evaluate.n_boot must be at least 1".into()));
        }
        if e.folds < 2 {
            return Err(Error::Config(format!("evaluate.folds must be at least 2, got {}", e.folds)));
        }
        let r = &self.robustness;
        if r.n_boot == 0 {
            return Err(Error::Config("robustness.n_boot must be at least 1".into()));
        }
        if r.overlap_k == 0 {
            return Err(Error::Config("robustness.overlap_k must be at least 1".into()));
        }
        if r.shifts.iter().any(|s| !s.is_finite()) || r.shifts.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("robustness.shifts must be finite and ascending".into()));
        }
        self.gmm.resolve(1, 0).validate()?;
        if self.gmm.n_components == Some(0) {
            return Err(Error::Config("gmm.n_components must be at least 1".into()));
        }
        if let Some(s) = &self.scenario {
            s.resolve(self.seed).validate()?;
        }
        if self.data.is_some() && self.scenario.is_some() {
            return Err(Error::Config("give either [data] or [scenario], not both".into()));
        }
        Ok(())
    }

    /// Pipeline settings with the identification seed derived from the global seed.
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            identify: self.identify.clone(),
            learner: self.learner,
            grid: self.grid.clone(),
            whole_only: self.evaluate.whole_only,
            compare_whole: self.evaluate.compare_whole,
        }
        .with_seed(self.seed)
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        self.scenario
            .as_ref()
            .map(|s| s.resolve(self.seed))
            .ok_or_else(|| Error::Config("this command needs a [scenario] section".into()))
    }

    /// The configured dataset: a CSV under `[data]` or a generated `[scenario]`.
    pub fn dataset(&self) -> Result<Dataset> {
        match (&self.data, &self.scenario) {
            (Some(d), None) => d.load(),
            (None, Some(s)) => generate(&s.resolve(self.seed)),
            _ => Err(Error::Config("give exactly one of [data] or [scenario]".into())),
        }
    }
}

impl ScenarioConfig {
    pub fn preset(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            kind,
            shift: None,
            label_noise: None,
            noise_cluster: None,
            structures: None,
            rng_seed: None,
        }
    }

    pub fn resolve(&self, seed: u64) -> ScenarioSpec {
        let base = ScenarioSpec::preset(self.kind);
        ScenarioSpec {
            kind: self.kind,
            structures: self.structures.clone().unwrap_or(base.structures),
            shift: self.shift.unwrap_or(base.shift),
            label_noise: self.label_noise.unwrap_or(base.label_noise),
            noise_cluster: self.noise_cluster.unwrap_or(base.noise_cluster),
            rng_seed: self.rng_seed.unwrap_or_else(|| derive_seed(seed, "synth")),
        }
    }
}

impl DataConfig {
    pub fn schema(&self) -> Result<FeatureSchema> {
        let inferred = infer_schema(&self.path, &self.label, self.structure.as_deref())?;
        for name in self.categorical.iter().chain(&self.drop) {
            if !inferred.columns.iter().any(|c| &c.name == name) {
                return Err(Error::Schema(format!("no feature column `{name}`")));
            }
        }
        let columns: Vec<Column> = inferred
            .columns
            .into_iter()
            .filter(|c| !self.drop.contains(&c.name))
            .map(|mut c| {
                if self.categorical.contains(&c.name) {
                    c.kind = FeatureKind::Categorical;
                }
                c
            })
            .collect();
        FeatureSchema::new(columns, inferred.label_column, inferred.structure_column)
    }

    pub fn load(&self) -> Result<Dataset> {
        load_csv(&self.path, &self.schema()?)
    }
}
