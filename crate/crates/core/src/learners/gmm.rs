//! Full-covariance Gaussian mixture fitted by EM.
//!
//! The M-step adds `jitter * I` to each component's scatter matrix before
//! dividing by its responsibility mass. That is the exact maximizer of the
//! log-likelihood minus `jitter/2 * sum_k tr(Sigma_k^-1)`, so the penalized
//! objective recorded in the trace never decreases.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub n_components: usize,
    pub max_iters: usize,
    /// Convergence threshold on the per-sample change of the objective.
    pub tol: f64,
    pub jitter: f64,
    pub n_restarts: usize,
    pub rng_seed: u64,
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::Config("n_components must be at least 1".into()));
        }
        if self.max_iters == 0 || self.n_restarts == 0 {
            return Err(Error::Config("max_iters and n_restarts must be at least 1".into()));
        }
        if !(self.tol >= 0.0) || !(self.jitter > 0.0) {
            return Err(Error::Config("tol must be nonnegative and jitter positive".into()));
        }
        Ok(())
    }
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            n_components: 2,
            max_iters: 300,
            tol: 1e-8,
            jitter: 1e-6,
            n_restarts: 5,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    /// Penalized log-likelihood per EM iteration of the selected restart.
    pub trace: Vec<f64>,
    pub restart_traces: Vec<Vec<f64>>,
    pub best_restart: usize,
    pub converged: bool,
}

struct Component {
    weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Component {
    fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Option<Self> {
        let chol = Cholesky::new(cov)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        log_det.is_finite().then_some(Component {
            weight,
            mean,
            chol,
            log_det,
        })
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = x.len() as f64;
        let diff = x - &self.mean;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is nonsingular");
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det + z.norm_squared())
    }

    fn trace_inverse(&self) -> f64 {
        self.chol.inverse().trace()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn covariance(x: &[DVector<f64>]) -> DMatrix<f64> {
    let d = x[0].len();
    let n = x.len() as f64;
    let mean = x.iter().fold(DVector::zeros(d), |acc, v| acc + v) / n;
    x.iter().fold(DMatrix::zeros(d, d), |acc, v| {
        let c = v - &mean;
        acc + &c * c.transpose()
    }) / n
}

struct RunOutcome {
    components: Vec<Component>,
    trace: Vec<f64>,
    converged: bool,
}

fn run_em(x: &[DVector<f64>], cfg: &GmmConfig, rng: &mut ChaCha8Rng) -> Option<RunOutcome> {
    let n = x.len();
    let d = x[0].len();
    let k = cfg.n_components;
    let psi = DMatrix::<f64>::identity(d, d) * cfg.jitter;
    let start_cov = covariance(x) + &psi;
    let mut components: Vec<Component> = sample(rng, n, k)
        .into_iter()
        .map(|i| Component::new(1.0 / k as f64, x[i].clone(), start_cov.clone()))
        .collect::<Option<_>>()?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut resp = vec![vec![0.0; k]; n];
    for _ in 0..cfg.max_iters {
        let mut ll = 0.0;
        for (xi, ri) in x.iter().zip(resp.iter_mut()) {
            for (r, c) in ri.iter_mut().zip(&components) {
                *r = c.weight.ln() + c.log_density(xi);
            }
            let lse = log_sum_exp(ri);
            ll += lse;
            ri.iter_mut().for_each(|r| *r = (*r - lse).exp());
        }
        let penalty: f64 = components.iter().map(Component::trace_inverse).sum();
        let objective = ll - 0.5 * cfg.jitter * penalty;
        if let Some(&prev) = trace.last() {
            if (objective - prev) / n as f64 <= cfg.tol {
                trace.push(objective);
                converged = true;
                break;
            }
        }
        trace.push(objective);
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            let nk: f64 = resp.iter().map(|r| r[j]).sum();
            if nk <= f64::EPSILON * n as f64 {
                return None;
            }
            let mean = x
                .iter()
                .zip(&resp)
                .fold(DVector::zeros(d), |acc, (xi, r)| acc + xi * r[j])
                / nk;
            let scatter = x.iter().zip(&resp).fold(psi.clone(), |acc, (xi, r)| {
                let c = xi - &mean;
                acc + (&c * c.transpose()) * r[j]
            });
            next.push(Component::new(nk / n as f64, mean, scatter / nk)?);
        }
        components = next;
    }
    Some(RunOutcome {
        components,
        trace,
        converged,
    })
}

/// Fit a mixture on the rows of `members`. Requires all-numeric features.
pub fn gmm_fit(ds: &Dataset, members: &[usize], cfg: &GmmConfig) -> Result<GmmModel> {
    if !ds.schema().all_numeric() {
        return Err(Error::UnsupportedMetric {
            metric: "gaussian mixture",
            column: ds
                .schema()
                .columns
                .iter()
                .find(|c| c.kind != crate::data::FeatureKind::Numeric)
                .map(|c| c.name.clone())
                .unwrap_or_default(),
        });
    }
    if cfg.n_components == 0 || members.len() <= cfg.n_components {
        return Err(Error::Fit(format!(
            "{} components for {} instances",
            cfg.n_components,
            members.len()
        )));
    }
    if !(cfg.jitter > 0.0) {
        return Err(Error::Fit("gmm jitter must be positive".into()));
    }
    let x: Vec<DVector<f64>> = members
        .iter()
        .map(|&i| DVector::from_column_slice(ds.row(i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut best: Option<(usize, RunOutcome)> = None;
    let mut restart_traces = Vec::new();
    for r in 0..cfg.n_restarts.max(1) {
        let Some(run) = run_em(&x, cfg, &mut rng) else {
            restart_traces.push(Vec::new());
            continue;
        };
        let score = *run.trace.last().expect("at least one iteration");
        restart_traces.push(run.trace.clone());
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| score > *b.trace.last().expect("nonempty"));
        if better {
            best = Some((r, run));
        }
    }
    let (best_restart, run) =
        best.ok_or_else(|| {
            Error::Fit(format!(
                "covariance singular despite jitter in all {} EM restarts",
                cfg.n_restarts.max(1)
            ))
        })?;
    Ok(GmmModel {
        weights: run.components.iter().map(|c| c.weight).collect(),
        means: run.components.iter().map(|c| c.mean.iter().copied().collect()).collect(),
        covariances: run
            .components
            .iter()
            .map(|c| {
                let s = c.chol.l_dirty().lower_triangle();
                let s = &s * s.transpose();
                s.row_iter().map(|r| r.iter().copied().collect()).collect()
            })
            .collect(),
        trace: run.trace,
        restart_traces,
        best_restart,
        converged: run.converged,
    })
}

impl GmmModel {
    fn components(&self) -> Result<Vec<Component>> {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.covariances)
            .map(|((&w, m), s)| {
                let d = m.len();
                let cov = DMatrix::from_fn(d, d, |a, b| s[a][b]);
                Component::new(w, DVector::from_column_slice(m), cov)
                    .ok_or_else(|| Error::Fit("covariance is not positive definite".into()))
            })
            .collect()
    }

    /// `log w_k + log N(x | mu_k, Sigma_k)` for every component.
    pub fn weighted_log_densities(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let comps = self.components()?;
        Ok(rows
            .iter()
            .map(|r| {
                let x = DVector::from_column_slice(r);
                comps.iter().map(|c| c.weight.ln() + c.log_density(&x)).collect()
            })
            .collect())
    }
}

/// Most probable component per row; ties go to the lower index.
pub fn gmm_assign(model: &GmmModel, rows: &[&[f64]]) -> Result<Vec<usize>> {
    Ok(model
        .weighted_log_densities(rows)?
        .into_iter()
        .map(|v| {
            let mut best = 0;
            for (j, &x) in v.iter().enumerate() {
                if x > v[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}
