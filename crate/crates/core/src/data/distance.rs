use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Gower,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Gower => "gower",
        }
    }
}

/// Metric plus whether Euclidean coordinates are z-scored first.
/// `standardize` has no effect on Gower, which is range-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub metric: Metric,
    pub standardize: bool,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            metric: Metric::Euclidean,
            standardize: true,
        }
    }
}

impl DistanceConfig {
    pub fn raw_euclidean() -> Self {
        DistanceConfig {
            metric: Metric::Euclidean,
            standardize: false,
        }
    }

    pub fn gower() -> Self {
        DistanceConfig {
            metric: Metric::Gower,
            standardize: false,
        }
    }
}

/// Plain L2 distance.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// L2 distance that refuses rows containing categorical columns.
pub fn checked_euclidean_distance(schema: &FeatureSchema, a: &[f64], b: &[f64]) -> Result<f64> {
    if let Some(c) = schema.columns.iter().find(|c| c.kind == FeatureKind::Categorical) {
        return Err(Error::UnsupportedMetric {
            metric: "euclidean",
            column: c.name.clone(),
        });
    }
    Ok(euclidean_distance(a, b))
}

/// Gower dissimilarity: mean over features of `|a-b|/range` (numeric, capped
/// at 1, zero-range columns contribute 0) or `[a != b]` (categorical).
pub fn gower_distance(
    a: &[f64],
    b: &[f64],
    kinds: &[FeatureKind],
    ranges: &[Option<(f64, f64)>],
) -> f64 {
    let total: f64 = kinds
        .iter()
        .enumerate()
        .map(|(j, kind)| match kind {
            FeatureKind::Categorical => f64::from(u8::from(a[j] != b[j])),
            FeatureKind::Numeric => {
                let (lo, hi) = ranges[j].expect("range for numeric column");
                let range = hi - lo;
                if range > 0.0 {
                    ((a[j] - b[j]).abs() / range).min(1.0)
                } else {
                    0.0
                }
            }
        })
        .sum();
    total / kinds.len() as f64
}

/// A metric fitted to a reference dataset: the affine per-column transform
/// (z-score or range scaling) is captured once so rows, centroids and unseen
/// query rows can be projected and compared cheaply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpace {
    metric: Metric,
    kinds: Vec<FeatureKind>,
    offset: Vec<f64>,
    scale: Vec<f64>,
}

impl MetricSpace {
    pub fn fit(ds: &Dataset, cfg: DistanceConfig) -> Result<Self> {
        let kinds = ds.kinds();
        let d = kinds.len();
        let mut offset = vec![0.0; d];
        let mut scale = vec![1.0; d];
        match cfg.metric {
            Metric::Euclidean => {
                if let Some(c) = ds
                    .schema()
                    .columns
                    .iter()
                    .find(|c| c.kind == FeatureKind::Categorical)
                {
                    return Err(Error::UnsupportedMetric {
                        metric: "euclidean",
                        column: c.name.clone(),
                    });
                }
                if cfg.standardize {
                    let n = ds.n() as f64;
                    for j in 0..d {
                        let mean = ds.rows().iter().map(|r| r[j]).sum::<f64>() / n;
                        let var =
                            ds.rows().iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                        offset[j] = mean;
                        scale[j] = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
                    }
                }
            }
            Metric::Gower => {
                for (j, range) in ds.numeric_ranges().iter().enumerate() {
                    if let Some((lo, hi)) = *range {
                        offset[j] = lo;
                        scale[j] = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
                    }
                }
            }
        }
        Ok(MetricSpace {
            metric: cfg.metric,
            kinds,
            offset,
            scale,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| match self.kinds[j] {
                FeatureKind::Categorical => v,
                FeatureKind::Numeric => (v - self.offset[j]) * self.scale[j],
            })
            .collect()
    }

    /// Distance between two projected rows.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.metric {
            Metric::Euclidean => euclidean_distance(a, b),
            Metric::Gower => {
                let total: f64 = self
                    .kinds
                    .iter()
                    .enumerate()
                    .map(|(j, kind)| match kind {
                        FeatureKind::Categorical => f64::from(u8::from(a[j] != b[j])),
                        FeatureKind::Numeric => (a[j] - b[j]).abs().min(1.0),
                    })
                    .sum();
                total / self.kinds.len() as f64
            }
        }
    }

    pub fn embed(&self, ds: &Dataset) -> Embedding {
        Embedding {
            points: ds.rows().iter().map(|r| self.project(r)).collect(),
            space: self.clone(),
        }
    }
}

/// Every row of a dataset projected into a [`MetricSpace`].
#[derive(Clone, Debug)]
pub struct Embedding {
    space: MetricSpace,
    points: Vec<Vec<f64>>,
}

impl Embedding {
    /// Fit the metric on `ds` and project all of its rows.
    pub fn new(ds: &Dataset, cfg: DistanceConfig) -> Result<Self> {
        Ok(MetricSpace::fit(ds, cfg)?.embed(ds))
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.space.distance(&self.points[i], &self.points[j])
    }

    /// Distance from instance `i` to an already projected point.
    pub fn distance_to(&self, i: usize, projected: &[f64]) -> f64 {
        self.space.distance(&self.points[i], projected)
    }
}
