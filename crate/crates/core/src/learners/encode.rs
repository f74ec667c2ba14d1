use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Block {
    Numeric { column: usize, mean: f64, sd: f64 },
    OneHot { column: usize, codes: Vec<u32> },
}

/// Z-scores numeric columns and one-hot encodes categorical levels seen at fit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    blocks: Vec<Block>,
    names: Vec<String>,
}

impl FeatureEncoder {
    pub fn fit(ds: &Dataset, members: &[usize]) -> Self {
        let m = members.len().max(1) as f64;
        let mut blocks = Vec::new();
        let mut names = Vec::new();
        for (j, col) in ds.schema().columns.iter().enumerate() {
            match col.kind {
                FeatureKind::Numeric => {
                    let mean = members.iter().map(|&i| ds.row(i)[j]).sum::<f64>() / m;
                    let var = members
                        .iter()
                        .map(|&i| (ds.row(i)[j] - mean).powi(2))
                        .sum::<f64>()
                        / m;
                    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                    blocks.push(Block::Numeric { column: j, mean, sd });
                    names.push(col.name.clone());
                }
                FeatureKind::Categorical => {
                    let mut codes: Vec<u32> = members.iter().map(|&i| ds.row(i)[j] as u32).collect();
                    codes.sort_unstable();
                    codes.dedup();
                    for &c in &codes {
                        names.push(format!("{}={}", col.name, ds.levels(j)[c as usize]));
                    }
                    blocks.push(Block::OneHot { column: j, codes });
                }
            }
        }
        FeatureEncoder { blocks, names }
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Encoded row and whether a categorical level was unseen at fit time
    /// (its block is left all zero).
    pub fn encode(&self, row: &[f64]) -> (Vec<f64>, bool) {
        let mut out = Vec::with_capacity(self.width());
        let mut unseen = false;
        for b in &self.blocks {
            match b {
                Block::Numeric { column, mean, sd } => out.push((row[*column] - mean) / sd),
                Block::OneHot { column, codes } => {
                    let v = row[*column] as u32;
                    unseen |= !codes.contains(&v);
                    out.extend(codes.iter().map(|&c| f64::from(u8::from(c == v))));
                }
            }
        }
        (out, unseen)
    }

    /// Map standardized-space coefficients back to original units.
    /// Returns `(intercept, per-feature weights)`.
    pub fn to_original_units(&self, intercept: f64, weights: &[f64]) -> (f64, Vec<f64>) {
        let mut b = intercept;
        let mut w = Vec::with_capacity(weights.len());
        let mut k = 0;
        for block in &self.blocks {
            match block {
                Block::Numeric { mean, sd, .. } => {
                    w.push(weights[k] / sd);
                    b -= weights[k] * mean / sd;
                    k += 1;
                }
                Block::OneHot { codes, .. } => {
                    w.extend_from_slice(&weights[k..k + codes.len()]);
                    k += codes.len();
                }
            }
        }
        (b, w)
    }
}
