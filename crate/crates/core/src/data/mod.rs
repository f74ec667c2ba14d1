//! Dataset representation, CSV ingestion, mixed-type distances and centroids.
//!
//! Feature values are stored row-major as `f64`. Categorical cells hold the
//! integer code of their level in the column's level table, so one row type
//! serves both metrics and both learners.

mod distance;
mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use distance::{
    checked_euclidean_distance, euclidean_distance, gower_distance, DistanceConfig, Embedding,
    Metric, MetricSpace,
};
pub use io::{infer_schema, load_csv, read_csv, save_csv, write_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: FeatureKind,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }
}

/// Ordered feature columns plus the label and optional ground-truth structure column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    pub label_column: String,
    pub structure_column: Option<String>,
}

impl FeatureSchema {
    pub fn new(
        columns: Vec<Column>,
        label_column: impl Into<String>,
        structure_column: Option<String>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            columns,
            label_column: label_column.into(),
            structure_column,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// `x0..x{d-1}` numeric columns with a `label` column.
    pub fn numeric(n_features: usize, with_structure: bool) -> Self {
        FeatureSchema {
            columns: (0..n_features).map(|j| Column::numeric(format!("x{j}"))).collect(),
            label_column: "label".into(),
            structure_column: with_structure.then(|| "structure_id".to_string()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("at least one feature column is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.name == self.label_column {
                return Err(Error::Schema(format!(
                    "label column `{}` listed as a feature",
                    c.name
                )));
            }
            if self.structure_column.as_deref() == Some(c.name.as_str()) {
                return Err(Error::Schema(format!(
                    "structure column `{}` listed as a feature",
                    c.name
                )));
            }
        }
        if self.structure_column.as_deref() == Some(self.label_column.as_str()) {
            return Err(Error::Schema("label and structure columns coincide".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.columns.iter().map(|c| c.kind).collect()
    }

    pub fn all_numeric(&self) -> bool {
        self.columns.iter().all(|c| c.kind == FeatureKind::Numeric)
    }
}

/// Immutable labeled dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<Vec<f64>>,
    levels: Vec<Vec<String>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    structure_ids: Option<Vec<usize>>,
    structure_names: Vec<String>,
    numeric_ranges: Vec<Option<(f64, f64)>>,
}

impl Dataset {
    /// Assemble a dataset from already-encoded parts.
    ///
    /// `levels[j]` must be empty for numeric columns; categorical cells hold
    /// an index into `levels[j]`.
    pub fn from_parts(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        levels: Vec<Vec<String>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        structure: Option<(Vec<usize>, Vec<String>)>,
    ) -> Result<Self> {
        schema.validate()?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = schema.n_features();
        if levels.len() != d {
            return Err(Error::Schema(format!(
                "expected {d} level tables, got {}",
                levels.len()
            )));
        }
        if labels.len() != rows.len() {
            return Err(Error::Schema("label count differs from row count".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, schema has {d} features",
                    row.len()
                )));
            }
            for (j, (&v, col)) in row.iter().zip(&schema.columns).enumerate() {
                match col.kind {
                    FeatureKind::Numeric if !v.is_finite() => {
                        return Err(Error::Parse {
                            row: i + 1,
                            column: col.name.clone(),
                            message: format!("non-finite value {v}"),
                        })
                    }
                    FeatureKind::Categorical
                        if v < 0.0 || v.fract() != 0.0 || v as usize >= levels[j].len() =>
                    {
                        return Err(Error::Schema(format!(
                            "row {i}: invalid category code {v} for column `{}`",
                            col.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Schema(format!("label id {bad} has no class name")));
        }
        let (structure_ids, structure_names) = match structure {
            Some((ids, names)) => {
                if ids.len() != rows.len() {
                    return Err(Error::Schema("structure id count differs from row count".into()));
                }
                if let Some(&bad) = ids.iter().find(|&&s| s >= names.len()) {
                    return Err(Error::Schema(format!("structure id {bad} has no name")));
                }
                (Some(ids), names)
            }
            None => (None, Vec::new()),
        };
        let numeric_ranges = compute_ranges(&schema, &rows);
        Ok(Dataset {
            schema,
            rows,
            levels,
            labels,
            class_names,
            structure_ids,
            structure_names,
            numeric_ranges,
        })
    }

    /// All-numeric dataset with classes named `"0", "1", ...` by id.
    pub fn from_numeric(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Dataset::from_parts(
            FeatureSchema::numeric(d, false),
            rows,
            vec![Vec::new(); d],
            labels,
            (0..n_classes).map(|c| c.to_string()).collect(),
            None,
        )
    }

    /// Attach ground-truth structure ids, named by id.
    pub fn with_structures(mut self, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::Schema("structure id count differs from row count".into()));
        }
        let count = ids.iter().max().map_or(0, |&m| m + 1);
        if self.schema.structure_column.is_none() {
            self.schema.structure_column = Some("structure_id".into());
            self.schema.validate()?;
        }
        self.structure_names = (0..count).map(|s| s.to_string()).collect();
        self.structure_ids = Some(ids);
        Ok(self)
    }

    /// New dataset made of the given rows (duplicates allowed), keeping the
    /// level tables and class names so ids stay comparable.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let numeric_ranges = compute_ranges(&self.schema, &rows);
        Ok(Dataset {
            schema: self.schema.clone(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            structure_ids: self
                .structure_ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i]).collect()),
            rows,
            levels: self.levels.clone(),
            class_names: self.class_names.clone(),
            structure_names: self.structure_names.clone(),
            numeric_ranges,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn levels(&self, column: usize) -> &[String] {
        &self.levels[column]
    }

    pub fn all_levels(&self) -> &[Vec<String>] {
        &self.levels
    }

    pub fn structure_ids(&self) -> Option<&[usize]> {
        self.structure_ids.as_deref()
    }

    pub fn structure_names(&self) -> &[String] {
        &self.structure_names
    }

    /// Ground-truth structures as sorted index sets, in structure-id order.
    pub fn truth_structures(&self) -> Option<Vec<Vec<usize>>> {
        let ids = self.structure_ids.as_ref()?;
        let mut sets = vec![Vec::new(); self.structure_names.len()];
        for (i, &s) in ids.iter().enumerate() {
            sets[s].push(i);
        }
        Some(sets)
    }

    /// `(min, max)` per numeric column, `None` for categorical columns.
    pub fn numeric_ranges(&self) -> &[Option<(f64, f64)>] {
        &self.numeric_ranges
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.schema.kinds()
    }

    /// Count of instances per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn compute_ranges(schema: &FeatureSchema, rows: &[Vec<f64>]) -> Vec<Option<(f64, f64)>> {
    schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| match c.kind {
            FeatureKind::Categorical => None,
            FeatureKind::Numeric => Some(rows.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])),
            )),
        })
        .collect()
}

/// Per-feature center of a member set: numeric means, categorical modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub values: Vec<f64>,
}

/// Centroid of `members`. Categorical modes break ties by the
/// lexicographically smallest level name.
pub fn centroid(ds: &Dataset, members: &[usize]) -> Result<Centroid> {
    if members.is_empty() {
        return Err(Error::Domain("centroid of an empty member set".into()));
    }
    let m = members.len() as f64;
    let values = ds
        .schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, col)| match col.kind {
            FeatureKind::Numeric => members.iter().map(|&i| ds.rows[i][j]).sum::<f64>() / m,
            FeatureKind::Categorical => {
                let mut counts: HashMap<usize, usize> = HashMap::new();
                for &i in members {
                    *counts.entry(ds.rows[i][j] as usize).or_default() += 1;
                }
                let names = &ds.levels[j];
                let (&code, _) = counts
                    .iter()
                    .max_by(|(a, ca), (b, cb)| ca.cmp(cb).then_with(|| names[**b].cmp(&names[**a])))
                    .expect("nonempty members");
                code as f64
            }
        })
        .collect();
    Ok(Centroid { values })
}
