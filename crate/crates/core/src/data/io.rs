use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Load a headered CSV file under `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Interns strings to dense ids in first-appearance order.
#[derive(Default)]
struct Interner {
    ids: HashMap<String, usize>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> usize {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(s.to_string(), id);
        self.names.push(s.to_string());
        id
    }
}

/// Parse CSV from any reader. Columns absent from the schema are ignored;
/// empty cells are rejected as missing values.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let feature_pos: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<_>>()?;
    let label_pos = position(&schema.label_column)?;
    let structure_pos = schema.structure_column.as_deref().map(position).transpose()?;

    let d = schema.n_features();
    let mut levels: Vec<Interner> = (0..d).map(|_| Interner::default()).collect();
    let mut classes = Interner::default();
    let mut structures = Interner::default();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut structure_ids = Vec::new();

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let cell = |pos: usize, name: &str| -> Result<&str> {
            let v = record.get(pos).map(str::trim).unwrap_or("");
            if v.is_empty() {
                Err(Error::MissingValue {
                    row: row_no,
                    column: name.to_string(),
                })
            } else {
                Ok(v)
            }
        };
        let mut row = Vec::with_capacity(d);
        for (j, (col, &pos)) in schema.columns.iter().zip(&feature_pos).enumerate() {
            let raw = cell(pos, &col.name)?;
            let value = match col.kind {
                FeatureKind::Numeric => {
                    let v: f64 = raw.parse().map_err(|_| Error::Parse {
                        row: row_no,
                        column: col.name.clone(),
                        message: format!("`{raw}` is not a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row: row_no,
                            column: col.name.clone(),
                            message: format!("`{raw}` is not finite"),
                        });
                    }
                    v
                }
                FeatureKind::Categorical => levels[j].intern(raw) as f64,
            };
            row.push(value);
        }
        rows.push(row);
        labels.push(classes.intern(cell(label_pos, &schema.label_column)?));
        if let (Some(pos), Some(name)) = (structure_pos, schema.structure_column.as_deref()) {
            structure_ids.push(structures.intern(cell(pos, name)?));
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::from_parts(
        schema.clone(),
        rows,
        levels.into_iter().map(|i| i.names).collect(),
        labels,
        classes.names,
        structure_pos.map(|_| (structure_ids, structures.names)),
    )
}

/// Write `ds` as CSV: features, then label, then the structure column if present.
/// Numeric values use the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let schema = ds.schema();
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&schema.label_column);
    let structure_ids = ds.structure_ids();
    if let (Some(name), Some(_)) = (schema.structure_column.as_deref(), structure_ids) {
        header.push(name);
    }
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut record: Vec<String> = ds
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, &v)| match schema.columns[j].kind {
                FeatureKind::Numeric => format!("{v}"),
                FeatureKind::Categorical => ds.levels(j)[v as usize].clone(),
            })
            .collect();
        record.push(ds.class_names()[ds.label(i)].clone());
        if let Some(ids) = structure_ids {
            record.push(ds.structure_names()[ids[i]].clone());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

/// Build a schema from a CSV header: every column other than the label and
/// structure columns becomes a feature, numeric when every cell parses as a
/// finite number and categorical otherwise.
pub fn infer_schema(
    path: impl AsRef<Path>,
    label_column: &str,
    structure_column: Option<&str>,
) -> Result<FeatureSchema> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut numeric = vec![true; headers.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, v) in record.iter().enumerate() {
            if numeric[j] && !v.trim().parse::<f64>().is_ok_and(f64::is_finite) {
                numeric[j] = false;
            }
        }
    }
    if !headers.iter().any(|h| h == label_column) {
        return Err(Error::Schema(format!("missing column `{label_column}`")));
    }
    let columns = headers
        .iter()
        .zip(&numeric)
        .filter(|(h, _)| h.as_str() != label_column && Some(h.as_str()) != structure_column)
        .map(|(h, &num)| {
            if num {
                Column::numeric(h.clone())
            } else {
                Column::categorical(h.clone())
            }
        })
        .collect();
    FeatureSchema::new(columns, label_column, structure_column.map(str::to_string))
}
