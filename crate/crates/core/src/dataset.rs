//! Tabular data, CSV ingestion and per-attribute normalization statistics.
//!
//! Values are stored column-major as `f64`. Nominal cells hold the index of
//! their label in the attribute's domain, so every algorithm downstream works
//! on one numeric representation and only consults [`AttributeKind`] to decide
//! how a column is compared.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "domain", rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    /// Ordered, duplicate-free category labels. Cells store the label index.
    Nominal(Vec<String>),
}

impl AttributeKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, AttributeKind::Numeric)
    }

    pub fn nominal(labels: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let domain: Vec<String> = labels.into_iter().map(Into::into).collect();
        validate_domain(&domain)?;
        Ok(AttributeKind::Nominal(domain))
    }

    fn validate(&self) -> Result<()> {
        match self {
            AttributeKind::Numeric => Ok(()),
            AttributeKind::Nominal(domain) => validate_domain(domain),
        }
    }
}

fn validate_domain(domain: &[String]) -> Result<()> {
    if domain.is_empty() {
        return Err(Error::InvalidData("nominal domain is empty".into()));
    }
    let mut seen = HashSet::new();
    for label in domain {
        if !seen.insert(label.as_str()) {
            return Err(Error::InvalidData(format!(
                "nominal domain repeats label '{label}'"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }
}

/// The descriptive part of a dataset. Ranking methods only ever see this
/// type, which has no access to the evaluation target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    attributes: Vec<Attribute>,
    columns: Vec<Vec<f64>>,
    m: usize,
}

impl FeatureTable {
    pub fn new(attributes: Vec<Attribute>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if attributes.len() != columns.len() {
            return Err(Error::InvalidData(format!(
                "{} attributes but {} columns",
                attributes.len(),
                columns.len()
            )));
        }
        if attributes.is_empty() {
            return Err(Error::InvalidData("no feature columns".into()));
        }
        let m = columns[0].len();
        if m == 0 {
            return Err(Error::InvalidData("no examples".into()));
        }
        let mut names = HashSet::new();
        for (attr, col) in attributes.iter().zip(&columns) {
            if !names.insert(attr.name.as_str()) {
                return Err(Error::InvalidData(format!(
                    "duplicate attribute name '{}'",
                    attr.name
                )));
            }
            attr.kind.validate()?;
            if col.len() != m {
                return Err(Error::InvalidData(format!(
                    "column '{}' has {} values, expected {m}",
                    attr.name,
                    col.len()
                )));
            }
            for (row, &v) in col.iter().enumerate() {
                let ok = match &attr.kind {
                    AttributeKind::Numeric => v.is_finite(),
                    AttributeKind::Nominal(domain) => {
                        v >= 0.0 && v.fract() == 0.0 && (v as usize) < domain.len()
                    }
                };
                if !ok {
                    return Err(Error::InvalidData(format!(
                        "column '{}' row {row}: invalid value {v}",
                        attr.name
                    )));
                }
            }
        }
        Ok(FeatureTable {
            attributes,
            columns,
            m,
        })
    }

    /// All-numeric table from row-major data; attributes are named `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        let columns = (0..n)
            .map(|i| rows.iter().map(|r| r[i]).collect())
            .collect();
        let attributes = (0..n).map(|i| Attribute::numeric(format!("x{i}"))).collect();
        FeatureTable::new(attributes, columns)
    }

    /// Number of examples.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of features.
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, i: usize) -> &Attribute {
        &self.attributes[i]
    }

    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn value(&self, row: usize, attr: usize) -> f64 {
        self.columns[attr][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// New table holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<FeatureTable> {
        if rows.is_empty() {
            return Err(Error::EmptyRows);
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.m) {
            return Err(Error::InvalidData(format!("row index {bad} out of range")));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        Ok(FeatureTable {
            attributes: self.attributes.clone(),
            columns,
            m: rows.len(),
        })
    }

    /// New table whose attributes are this table's, reordered by `order`
    /// (`order[j]` is the source attribute of output attribute `j`).
    pub fn select_attributes(&self, order: &[usize]) -> Result<FeatureTable> {
        let attributes = order.iter().map(|&i| self.attributes[i].clone()).collect();
        let columns = order.iter().map(|&i| self.columns[i].clone()).collect();
        FeatureTable::new(attributes, columns)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: FeatureTable,
    target_name: Option<String>,
    target: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: FeatureTable,
        target: Option<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let (target_name, target) = match target {
            Some((tn, t)) => {
                if t.len() != features.m() {
                    return Err(Error::InvalidData(format!(
                        "target has {} values, expected {}",
                        t.len(),
                        features.m()
                    )));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData("target contains non-finite values".into()));
                }
                (Some(tn), Some(t))
            }
            None => (None, None),
        };
        Ok(Dataset {
            name: name.into(),
            features,
            target_name,
            target,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target_name.as_deref()
    }

    pub fn m(&self) -> usize {
        self.features.m()
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn summary(&self) -> Result<DatasetSummary> {
        let all: Vec<usize> = (0..self.m()).collect();
        let stats = compute_stats(&self.features, &all)?;
        let attributes = self
            .features
            .attributes()
            .iter()
            .zip(stats.per_attribute)
            .map(|(a, s)| AttributeSummary {
                name: a.name.clone(),
                kind: a.kind.clone(),
                stats: s,
            })
            .collect();
        Ok(DatasetSummary {
            name: self.name.clone(),
            m: self.m(),
            n: self.n(),
            target: self.target_name.clone(),
            attributes,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub target: Option<String>,
    pub attributes: Vec<AttributeSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttributeSummary {
    pub name: String,
    pub kind: AttributeKind,
    pub stats: AttributeStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AttributeStat {
    Numeric {
        min: f64,
        max: f64,
        /// Population variance.
        variance: f64,
    },
    Nominal {
        frequencies: Vec<f64>,
        gini: f64,
    },
}

impl AttributeStat {
    /// Normalizer of the impurity term: variance or Gini value.
    pub fn dispersion(&self) -> f64 {
        match self {
            AttributeStat::Numeric { variance, .. } => *variance,
            AttributeStat::Nominal { gini, .. } => *gini,
        }
    }

    /// `max - min` for numeric attributes, `None` for nominal ones.
    pub fn range(&self) -> Option<f64> {
        match self {
            AttributeStat::Numeric { min, max, .. } => Some(max - min),
            AttributeStat::Nominal { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub per_attribute: Vec<AttributeStat>,
}

impl AttributeStats {
    pub fn get(&self, i: usize) -> &AttributeStat {
        &self.per_attribute[i]
    }

    pub fn len(&self) -> usize {
        self.per_attribute.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_attribute.is_empty()
    }
}

/// Statistics over exactly the given rows (a multiset: repeats count).
///
/// Results depend only on the multiset of values, not on row order: numeric
/// sums run over sorted values and nominal frequencies come from integer
/// counts.
pub fn compute_stats(table: &FeatureTable, rows: &[usize]) -> Result<AttributeStats> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= table.m()) {
        return Err(Error::InvalidData(format!("row index {bad} out of range")));
    }
    let count = rows.len() as f64;
    let per_attribute = (0..table.n())
        .map(|i| {
            let col = table.column(i);
            match &table.attribute(i).kind {
                AttributeKind::Numeric => {
                    let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
                    values.sort_by(f64::total_cmp);
                    let mean = values.iter().sum::<f64>() / count;
                    let variance =
                        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
                    AttributeStat::Numeric {
                        min: values[0],
                        max: values[values.len() - 1],
                        variance,
                    }
                }
                AttributeKind::Nominal(domain) => {
                    let mut counts = vec![0usize; domain.len()];
                    for &r in rows {
                        counts[col[r] as usize] += 1;
                    }
                    let frequencies: Vec<f64> =
                        counts.iter().map(|&c| c as f64 / count).collect();
                    let gini = 1.0 - frequencies.iter().map(|p| p * p).sum::<f64>();
                    AttributeStat::Nominal {
                        frequencies,
                        gini: gini.max(0.0),
                    }
                }
            }
        })
        .collect();
    Ok(AttributeStats { per_attribute })
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Kinds for every column of the file, in file order (the target column
    /// included). Inferred when absent.
    pub schema: Option<Vec<AttributeKind>>,
    /// Column to split off as the evaluation target.
    pub target: Option<String>,
    /// Accept files that lack the target column (all columns become features).
    pub target_optional: bool,
    /// Dataset name; defaults to the file stem.
    pub name: Option<String>,
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = options.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    read_csv(file, &name, options)
}

pub fn read_csv<R: Read>(reader: R, name: &str, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() {
        return Err(Error::InvalidData("header row is empty".into()));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::InvalidData(format!("duplicate column name '{h}'")));
        }
    }
    let width = header.len();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        for (j, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Ingest {
                    row,
                    column: header[j].clone(),
                    reason: "missing value".into(),
                });
            }
            cells[j].push(cell.to_owned());
        }
    }
    if cells[0].is_empty() {
        return Err(Error::InvalidData("file has no data rows".into()));
    }

    let target_idx = match &options.target {
        Some(t) => match header.iter().position(|h| h == t) {
            Some(j) => Some(j),
            None if options.target_optional => None,
            None => return Err(Error::InvalidData(format!("target column '{t}' not found"))),
        },
        None => None,
    };
    if let Some(schema) = &options.schema {
        if schema.len() != width {
            return Err(Error::InvalidData(format!(
                "schema lists {} kinds for {width} columns",
                schema.len()
            )));
        }
    }

    let mut attributes = Vec::with_capacity(width);
    let mut columns = Vec::with_capacity(width);
    let mut target = None;
    for (j, col) in cells.iter().enumerate() {
        if Some(j) == target_idx {
            let values = parse_numeric(col, &header[j])?;
            target = Some((header[j].clone(), values));
            continue;
        }
        let kind = match &options.schema {
            Some(schema) => schema[j].clone(),
            None => infer_kind(col),
        };
        let values = match &kind {
            AttributeKind::Numeric => parse_numeric(col, &header[j])?,
            AttributeKind::Nominal(domain) => encode_nominal(col, domain, &header[j])?,
        };
        attributes.push(Attribute {
            name: header[j].clone(),
            kind,
        });
        columns.push(values);
    }
    let features = FeatureTable::new(attributes, columns)?;
    Dataset::new(name, features, target)
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_kind(col: &[String]) -> AttributeKind {
    if col.iter().all(|c| parse_finite(c).is_some()) {
        AttributeKind::Numeric
    } else {
        let domain: BTreeSet<&str> = col.iter().map(String::as_str).collect();
        AttributeKind::Nominal(domain.into_iter().map(str::to_owned).collect())
    }
}

fn parse_numeric(col: &[String], name: &str) -> Result<Vec<f64>> {
    col.iter()
        .enumerate()
        .map(|(i, c)| {
            parse_finite(c).ok_or_else(|| Error::Ingest {
                row: i + 2,
                column: name.to_owned(),
                reason: format!("'{c}' is not a finite number"),
            })
        })
        .collect()
}

fn encode_nominal(col: &[String], domain: &[String], name: &str) -> Result<Vec<f64>> {
    col.iter()
        .enumerate()
        .map(|(i, c)| {
            domain
                .iter()
                .position(|d| d == c)
                .map(|p| p as f64)
                .ok_or_else(|| Error::Ingest {
                    row: i + 2,
                    column: name.to_owned(),
                    reason: format!("'{c}' is not in the declared domain"),
                })
        })
        .collect()
}
