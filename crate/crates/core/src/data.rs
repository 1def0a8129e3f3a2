//! Dataset ingestion, deterministic encoding, stratified splitting and
//! exploratory tables.
//!
//! Categorical and binary columns are label-encoded: codes `0..k-1` follow the
//! lexicographic (byte) order of the category text, and empty cells map to a
//! trailing [`MISSING_CATEGORY`] code. Continuous columns are parsed as `f64`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

/// Display name of the code assigned to empty categorical cells.
pub const MISSING_CATEGORY: &str = "(missing)";

const SPLIT_STREAM: u64 = 0x5711;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Binary,
    Categorical,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Category text by code. Empty for continuous columns.
    #[serde(default)]
    pub categories: Vec<String>,
}

impl Column {
    pub fn is_categorical(&self) -> bool {
        self.kind != ColumnKind::Continuous
    }

    pub fn code_of(&self, text: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == text)
    }

    pub fn decode(&self, code: f64) -> Option<&str> {
        if code < 0.0 || code.fract() != 0.0 {
            return None;
        }
        self.categories.get(code as usize).map(String::as_str)
    }
}

/// Encoded column layout of a dataset plus its binary label column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<Column>,
    pub label: Column,
}

impl FeatureSchema {
    pub fn new(features: Vec<Column>, label: Column) -> Result<Self> {
        let schema = FeatureSchema { features, label };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for col in self.features.iter().chain(std::iter::once(&self.label)) {
            if col.name.trim().is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column '{}'", col.name)));
            }
            match col.kind {
                ColumnKind::Continuous if !col.categories.is_empty() => {
                    return Err(Error::Schema(format!(
                        "continuous column '{}' cannot carry categories",
                        col.name
                    )));
                }
                ColumnKind::Binary | ColumnKind::Categorical => {
                    let distinct: BTreeSet<_> = col.categories.iter().collect();
                    if distinct.len() != col.categories.len() {
                        return Err(Error::Schema(format!(
                            "column '{}' has duplicate categories",
                            col.name
                        )));
                    }
                }
                _ => {}
            }
        }
        if self.label.kind != ColumnKind::Binary || self.label.categories.len() != 2 {
            return Err(Error::Schema(format!(
                "label column '{}' must be binary with two categories",
                self.label.name
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|c| c.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|c| c.name == name)
    }

    /// SHA-256 of the canonical JSON form; models record it to reject data
    /// encoded under a different schema.
    pub fn fingerprint(&self) -> String {
        let text = crate::json::to_canonical_string(self).expect("schema serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Schema configuration file: which columns exist, their kinds, and which
/// one is the label. Category maps are derived from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub label: String,
    pub columns: Vec<ColumnConfig>,
    /// Header columns dropped on load (row identifiers and the like).
    #[serde(default)]
    pub ignore: Vec<String>,
    /// Label text meaning "condition present".
    #[serde(default = "default_positive_label")]
    pub positive_label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub name: String,
    pub kind: ColumnKind,
}

fn default_positive_label() -> String {
    "1".to_string()
}

impl SchemaConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "matrix buffer of length {} cannot be {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Input("ragged rows".into()));
        }
        Ok(Matrix {
            data: rows.concat(),
            rows: rows.len(),
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}

/// Encoded features, binary labels (1 = condition present) and the schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub schema: FeatureSchema,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u8>, schema: FeatureSchema) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Input("dataset has no rows".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::Input(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() != schema.width() {
            return Err(Error::Schema(format!(
                "matrix has {} columns, schema has {}",
                features.cols(),
                schema.width()
            )));
        }
        if features.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite feature value".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Input("labels must be 0 or 1".into()));
        }
        Ok(Dataset {
            features,
            labels,
            schema,
        })
    }

    /// Unlabelled-schema convenience used by tests and synthetic data: every
    /// column continuous, label categories `0`/`1`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let features = Matrix::from_rows(rows)?;
        let columns = (0..features.cols())
            .map(|j| Column {
                name: format!("x{j}"),
                kind: ColumnKind::Continuous,
                categories: Vec::new(),
            })
            .collect();
        let schema = FeatureSchema::new(columns, label_column("label", "0", "1"))?;
        Dataset::new(features, labels, schema)
    }

    pub fn row_count(&self) -> usize {
        self.labels.len()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - pos, pos]
    }

    /// Rows `idx` in the given order. Panics on out-of-range indices.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            schema: self.schema.clone(),
        }
    }
}

fn label_column(name: &str, negative: &str, positive: &str) -> Column {
    Column {
        name: name.to_string(),
        kind: ColumnKind::Binary,
        categories: vec![negative.to_string(), positive.to_string()],
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn load_csv(path: &Path, config: &SchemaConfig) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, config)
}

/// Parses comma-delimited UTF-8 CSV with a header row. Header names must match
/// the configured columns (any order); ignored columns are skipped.
pub fn read_csv<R: Read>(reader: R, config: &SchemaConfig) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let mut position = BTreeMap::new();
    for (i, name) in header.iter().enumerate() {
        if position.insert(name.as_str(), i).is_some() {
            return Err(Error::Schema(format!("duplicate header column '{name}'")));
        }
        let known = name == &config.label
            || config.columns.iter().any(|c| &c.name == name)
            || config.ignore.iter().any(|c| c == name);
        if !known {
            return Err(Error::Schema(format!("unknown column '{name}'")));
        }
    }
    let find = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column '{name}' missing from header")))
    };
    let label_pos = find(&config.label)?;
    let feature_pos = config
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if records.is_empty() {
        return Err(Error::Input("csv has no data rows".into()));
    }

    // Build category maps from the observed values.
    let mut columns = Vec::with_capacity(config.columns.len());
    for (cfg, &pos) in config.columns.iter().zip(&feature_pos) {
        let categories = match cfg.kind {
            ColumnKind::Continuous => Vec::new(),
            ColumnKind::Binary | ColumnKind::Categorical => {
                let mut seen = BTreeSet::new();
                let mut has_missing = false;
                for r in &records {
                    let v = r[pos].as_str();
                    if v.is_empty() {
                        has_missing = true;
                    } else {
                        seen.insert(v.to_string());
                    }
                }
                if cfg.kind == ColumnKind::Binary && seen.len() > 2 {
                    return Err(Error::Schema(format!(
                        "binary column '{}' has {} distinct values",
                        cfg.name,
                        seen.len()
                    )));
                }
                let mut cats: Vec<String> = seen.into_iter().collect();
                if has_missing {
                    cats.push(MISSING_CATEGORY.to_string());
                }
                cats
            }
        };
        columns.push(Column {
            name: cfg.name.clone(),
            kind: cfg.kind,
            categories,
        });
    }

    let mut negative: Option<String> = None;
    let mut labels = Vec::with_capacity(records.len());
    for (row, r) in records.iter().enumerate() {
        let v = r[label_pos].as_str();
        if v.is_empty() {
            return Err(Error::Schema(format!("empty label at row {}", row + 1)));
        }
        if v == config.positive_label {
            labels.push(1u8);
        } else {
            match &negative {
                Some(n) if n != v => {
                    return Err(Error::Schema(format!(
                        "label column '{}' has more than two values ('{n}', '{v}', '{}')",
                        config.label, config.positive_label
                    )))
                }
                Some(_) => {}
                None => negative = Some(v.to_string()),
            }
            labels.push(0u8);
        }
    }
    let negative = negative.unwrap_or_else(|| {
        if config.positive_label == "1" {
            "0".to_string()
        } else {
            format!("not {}", config.positive_label)
        }
    });
    let label = Column {
        name: config.label.clone(),
        kind: ColumnKind::Binary,
        categories: vec![negative, config.positive_label.clone()],
    };

    let width = columns.len();
    let mut data = Vec::with_capacity(records.len() * width);
    for (row, r) in records.iter().enumerate() {
        for (col, &pos) in columns.iter().zip(&feature_pos) {
            let v = r[pos].as_str();
            let encoded = match col.kind {
                ColumnKind::Continuous => match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => x,
                    _ => {
                        return Err(Error::Parse {
                            row: row + 1,
                            column: col.name.clone(),
                            value: v.to_string(),
                        })
                    }
                },
                _ => {
                    let key = if v.is_empty() { MISSING_CATEGORY } else { v };
                    col.code_of(key).expect("category collected above") as f64
                }
            };
            data.push(encoded);
        }
    }

    let schema = FeatureSchema::new(columns, label)?;
    let rows = records.len();
    Dataset::new(Matrix::new(data, rows, width)?, labels, schema)
}

/// Train/test partition with the source row indices of each side.
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Per-class sampling without replacement. Each class sends
/// `round_half_up(test_fraction * class_size)` rows to the test side, clamped
/// so both sides keep at least one row of the class. Index lists are sorted.
pub fn stratified_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Input(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..d.row_count()).filter(|&i| d.labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {} row(s); at least 2 are needed",
                members.len()
            )));
        }
        let mut rng = rng::stream(seed, &[SPLIT_STREAM, class as u64]);
        members.shuffle(&mut rng);
        let n_test = round_half_up(test_fraction * members.len() as f64).clamp(1, members.len() - 1);
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SplitPair {
        train: d.subset(&train_idx),
        test: d.subset(&test_idx),
        train_indices: train_idx,
        test_indices: test_idx,
        seed,
        test_fraction,
    })
}

/// Counts of (category, label) for one categorical feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Crosstab {
    pub feature: String,
    pub categories: Vec<String>,
    /// `counts[code] = [label-0 count, label-1 count]`.
    pub counts: Vec<[u64; 2]>,
}

impl Crosstab {
    pub fn count(&self, category: &str, label: u8) -> Option<u64> {
        let code = self.categories.iter().position(|c| c == category)?;
        Some(self.counts[code][label as usize])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }
}

impl Serialize for Crosstab {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let table: BTreeMap<&str, BTreeMap<&str, u64>> = self
            .categories
            .iter()
            .zip(&self.counts)
            .map(|(c, n)| (c.as_str(), BTreeMap::from([("0", n[0]), ("1", n[1])])))
            .collect();
        table.serialize(s)
    }
}

pub fn crosstab(d: &Dataset, feature: &str) -> Result<Crosstab> {
    let j = d
        .schema
        .feature_index(feature)
        .ok_or_else(|| Error::Schema(format!("unknown column '{feature}'")))?;
    let col = &d.schema.features[j];
    if !col.is_categorical() {
        return Err(Error::UnsupportedFeature(feature.to_string()));
    }
    let mut counts = vec![[0u64; 2]; col.categories.len()];
    for i in 0..d.row_count() {
        let code = d.features.get(i, j) as usize;
        counts[code][d.labels[i] as usize] += 1;
    }
    Ok(Crosstab {
        feature: feature.to_string(),
        categories: col.categories.clone(),
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

/// Pearson correlation over every encoded feature plus the label (last).
/// Zero-variance columns correlate 0 with everything else and 1 with
/// themselves.
pub fn correlation_matrix(d: &Dataset) -> CorrelationMatrix {
    let mut cols: Vec<Vec<f64>> = (0..d.width()).map(|j| d.features.column(j)).collect();
    cols.push(d.labels.iter().map(|&l| l as f64).collect());
    let mut names = d.schema.feature_names();
    names.push(d.schema.label.name.clone());

    let n = d.row_count() as f64;
    let centered: Vec<(Vec<f64>, f64)> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let dev: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let ss = dev.iter().map(|v| v * v).sum::<f64>();
            (dev, ss)
        })
        .collect();

    let k = cols.len();
    let mut matrix = vec![vec![0.0; k]; k];
    for a in 0..k {
        matrix[a][a] = 1.0;
        for b in a + 1..k {
            let (da, sa) = &centered[a];
            let (db, sb) = &centered[b];
            let r = if *sa == 0.0 || *sb == 0.0 {
                0.0
            } else {
                let cov: f64 = da.iter().zip(db).map(|(x, y)| x * y).sum();
                (cov / (sa.sqrt() * sb.sqrt())).clamp(-1.0, 1.0)
            };
            matrix[a][b] = r;
            matrix[b][a] = r;
        }
    }
    CorrelationMatrix {
        columns: names,
        matrix,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdaReport {
    pub crosstabs: BTreeMap<String, Crosstab>,
    pub correlation: CorrelationMatrix,
}

pub fn eda(d: &Dataset) -> EdaReport {
    let crosstabs = d
        .schema
        .features
        .iter()
        .filter(|c| c.is_categorical())
        .map(|c| (c.name.clone(), crosstab(d, &c.name).expect("categorical column")))
        .collect();
    EdaReport {
        crosstabs,
        correlation: correlation_matrix(d),
    }
}
