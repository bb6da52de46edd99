//! Tabular binary-classification data: CSV ingestion, feature encoding,
//! seeded train/validation splits and score augmentation.
//!
//! Features are stored column-major. Categorical columns are expanded into
//! one-hot blocks (`name=level`) in first-seen level order, and missing
//! numeric cells are imputed with the column mean recorded in the
//! [`FeatureSchema`], so an encoded matrix never contains NaN or infinities.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved name of the column holding the previous round's score.
pub const SCORE_COLUMN: &str = "__score__";

/// Level assigned to missing categorical cells.
pub const MISSING_LEVEL: &str = "__missing__";

/// Dense column-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    n_rows: usize,
}

impl Features {
    pub fn new(columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if columns.len() != names.len() {
            return Err(Error::LengthMismatch {
                expected: columns.len(),
                actual: names.len(),
            });
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has a non-finite value at row {i}"
                )));
            }
        }
        Ok(Self {
            columns,
            names,
            n_rows,
        })
    }

    /// Builds a matrix from row vectors with generated names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for row in rows {
            if row.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::new(columns, names)
    }

    /// An `n_rows x 0` matrix, used by calibrators that only look at scores.
    pub fn empty(n_rows: usize) -> Self {
        Self {
            columns: Vec::new(),
            names: Vec::new(),
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        Self {
            columns,
            names: self.names.clone(),
            n_rows: rows.len(),
        }
    }

    /// Appends `extra` columns on the right.
    pub fn hstack(&self, extra: &Features) -> Result<Self> {
        if extra.n_rows != self.n_rows && extra.n_cols() > 0 {
            return Err(Error::LengthMismatch {
                expected: self.n_rows,
                actual: extra.n_rows,
            });
        }
        let mut columns = self.columns.clone();
        columns.extend(extra.columns.iter().cloned());
        let mut names = self.names.clone();
        names.extend(extra.names.iter().cloned());
        Ok(Self {
            columns,
            names,
            n_rows: self.n_rows,
        })
    }

    /// Returns a copy with [`SCORE_COLUMN`] set to `scores`.
    ///
    /// An existing score column is overwritten in place, so repeated calls add
    /// exactly one column in total.
    pub fn with_score(&self, scores: &[f64]) -> Result<Self> {
        check_scores(scores, self.n_rows)?;
        let mut out = self.clone();
        match out.column_index(SCORE_COLUMN) {
            Some(j) => out.columns[j] = scores.to_vec(),
            None => {
                out.columns.push(scores.to_vec());
                out.names.push(SCORE_COLUMN.to_string());
            }
        }
        Ok(out)
    }

    /// Drops the score column if present.
    pub fn without_score(&self) -> Self {
        match self.column_index(SCORE_COLUMN) {
            None => self.clone(),
            Some(j) => {
                let mut out = self.clone();
                out.columns.remove(j);
                out.names.remove(j);
                out
            }
        }
    }
}

pub(crate) fn check_scores(scores: &[f64], n: usize) -> Result<()> {
    if scores.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: scores.len(),
        });
    }
    if let Some((row, &value)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !(0.0..=1.0).contains(*s))
    {
        return Err(Error::ScoreOutOfRange { row, value });
    }
    Ok(())
}

/// Features, binary labels and optional nonnegative row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Features,
    labels: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: Features, labels: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = features.n_rows();
        if n == 0 || labels.is_empty() {
            return Err(Error::EmptyData);
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidInput(format!(
                "label at row {i} is {}, expected 0 or 1",
                labels[i]
            )));
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: w.len(),
                });
            }
            if let Some(i) = w.iter().position(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "weight at row {i} is {}, expected a finite nonnegative value",
                    w[i]
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            weights,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn feature_names(&self) -> &[String] {
        self.features.names()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.subset(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| rows.iter().map(|&i| w[i]).collect()),
        }
    }

    pub fn with_features(&self, features: Features) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.weights.clone())
    }

    /// See [`Features::with_score`].
    pub fn with_score(&self, scores: &[f64]) -> Result<Self> {
        Ok(Self {
            features: self.features.with_score(scores)?,
            labels: self.labels.clone(),
            weights: self.weights.clone(),
        })
    }
}

/// Seeded train/validation split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_valid_fraction")]
    pub valid_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_valid_fraction() -> f64 {
    0.2
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            valid_fraction: default_valid_fraction(),
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(valid_fraction: f64, seed: u64) -> Self {
        Self {
            valid_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.valid_fraction > 0.0 && self.valid_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "valid_fraction must lie in (0, 1), got {}",
                self.valid_fraction
            )));
        }
        Ok(())
    }

    /// Number of validation rows for a dataset of `n` rows.
    pub fn valid_size(&self, n: usize) -> usize {
        let raw = (n as f64 * self.valid_fraction).round() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Ascending `(train, valid)` row indices partitioning `0..n`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::DegenerateSplit(n));
    }
    let n_valid = spec.valid_size(n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perm.shuffle(&mut rng);
    let mut valid = perm[..n_valid].to_vec();
    let mut train = perm[n_valid..].to_vec();
    valid.sort_unstable();
    train.sort_unstable();
    Ok((train, valid))
}

pub fn train_valid_split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, valid) = split_indices(data.n_rows(), spec)?;
    Ok((data.subset(&train), data.subset(&valid)))
}

/// Appends (or replaces) the [`SCORE_COLUMN`] of `data`.
pub fn augment_with_score(data: &Dataset, scores: &[f64]) -> Result<Dataset> {
    data.with_score(scores)
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Encoding recipe for one raw CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ColumnKind {
    Numeric {
        impute: f64,
    },
    /// One output column per level, in this order.
    Categorical {
        levels: Vec<String>,
    },
}

/// Maps raw CSV columns to encoded feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSchema>,
}

/// How non-feature columns of a CSV file are treated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvOptions {
    /// Required when building a [`Dataset`]; optional for inference-only reads.
    pub label_column: Option<String>,
    pub weight_column: Option<String>,
    /// Columns that are neither features nor labels (e.g. external scores).
    pub ignore: Vec<String>,
}

impl CsvOptions {
    pub fn with_label(label: impl Into<String>) -> Self {
        Self {
            label_column: Some(label.into()),
            ..Self::default()
        }
    }

    fn is_reserved(&self, name: &str) -> bool {
        self.label_column.as_deref() == Some(name)
            || self.weight_column.as_deref() == Some(name)
            || self.ignore.iter().any(|c| c == name)
    }
}

/// Raw string cells of a CSV file.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::EmptyFile);
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Parses a numeric column; missing cells become `None`.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column `{name}` not in file")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row[j].as_str();
                if is_missing(cell) {
                    Ok(None)
                } else {
                    parse_finite(cell).map(Some).ok_or_else(|| {
                        Error::InvalidInput(format!("row {i}: `{cell}` in `{name}` is not numeric"))
                    })
                }
            })
            .collect()
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none" | "?"
    )
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_label(cell: &str) -> Option<f64> {
    match cell.to_ascii_lowercase().as_str() {
        "0" | "false" => Some(0.0),
        "1" | "true" => Some(1.0),
        _ => None,
    }
}

impl FeatureSchema {
    /// Infers column kinds, imputation means and level orders from `table`.
    ///
    /// A column is numeric when every non-missing cell parses as a finite
    /// number; anything else is categorical.
    pub fn infer(table: &RawTable, options: &CsvOptions) -> Self {
        let columns = table
            .headers
            .iter()
            .enumerate()
            .filter(|(_, name)| !options.is_reserved(name))
            .map(|(j, name)| {
                let cells = table.rows.iter().map(|r| r[j].as_str());
                let numeric: Option<Vec<f64>> = cells
                    .clone()
                    .filter(|c| !is_missing(c))
                    .map(parse_finite)
                    .collect();
                let kind = match numeric {
                    Some(values) => {
                        let impute = if values.is_empty() {
                            0.0
                        } else {
                            values.iter().sum::<f64>() / values.len() as f64
                        };
                        ColumnKind::Numeric { impute }
                    }
                    None => {
                        let mut levels: Vec<String> = Vec::new();
                        for c in cells {
                            let level = if is_missing(c) { MISSING_LEVEL } else { c };
                            if !levels.iter().any(|l| l == level) {
                                levels.push(level.to_string());
                            }
                        }
                        ColumnKind::Categorical { levels }
                    }
                };
                ColumnSchema {
                    name: name.clone(),
                    kind,
                }
            })
            .collect();
        Self { columns }
    }

    /// Names of the encoded output columns.
    pub fn encoded_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.columns {
            match &col.kind {
                ColumnKind::Numeric { .. } => names.push(col.name.clone()),
                ColumnKind::Categorical { levels } => {
                    names.extend(levels.iter().map(|l| format!("{}={}", col.name, l)))
                }
            }
        }
        names
    }

    /// Encodes `table` into a feature matrix.
    ///
    /// Every schema column must be present in the file, and every file column
    /// must be either in the schema or reserved by `options`.
    pub fn encode(&self, table: &RawTable, options: &CsvOptions) -> Result<Features> {
        for header in &table.headers {
            if !options.is_reserved(header) && !self.columns.iter().any(|c| &c.name == header) {
                return Err(Error::SchemaMismatch(format!(
                    "file column `{header}` is not in the schema"
                )));
            }
        }
        let mut columns = Vec::new();
        for col in &self.columns {
            let j = table.column_index(&col.name).ok_or_else(|| {
                Error::SchemaMismatch(format!("schema column `{}` missing from file", col.name))
            })?;
            match &col.kind {
                ColumnKind::Numeric { impute } => {
                    let mut out = Vec::with_capacity(table.rows.len());
                    for (i, row) in table.rows.iter().enumerate() {
                        let cell = row[j].as_str();
                        if is_missing(cell) {
                            out.push(*impute);
                        } else {
                            out.push(parse_finite(cell).ok_or_else(|| {
                                Error::SchemaMismatch(format!(
                                    "row {i}: `{cell}` in numeric column `{}`",
                                    col.name
                                ))
                            })?);
                        }
                    }
                    columns.push(out);
                }
                ColumnKind::Categorical { levels } => {
                    let index: HashMap<&str, usize> = levels
                        .iter()
                        .enumerate()
                        .map(|(k, l)| (l.as_str(), k))
                        .collect();
                    let mut block = vec![vec![0.0; table.rows.len()]; levels.len()];
                    for (i, row) in table.rows.iter().enumerate() {
                        let cell = row[j].as_str();
                        let level = if is_missing(cell) {
                            MISSING_LEVEL
                        } else {
                            cell
                        };
                        // unknown levels stay all-zero
                        if let Some(&k) = index.get(level) {
                            block[k][i] = 1.0;
                        }
                    }
                    columns.extend(block);
                }
            }
        }
        Features::new(columns, self.encoded_names())
    }
}

/// Reads a labelled CSV file.
///
/// When `schema` is `None` it is inferred from the file and returned.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    schema: Option<&FeatureSchema>,
) -> Result<(Dataset, FeatureSchema)> {
    load_csv_with(path, &CsvOptions::with_label(label_column), schema)
}

pub fn load_csv_with(
    path: &Path,
    options: &CsvOptions,
    schema: Option<&FeatureSchema>,
) -> Result<(Dataset, FeatureSchema)> {
    let table = RawTable::read(path)?;
    dataset_from_table(&table, options, schema)
}

pub fn dataset_from_table(
    table: &RawTable,
    options: &CsvOptions,
    schema: Option<&FeatureSchema>,
) -> Result<(Dataset, FeatureSchema)> {
    let label_column = options
        .label_column
        .as_deref()
        .ok_or_else(|| Error::MissingLabelColumn(String::new()))?;
    let labels = parse_labels(table, label_column)?;
    let weights = match &options.weight_column {
        None => None,
        Some(name) => Some(
            table
                .numeric_column(name)?
                .into_iter()
                .map(|w| w.unwrap_or(1.0))
                .collect(),
        ),
    };
    let schema = match schema {
        Some(s) => s.clone(),
        None => FeatureSchema::infer(table, options),
    };
    let features = schema.encode(table, options)?;
    Ok((Dataset::new(features, labels, weights)?, schema))
}

/// The 0/1 labels in `column` of `table`.
pub fn parse_labels(table: &RawTable, column: &str) -> Result<Vec<f64>> {
    let j = table
        .column_index(column)
        .ok_or_else(|| Error::MissingLabelColumn(column.to_string()))?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(row, r)| {
            parse_label(&r[j]).ok_or_else(|| Error::UnparseableLabel {
                row,
                value: r[j].clone(),
            })
        })
        .collect()
}

/// Reads only the feature columns of a CSV file using a fixed schema.
pub fn load_features_csv(
    path: &Path,
    schema: &FeatureSchema,
    options: &CsvOptions,
) -> Result<(Features, RawTable)> {
    let table = RawTable::read(path)?;
    let features = schema.encode(&table, options)?;
    Ok((features, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn numeric_passthrough() {
        let f = write_csv("x,y\n0.5,0\n1.5,1\n-2,1\n");
        let (data, schema) = load_csv(f.path(), "y", None).unwrap();
        assert_eq!((data.n_rows(), data.n_cols()), (3, 1));
        assert_eq!(data.features().column(0), &[0.5, 1.5, -2.0]);
        assert_eq!(data.labels(), &[0.0, 1.0, 1.0]);
        assert_eq!(schema.columns[0].kind, ColumnKind::Numeric { impute: 0.0 });
    }

    #[test]
    fn categorical_one_hot_in_first_seen_order() {
        let f = write_csv("c,y\na,0\nb,1\na,1\n");
        let (data, _) = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(data.feature_names(), &["c=a", "c=b"]);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..2).map(|j| data.features().value(i, j)).collect())
            .collect();
        assert_eq!(rows, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn bad_label_is_reported_with_row() {
        let f = write_csv("x,y\n1,0\n2,2\n");
        match load_csv(f.path(), "y", None) {
            Err(Error::UnparseableLabel { row, value }) => {
                assert_eq!(row, 1);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_spellings() {
        let f = write_csv("x,y\n1,true\n2,FALSE\n3,1\n");
        let (data, _) = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(data.labels(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_label_column_and_empty_file() {
        let f = write_csv("x,z\n1,0\n");
        assert!(matches!(
            load_csv(f.path(), "y", None),
            Err(Error::MissingLabelColumn(_))
        ));
        let f = write_csv("x,y\n");
        assert!(matches!(
            load_csv(f.path(), "y", None),
            Err(Error::EmptyFile)
        ));
        let f = write_csv("");
        assert!(matches!(
            load_csv(f.path(), "y", None),
            Err(Error::EmptyFile)
        ));
    }

    #[test]
    fn missing_values_are_imputed() {
        let f = write_csv("x,c,y\n1,a,0\n,b,1\n3,,0\n");
        let (data, schema) = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(data.features().column(0), &[1.0, 2.0, 3.0]);
        assert_eq!(data.feature_names(), &["x", "c=a", "c=b", "c=__missing__"]);
        assert_eq!(data.features().column(3), &[0.0, 0.0, 1.0]);
        assert_eq!(schema.columns[0].kind, ColumnKind::Numeric { impute: 2.0 });
    }

    #[test]
    fn schema_reuse_and_mismatch() {
        let train = write_csv("x,c,y\n1,a,0\n2,b,1\n");
        let (_, schema) = load_csv(train.path(), "y", None).unwrap();
        // unknown level maps to an all-zero block
        let test = write_csv("x,c,y\n5,zzz,1\n");
        let (data, _) = load_csv(test.path(), "y", Some(&schema)).unwrap();
        assert_eq!(data.features().column(1), &[0.0]);
        assert_eq!(data.features().column(2), &[0.0]);

        let extra = write_csv("x,c,w,y\n5,a,1,1\n");
        assert!(matches!(
            load_csv(extra.path(), "y", Some(&schema)),
            Err(Error::SchemaMismatch(_))
        ));
        let missing = write_csv("x,y\n5,1\n");
        assert!(matches!(
            load_csv(missing.path(), "y", Some(&schema)),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn schema_json_round_trip() {
        let f = write_csv("x,c,y\n1,a,0\n2.5,b,1\n");
        let (data, schema) = load_csv(f.path(), "y", None).unwrap();
        let json = serde_json::to_string(&schema).unwrap();
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, schema);
        let (again, _) = load_csv(f.path(), "y", Some(&back)).unwrap();
        assert_eq!(again, data);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let features =
            Features::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let data = Dataset::new(features, vec![0.0; 10], None).unwrap();
        let spec = SplitSpec::new(0.2, 7);
        let (a, b) = train_valid_split(&data, &spec).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (8, 2));
        let (a2, b2) = train_valid_split(&data, &spec).unwrap();
        assert_eq!((a, b), (a2, b2));

        assert_eq!(SplitSpec::new(0.01, 0).valid_size(2), 1);
        let (t, v) = split_indices(2, &SplitSpec::new(0.01, 3)).unwrap();
        assert_eq!((t.len(), v.len()), (1, 1));
        assert!(matches!(
            split_indices(1, &SplitSpec::new(0.2, 0)),
            Err(Error::DegenerateSplit(1))
        ));
        assert!(matches!(
            split_indices(10, &SplitSpec::new(1.0, 0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn score_augmentation_replaces() {
        let features = Features::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let s1 = features.with_score(&[0.1, 0.2]).unwrap();
        assert_eq!(s1.n_cols(), 3);
        assert_eq!(s1.column(2), &[0.1, 0.2]);
        assert_eq!(s1.names()[2], SCORE_COLUMN);
        let s2 = s1.with_score(&[0.7, 0.8]).unwrap();
        assert_eq!(s2.n_cols(), 3);
        assert_eq!(s2.column(2), &[0.7, 0.8]);
        assert_eq!(s2.column(0), features.column(0));
        assert_eq!(s2.without_score(), features);
        assert!(matches!(
            features.with_score(&[0.1, 1.5]),
            Err(Error::ScoreOutOfRange { row: 1, .. })
        ));
        assert!(matches!(
            features.with_score(&[0.1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let (train, valid) = split_indices(n, &SplitSpec::new(frac, seed)).unwrap();
            prop_assert!(!train.is_empty() && !valid.is_empty());
            let mut all: Vec<usize> = train.iter().chain(&valid).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn encoding_is_a_pure_function_of_the_schema(
            cells in proptest::collection::vec((-1e3f64..1e3, 0usize..3, any::<bool>()), 1..40)
        ) {
            let mut csv = String::from("x,c,y\n");
            for (x, c, y) in &cells {
                csv.push_str(&format!("{x},{},{}\n", ["a", "b", ""][*c], u8::from(*y)));
            }
            let table = RawTable::from_reader(csv.as_bytes()).unwrap();
            let opts = CsvOptions::with_label("y");
            let schema = FeatureSchema::infer(&table, &opts);
            let first = schema.encode(&table, &opts).unwrap();
            let second = schema.encode(&table, &opts).unwrap();
            prop_assert_eq!(&first, &second);
            let augmented = first.with_score(&vec![0.5; first.n_rows()]).unwrap();
            for j in 0..first.n_cols() {
                prop_assert_eq!(augmented.column(j), first.column(j));
            }
        }
    }
}
