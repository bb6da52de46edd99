//! The `model.json` artifact written by `fit` and read by `predict`.

use std::path::Path;

use mcgrad::calibrators::{Calibrator, LogisticModel};
use mcgrad::dataset::{CsvOptions, FeatureSchema, Features, RawTable};
use mcgrad::groups::GroupDefinition;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const ARTIFACT_VERSION: u32 = 1;

/// How base scores are produced at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseModel {
    Logistic { model: LogisticModel },
    ExternalScores { column: String },
}

/// Everything needed to score a new CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub version: u32,
    pub schema: FeatureSchema,
    pub label_column: String,
    pub weight_column: Option<String>,
    pub ignore: Vec<String>,
    pub base: BaseModel,
    /// Definitions used to rebuild the group set for group-aware calibrators.
    pub groups: Vec<GroupDefinition>,
    pub calibrator: Calibrator,
}

impl ModelArtifact {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let artifact: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(CliError::Data(format!(
                "unsupported model artifact version {}",
                artifact.version
            )));
        }
        Ok(artifact)
    }

    /// Columns of a scoring file that are not features. The label and weight
    /// columns may be present or absent.
    pub fn csv_options(&self) -> CsvOptions {
        let mut ignore = self.ignore.clone();
        if let BaseModel::ExternalScores { column } = &self.base {
            if !ignore.contains(column) {
                ignore.push(column.clone());
            }
        }
        CsvOptions {
            label_column: Some(self.label_column.clone()),
            weight_column: self.weight_column.clone(),
            ignore,
        }
    }
}

/// Probabilities from a numeric column; every cell must be present and in [0, 1].
pub fn score_column(table: &RawTable, column: &str) -> CliResult<Vec<f64>> {
    table
        .numeric_column(column)
        .map_err(CliError::data)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(s) if (0.0..=1.0).contains(&s) => Ok(s),
            Some(s) => Err(CliError::Data(format!(
                "row {i}: score {s} in `{column}` is outside [0, 1]"
            ))),
            None => Err(CliError::Data(format!(
                "row {i}: missing score in `{column}`"
            ))),
        })
        .collect()
}

/// Base scores for every row of `table`.
pub fn base_scores(base: &BaseModel, features: &Features, table: &RawTable) -> CliResult<Vec<f64>> {
    match base {
        BaseModel::Logistic { model } => model.predict(features).map_err(CliError::data),
        BaseModel::ExternalScores { column } => score_column(table, column),
    }
}
