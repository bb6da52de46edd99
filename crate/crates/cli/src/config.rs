//! The `fit` run configuration and command-line overrides of it.
//!
//! Overrides are applied to the raw JSON document before it is typed, so an
//! override of a key that does not exist is rejected like any unknown key.

use std::path::{Path, PathBuf};

use mcgrad::calibrators::CalibratorSpec;
use mcgrad::dataset::SplitSpec;
use mcgrad::groups::GroupGenConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    /// Held-out test partition used for the report.
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub base: BaseSpec,
    #[serde(default = "default_calibrator")]
    pub calibrator: CalibratorSpec,
    #[serde(default)]
    pub groups: GroupsSpec,
    pub output_dir: PathBuf,
}

fn default_calibrator() -> CalibratorSpec {
    CalibratorSpec::Mcgrad(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub label_column: String,
    #[serde(default)]
    pub schema_path: Option<PathBuf>,
    #[serde(default)]
    pub weight_column: Option<String>,
    /// Columns that are neither features nor labels.
    #[serde(default)]
    pub ignore: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum BaseSpec {
    /// L2-regularized logistic regression trained on the training partition.
    Logistic(LogisticParams),
    /// Probabilities already present in a column of the data file.
    ExternalScores(ExternalScoresParams),
}

impl Default for BaseSpec {
    fn default() -> Self {
        BaseSpec::Logistic(LogisticParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalScoresParams {
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupsSpec {
    /// Generated from the training features.
    Unspecified {
        #[serde(default)]
        params: GroupGenConfig,
    },
    /// A JSON array of group definitions.
    File {
        path: PathBuf,
    },
    None,
}

impl Default for GroupsSpec {
    fn default() -> Self {
        GroupsSpec::Unspecified {
            params: GroupGenConfig::default(),
        }
    }
}

/// Calibrator kinds that take no parameters.
const UNIT_CALIBRATORS: [&str; 3] = ["none", "platt", "isotonic"];

/// A section created only by overrides takes the default kind.
fn default_kind(section: &mut Value, kind: &str) {
    if let Some(obj) = section.as_object_mut() {
        obj.entry("kind")
            .or_insert_with(|| Value::String(kind.into()));
    }
}

/// Fills in or drops `params` so tagged sections parse with or without it.
fn normalize_tagged(section: &mut Value, unit_kinds: &[&str]) {
    let Some(obj) = section.as_object_mut() else {
        return;
    };
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let empty = match obj.get("params") {
        None | Some(Value::Null) => true,
        Some(Value::Object(m)) => m.is_empty(),
        Some(_) => false,
    };
    if unit_kinds.contains(&kind.as_str()) {
        if empty {
            obj.remove("params");
        }
    } else if empty {
        obj.insert("params".into(), Value::Object(Map::new()));
    }
}

impl RunConfig {
    /// Parses a configuration document after applying `overrides`.
    pub fn from_value(mut doc: Value, overrides: &[Override]) -> CliResult<Self> {
        for o in overrides {
            o.apply(&mut doc)?;
        }
        if let Some(obj) = doc.as_object_mut() {
            if let Some(c) = obj.get_mut("calibrator") {
                default_kind(c, "mcgrad");
                normalize_tagged(c, &UNIT_CALIBRATORS);
            }
            if let Some(b) = obj.get_mut("base") {
                default_kind(b, "logistic");
                normalize_tagged(b, &[]);
            }
        }
        let config: RunConfig = serde_json::from_value(doc).map_err(CliError::config)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`; relative paths inside it are taken relative to the
    /// directory holding the file.
    pub fn load(path: &Path, overrides: &[Override]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_value(doc, overrides)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    fn resolve_paths(&mut self, root: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        };
        fix(&mut self.data.path);
        if let Some(p) = &mut self.data.schema_path {
            fix(p);
        }
        if let GroupsSpec::File { path } = &mut self.groups {
            fix(path);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> CliResult<()> {
        self.split.validate().map_err(CliError::config)?;
        match &self.calibrator {
            CalibratorSpec::Mcgrad(c) => c.validate(),
            CalibratorSpec::Hkrr(c) => c.validate(),
            CalibratorSpec::Dfmc(c) => c.validate(),
            CalibratorSpec::None | CalibratorSpec::Platt | CalibratorSpec::Isotonic => Ok(()),
        }
        .map_err(CliError::config)?;
        if let BaseSpec::Logistic(p) = &self.base {
            if !(p.l2 >= 0.0 && p.l2.is_finite()) {
                return Err(CliError::Config(format!(
                    "base l2 must be >= 0, got {}",
                    p.l2
                )));
            }
        }
        Ok(())
    }
}

/// `--a.b.c=value`: sets one key of the configuration document. The value is
/// read as JSON when it parses, otherwise as a string.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    pub fn new(dotted: &str, value: Value) -> Self {
        Self {
            path: dotted.split('.').map(str::to_string).collect(),
            value,
        }
    }

    pub fn parse(arg: &str) -> CliResult<Self> {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Config(format!("override `{arg}` must start with --")))?;
        let (key, raw) = body
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{arg}` needs `=value`")))?;
        if key.split('.').any(str::is_empty) {
            return Err(CliError::Config(format!("malformed override key `{key}`")));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        Ok(Self::new(key, value))
    }

    /// Whether a raw argument looks like a dotted override.
    pub fn is_override(arg: &str) -> bool {
        arg.strip_prefix("--")
            .and_then(|b| b.split_once('=').map(|(k, _)| k).or(Some(b)))
            .is_some_and(|k| k.contains('.'))
    }

    pub fn apply(&self, doc: &mut Value) -> CliResult<()> {
        let mut node = doc;
        for (depth, key) in self.path.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                CliError::Config(format!(
                    "cannot override `{}`: `{}` is not an object",
                    self.path.join("."),
                    self.path[..depth].join(".")
                ))
            })?;
            if depth + 1 == self.path.len() {
                obj.insert(key.clone(), self.value.clone());
                return Ok(());
            }
            node = obj
                .entry(key.clone())
                .or_insert_with(|| Value::Object(Map::new()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({"data": {"path": "d.csv", "label_column": "y"}, "output_dir": "out"})
    }

    #[test]
    fn defaults_are_materialized() {
        let config = RunConfig::from_value(minimal(), &[]).unwrap();
        assert_eq!(config.base, BaseSpec::default());
        let resolved = serde_json::to_value(&config).unwrap();
        assert_eq!(resolved["calibrator"]["kind"], "mcgrad");
        assert_eq!(resolved["calibrator"]["params"]["gbdt"]["num_leaves"], 5);
        assert_eq!(resolved["groups"]["mode"], "unspecified");
        assert_eq!(resolved["split"]["valid_fraction"], 0.2);
        // the resolved document parses back to the same config
        assert_eq!(RunConfig::from_value(resolved, &[]).unwrap(), config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc = minimal();
        doc["extra"] = json!(1);
        assert!(matches!(
            RunConfig::from_value(doc, &[]),
            Err(CliError::Config(_))
        ));
        let mut doc = minimal();
        doc["calibrator"] = json!({"kind": "mcgrad", "params": {"max_round": 3}});
        assert!(RunConfig::from_value(doc, &[]).is_err());
        let mut doc = minimal();
        doc["groups"] = json!({"mode": "file", "path": "g.json", "x": 1});
        assert!(RunConfig::from_value(doc, &[]).is_err());
    }

    #[test]
    fn unit_calibrators_accept_empty_params() {
        let mut doc = minimal();
        doc["calibrator"] = json!({"kind": "platt", "params": {}});
        let config = RunConfig::from_value(doc, &[]).unwrap();
        assert_eq!(config.calibrator, CalibratorSpec::Platt);
        let mut doc = minimal();
        doc["calibrator"] = json!({"kind": "isotonic", "params": {"a": 1}});
        assert!(RunConfig::from_value(doc, &[]).is_err());
    }

    #[test]
    fn dotted_overrides() {
        let o = Override::parse("--calibrator.params.max_rounds=10").unwrap();
        assert_eq!(o.path, vec!["calibrator", "params", "max_rounds"]);
        let config = RunConfig::from_value(minimal(), &[o]).unwrap();
        match config.calibrator {
            CalibratorSpec::Mcgrad(c) => assert_eq!(c.max_rounds, 10),
            other => panic!("unexpected {other:?}"),
        }
        let o = Override::parse("--data.label_column=target").unwrap();
        assert_eq!(o.value, json!("target"));
        let o = Override::parse("--calibrator.params.bogus=1").unwrap();
        assert!(RunConfig::from_value(minimal(), &[o]).is_err());
    }

    #[test]
    fn override_detection() {
        assert!(Override::is_override("--a.b=1"));
        assert!(Override::is_override("--a.b"));
        assert!(!Override::is_override("--max-rounds=3"));
        assert!(!Override::is_override("a.b=1"));
        assert!(Override::parse("--a..b=1").is_err());
        assert!(Override::parse("--a.b").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let o = Override::new("split.valid_fraction", json!(1.5));
        assert!(matches!(
            RunConfig::from_value(minimal(), &[o]),
            Err(CliError::Config(_))
        ));
    }
}
