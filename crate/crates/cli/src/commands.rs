use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mcgrad::bench::{
    run_ablation, run_comparison, synthetic_suite, write_outputs, AblationResults, BenchConfig,
    BenchDataset, Method, Variant,
};
use mcgrad::calibrators::{
    apply_calibrator, fit_calibrator, fit_logistic, Calibrator, CalibratorFit,
};
use mcgrad::dataset::{
    dataset_from_table, parse_labels, split_indices, CsvOptions, FeatureSchema, RawTable,
};
use mcgrad::groups::{generate_unspecified_groups, GroupDefinition, GroupSet};
use mcgrad::metrics::{evaluate, MetricReport, REPORT_CSV_COLUMNS};
use serde::{Deserialize, Serialize};

use crate::artifact::{base_scores, score_column, BaseModel, ModelArtifact, ARTIFACT_VERSION};
use crate::config::{BaseSpec, GroupsSpec, Override, RunConfig};
use crate::error::{CliError, CliResult};

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    let file = File::create(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> CliResult<()> {
    w.flush()
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_table(path: &Path) -> CliResult<RawTable> {
    RawTable::read(path).map_err(CliError::data)
}

fn read_group_definitions(path: &Path) -> CliResult<Vec<GroupDefinition>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Test-partition metrics written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub calibrator: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_groups: usize,
    pub base: MetricReport,
    /// Absent when the calibrator is `none`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrated: Option<MetricReport>,
    pub warnings: Vec<String>,
}

fn write_report_csv(path: &Path, rows: &[(&str, &MetricReport)]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let header = std::iter::once("model").chain(REPORT_CSV_COLUMNS);
    w.write_record(header).map_err(CliError::data)?;
    for (name, report) in rows {
        let record = std::iter::once(name.to_string()).chain(report.csv_values());
        w.write_record(record).map_err(CliError::data)?;
    }
    finish(w, path)
}

fn write_groups_csv(path: &Path, rows: &[(&str, &MetricReport)]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["model", "group", "n", "ecce", "sigma", "ecce_sigma"])
        .map_err(CliError::data)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (name, report) in rows {
        for g in &report.per_group {
            w.write_record([
                name.to_string(),
                g.name.clone(),
                g.n.to_string(),
                opt(g.ecce),
                opt(g.sigma),
                opt(g.ecce_sigma),
            ])
            .map_err(CliError::data)?;
        }
    }
    finish(w, path)
}

/// The serialized name of a unit enum variant.
fn status_name<T: Serialize>(s: &T) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn write_trace_csv(path: &Path, fit: &CalibratorFit) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "phase",
        "round",
        "train_loss",
        "valid_loss",
        "theta",
        "rescale_status",
        "accepted",
    ])
    .map_err(CliError::data)?;
    for r in fit.trace.iter().flatten() {
        w.write_record([
            "select".to_string(),
            r.round.to_string(),
            r.train_loss.to_string(),
            r.valid_loss.to_string(),
            r.theta.to_string(),
            r.rescale_status
                .as_ref()
                .map(status_name)
                .unwrap_or_default(),
            r.accepted.to_string(),
        ])
        .map_err(CliError::data)?;
    }
    for r in fit.refit.iter().flatten() {
        w.write_record([
            "refit".to_string(),
            r.round.to_string(),
            r.train_loss.to_string(),
            String::new(),
            r.theta.to_string(),
            status_name(&r.rescale_status),
            "true".to_string(),
        ])
        .map_err(CliError::data)?;
    }
    finish(w, path)
}

fn write_scores_csv(
    path: &Path,
    rows: &[usize],
    base: &[f64],
    calibrated: &[f64],
) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["row_index", "base_score", "calibrated_score"])
        .map_err(CliError::data)?;
    for (k, &row) in rows.iter().enumerate() {
        w.write_record([
            row.to_string(),
            base[k].to_string(),
            calibrated[k].to_string(),
        ])
        .map_err(CliError::data)?;
    }
    finish(w, path)
}

/// What `fit` produced.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub output_dir: PathBuf,
    pub report: FitReport,
}

/// Fits the base model and calibrator on the training partition and reports
/// on the held-out test partition. Nothing is written unless every step
/// succeeds.
pub fn cmd_fit(config_path: &Path, overrides: &[Override]) -> CliResult<FitOutcome> {
    let config = RunConfig::load(config_path, overrides)?;

    let table = read_table(&config.data.path)?;
    let mut options = CsvOptions {
        label_column: Some(config.data.label_column.clone()),
        weight_column: config.data.weight_column.clone(),
        ignore: config.data.ignore.clone(),
    };
    if let BaseSpec::ExternalScores(p) = &config.base {
        if !options.ignore.contains(&p.column) {
            options.ignore.push(p.column.clone());
        }
    }
    let schema = match &config.data.schema_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<FeatureSchema>(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => FeatureSchema::infer(&table, &options),
    };
    let (data, _) = dataset_from_table(&table, &options, Some(&schema)).map_err(CliError::data)?;
    let (train_idx, test_idx) =
        split_indices(data.n_rows(), &config.split).map_err(CliError::data)?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);

    let (base_model, base_train, base_test) = match &config.base {
        BaseSpec::Logistic(p) => {
            let fit = fit_logistic(&train, p.l2).map_err(CliError::training)?;
            if !fit.converged {
                log::warn!("logistic base model did not converge");
            }
            let tr = fit
                .model
                .predict(train.features())
                .map_err(CliError::training)?;
            let te = fit
                .model
                .predict(test.features())
                .map_err(CliError::training)?;
            (BaseModel::Logistic { model: fit.model }, tr, te)
        }
        BaseSpec::ExternalScores(p) => {
            let all = score_column(&table, &p.column)?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| all[i]).collect::<Vec<f64>>();
            (
                BaseModel::ExternalScores {
                    column: p.column.clone(),
                },
                pick(&train_idx),
                pick(&test_idx),
            )
        }
    };

    let definitions = match &config.groups {
        GroupsSpec::Unspecified { params } => {
            generate_unspecified_groups(train.features(), params)
                .map_err(CliError::training)?
                .0
        }
        GroupsSpec::File { path } => read_group_definitions(path)?,
        GroupsSpec::None => Vec::new(),
    };
    let groups_train =
        GroupSet::evaluate(&definitions, train.features()).map_err(CliError::data)?;
    let groups_test = GroupSet::evaluate(&definitions, test.features()).map_err(CliError::data)?;

    let fit = fit_calibrator(&config.calibrator, &train, &base_train, &groups_train)
        .map_err(CliError::training)?;
    let calibrated_test = apply_calibrator(&fit.model, &base_test, test.features(), &groups_test)
        .map_err(CliError::training)?;

    let groups = (!groups_test.is_empty()).then_some(&groups_test);
    let labels = test.labels();
    let base_report =
        evaluate(&base_test, labels, test.weights(), groups).map_err(CliError::training)?;
    let calibrated_report = match fit.model {
        Calibrator::None => None,
        _ => Some(
            evaluate(&calibrated_test, labels, test.weights(), groups)
                .map_err(CliError::training)?,
        ),
    };
    let report = FitReport {
        calibrator: fit.model.kind().to_string(),
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        n_groups: definitions.len(),
        base: base_report,
        calibrated: calibrated_report,
        warnings: fit.warnings.clone(),
    };
    for w in &report.warnings {
        log::warn!("{w}");
    }

    let out = &config.output_dir;
    create_dir(out)?;
    let artifact = ModelArtifact {
        version: ARTIFACT_VERSION,
        schema,
        label_column: config.data.label_column.clone(),
        weight_column: config.data.weight_column.clone(),
        ignore: config.data.ignore.clone(),
        base: base_model,
        groups: definitions,
        calibrator: fit.model.clone(),
    };
    write_json(&out.join("model.json"), &artifact)?;
    if let BaseModel::Logistic { model } = &artifact.base {
        write_json(&out.join("base_model.json"), model)?;
    }
    write_json(&out.join("config.resolved.json"), &config)?;
    write_json(&out.join("report.json"), &report)?;
    let mut rows = vec![("base", &report.base)];
    if let Some(c) = &report.calibrated {
        rows.push(("calibrated", c));
    }
    write_report_csv(&out.join("report.csv"), &rows)?;
    write_groups_csv(&out.join("groups.csv"), &rows)?;
    if fit.trace.is_some() {
        write_trace_csv(&out.join("trace.csv"), &fit)?;
    }
    write_scores_csv(
        &out.join("predictions.csv"),
        &test_idx,
        &base_test,
        &calibrated_test,
    )?;
    Ok(FitOutcome {
        output_dir: out.clone(),
        report,
    })
}

/// Scores every row of `data_path` with a saved artifact. Returns the row count.
pub fn cmd_predict(model_path: &Path, data_path: &Path, out_path: &Path) -> CliResult<usize> {
    let artifact = ModelArtifact::load(model_path)?;
    let table = read_table(data_path)?;
    let features = artifact
        .schema
        .encode(&table, &artifact.csv_options())
        .map_err(CliError::data)?;
    let base = base_scores(&artifact.base, &features, &table)?;
    let groups = if artifact.calibrator.uses_groups() {
        GroupSet::evaluate(&artifact.groups, &features).map_err(CliError::data)?
    } else {
        GroupSet::default()
    };
    let calibrated = apply_calibrator(&artifact.calibrator, &base, &features, &groups)
        .map_err(CliError::data)?;
    let rows: Vec<usize> = (0..base.len()).collect();
    write_scores_csv(out_path, &rows, &base, &calibrated)?;
    Ok(rows.len())
}

/// Inputs of `evaluate`.
#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub scores: PathBuf,
    pub score_column: String,
    /// A file holding the label column, or the full data file when groups
    /// are needed.
    pub labels: PathBuf,
    pub label_column: String,
    pub weight_column: Option<String>,
    /// A JSON groups section (`{"mode": ...}`) evaluated on the label file's
    /// feature columns.
    pub groups: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<MetricReport> {
    let groups_spec: Option<GroupsSpec> = match &args.groups {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            )
        }
    };
    let score_table = read_table(&args.scores)?;
    let scores = score_column(&score_table, &args.score_column)?;
    let label_table = read_table(&args.labels)?;
    let labels = parse_labels(&label_table, &args.label_column).map_err(CliError::data)?;
    if scores.len() != labels.len() {
        return Err(CliError::Data(format!(
            "alignment error: {} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let weights = match &args.weight_column {
        None => None,
        Some(c) => Some(
            label_table
                .numeric_column(c)
                .map_err(CliError::data)?
                .into_iter()
                .map(|w| w.unwrap_or(1.0))
                .collect::<Vec<f64>>(),
        ),
    };

    let groups = match groups_spec {
        None | Some(GroupsSpec::None) => None,
        Some(spec) => {
            let mut ignore = Vec::new();
            if label_table.column_index(&args.score_column).is_some() {
                ignore.push(args.score_column.clone());
            }
            let options = CsvOptions {
                label_column: Some(args.label_column.clone()),
                weight_column: args.weight_column.clone(),
                ignore,
            };
            let schema = FeatureSchema::infer(&label_table, &options);
            let features = schema
                .encode(&label_table, &options)
                .map_err(CliError::data)?;
            let definitions = match spec {
                GroupsSpec::Unspecified { params } => {
                    generate_unspecified_groups(&features, &params)
                        .map_err(CliError::training)?
                        .0
                }
                GroupsSpec::File { path } => read_group_definitions(&path)?,
                GroupsSpec::None => unreachable!("handled above"),
            };
            Some(GroupSet::evaluate(&definitions, &features).map_err(CliError::data)?)
        }
    };

    let report =
        evaluate(&scores, &labels, weights.as_deref(), groups.as_ref()).map_err(CliError::data)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("report.json"), &report)?;
    let mut w = csv_writer(&args.out.join("report.csv"))?;
    w.write_record(REPORT_CSV_COLUMNS).map_err(CliError::data)?;
    w.write_record(report.csv_values())
        .map_err(CliError::data)?;
    finish(w, &args.out.join("report.csv"))?;
    let path = args.out.join("groups.csv");
    let file = File::create(&path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    report
        .write_group_csv(BufWriter::new(file))
        .map_err(CliError::data)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Synthetic,
    Csv,
}

/// Optional JSON file for `bench`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchFile {
    pub config: BenchConfig,
    /// Overrides the built-in synthetic suite; required for the csv suite.
    pub datasets: Vec<BenchDataset>,
    pub seeds: Option<Vec<u64>>,
    pub methods: Option<Vec<Method>>,
    pub variants: Option<Vec<Variant>>,
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub suite: Suite,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Runs seeds `0..n_seeds` unless the file lists seeds.
    pub n_seeds: Option<u64>,
    /// Rows per synthetic dataset in the built-in suite.
    pub n_rows: usize,
    pub ablation: bool,
}

pub const DEFAULT_BENCH_SEEDS: u64 = 5;

/// Runs the comparison grid (and the ablation unless disabled). Returns the
/// number of failed cells.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<usize> {
    let file: BenchFile = match &args.config {
        None => BenchFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    file.config.mcgrad.validate().map_err(CliError::config)?;
    file.config.hkrr.validate().map_err(CliError::config)?;
    let is_csv = |d: &BenchDataset| matches!(d, BenchDataset::Csv { .. });
    let datasets: Vec<BenchDataset> = match args.suite {
        Suite::Synthetic => {
            let listed: Vec<BenchDataset> = file
                .datasets
                .iter()
                .filter(|d| !is_csv(d))
                .cloned()
                .collect();
            if listed.is_empty() {
                synthetic_suite(args.n_rows)
            } else {
                listed
            }
        }
        Suite::Csv => {
            let root = args
                .config
                .as_deref()
                .and_then(Path::parent)
                .unwrap_or(Path::new(""));
            file.datasets
                .iter()
                .filter(|d| is_csv(d))
                .cloned()
                .map(|mut d| {
                    if let BenchDataset::Csv { path, .. } = &mut d {
                        if path.is_relative() {
                            *path = root.join(&*path);
                        }
                    }
                    d
                })
                .collect()
        }
    };
    if datasets.is_empty() {
        return Err(CliError::Config(
            "the csv suite needs a --config file listing csv datasets".into(),
        ));
    }
    let seeds: Vec<u64> = match (&file.seeds, args.n_seeds) {
        (_, Some(n)) => (0..n).collect(),
        (Some(s), None) => s.clone(),
        (None, None) => (0..DEFAULT_BENCH_SEEDS).collect(),
    };
    let methods = file.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
    let variants = file
        .variants
        .clone()
        .unwrap_or_else(|| Variant::ALL.to_vec());

    let comparison = run_comparison(&datasets, &methods, &seeds, &file.config);
    let ablation = if args.ablation {
        run_ablation(&variants, &datasets, &seeds, &file.config)
    } else {
        AblationResults::default()
    };
    let failures = comparison.failures.len() + ablation.failures.len();
    for f in comparison.failures.iter().chain(&ablation.failures) {
        log::warn!(
            "{} / {} / seed {}: {}",
            f.dataset,
            f.method,
            f.seed,
            f.error
        );
    }
    if comparison.rows.is_empty() && failures > 0 {
        return Err(CliError::Training(format!(
            "all {failures} benchmark cells failed"
        )));
    }
    write_outputs(&args.out, &comparison, &ablation).map_err(CliError::data)?;
    Ok(failures)
}
