//! Experiment harness: synthetic data with known miscalibration, a method
//! comparison grid with rank summaries, and MCGrad ablations.
//!
//! Every grid cell is seeded and independent. Cells run in parallel and the
//! assembled tables are sorted before they are returned, so output files are
//! byte-identical across runs and thread counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrators::apply_calibrator;
use crate::calibrators::{
    default_dfmc_config, fit_calibrator, fit_logistic, CalibratorSpec, HkrrConfig,
};
use crate::dataset::{load_csv_with, split_indices, CsvOptions, Dataset, Features, SplitSpec};
use crate::error::{Error, Result};
use crate::gbdt::GbdtConfig;
use crate::groups::{
    generate_unspecified_groups, Condition, GroupDefinition, GroupGenConfig, GroupSet,
};
use crate::math::sigmoid;
use crate::mcgrad::McGradConfig;
use crate::metrics::{evaluate, mce};

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    /// Base logit = true logit.
    None,
    /// Base logit = true logit + magnitude on rows of the distorted segment.
    SegmentBias,
    /// Base logit = magnitude * true logit.
    GlobalScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Distortion {
    pub kind: DistortionKind,
    pub magnitude: f64,
    /// Index of the binary segment column that [`DistortionKind::SegmentBias`] shifts.
    pub segment: usize,
}

impl Default for Distortion {
    fn default() -> Self {
        Self {
            kind: DistortionKind::None,
            magnitude: 0.0,
            segment: 0,
        }
    }
}

/// Rows have `d` standard-normal columns `x0..` followed by `n_segments`
/// binary columns `s0..`. The true logit is
/// `intercept + weights . x + segment_offsets . s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub n_segments: usize,
    pub segment_rate: f64,
    pub intercept: f64,
    /// Empty means the default pattern `0.8, -0.6, 0.4, ...` scaled down with
    /// the column index.
    pub weights: Vec<f64>,
    /// Empty means no segment effect in the true logit.
    pub segment_offsets: Vec<f64>,
    pub distortion: Distortion,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 20_000,
            d: 4,
            n_segments: 2,
            segment_rate: 0.3,
            intercept: -0.5,
            weights: Vec::new(),
            segment_offsets: Vec::new(),
            distortion: Distortion::default(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn segment_bias(n: usize, magnitude: f64, seed: u64) -> Self {
        Self {
            n,
            seed,
            distortion: Distortion {
                kind: DistortionKind::SegmentBias,
                magnitude,
                segment: 0,
            },
            ..Self::default()
        }
    }

    pub fn calibrated(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            ..Self::default()
        }
    }

    fn weights(&self) -> Vec<f64> {
        if !self.weights.is_empty() {
            return self.weights.clone();
        }
        (0..self.d)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * 0.8 / (1.0 + 0.5 * j as f64)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 2 {
            return fail("synthetic n must be >= 2".into());
        }
        if self.d + self.n_segments == 0 {
            return fail("synthetic data needs at least one column".into());
        }
        if !self.weights.is_empty() && self.weights.len() != self.d {
            return fail(format!(
                "expected {} weights, got {}",
                self.d,
                self.weights.len()
            ));
        }
        if !self.segment_offsets.is_empty() && self.segment_offsets.len() != self.n_segments {
            return fail(format!(
                "expected {} segment offsets, got {}",
                self.n_segments,
                self.segment_offsets.len()
            ));
        }
        if !(0.0..=1.0).contains(&self.segment_rate) {
            return fail("segment_rate must lie in [0, 1]".into());
        }
        if self.distortion.kind == DistortionKind::SegmentBias
            && self.distortion.segment >= self.n_segments
        {
            return fail("distortion segment index out of range".into());
        }
        Ok(())
    }
}

/// Generated data, base-model scores and true probabilities.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let n = spec.n;
    let w = spec.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns = vec![Vec::with_capacity(n); spec.d + spec.n_segments];
    let mut labels = Vec::with_capacity(n);
    let mut base = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let mut z = spec.intercept;
        for j in 0..spec.d {
            let x: f64 = rng.sample(StandardNormal);
            z += w[j] * x;
            columns[j].push(x);
        }
        let mut segs = Vec::with_capacity(spec.n_segments);
        for k in 0..spec.n_segments {
            let s = f64::from(rng.random::<f64>() < spec.segment_rate);
            if let Some(off) = spec.segment_offsets.get(k) {
                z += off * s;
            }
            columns[spec.d + k].push(s);
            segs.push(s);
        }
        let p = sigmoid(z);
        labels.push(f64::from(rng.random::<f64>() < p));
        let m = spec.distortion.magnitude;
        let base_logit = match spec.distortion.kind {
            DistortionKind::None => z,
            DistortionKind::SegmentBias => z + m * segs[spec.distortion.segment],
            DistortionKind::GlobalScale => m * z,
        };
        truth.push(p);
        base.push(if spec.distortion.kind == DistortionKind::None {
            p
        } else {
            sigmoid(base_logit)
        });
    }
    let names = (0..spec.d)
        .map(|j| format!("x{j}"))
        .chain((0..spec.n_segments).map(|k| format!("s{k}")))
        .collect();
    let features = Features::new(columns, names)?;
    Ok((Dataset::new(features, labels, None)?, base, truth))
}

// ---------------------------------------------------------------------------
// Grid configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Base,
    Mcgrad,
    Platt,
    Isotonic,
    Hkrr,
    Dfmc,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Base,
        Method::Mcgrad,
        Method::Platt,
        Method::Isotonic,
        Method::Hkrr,
        Method::Dfmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::Mcgrad => "mcgrad",
            Method::Platt => "platt",
            Method::Isotonic => "isotonic",
            Method::Hkrr => "hkrr",
            Method::Dfmc => "dfmc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// A benchmark dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchDataset {
    /// Regenerated per seed with `spec.seed` replaced by the cell seed. The
    /// base model is the generator's distorted logistic score.
    Synthetic { name: String, spec: SyntheticSpec },
    /// A pre-downloaded CSV. The base model is a logistic regression fit
    /// on the training split.
    Csv {
        name: String,
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        weight_column: Option<String>,
        /// Prespecified groups evaluated on the encoded features.
        #[serde(default)]
        groups: Vec<GroupDefinition>,
    },
}

impl BenchDataset {
    pub fn name(&self) -> &str {
        match self {
            BenchDataset::Synthetic { name, .. } | BenchDataset::Csv { name, .. } => name,
        }
    }
}

/// The default synthetic suite: one calibrated and one segment-biased dataset.
pub fn synthetic_suite(n: usize) -> Vec<BenchDataset> {
    vec![
        BenchDataset::Synthetic {
            name: "synthetic_calibrated".into(),
            spec: SyntheticSpec::calibrated(n, 0),
        },
        BenchDataset::Synthetic {
            name: "synthetic_segment_bias".into(),
            spec: SyntheticSpec::segment_bias(n, 1.0, 0),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub test_fraction: f64,
    pub mcgrad: McGradConfig,
    pub hkrr: HkrrConfig,
    pub dfmc: GbdtConfig,
    pub logistic_l2: f64,
    pub unspecified_groups: GroupGenConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            mcgrad: McGradConfig::default(),
            hkrr: HkrrConfig::default(),
            dfmc: default_dfmc_config(),
            logistic_l2: 1e-4,
            unspecified_groups: GroupGenConfig::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

/// Train/test data of one (dataset, seed) cell with base scores and groups.
pub struct Cell {
    pub train: Dataset,
    pub test: Dataset,
    pub base_train: Vec<f64>,
    pub base_test: Vec<f64>,
    pub unspecified_train: GroupSet,
    pub unspecified_test: GroupSet,
    pub prespecified_train: Option<GroupSet>,
    pub prespecified_test: Option<GroupSet>,
}

/// `s_k == 0` and `s_k == 1` for every segment column from `first` on.
fn segment_groups(features: &Features, first: usize) -> Vec<GroupDefinition> {
    features.names()[first..]
        .iter()
        .flat_map(|n| {
            [0.0, 1.0].map(|v| {
                GroupDefinition::new(vec![Condition::Eq {
                    feature: n.clone(),
                    value: v,
                }])
            })
        })
        .collect()
}

pub fn prepare_cell(dataset: &BenchDataset, seed: u64, config: &BenchConfig) -> Result<Cell> {
    let split = SplitSpec::new(config.test_fraction, seed);
    let (data, base, prespecified) = match dataset {
        BenchDataset::Synthetic { spec, .. } => {
            let spec = SyntheticSpec {
                seed,
                ..spec.clone()
            };
            let (data, base, _) = generate_synthetic(&spec)?;
            let groups = segment_groups(data.features(), spec.d);
            (data, Some(base), groups)
        }
        BenchDataset::Csv {
            path,
            label_column,
            weight_column,
            groups,
            ..
        } => {
            let options = CsvOptions {
                label_column: Some(label_column.clone()),
                weight_column: weight_column.clone(),
                ignore: Vec::new(),
            };
            let (data, _) = load_csv_with(path, &options, None)?;
            (data, None, groups.clone())
        }
    };
    let (train_idx, test_idx) = split_indices(data.n_rows(), &split)?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let (base_train, base_test) = match base {
        Some(b) => (
            train_idx.iter().map(|&i| b[i]).collect(),
            test_idx.iter().map(|&i| b[i]).collect(),
        ),
        None => {
            let fit = fit_logistic(&train, config.logistic_l2)?;
            (
                fit.model.predict(train.features())?,
                fit.model.predict(test.features())?,
            )
        }
    };
    let (defs, unspecified_train) =
        generate_unspecified_groups(train.features(), &config.unspecified_groups)?;
    let unspecified_test = GroupSet::evaluate(&defs, test.features())?;
    let (prespecified_train, prespecified_test) = if prespecified.is_empty() {
        (None, None)
    } else {
        (
            Some(GroupSet::evaluate(&prespecified, train.features())?),
            Some(GroupSet::evaluate(&prespecified, test.features())?),
        )
    };
    Ok(Cell {
        train,
        test,
        base_train,
        base_test,
        unspecified_train,
        unspecified_test,
        prespecified_train,
        prespecified_test,
    })
}

/// Test-set scores of `method` plus extra scalar diagnostics.
pub fn run_method(
    method: Method,
    cell: &Cell,
    config: &BenchConfig,
    mcgrad: &McGradConfig,
) -> Result<(Vec<f64>, Vec<(String, f64)>)> {
    // group-aware baselines use the prespecified groups when there are any
    let (groups_train, groups_test) = match (&cell.prespecified_train, &cell.prespecified_test) {
        (Some(a), Some(b)) => (a, b),
        _ => (&cell.unspecified_train, &cell.unspecified_test),
    };
    let spec = match method {
        Method::Base => return Ok((cell.base_test.clone(), Vec::new())),
        Method::Mcgrad => CalibratorSpec::Mcgrad(mcgrad.clone()),
        Method::Platt => CalibratorSpec::Platt,
        Method::Isotonic => CalibratorSpec::Isotonic,
        Method::Hkrr => CalibratorSpec::Hkrr(config.hkrr.clone()),
        Method::Dfmc => CalibratorSpec::Dfmc(config.dfmc.clone()),
    };
    let fit = fit_calibrator(&spec, &cell.train, &cell.base_train, groups_train)?;
    let scores = apply_calibrator(
        &fit.model,
        &cell.base_test,
        cell.test.features(),
        groups_test,
    )?;
    let mut extra = Vec::new();
    if let crate::calibrators::Calibrator::Mcgrad(m) = &fit.model {
        extra.push(("n_rounds".to_string(), m.n_rounds() as f64));
    }
    Ok((scores, extra))
}

/// Scalar test metrics for `scores` in `cell`.
pub fn cell_metrics(cell: &Cell, scores: &[f64]) -> Result<Vec<(String, f64)>> {
    let report = evaluate(
        scores,
        cell.test.labels(),
        cell.test.weights(),
        Some(&cell.unspecified_test),
    )?;
    let mut out: Vec<(String, f64)> = report
        .scalar_metrics()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    if let Some(groups) = &cell.prespecified_test {
        match mce(scores, cell.test.labels(), groups) {
            Ok(r) => out.push(("mce_prespecified".into(), r.mce)),
            Err(Error::NoValidGroups) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub error: String,
}

/// Mean of a metric per method, with its rank. `dataset == "all"` rows hold
/// the average over datasets of the per-dataset means and ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub dataset: String,
    pub method: String,
    pub metric: String,
    pub avg: f64,
    pub rank: f64,
}

pub const RANKED_METRICS: [&str; 4] = ["mce", "logloss", "prauc", "ecce_sigma"];
pub const ALL_DATASETS: &str = "all";

fn higher_is_better(metric: &str) -> bool {
    matches!(metric, "prauc" | "auroc")
}

#[derive(Debug, Clone, Default)]
pub struct ComparisonResults {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
    pub ranks: Vec<RankRow>,
}

impl ComparisonResults {
    /// Mean of `metric` over seeds for one (dataset, method).
    pub fn mean(&self, dataset: &str, method: &str, metric: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.dataset == dataset && r.method == method && r.metric == metric)
            .map(|r| r.value)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn value(&self, dataset: &str, method: &str, seed: u64, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.dataset == dataset && r.method == method && r.seed == seed && r.metric == metric
            })
            .map(|r| r.value)
    }
}

/// Ranks `1..` with ties sharing their average rank.
fn fractional_ranks(values: &[(String, f64)], higher_better: bool) -> Vec<(String, f64)> {
    let mut sorted: Vec<&(String, f64)> = values.iter().collect();
    sorted.sort_by(|a, b| {
        let ord = a.1.total_cmp(&b.1);
        let ord = if higher_better { ord.reverse() } else { ord };
        ord.then_with(|| a.0.cmp(&b.0))
    });
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].1 == sorted[i].1 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for entry in &sorted[i..=j] {
            out.push((entry.0.clone(), rank));
        }
        i = j + 1;
    }
    out
}

fn rank_table(rows: &[ResultRow]) -> Vec<RankRow> {
    // (dataset, metric) -> method -> values
    let mut cells: BTreeMap<(String, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if RANKED_METRICS.contains(&r.metric.as_str()) {
            cells
                .entry((r.dataset.clone(), r.metric.clone()))
                .or_default()
                .entry(r.method.clone())
                .or_default()
                .push(r.value);
        }
    }
    let mut out = Vec::new();
    // (metric, method) -> (sum of means, sum of ranks, count)
    let mut overall: BTreeMap<(String, String), (f64, f64, usize)> = BTreeMap::new();
    for ((dataset, metric), by_method) in &cells {
        let means: Vec<(String, f64)> = by_method
            .iter()
            .map(|(m, v)| (m.clone(), v.iter().sum::<f64>() / v.len() as f64))
            .collect();
        let ranks = fractional_ranks(&means, higher_is_better(metric));
        for (method, avg) in &means {
            let rank = ranks
                .iter()
                .find(|(m, _)| m == method)
                .map(|(_, r)| *r)
                .expect("every method is ranked");
            out.push(RankRow {
                dataset: dataset.clone(),
                method: method.clone(),
                metric: metric.clone(),
                avg: *avg,
                rank,
            });
            let e = overall.entry((metric.clone(), method.clone())).or_default();
            e.0 += avg;
            e.1 += rank;
            e.2 += 1;
        }
    }
    for ((metric, method), (sum, rank_sum, count)) in overall {
        out.push(RankRow {
            dataset: ALL_DATASETS.into(),
            method,
            metric,
            avg: sum / count as f64,
            rank: rank_sum / count as f64,
        });
    }
    out.sort_by(|a, b| {
        (a.dataset.as_str(), a.metric.as_str(), a.method.as_str()).cmp(&(
            b.dataset.as_str(),
            b.metric.as_str(),
            b.method.as_str(),
        ))
    });
    out
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (
            a.dataset.as_str(),
            a.method.as_str(),
            a.seed,
            a.metric.as_str(),
        )
            .cmp(&(
                b.dataset.as_str(),
                b.method.as_str(),
                b.seed,
                b.metric.as_str(),
            ))
    });
}

/// Fits every method on every (dataset, seed) cell and evaluates it on the
/// held-out split. A failing cell is recorded and the run continues.
pub fn run_comparison(
    datasets: &[BenchDataset],
    methods: &[Method],
    seeds: &[u64],
    config: &BenchConfig,
) -> ComparisonResults {
    let jobs: Vec<(&BenchDataset, u64)> = datasets
        .iter()
        .flat_map(|d| seeds.iter().map(move |&s| (d, s)))
        .collect();
    let outcomes: Vec<(Vec<ResultRow>, Vec<Failure>)> = jobs
        .par_iter()
        .map(|&(dataset, seed)| {
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let fail = |method: Method, e: Error| Failure {
                dataset: dataset.name().to_string(),
                method: method.name().to_string(),
                seed,
                error: e.to_string(),
            };
            let cell = match prepare_cell(dataset, seed, config) {
                Ok(c) => c,
                Err(e) => {
                    let msg = e.to_string();
                    for &m in methods {
                        failures.push(fail(m, Error::InvalidInput(msg.clone())));
                    }
                    return (rows, failures);
                }
            };
            for &method in methods {
                let result = run_method(method, &cell, config, &config.mcgrad).and_then(
                    |(scores, extra)| {
                        let mut m = cell_metrics(&cell, &scores)?;
                        m.extend(extra);
                        Ok(m)
                    },
                );
                match result {
                    Ok(metrics) => {
                        rows.extend(metrics.into_iter().map(|(metric, value)| ResultRow {
                            dataset: dataset.name().to_string(),
                            method: method.name().to_string(),
                            seed,
                            metric,
                            value,
                        }))
                    }
                    Err(e) => failures.push(fail(method, e)),
                }
            }
            (rows, failures)
        })
        .collect();
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut failures: Vec<Failure> = Vec::new();
    for (r, f) in outcomes {
        rows.extend(r);
        failures.extend(f);
    }
    sort_rows(&mut rows);
    failures.sort_by(|a, b| {
        (a.dataset.as_str(), a.method.as_str(), a.seed).cmp(&(
            b.dataset.as_str(),
            b.method.as_str(),
            b.seed,
        ))
    });
    let ranks = rank_table(&rows);
    ComparisonResults {
        rows,
        failures,
        ranks,
    }
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// `max_rounds = 1`.
    OneRound,
    /// `rescale_enabled = false`.
    NoRescale,
    /// `min_sum_hessian_in_leaf = 0.001`.
    MshlLow,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::OneRound,
        Variant::NoRescale,
        Variant::MshlLow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::OneRound => "one_round",
            Variant::NoRescale => "no_rescale",
            Variant::MshlLow => "mshl_low",
        }
    }

    /// `base` with only this variant's override applied.
    pub fn apply(self, base: &McGradConfig) -> McGradConfig {
        let mut c = base.clone();
        match self {
            Variant::Full => {}
            Variant::OneRound => c.max_rounds = 1,
            Variant::NoRescale => c.rescale_enabled = false,
            Variant::MshlLow => c.gbdt.min_sum_hessian_in_leaf = 0.001,
        }
        c
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation variant `{s}`")))
    }
}

/// One (dataset, seed, variant, metric) entry compared against `full`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub dataset: String,
    pub seed: u64,
    pub variant: String,
    pub metric: String,
    pub value: f64,
    pub full_value: f64,
    /// `(value - full) / full`; `None` when `full` is zero.
    pub relative_change: Option<f64>,
    /// Relative change in percent, signed so that positive means the variant
    /// is better.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct AblationResults {
    pub rows: Vec<AblationRow>,
    pub failures: Vec<Failure>,
}

impl AblationResults {
    pub fn get(
        &self,
        dataset: &str,
        seed: u64,
        variant: &str,
        metric: &str,
    ) -> Option<&AblationRow> {
        self.rows.iter().find(|r| {
            r.dataset == dataset && r.seed == seed && r.variant == variant && r.metric == metric
        })
    }
}

const ABLATION_METRICS: [&str; 5] = ["mce", "logloss", "prauc", "ecce_sigma", "n_rounds"];

pub fn run_ablation(
    variants: &[Variant],
    datasets: &[BenchDataset],
    seeds: &[u64],
    config: &BenchConfig,
) -> AblationResults {
    let mut variants: Vec<Variant> = variants.to_vec();
    if !variants.contains(&Variant::Full) {
        variants.insert(0, Variant::Full);
    }
    let jobs: Vec<(&BenchDataset, u64)> = datasets
        .iter()
        .flat_map(|d| seeds.iter().map(move |&s| (d, s)))
        .collect();
    let outcomes: Vec<(Vec<AblationRow>, Vec<Failure>)> = jobs
        .par_iter()
        .map(|&(dataset, seed)| {
            let name = dataset.name().to_string();
            let mut failures = Vec::new();
            let cell = match prepare_cell(dataset, seed, config) {
                Ok(c) => c,
                Err(e) => {
                    failures.push(Failure {
                        dataset: name,
                        method: "mcgrad".into(),
                        seed,
                        error: e.to_string(),
                    });
                    return (Vec::new(), failures);
                }
            };
            let mut metrics: BTreeMap<Variant, BTreeMap<String, f64>> = BTreeMap::new();
            for &v in &variants {
                let cfg = v.apply(&config.mcgrad);
                let result =
                    run_method(Method::Mcgrad, &cell, config, &cfg).and_then(|(scores, extra)| {
                        let mut m = cell_metrics(&cell, &scores)?;
                        m.extend(extra);
                        Ok(m)
                    });
                match result {
                    Ok(m) => {
                        metrics.insert(v, m.into_iter().collect());
                    }
                    Err(e) => failures.push(Failure {
                        dataset: name.clone(),
                        method: v.name().into(),
                        seed,
                        error: e.to_string(),
                    }),
                }
            }
            let mut rows = Vec::new();
            if let Some(full) = metrics.get(&Variant::Full) {
                for (v, m) in &metrics {
                    for metric in ABLATION_METRICS {
                        let (Some(&value), Some(&full_value)) = (m.get(metric), full.get(metric))
                        else {
                            continue;
                        };
                        let relative_change =
                            (full_value != 0.0).then(|| (value - full_value) / full_value);
                        let sign = if higher_is_better(metric) { 1.0 } else { -1.0 };
                        rows.push(AblationRow {
                            dataset: name.clone(),
                            seed,
                            variant: v.name().into(),
                            metric: metric.into(),
                            value,
                            full_value,
                            relative_change,
                            improvement_pct: relative_change
                                .filter(|_| metric != "n_rounds")
                                .map(|r| sign * 100.0 * r),
                        });
                    }
                }
            }
            (rows, failures)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in outcomes {
        rows.extend(r);
        failures.extend(f);
    }
    rows.sort_by(|a: &AblationRow, b: &AblationRow| {
        (
            a.dataset.as_str(),
            a.seed,
            a.variant.as_str(),
            a.metric.as_str(),
        )
            .cmp(&(
                b.dataset.as_str(),
                b.seed,
                b.variant.as_str(),
                b.metric.as_str(),
            ))
    });
    failures.sort_by(|a: &Failure, b: &Failure| {
        (a.dataset.as_str(), a.method.as_str(), a.seed).cmp(&(
            b.dataset.as_str(),
            b.method.as_str(),
            b.seed,
        ))
    });
    AblationResults { rows, failures }
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

pub fn write_results_csv(path: &Path, results: &ComparisonResults) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "method", "seed", "metric", "value"])?;
    for r in &results.rows {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.seed.to_string(),
            r.metric.clone(),
            r.value.to_string(),
        ])?;
    }
    for f in &results.failures {
        w.write_record([
            f.dataset.clone(),
            f.method.clone(),
            f.seed.to_string(),
            "error".into(),
            f.error.clone(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_ranks_csv(path: &Path, results: &ComparisonResults) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "method", "metric", "avg", "rank"])?;
    for r in &results.ranks {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.metric.clone(),
            r.avg.to_string(),
            r.rank.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_ablation_csv(path: &Path, results: &AblationResults) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "seed",
        "variant",
        "metric",
        "value",
        "full_value",
        "relative_change",
        "improvement_pct",
    ])?;
    for r in &results.rows {
        w.write_record([
            r.dataset.clone(),
            r.seed.to_string(),
            r.variant.clone(),
            r.metric.clone(),
            r.value.to_string(),
            r.full_value.to_string(),
            opt(r.relative_change),
            opt(r.improvement_pct),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Plain-text summary of a comparison and ablation run.
pub fn summary(comparison: &ComparisonResults, ablation: &AblationResults) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# Desk-scale benchmark. Targets are directions and orderings (which method\n\
         # wins, which ablation hurts), not magnitudes from production or full-size datasets."
    );
    let datasets: std::collections::BTreeSet<&str> =
        comparison.rows.iter().map(|r| r.dataset.as_str()).collect();
    for d in &datasets {
        let _ = writeln!(s, "\n[{d}]");
        let methods: std::collections::BTreeSet<&str> = comparison
            .rows
            .iter()
            .filter(|r| r.dataset == *d)
            .map(|r| r.method.as_str())
            .collect();
        let base_mce = comparison.mean(d, "base", "mce");
        for m in methods {
            let mce_v = comparison.mean(d, m, "mce");
            let ll = comparison.mean(d, m, "logloss");
            let reduction = match (base_mce, mce_v) {
                (Some(b), Some(v)) if b > 0.0 => format!("{:+.1}%", 100.0 * (b - v) / b),
                _ => "n/a".into(),
            };
            let _ = writeln!(
                s,
                "{m:>10}  mean MCE {}  mean log loss {}  MCE reduction vs base {reduction}",
                mce_v.map_or("n/a".into(), |v| format!("{v:.4}")),
                ll.map_or("n/a".into(), |v| format!("{v:.6}")),
            );
        }
    }
    if !ablation.rows.is_empty() {
        let _ = writeln!(s, "\n[ablation: mean improvement % vs full]");
        let mut agg: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
        for r in &ablation.rows {
            if let Some(p) = r.improvement_pct {
                let e = agg
                    .entry((r.variant.as_str(), r.metric.as_str()))
                    .or_default();
                e.0 += p;
                e.1 += 1;
            }
        }
        for ((variant, metric), (sum, count)) in agg {
            let _ = writeln!(s, "{variant:>10}  {metric:<10} {:+.2}%", sum / count as f64);
        }
    }
    let failures = comparison.failures.len() + ablation.failures.len();
    if failures > 0 {
        let _ = writeln!(s, "\n{failures} failed cells (see results.csv)");
    }
    s
}

/// Writes `results.csv`, `ranks.csv`, `ablation.csv` and `summary.txt`.
pub fn write_outputs(
    out_dir: &Path,
    comparison: &ComparisonResults,
    ablation: &AblationResults,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_results_csv(&out_dir.join("results.csv"), comparison)?;
    write_ranks_csv(&out_dir.join("ranks.csv"), comparison)?;
    write_ablation_csv(&out_dir.join("ablation.csv"), ablation)?;
    let path = out_dir.join("summary.txt");
    std::fs::write(&path, summary(comparison, ablation)).map_err(io_err(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> BenchConfig {
        BenchConfig {
            unspecified_groups: GroupGenConfig {
                min_group_size: 20,
                ..GroupGenConfig::default()
            },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::segment_bias(500, 1.0, 3);
        let (a, sa, ta) = generate_synthetic(&spec).unwrap();
        let (b, sb, tb) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(ta, tb);
        assert_eq!(a.feature_names(), &["x0", "x1", "x2", "x3", "s0", "s1"]);
    }

    #[test]
    fn no_distortion_means_base_equals_truth() {
        let (_, base, truth) = generate_synthetic(&SyntheticSpec::calibrated(300, 1)).unwrap();
        assert_eq!(base, truth);
    }

    #[test]
    fn segment_bias_shifts_only_the_segment() {
        let (data, base, truth) =
            generate_synthetic(&SyntheticSpec::segment_bias(300, 1.0, 1)).unwrap();
        let seg = data.features().column(4);
        for i in 0..300 {
            let diff = crate::math::logit(base[i], 1e-12) - crate::math::logit(truth[i], 1e-12);
            let expect = if seg[i] == 1.0 { 1.0 } else { 0.0 };
            assert!((diff - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn base_only_comparison() {
        let suite = synthetic_suite(2_000);
        let r = run_comparison(&suite[..1], &[Method::Base], &[0, 1], &small_config());
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert!(r.rows.iter().all(|row| row.method == "base"));
        assert!(r.ranks.iter().all(|row| row.rank == 1.0));
    }

    #[test]
    fn ranks_follow_the_metric_direction() {
        let rows: Vec<ResultRow> = [
            ("a", "mce", 3.0),
            ("b", "mce", 1.0),
            ("a", "prauc", 0.9),
            ("b", "prauc", 0.5),
        ]
        .iter()
        .map(|&(m, metric, value)| ResultRow {
            dataset: "d".into(),
            method: m.into(),
            seed: 0,
            metric: metric.into(),
            value,
        })
        .collect();
        let ranks = rank_table(&rows);
        let rank = |m: &str, metric: &str| {
            ranks
                .iter()
                .find(|r| r.dataset == "d" && r.method == m && r.metric == metric)
                .unwrap()
                .rank
        };
        assert_eq!(rank("b", "mce"), 1.0);
        assert_eq!(rank("a", "prauc"), 1.0);
        assert_eq!(
            fractional_ranks(
                &[("x".into(), 1.0), ("y".into(), 1.0), ("z".into(), 2.0)],
                false
            ),
            vec![("x".into(), 1.5), ("y".into(), 1.5), ("z".into(), 3.0)]
        );
    }

    #[test]
    fn full_variant_has_zero_change() {
        let suite = synthetic_suite(3_000);
        let r = run_ablation(
            &[Variant::Full, Variant::MshlLow],
            &suite[1..],
            &[0],
            &small_config(),
        );
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        for row in r.rows.iter().filter(|r| r.variant == "full") {
            assert!(row.relative_change.is_none_or(|c| c == 0.0));
        }
        assert!(r
            .get("synthetic_segment_bias", 0, "mshl_low", "n_rounds")
            .is_some());
    }

    #[test]
    fn variant_overrides_touch_one_field() {
        let base = McGradConfig::default();
        assert_eq!(Variant::OneRound.apply(&base).max_rounds, 1);
        assert!(!Variant::NoRescale.apply(&base).rescale_enabled);
        let low = Variant::MshlLow.apply(&base);
        assert_eq!(low.gbdt.min_sum_hessian_in_leaf, 0.001);
        assert_eq!(
            McGradConfig {
                gbdt: base.gbdt.clone(),
                ..low
            },
            base
        );
    }
}
