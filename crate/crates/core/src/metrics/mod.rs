//! Calibration and multicalibration metrics.
//!
//! The cumulative calibration error of a score vector is the largest absolute
//! sum of residuals `y - f` over any contiguous run of rows in score order,
//! divided by `n`. Rows are ordered by `(score, row index)`, so ties have one
//! fixed order. Writing `S_k` for the prefix sums of residuals, every
//! contiguous run is a difference `S_j - S_i`, which turns the `O(n^2)`
//! interval search into `max S - min S`.
//!
//! Dividing by `sigma = sqrt(sum f (1 - f)) / n` gives a statistic that
//! stays O(1) for calibrated predictions. The multicalibration error is the
//! largest sigma-scaled ECCE over a set of groups.

pub mod performance;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::check_scores;
use crate::error::{Error, Result};
use crate::groups::{GroupSet, GroupSpec};

pub use performance::{
    auroc, average_precision, brier, ece, log_loss, performance_metrics, reliability_curve,
    PerformanceMetrics, ReliabilityBin,
};

fn check_inputs(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_scores(scores, labels.len())
}

/// Row indices sorted by `(score, index)`.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable: equal scores keep ascending index order
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// `max_k S_k - min_k S_k` over residual prefix sums in `order`, restricted
/// to rows where `member` holds. Returns the range and the member count.
fn prefix_range(
    order: &[usize],
    scores: &[f64],
    labels: &[f64],
    member: impl Fn(usize) -> bool,
) -> (f64, usize) {
    let (mut s, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for &i in order {
        if member(i) {
            s += labels[i] - scores[i];
            hi = hi.max(s);
            lo = lo.min(s);
            count += 1;
        }
    }
    (hi - lo, count)
}

/// Estimated cumulative calibration error.
pub fn ecce(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let order = score_order(scores);
    let (range, n) = prefix_range(&order, scores, labels, |_| true);
    Ok(range / n as f64)
}

/// `sqrt(sum f (1 - f)) / n`, the standard deviation of the mean label when
/// labels are drawn from the scores themselves.
pub fn sigma_scale(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let var: f64 = scores.iter().map(|f| f * (1.0 - f)).sum();
    Ok(var.sqrt() / scores.len() as f64)
}

/// Per-group entry of an MCE computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupMetric {
    pub name: String,
    pub n: usize,
    pub ecce: Option<f64>,
    pub sigma: Option<f64>,
    /// `ecce / sigma`; `None` for empty groups and groups with zero sigma.
    pub ecce_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MceResult {
    pub mce: f64,
    /// Name of the group attaining the maximum.
    pub argmax: String,
    pub per_group: Vec<GroupMetric>,
}

impl MceResult {
    /// Groups left out of the maximum (empty, or every score in {0, 1}).
    pub fn skipped(&self) -> impl Iterator<Item = &GroupMetric> {
        self.per_group.iter().filter(|g| g.ecce_sigma.is_none())
    }
}

fn group_metric(order: &[usize], scores: &[f64], labels: &[f64], group: &GroupSpec) -> GroupMetric {
    let member = |i: usize| group.membership[i];
    let (range, n) = prefix_range(order, scores, labels, member);
    if n == 0 {
        return GroupMetric {
            name: group.name.clone(),
            n,
            ecce: None,
            sigma: None,
            ecce_sigma: None,
        };
    }
    let var: f64 = order
        .iter()
        .filter(|&&i| member(i))
        .map(|&i| scores[i] * (1.0 - scores[i]))
        .sum();
    let ecce = range / n as f64;
    let sigma = var.sqrt() / n as f64;
    GroupMetric {
        name: group.name.clone(),
        n,
        ecce: Some(ecce),
        sigma: Some(sigma),
        ecce_sigma: (sigma > 0.0).then(|| ecce / sigma),
    }
}

/// Multicalibration error: the largest `ECCE_h / sigma_h` over `groups`.
///
/// Ties in the maximum go to the lexicographically smallest group name.
pub fn mce(scores: &[f64], labels: &[f64], groups: &GroupSet) -> Result<MceResult> {
    check_inputs(scores, labels)?;
    groups.check_rows(scores.len())?;
    let order = score_order(scores);
    let per_group: Vec<GroupMetric> = groups
        .groups
        .par_iter()
        .map(|g| group_metric(&order, scores, labels, g))
        .collect();
    let mut best: Option<(f64, &str)> = None;
    for g in &per_group {
        if let Some(r) = g.ecce_sigma {
            let better = match best {
                None => true,
                Some((b, name)) => r > b || (r == b && g.name.as_str() < name),
            };
            if better {
                best = Some((r, &g.name));
            }
        }
    }
    let (mce, argmax) = best.ok_or(Error::NoValidGroups)?;
    let argmax = argmax.to_string();
    Ok(MceResult {
        mce,
        argmax,
        per_group,
    })
}

/// 1-based inclusive range `[start, end]` over a group's rows in score order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalSpec {
    pub start: usize,
    pub end: usize,
}

impl IntervalSpec {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

/// MC-deviation of one (group, interval) cell and the group's scale.
///
/// `delta = |sum of residuals over the interval| / n` and
/// `tau = sqrt(sum_{k in group} f_k (1 - f_k) / n)`, where `n` counts all
/// rows, not just the group's.
pub fn delta_mc(
    scores: &[f64],
    labels: &[f64],
    membership: &[bool],
    interval: IntervalSpec,
) -> Result<(f64, f64)> {
    check_inputs(scores, labels)?;
    if membership.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: membership.len(),
        });
    }
    let members: Vec<usize> = score_order(scores)
        .into_iter()
        .filter(|&i| membership[i])
        .collect();
    let IntervalSpec { start, end } = interval;
    if start < 1 || start > end || end > members.len() {
        return Err(Error::InvalidInterval {
            start,
            end,
            len: members.len(),
        });
    }
    let n = scores.len() as f64;
    let sum: f64 = members[start - 1..end]
        .iter()
        .map(|&i| labels[i] - scores[i])
        .sum();
    let var: f64 = members.iter().map(|&i| scores[i] * (1.0 - scores[i])).sum();
    Ok((sum.abs() / n, (var / n).sqrt()))
}

/// Every metric reported for one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub n: usize,
    pub ecce: f64,
    pub sigma: f64,
    pub ecce_sigma: f64,
    pub mce: Option<f64>,
    /// `mce * sigma`, back on the probability scale.
    pub mce_absolute: Option<f64>,
    pub mce_group: Option<String>,
    pub logloss: f64,
    pub prauc: Option<f64>,
    pub auroc: Option<f64>,
    pub brier: f64,
    pub ece: f64,
    pub per_group: Vec<GroupMetric>,
}

pub const REPORT_CSV_COLUMNS: [&str; 12] = [
    "n",
    "ecce",
    "sigma",
    "ecce_sigma",
    "mce",
    "mce_absolute",
    "logloss",
    "prauc",
    "auroc",
    "brier",
    "ece",
    "mce_group",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricReport {
    /// Values in [`REPORT_CSV_COLUMNS`] order; `None` becomes an empty cell.
    pub fn csv_values(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.ecce.to_string(),
            self.sigma.to_string(),
            self.ecce_sigma.to_string(),
            opt(self.mce),
            opt(self.mce_absolute),
            self.logloss.to_string(),
            opt(self.prauc),
            opt(self.auroc),
            self.brier.to_string(),
            self.ece.to_string(),
            self.mce_group.clone().unwrap_or_default(),
        ]
    }

    /// `(name, value)` pairs of the scalar metrics that are defined.
    pub fn scalar_metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("ecce", self.ecce),
            ("ecce_sigma", self.ecce_sigma),
            ("logloss", self.logloss),
            ("brier", self.brier),
            ("ece", self.ece),
        ];
        if let Some(v) = self.mce {
            out.push(("mce", v));
        }
        if let Some(v) = self.mce_absolute {
            out.push(("mce_absolute", v));
        }
        if let Some(v) = self.prauc {
            out.push(("prauc", v));
        }
        if let Some(v) = self.auroc {
            out.push(("auroc", v));
        }
        out
    }

    /// Writes the per-group table as CSV.
    pub fn write_group_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "n", "ecce", "sigma", "ecce_sigma"])?;
        for g in &self.per_group {
            w.write_record([
                g.name.clone(),
                g.n.to_string(),
                opt(g.ecce),
                opt(g.sigma),
                opt(g.ecce_sigma),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<group csv>", e))?;
        Ok(())
    }
}

/// Computes a [`MetricReport`]. With no usable groups the MCE fields are `None`.
pub fn evaluate(
    scores: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
    groups: Option<&GroupSet>,
) -> Result<MetricReport> {
    check_inputs(scores, labels)?;
    let ecce_value = ecce(scores, labels)?;
    let sigma = sigma_scale(scores)?;
    let perf = performance_metrics(scores, labels, weights)?;
    let (mce_value, mce_group, per_group) = match groups {
        None => (None, None, Vec::new()),
        Some(g) => match mce(scores, labels, g) {
            Ok(r) => (Some(r.mce), Some(r.argmax), r.per_group),
            Err(Error::NoValidGroups) => {
                log::warn!("no group with nonzero sigma; MCE undefined");
                let order = score_order(scores);
                let table = g
                    .groups
                    .iter()
                    .map(|gs| group_metric(&order, scores, labels, gs))
                    .collect();
                (None, None, table)
            }
            Err(e) => return Err(e),
        },
    };
    Ok(MetricReport {
        n: scores.len(),
        ecce: ecce_value,
        sigma,
        ecce_sigma: if sigma > 0.0 { ecce_value / sigma } else { 0.0 },
        mce: mce_value,
        mce_absolute: mce_value.map(|m| m * sigma),
        mce_group,
        logloss: perf.logloss,
        prauc: perf.prauc,
        auroc: perf.auroc,
        brier: perf.brier,
        ece: perf.ece,
        per_group,
    })
}
