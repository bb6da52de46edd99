//! Weighted predictive-performance metrics: log loss, average precision,
//! AUROC, Brier score and binned ECE.

use serde::{Deserialize, Serialize};

use crate::dataset::check_scores;
use crate::error::{Error, Result};

/// Scores are clamped to `[LOG_LOSS_EPS, 1 - LOG_LOSS_EPS]` inside logs.
pub const LOG_LOSS_EPS: f64 = 1e-15;

/// Equal-width bins used by [`ece`].
pub const ECE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub logloss: f64,
    /// `None` when only one class is present.
    pub prauc: Option<f64>,
    pub auroc: Option<f64>,
    pub brier: f64,
    pub ece: f64,
}

fn check(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_scores(scores, labels.len())?;
    if let Some(w) = weights {
        if w.len() != scores.len() {
            return Err(Error::LengthMismatch {
                expected: scores.len(),
                actual: w.len(),
            });
        }
        if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput(
                "weights must be finite and >= 0".into(),
            ));
        }
    }
    Ok(())
}

#[inline]
fn wt(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (num, den) = values.fold((0.0, 0.0), |(n, d), (v, w)| (n + v * w, d + w));
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Weighted mean negative log-likelihood.
pub fn log_loss(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check(scores, labels, weights)?;
    Ok(weighted_mean((0..scores.len()).map(|i| {
        let p = scores[i].clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
        let y = labels[i];
        (-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()), wt(weights, i))
    })))
}

/// Weighted mean squared error.
pub fn brier(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check(scores, labels, weights)?;
    Ok(weighted_mean((0..scores.len()).map(|i| {
        ((scores[i] - labels[i]).powi(2), wt(weights, i))
    })))
}

fn class_weights(labels: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y == 1.0 {
            pos += wt(weights, i);
        } else {
            neg += wt(weights, i);
        }
    }
    (pos, neg)
}

/// Runs of equal score in descending order, as `(positive weight, negative weight)`.
fn descending_runs(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut last = f64::NAN;
    for i in order {
        if scores[i] != last {
            runs.push((0.0, 0.0));
            last = scores[i];
        }
        let run = runs.last_mut().expect("run pushed above");
        if labels[i] == 1.0 {
            run.0 += wt(weights, i);
        } else {
            run.1 += wt(weights, i);
        }
    }
    runs
}

/// Average precision: `sum_k (R_k - R_{k-1}) P_k` over score thresholds in
/// descending order, tied scores forming one threshold.
pub fn average_precision(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check(scores, labels, weights)?;
    let (pos, neg) = class_weights(labels, weights);
    if pos <= 0.0 || neg <= 0.0 {
        return Err(Error::SingleClassMetricUndefined("prauc"));
    }
    let (mut tp, mut fp, mut ap) = (0.0, 0.0, 0.0);
    for (p, n) in descending_runs(scores, labels, weights) {
        tp += p;
        fp += n;
        if p > 0.0 {
            ap += (p / pos) * (tp / (tp + fp));
        }
    }
    Ok(ap)
}

/// Area under the ROC curve as the weighted Mann-Whitney statistic, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check(scores, labels, weights)?;
    let (pos, neg) = class_weights(labels, weights);
    if pos <= 0.0 || neg <= 0.0 {
        return Err(Error::SingleClassMetricUndefined("auroc"));
    }
    // walking down from the top, negatives seen so far outrank later positives
    let mut neg_above = 0.0;
    let mut wrong = 0.0;
    for (p, n) in descending_runs(scores, labels, weights) {
        wrong += p * (neg_above + 0.5 * n);
        neg_above += n;
    }
    Ok(1.0 - wrong / (pos * neg))
}

/// One bin of a reliability diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub weight: f64,
    pub mean_score: f64,
    pub mean_label: f64,
}

/// Equal-width bins on `[0, 1]`; the last bin is closed on the right.
/// Empty bins are included with zero weight.
pub fn reliability_curve(
    scores: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
    n_bins: usize,
) -> Result<Vec<ReliabilityBin>> {
    check(scores, labels, weights)?;
    if n_bins == 0 {
        return Err(Error::InvalidInput("n_bins must be >= 1".into()));
    }
    let mut acc = vec![(0usize, 0.0f64, 0.0f64, 0.0f64); n_bins];
    for i in 0..scores.len() {
        let b = ((scores[i] * n_bins as f64) as usize).min(n_bins - 1);
        let w = wt(weights, i);
        let a = &mut acc[b];
        a.0 += 1;
        a.1 += w;
        a.2 += w * scores[i];
        a.3 += w * labels[i];
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(b, (count, weight, sf, sy))| ReliabilityBin {
            bin: b,
            lower: b as f64 / n_bins as f64,
            upper: (b + 1) as f64 / n_bins as f64,
            count,
            weight,
            mean_score: if weight > 0.0 { sf / weight } else { 0.0 },
            mean_label: if weight > 0.0 { sy / weight } else { 0.0 },
        })
        .collect())
}

/// Expected calibration error over [`ECE_BINS`] equal-width bins.
pub fn ece(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    let bins = reliability_curve(scores, labels, weights, ECE_BINS)?;
    let total: f64 = bins.iter().map(|b| b.weight).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(bins
        .iter()
        .map(|b| b.weight / total * (b.mean_label - b.mean_score).abs())
        .sum())
}

/// All performance metrics at once. PRAUC and AUROC are `None` when a class
/// is missing.
pub fn performance_metrics(
    scores: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
) -> Result<PerformanceMetrics> {
    let undefined_ok = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClassMetricUndefined(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(PerformanceMetrics {
        logloss: log_loss(scores, labels, weights)?,
        prauc: undefined_ok(average_precision(scores, labels, weights))?,
        auroc: undefined_ok(auroc(scores, labels, weights))?,
        brier: brier(scores, labels, weights)?,
        ece: ece(scores, labels, weights)?,
    })
}
