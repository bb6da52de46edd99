//! Isotonic regression by weighted pool-adjacent-violators.
//!
//! The fitted map is a right-continuous step function: a query takes the
//! value of the last block whose left breakpoint is `<=` it, and queries below
//! the first breakpoint take the first value.

use serde::{Deserialize, Serialize};

use crate::dataset::check_scores;
use crate::error::{Error, Result};
use crate::metrics::score_order;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotonicModel {
    /// Strictly ascending left ends of the fitted blocks.
    pub breakpoints: Vec<f64>,
    /// Non-decreasing block values.
    pub values: Vec<f64>,
}

impl IsotonicModel {
    pub fn predict_one(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k.saturating_sub(1)]
    }

    pub fn predict(&self, scores: &[f64]) -> Result<Vec<f64>> {
        check_scores(scores, scores.len())?;
        Ok(scores.iter().map(|&s| self.predict_one(s)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct IsotonicFit {
    pub model: IsotonicModel,
    /// Pooled value of every training row, in input order.
    pub fitted: Vec<f64>,
}

struct Block {
    start: usize,
    end: usize,
    weight: f64,
    sum: f64,
}

impl Block {
    fn value(&self) -> f64 {
        self.sum / self.weight
    }
}

/// Weighted PAVA over rows sorted by score; tied scores are pooled up front.
pub fn fit_isotonic(
    scores: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
) -> Result<IsotonicFit> {
    if scores.is_empty() {
        return Err(Error::EmptyData);
    }
    check_scores(scores, labels.len())?;
    if let Some(w) = weights {
        if w.len() != scores.len() {
            return Err(Error::LengthMismatch {
                expected: scores.len(),
                actual: w.len(),
            });
        }
    }
    let order = score_order(scores);
    let mut blocks: Vec<Block> = Vec::with_capacity(order.len());
    let mut pos = 0;
    while pos < order.len() {
        // rows with equal scores enter as one block so the fit is a function
        // of the score
        let mut block = Block {
            start: pos,
            end: pos,
            weight: 0.0,
            sum: 0.0,
        };
        let s = scores[order[pos]];
        while pos < order.len() && scores[order[pos]] == s {
            let i = order[pos];
            // zero weights are nudged up so every block has a defined value
            let w = weights.map_or(1.0, |w| w[i]).max(1e-300);
            block.weight += w;
            block.sum += w * labels[i];
            pos += 1;
        }
        block.end = pos;
        blocks.push(block);
        while blocks.len() > 1 {
            let k = blocks.len();
            if blocks[k - 2].value() < blocks[k - 1].value() {
                break;
            }
            let last = blocks.pop().expect("len > 1");
            let prev = blocks.last_mut().expect("len > 0");
            prev.end = last.end;
            prev.weight += last.weight;
            prev.sum += last.sum;
        }
    }

    let mut fitted = vec![0.0; scores.len()];
    let mut breakpoints: Vec<f64> = Vec::with_capacity(blocks.len());
    let mut values: Vec<f64> = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let v = b.value();
        for &i in &order[b.start..b.end] {
            fitted[i] = v;
        }
        breakpoints.push(scores[order[b.start]]);
        values.push(v);
    }
    Ok(IsotonicFit {
        model: IsotonicModel {
            breakpoints,
            values,
        },
        fitted,
    })
}
