//! Platt scaling: `p = sigmoid(a * logit(s) + b)`.

use serde::{Deserialize, Serialize};

use crate::dataset::check_scores;
use crate::error::{Error, Result};
use crate::math::{logit, logit_loss, sigmoid};

pub const PLATT_EPS: f64 = 1e-7;
const TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlattModel {
    pub a: f64,
    pub b: f64,
    /// Clamp applied to scores before taking logits.
    pub eps: f64,
}

impl PlattModel {
    pub fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            eps: PLATT_EPS,
        }
    }

    pub fn predict(&self, scores: &[f64]) -> Result<Vec<f64>> {
        check_scores(scores, scores.len())?;
        Ok(scores
            .iter()
            .map(|&s| sigmoid(self.a * logit(s, self.eps) + self.b))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct PlattFit {
    pub model: PlattModel,
    /// Every label was the same; `a = 0` and `b` is the clamped logit of the
    /// label.
    pub degenerate_labels: bool,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

fn objective(a: f64, b: f64, s: &[f64], labels: &[f64], w: &[f64], mass: f64) -> f64 {
    (0..s.len())
        .map(|i| w[i] * logit_loss(a * s[i] + b, labels[i]))
        .sum::<f64>()
        / mass
}

/// Two-parameter Newton on the weighted mean log loss with step halving.
pub fn fit_platt(scores: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<PlattFit> {
    if scores.is_empty() {
        return Err(Error::EmptyData);
    }
    check_scores(scores, labels.len())?;
    let n = scores.len();
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != n => {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let mass: f64 = w.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidInput("total weight must be positive".into()));
    }
    let s: Vec<f64> = scores.iter().map(|&p| logit(p, PLATT_EPS)).collect();

    let mean_y = (0..n).map(|i| w[i] * labels[i]).sum::<f64>() / mass;
    if mean_y == 0.0 || mean_y == 1.0 {
        log::warn!("Platt scaling on single-class labels");
        let b = logit(mean_y, PLATT_EPS);
        return Ok(PlattFit {
            model: PlattModel {
                a: 0.0,
                b,
                eps: PLATT_EPS,
            },
            degenerate_labels: true,
            converged: true,
            objective_trace: vec![objective(0.0, b, &s, labels, &w, mass)],
        });
    }

    let (mut a, mut b) = (1.0, 0.0);
    let mut current = objective(a, b, &s, labels, &w, mass);
    let mut trace = vec![current];
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let p = sigmoid(a * s[i] + b);
            let r = w[i] * (p - labels[i]);
            let c = w[i] * p * (1.0 - p);
            ga += r * s[i];
            gb += r;
            haa += c * s[i] * s[i];
            hab += c * s[i];
            hbb += c;
        }
        let (ga, gb, haa, hab, hbb) = (ga / mass, gb / mass, haa / mass, hab / mass, hbb / mass);
        let det = haa * hbb - hab * hab;
        let (da, db) = if det.is_finite() && det > 1e-10 * haa * hbb {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else if hbb > 0.0 {
            // constant scores: only the offset is identifiable
            (0.0, gb / hbb)
        } else {
            (ga, gb)
        };
        let mut t = 1.0;
        let mut moved = None;
        for _ in 0..60 {
            let (na, nb) = (a - t * da, b - t * db);
            let value = objective(na, nb, &s, labels, &w, mass);
            if value <= current {
                moved = Some((na, nb, value));
                break;
            }
            t *= 0.5;
        }
        let Some((na, nb, value)) = moved else {
            converged = true;
            break;
        };
        let delta = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        current = value;
        trace.push(current);
        if delta < TOL {
            converged = true;
            break;
        }
    }
    Ok(PlattFit {
        model: PlattModel {
            a,
            b,
            eps: PLATT_EPS,
        },
        degenerate_labels: false,
        converged,
        objective_trace: trace,
    })
}
