//! Bucket-patching multicalibration over (group, score bucket) cells.
//!
//! Each sweep visits every group and, inside it, every score bucket
//! `[b * lambda, (b + 1) * lambda)` in index order. A cell with at least
//! `max(1, alpha * lambda * |group|)` rows whose mean residual exceeds
//! `alpha` in absolute value has that mean added to its scores. The ordered
//! list of patches is the model; replaying it reproduces the fit exactly.

use serde::{Deserialize, Serialize};

use crate::dataset::check_scores;
use crate::error::{Error, Result};
use crate::groups::GroupSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HkrrConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub max_sweeps: usize,
}

impl Default for HkrrConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            alpha: 0.05,
            max_sweeps: 100,
        }
    }
}

impl HkrrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Patch {
    pub group: usize,
    pub bucket: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HkrrModel {
    pub lambda: f64,
    pub alpha: f64,
    /// Names of the groups the patches refer to, by index.
    pub group_names: Vec<String>,
    pub patches: Vec<Patch>,
}

fn n_buckets(lambda: f64) -> usize {
    ((1.0 / lambda) - 1e-9).ceil().max(1.0) as usize
}

#[inline]
fn bucket_of(score: f64, lambda: f64, n_buckets: usize) -> usize {
    ((score / lambda).floor() as usize).min(n_buckets - 1)
}

fn cell_rows(
    scores: &[f64],
    members: &[usize],
    bucket: usize,
    lambda: f64,
    nb: usize,
) -> Vec<usize> {
    members
        .iter()
        .copied()
        .filter(|&i| bucket_of(scores[i], lambda, nb) == bucket)
        .collect()
}

#[inline]
fn apply_patch(scores: &mut [f64], rows: &[usize], delta: f64) {
    for &i in rows {
        scores[i] = (scores[i] + delta).clamp(0.0, 1.0);
    }
}

fn members(groups: &GroupSet) -> Vec<Vec<usize>> {
    groups
        .groups
        .iter()
        .map(|g| {
            (0..g.membership.len())
                .filter(|&i| g.membership[i])
                .collect()
        })
        .collect()
}

impl HkrrModel {
    fn check_groups(&self, groups: &GroupSet, n: usize) -> Result<()> {
        groups.check_rows(n)?;
        if groups.names()
            != self
                .group_names
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
        {
            return Err(Error::ShapeMismatch(
                "group set differs from the one the model was fit on".into(),
            ));
        }
        Ok(())
    }

    pub fn predict(&self, scores: &[f64], groups: &GroupSet) -> Result<Vec<f64>> {
        check_scores(scores, scores.len())?;
        if self.patches.is_empty() {
            return Ok(scores.to_vec());
        }
        self.check_groups(groups, scores.len())?;
        let nb = n_buckets(self.lambda);
        let members = members(groups);
        let mut out = scores.to_vec();
        for p in &self.patches {
            let rows = cell_rows(&out, &members[p.group], p.bucket, self.lambda, nb);
            apply_patch(&mut out, &rows, p.delta);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct HkrrFit {
    pub model: HkrrModel,
    pub fitted: Vec<f64>,
    pub sweeps: usize,
    /// `max_sweeps` ran out while patches were still being made.
    pub hit_max_sweeps: bool,
}

pub fn fit_hkrr(
    scores: &[f64],
    labels: &[f64],
    groups: &GroupSet,
    config: &HkrrConfig,
) -> Result<HkrrFit> {
    config.validate()?;
    if scores.is_empty() {
        return Err(Error::EmptyData);
    }
    check_scores(scores, labels.len())?;
    groups.check_rows(scores.len())?;
    let HkrrConfig {
        lambda,
        alpha,
        max_sweeps,
    } = *config;
    let nb = n_buckets(lambda);
    let members = members(groups);
    let mut current = scores.to_vec();
    let mut patches = Vec::new();
    let mut sweeps = 0;
    let mut hit_max_sweeps = true;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut patched = false;
        for (g, rows_g) in members.iter().enumerate() {
            let floor = (alpha * lambda * rows_g.len() as f64).max(1.0);
            for b in 0..nb {
                let rows = cell_rows(&current, rows_g, b, lambda, nb);
                if rows.is_empty() || (rows.len() as f64) < floor {
                    continue;
                }
                let residual =
                    rows.iter().map(|&i| labels[i] - current[i]).sum::<f64>() / rows.len() as f64;
                if residual.abs() > alpha {
                    apply_patch(&mut current, &rows, residual);
                    patches.push(Patch {
                        group: g,
                        bucket: b,
                        delta: residual,
                    });
                    patched = true;
                }
            }
        }
        if !patched {
            hit_max_sweeps = false;
            break;
        }
    }
    if hit_max_sweeps {
        log::warn!("HKRR stopped after {max_sweeps} sweeps without reaching a fixed point");
    }
    Ok(HkrrFit {
        model: HkrrModel {
            lambda,
            alpha,
            group_names: groups.names().into_iter().map(String::from).collect(),
            patches,
        },
        fitted: current,
        sweeps,
        hit_max_sweeps,
    })
}

/// Largest `|mean residual|` over cells meeting the size floor.
pub fn max_cell_violation(
    scores: &[f64],
    labels: &[f64],
    groups: &GroupSet,
    config: &HkrrConfig,
) -> f64 {
    let nb = n_buckets(config.lambda);
    let mut worst = 0.0f64;
    for rows_g in members(groups) {
        let floor = (config.alpha * config.lambda * rows_g.len() as f64).max(1.0);
        for b in 0..nb {
            let rows = cell_rows(scores, &rows_g, b, config.lambda, nb);
            if rows.is_empty() || (rows.len() as f64) < floor {
                continue;
            }
            let r = rows.iter().map(|&i| labels[i] - scores[i]).sum::<f64>() / rows.len() as f64;
            worst = worst.max(r.abs());
        }
    }
    worst
}
