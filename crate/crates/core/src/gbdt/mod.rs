//! Second-order gradient-boosted regression trees on logits under log loss.
//!
//! Each tree is a Newton step: with `p = sigmoid(F)` the per-row gradient is
//! `w (p - y)` and the hessian `w p (1 - p)`. Trees grow leaf-wise (best gain
//! first) until `num_leaves` is reached, no leaf deeper than `max_depth`.
//! Split candidates come from per-feature histograms over quantile bins; a
//! leaf's value is `-G / (H + lambda_l2)` scaled by the learning rate, so an
//! ensemble predicts by plain summation.

pub mod binning;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Features};
use crate::error::{Error, Result};
use crate::math::{mean_logit_loss, sigmoid};

pub use binning::{BinnedColumn, BinnedMatrix};
pub use tree::{Node, Tree};

/// Boosting hyperparameters. The defaults are the tuned MCGrad settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtConfig {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub num_leaves: usize,
    pub min_child_samples: usize,
    pub min_sum_hessian_in_leaf: f64,
    pub lambda_l2: f64,
    pub min_gain_to_split: f64,
    pub max_bins: usize,
    /// Fitting draws no randomness; the seed is carried for provenance.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02873,
            n_estimators: 94,
            max_depth: 5,
            num_leaves: 5,
            min_child_samples: 160,
            min_sum_hessian_in_leaf: 20.0,
            lambda_l2: 0.00913,
            min_gain_to_split: 0.15,
            max_bins: 255,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    /// Stock LightGBM settings (used for the DFMC baseline).
    pub fn lightgbm_defaults() -> Self {
        Self {
            learning_rate: 0.1,
            n_estimators: 100,
            max_depth: 31,
            num_leaves: 31,
            min_child_samples: 20,
            min_sum_hessian_in_leaf: 1e-3,
            lambda_l2: 0.0,
            min_gain_to_split: 0.0,
            max_bins: 255,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.n_estimators < 1 {
            return fail("n_estimators must be >= 1".into());
        }
        if self.max_depth < 1 {
            return fail("max_depth must be >= 1".into());
        }
        if self.num_leaves < 2 {
            return fail(format!("num_leaves must be >= 2, got {}", self.num_leaves));
        }
        if !(self.min_sum_hessian_in_leaf >= 0.0) {
            return fail("min_sum_hessian_in_leaf must be >= 0".into());
        }
        if !(self.lambda_l2 >= 0.0) {
            return fail("lambda_l2 must be >= 0".into());
        }
        if !(self.min_gain_to_split >= 0.0) {
            return fail("min_gain_to_split must be >= 0".into());
        }
        if self.max_bins < 2 || self.max_bins > binning::MAX_BINS_LIMIT {
            return fail(format!(
                "max_bins must lie in [2, {}], got {}",
                binning::MAX_BINS_LIMIT,
                self.max_bins
            ));
        }
        Ok(())
    }
}

/// Additive logit model: `base_score + sum of tree outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEnsemble {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub config: GbdtConfig,
    pub n_features: usize,
}

impl TreeEnsemble {
    pub fn empty(n_features: usize, config: GbdtConfig) -> Self {
        Self {
            base_score: 0.0,
            trees: Vec::new(),
            config,
            n_features,
        }
    }

    fn check_dims(&self, features: &Features) -> Result<()> {
        if features.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: features.n_cols(),
            });
        }
        Ok(())
    }

    #[inline]
    fn predict_row(&self, features: &Features, row: usize) -> f64 {
        let mut sum = self.base_score;
        for tree in &self.trees {
            sum += tree.predict_row(features, row);
        }
        sum
    }

    /// Logit output for every row of `features`.
    pub fn predict(&self, features: &Features) -> Result<Vec<f64>> {
        self.check_dims(features)?;
        Ok((0..features.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(features, i))
            .collect())
    }

    /// Mean weighted log loss of `init_logits + first k trees` for
    /// `k = 0..=trees.len()`.
    pub fn staged_logloss(&self, data: &Dataset, init_logits: &[f64]) -> Result<Vec<f64>> {
        let features = data.features();
        self.check_dims(features)?;
        check_init(init_logits, data.n_rows())?;
        let mut partial = vec![self.base_score; data.n_rows()];
        let staged = |partial: &[f64]| {
            let logits: Vec<f64> = init_logits
                .iter()
                .zip(partial)
                .map(|(a, b)| a + b)
                .collect();
            mean_logit_loss(&logits, data.labels(), data.weights())
        };
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        out.push(staged(&partial));
        for tree in &self.trees {
            partial
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, p)| *p += tree.predict_row(features, i));
            out.push(staged(&partial));
        }
        Ok(out)
    }
}

/// Ensemble logits; see [`TreeEnsemble::predict`].
pub fn predict_ensemble(model: &TreeEnsemble, features: &Features) -> Result<Vec<f64>> {
    model.predict(features)
}

/// Training log loss after each tree; see [`TreeEnsemble::staged_logloss`].
pub fn train_logloss_per_tree(
    model: &TreeEnsemble,
    data: &Dataset,
    init_logits: &[f64],
) -> Result<Vec<f64>> {
    model.staged_logloss(data, init_logits)
}

/// Result of [`fit_gbdt`].
#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub ensemble: TreeEnsemble,
    /// Ensemble output on the training rows, accumulated during fitting.
    pub fitted: Vec<f64>,
    /// Every training label was identical; the trees only move the intercept.
    pub all_same_label: bool,
}

fn check_init(init_logits: &[f64], n: usize) -> Result<()> {
    if init_logits.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: init_logits.len(),
        });
    }
    if init_logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("init_logits must be finite".into()));
    }
    Ok(())
}

/// Fits `config.n_estimators` trees starting from `init_logits`.
pub fn fit_gbdt(data: &Dataset, init_logits: &[f64], config: &GbdtConfig) -> Result<GbdtFit> {
    config.validate()?;
    let binned = BinnedMatrix::new(data.features(), config.max_bins);
    fit_gbdt_binned(&binned, data.labels(), data.weights(), init_logits, config)
}

/// Same as [`fit_gbdt`] on a pre-binned matrix.
pub fn fit_gbdt_binned(
    binned: &BinnedMatrix,
    labels: &[f64],
    weights: Option<&[f64]>,
    init_logits: &[f64],
    config: &GbdtConfig,
) -> Result<GbdtFit> {
    config.validate()?;
    let n = binned.n_rows();
    if n == 0 || labels.is_empty() {
        return Err(Error::EmptyData);
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    check_init(init_logits, n)?;

    let all_same_label = labels.iter().all(|&y| y == labels[0]);
    if all_same_label {
        log::warn!(
            "all {n} training labels equal {}; fitting intercept-only trees",
            labels[0]
        );
    }

    let mut fitted = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rows: Vec<u32> = (0..n as u32).collect();
    let mut trees = Vec::with_capacity(config.n_estimators);
    for _ in 0..config.n_estimators {
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .enumerate()
            .for_each(|(i, (g, h))| {
                let w = weights.map_or(1.0, |w| w[i]);
                let p = sigmoid(init_logits[i] + fitted[i]);
                *g = w * (p - labels[i]);
                *h = w * p * (1.0 - p);
            });
        for (i, r) in rows.iter_mut().enumerate() {
            *r = i as u32;
        }
        let tree = grow_tree(binned, &grad, &hess, &mut rows, config, &mut fitted);
        trees.push(tree);
    }
    Ok(GbdtFit {
        ensemble: TreeEnsemble {
            base_score: 0.0,
            trees,
            config: config.clone(),
            n_features: binned.n_cols(),
        },
        fitted,
        all_same_label,
    })
}

/// A candidate split of one leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitInfo {
    pub feature: usize,
    /// Index of the cut point; rows with bin `<= cut` go left.
    pub cut: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_grad: f64,
    pub left_hess: f64,
    pub left_count: usize,
    pub right_grad: f64,
    pub right_hess: f64,
    pub right_count: usize,
}

#[inline]
fn leaf_score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Newton leaf weight before learning-rate scaling.
#[inline]
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

/// `0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)]`.
#[inline]
pub fn split_gain(left: (f64, f64), right: (f64, f64), parent: (f64, f64), lambda: f64) -> f64 {
    0.5 * (leaf_score(left.0, left.1, lambda) + leaf_score(right.0, right.1, lambda)
        - leaf_score(parent.0, parent.1, lambda))
}

/// Whether a split with these child statistics passes every constraint.
#[inline]
pub fn split_allowed(
    gain: f64,
    left: (f64, usize),
    right: (f64, usize),
    config: &GbdtConfig,
) -> bool {
    let min_count = config.min_child_samples.max(1);
    left.1 >= min_count
        && right.1 >= min_count
        && left.0 >= config.min_sum_hessian_in_leaf
        && right.0 >= config.min_sum_hessian_in_leaf
        && gain > 0.0
        && gain >= config.min_gain_to_split
}

fn best_split_for_feature(
    binned: &BinnedMatrix,
    feature: usize,
    grad: &[f64],
    hess: &[f64],
    rows: &[u32],
    totals: (f64, f64),
    config: &GbdtConfig,
) -> Option<SplitInfo> {
    let col = binned.column(feature);
    let n_bins = col.n_bins();
    if n_bins < 2 {
        return None;
    }
    let bins = col.bins();
    let mut hist = vec![(0.0f64, 0.0f64, 0usize); n_bins];
    for &r in rows {
        let r = r as usize;
        let slot = &mut hist[bins[r] as usize];
        slot.0 += grad[r];
        slot.1 += hess[r];
        slot.2 += 1;
    }
    let n = rows.len();
    let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
    let mut best: Option<SplitInfo> = None;
    for (cut, slot) in hist[..n_bins - 1].iter().enumerate() {
        gl += slot.0;
        hl += slot.1;
        nl += slot.2;
        if nl == 0 || slot.2 == 0 {
            // empty bins repeat the previous partition
            continue;
        }
        let nr = n - nl;
        if nr == 0 {
            break;
        }
        let (gr, hr) = (totals.0 - gl, totals.1 - hl);
        let gain = split_gain((gl, hl), (gr, hr), totals, config.lambda_l2);
        if !split_allowed(gain, (hl, nl), (hr, nr), config) {
            continue;
        }
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitInfo {
                feature,
                cut,
                threshold: col.cuts()[cut],
                gain,
                left_grad: gl,
                left_hess: hl,
                left_count: nl,
                right_grad: gr,
                right_hess: hr,
                right_count: nr,
            });
        }
    }
    best
}

/// Best histogram split of `rows` over all features.
///
/// Ties go to the lower feature index, then the lower threshold.
pub fn find_best_split(
    binned: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &[u32],
    config: &GbdtConfig,
) -> Option<SplitInfo> {
    let totals = sum_stats(grad, hess, rows);
    best_split_with_totals(binned, grad, hess, rows, totals, config)
}

fn best_split_with_totals(
    binned: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &[u32],
    totals: (f64, f64),
    config: &GbdtConfig,
) -> Option<SplitInfo> {
    let per_feature: Vec<Option<SplitInfo>> = (0..binned.n_cols())
        .into_par_iter()
        .map(|f| best_split_for_feature(binned, f, grad, hess, rows, totals, config))
        .collect();
    // fixed-order reduction keeps the result independent of thread count
    let mut best: Option<SplitInfo> = None;
    for cand in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| cand.gain > b.gain) {
            best = Some(cand);
        }
    }
    best
}

fn sum_stats(grad: &[f64], hess: &[f64], rows: &[u32]) -> (f64, f64) {
    let mut g = 0.0;
    let mut h = 0.0;
    for &r in rows {
        g += grad[r as usize];
        h += hess[r as usize];
    }
    (g, h)
}

struct GrowingLeaf {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
    grad: f64,
    hess: f64,
    best: Option<SplitInfo>,
}

/// Grows one tree over `rows` (all training rows on entry) and adds its leaf
/// values into `fitted`.
fn grow_tree(
    binned: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &mut [u32],
    config: &GbdtConfig,
    fitted: &mut [f64],
) -> Tree {
    let splittable = |depth: usize, rows: &[u32], totals: (f64, f64)| {
        if depth >= config.max_depth {
            None
        } else {
            best_split_with_totals(binned, grad, hess, rows, totals, config)
        }
    };

    let totals = sum_stats(grad, hess, rows);
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        sum_hessian: totals.1,
        sample_count: rows.len(),
    }];
    let mut leaves = vec![GrowingLeaf {
        node: 0,
        start: 0,
        end: rows.len(),
        depth: 0,
        grad: totals.0,
        hess: totals.1,
        best: splittable(0, rows, totals),
    }];
    let mut scratch: Vec<u32> = Vec::new();

    while leaves.len() < config.num_leaves {
        let mut pick: Option<usize> = None;
        for (k, leaf) in leaves.iter().enumerate() {
            if let Some(s) = leaf.best {
                if pick.is_none_or(|p| s.gain > leaves[p].best.unwrap().gain) {
                    pick = Some(k);
                }
            }
        }
        let Some(k) = pick else { break };
        let split = leaves[k].best.unwrap();
        let (start, end, depth, node) = {
            let l = &leaves[k];
            (l.start, l.end, l.depth, l.node)
        };

        // stable partition keeps rows ascending within each child
        let bins = binned.column(split.feature).bins();
        scratch.clear();
        let segment = &mut rows[start..end];
        let mut write = 0;
        for i in 0..segment.len() {
            let r = segment[i];
            if (bins[r as usize] as usize) <= split.cut {
                segment[write] = r;
                write += 1;
            } else {
                scratch.push(r);
            }
        }
        segment[write..].copy_from_slice(&scratch);
        let mid = start + write;
        debug_assert_eq!(write, split.left_count);

        let left_node = nodes.len();
        let right_node = left_node + 1;
        nodes[node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_node,
            right: right_node,
            default_left: split.left_hess >= split.right_hess,
        };
        nodes.push(Node::Leaf {
            value: 0.0,
            sum_hessian: 0.0,
            sample_count: 0,
        });
        nodes.push(Node::Leaf {
            value: 0.0,
            sum_hessian: 0.0,
            sample_count: 0,
        });

        let make_leaf = |node: usize, start: usize, end: usize, rows: &[u32]| {
            let totals = sum_stats(grad, hess, &rows[start..end]);
            GrowingLeaf {
                node,
                start,
                end,
                depth: depth + 1,
                grad: totals.0,
                hess: totals.1,
                best: splittable(depth + 1, &rows[start..end], totals),
            }
        };
        let left = make_leaf(left_node, start, mid, rows);
        let right = make_leaf(right_node, mid, end, rows);
        leaves[k] = left;
        leaves.push(right);
    }

    for leaf in &leaves {
        let value = leaf_weight(leaf.grad, leaf.hess, config.lambda_l2) * config.learning_rate;
        nodes[leaf.node] = Node::Leaf {
            value,
            sum_hessian: leaf.hess,
            sample_count: leaf.end - leaf.start,
        };
        for &r in &rows[leaf.start..leaf.end] {
            fitted[r as usize] += value;
        }
    }
    Tree { nodes }
}
