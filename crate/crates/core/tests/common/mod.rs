//! Brute-force reference implementations and random instance generators
//! shared by the integration tests.

#![allow(dead_code)]

use mcgrad::dataset::Features;
use mcgrad::gbdt::{GbdtConfig, Node, SplitInfo, Tree};
use mcgrad::groups::{GroupSet, GroupSpec};
use mcgrad::metrics::{delta_mc, IntervalSpec};
use rand::Rng;

/// Rows sorted by `(score, index)`, written out longhand.
pub fn sorted_rows(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort keeps equal scores in index order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && scores[idx[j - 1]] > scores[idx[j]] {
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx
}

/// ECCE by summing every contiguous interval of the sorted rows.
pub fn ecce_brute(scores: &[f64], labels: &[f64]) -> f64 {
    let order = sorted_rows(scores);
    let n = order.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let s: f64 = order[i..=j].iter().map(|&k| labels[k] - scores[k]).sum();
            best = best.max(s.abs());
        }
    }
    best / n as f64
}

/// `sqrt(n) * max over groups and intervals of delta / tau`, via `delta_mc`.
/// Groups with no members or zero tau are skipped. `None` if all are skipped.
pub fn mce_via_delta(scores: &[f64], labels: &[f64], groups: &GroupSet) -> Option<f64> {
    let n = scores.len() as f64;
    let mut best: Option<f64> = None;
    for g in &groups.groups {
        let m = g.size();
        if m == 0 {
            continue;
        }
        for start in 1..=m {
            for end in start..=m {
                let (delta, tau) =
                    delta_mc(scores, labels, &g.membership, IntervalSpec::new(start, end))
                        .expect("valid interval");
                if tau == 0.0 {
                    continue;
                }
                let v = n.sqrt() * delta / tau;
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}

/// Monotone weighted least squares by enumerating every partition of the
/// distinct sorted scores into consecutive blocks.
pub fn isotonic_brute(scores: &[f64], labels: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let m = distinct.len();
    let level = |v: f64| distinct.iter().position(|&d| d == v).unwrap();
    let mut w_lvl = vec![0.0; m];
    let mut s_lvl = vec![0.0; m];
    for i in 0..scores.len() {
        let k = level(scores[i]);
        w_lvl[k] += weights[i];
        s_lvl[k] += weights[i] * labels[i];
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    // bit b set means a block boundary after level b
    for mask in 0u32..(1 << (m - 1)) {
        let mut values = vec![0.0; m];
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut feasible = true;
        for end in 0..m {
            if end == m - 1 || mask & (1 << end) != 0 {
                let w: f64 = w_lvl[start..=end].iter().sum();
                let s: f64 = s_lvl[start..=end].iter().sum();
                let v = s / w;
                if v < prev {
                    feasible = false;
                    break;
                }
                prev = v;
                values[start..=end].fill(v);
                start = end + 1;
            }
        }
        if !feasible {
            continue;
        }
        let sse: f64 = (0..scores.len())
            .map(|i| weights[i] * (labels[i] - values[level(scores[i])]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
            best = Some((sse, values));
        }
    }
    let values = best.expect("the all-pooled partition is always feasible").1;
    scores.iter().map(|&s| values[level(s)]).collect()
}

/// One admissible split found by enumeration.
#[derive(Debug, Clone, Copy)]
pub struct OracleSplit {
    pub feature: usize,
    /// Rows with `x <= upper_left` go left.
    pub upper_left: f64,
    pub gain: f64,
}

/// Every split of `rows` that satisfies the configured constraints, found by
/// scanning all distinct values of every feature and summing each side
/// directly.
pub fn exhaustive_splits(
    features: &Features,
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    config: &GbdtConfig,
) -> Vec<OracleSplit> {
    let lambda = config.lambda_l2;
    let score = |g: f64, h: f64| {
        if h + lambda > 0.0 {
            g * g / (h + lambda)
        } else {
            0.0
        }
    };
    let g_all: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_all: f64 = rows.iter().map(|&i| hess[i]).sum();
    let min_count = config.min_child_samples.max(1);
    let mut out = Vec::new();
    for f in 0..features.n_cols() {
        let col = features.column(f);
        let mut values: Vec<f64> = rows.iter().map(|&i| col[i]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in &values[..values.len().saturating_sub(1)] {
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            let (mut gr, mut hr, mut nr) = (0.0, 0.0, 0usize);
            for &i in rows {
                if col[i] <= v {
                    gl += grad[i];
                    hl += hess[i];
                    nl += 1;
                } else {
                    gr += grad[i];
                    hr += hess[i];
                    nr += 1;
                }
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(g_all, h_all));
            let ok = nl >= min_count
                && nr >= min_count
                && hl >= config.min_sum_hessian_in_leaf
                && hr >= config.min_sum_hessian_in_leaf
                && gain > 0.0
                && gain >= config.min_gain_to_split;
            if ok {
                out.push(OracleSplit {
                    feature: f,
                    upper_left: v,
                    gain,
                });
            }
        }
    }
    out
}

/// Checks that the split `(feature, threshold)` chosen on `rows` is an
/// optimal member of `candidates`, up to `tol` relative gain.
pub fn check_against_oracle(
    chosen: Option<(usize, f64)>,
    candidates: &[OracleSplit],
    features: &Features,
    rows: &[usize],
    tol: f64,
) -> Result<(), String> {
    let best = candidates
        .iter()
        .map(|c| c.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    match chosen {
        None if candidates.is_empty() => Ok(()),
        None => Err(format!(
            "histogram found no split, oracle found gain {best}"
        )),
        Some((f, t)) if candidates.is_empty() => Err(format!(
            "histogram split on feature {f} at {t}, oracle found none"
        )),
        Some((f, t)) => {
            let col = features.column(f);
            let left: Vec<bool> = rows.iter().map(|&i| col[i] <= t).collect();
            let matching = candidates.iter().find(|c| {
                c.feature == f
                    && rows
                        .iter()
                        .zip(&left)
                        .all(|(&i, &l)| (col[i] <= c.upper_left) == l)
            });
            match matching {
                None => Err(format!("split on feature {f} at {t} is not admissible")),
                Some(c) if c.gain < best - tol * best.abs().max(1.0) => Err(format!(
                    "split gain {} below the exhaustive optimum {best}",
                    c.gain
                )),
                Some(_) => Ok(()),
            }
        }
    }
}

/// The chosen split of a histogram search in oracle-comparable form.
pub fn as_chosen(split: Option<SplitInfo>) -> Option<(usize, f64)> {
    split.map(|s| (s.feature, s.threshold))
}

/// Rows reaching each node of `tree`, in ascending row order.
pub fn rows_per_node(tree: &Tree, features: &Features) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); tree.nodes.len()];
    for i in 0..features.n_rows() {
        let mut idx = 0;
        loop {
            out[idx].push(i);
            match &tree.nodes[idx] {
                Node::Leaf { .. } => break,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if features.value(i, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
    out
}

/// Depth of every node (root = 0).
pub fn node_depths(tree: &Tree) -> Vec<usize> {
    let mut depth = vec![0; tree.nodes.len()];
    for (k, node) in tree.nodes.iter().enumerate() {
        if let Node::Split { left, right, .. } = node {
            depth[*left] = depth[k] + 1;
            depth[*right] = depth[k] + 1;
        }
    }
    depth
}

/// A score in `[0, 1]`: often on a coarse grid (ties, exact 0 and 1),
/// otherwise uniform.
pub fn random_score<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(0..=8) as f64 / 8.0,
        1 => rng.random_range(1..=3) as f64 / 4.0,
        _ => rng.random::<f64>(),
    }
}

/// Labels drawn either from the scores or from a fair coin.
pub fn random_labels<R: Rng>(rng: &mut R, scores: &[f64]) -> Vec<f64> {
    let from_scores = rng.random::<bool>();
    scores
        .iter()
        .map(|&s| {
            let p = if from_scores { s } else { 0.5 };
            f64::from(rng.random::<f64>() < p)
        })
        .collect()
}

pub fn random_groups<R: Rng>(rng: &mut R, n: usize, max_groups: usize) -> GroupSet {
    let k = rng.random_range(1..=max_groups);
    GroupSet::new(
        (0..k)
            .map(|g| {
                let rate = rng.random_range(0.1..0.9);
                let m = (0..n).map(|_| rng.random::<f64>() < rate).collect();
                GroupSpec::new(format!("g{g}"), m)
            })
            .collect(),
    )
}

/// Random feature matrix; some columns are coarse (many ties), some binary.
pub fn random_features<R: Rng>(rng: &mut R, n: usize, d: usize) -> Features {
    let columns = (0..d)
        .map(|_| match rng.random_range(0..3) {
            0 => (0..n).map(|_| rng.random_range(0..6) as f64).collect(),
            1 => (0..n).map(|_| f64::from(rng.random::<bool>())).collect(),
            _ => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        })
        .collect();
    Features::new(columns, (0..d).map(|j| format!("f{j}")).collect()).unwrap()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
