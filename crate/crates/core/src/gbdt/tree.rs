use serde::{Deserialize, Serialize};

use crate::dataset::Features;

/// One node of a flattened regression tree. The root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`; NaN follows
    /// `default_left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
    },
    /// `value` is a logit increment with the learning rate already applied.
    Leaf {
        value: f64,
        sum_hessian: f64,
        sample_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, sum_hessian: f64, sample_count: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                value,
                sum_hessian,
                sample_count,
            }],
        }
    }

    #[inline]
    pub fn predict_row(&self, features: &Features, row: usize) -> f64 {
        self.route(|f| features.value(row, f))
    }

    /// Output for a single row given as a slice; NaN entries are missing.
    pub fn predict_values(&self, row: &[f64]) -> f64 {
        self.route(|f| row[f])
    }

    #[inline]
    fn route(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                } => {
                    let x = value_of(*feature);
                    let go_left = if x.is_nan() {
                        *default_left
                    } else {
                        x <= *threshold
                    };
                    idx = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf {
                value,
                sum_hessian,
                sample_count,
            } => Some((*value, *sum_hessian, *sample_count)),
            Node::Split { .. } => None,
        })
    }

    /// Features used by any split, in node order.
    pub fn split_features(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// `(feature, threshold)` of the root split, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}
