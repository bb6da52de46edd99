//! Quantile histogram binning.
//!
//! Each column gets an ascending list of cut points. A value `x` lands in
//! bin `#{c : c < x}`, so "bin <= b" is the same predicate as "x <= cuts[b]"
//! and a histogram split at cut `b` can be replayed on raw values.

use rayon::prelude::*;

use crate::dataset::Features;

/// Largest histogram resolution the `u16` bin codes support.
pub const MAX_BINS_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct BinnedColumn {
    cuts: Vec<f64>,
    bins: Vec<u16>,
}

impl BinnedColumn {
    pub fn new(values: &[f64], max_bins: usize) -> Self {
        let cuts = quantile_cuts(values, max_bins);
        let bins = values.iter().map(|&x| bin_of(&cuts, x)).collect();
        Self { cuts, bins }
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn bins(&self) -> &[u16] {
        &self.bins
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }
}

#[inline]
pub fn bin_of(cuts: &[f64], x: f64) -> u16 {
    cuts.partition_point(|&c| c < x) as u16
}

/// Point strictly between `lo` and `hi` when one exists, else `lo`.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Cut points for `values`.
///
/// With at most `max_bins` distinct values every gap between consecutive
/// distinct values gets a midpoint cut, which makes the histogram search
/// exhaustive. Otherwise distinct values are grouped greedily into bins of
/// roughly equal row count.
pub fn quantile_cuts(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= max_bins {
        return distinct
            .windows(2)
            .map(|w| midpoint(w[0].0, w[1].0))
            .collect();
    }
    let per_bin = values.len() as f64 / max_bins as f64;
    let mut cuts = Vec::with_capacity(max_bins - 1);
    let mut seen = 0usize;
    for k in 0..distinct.len() - 1 {
        seen += distinct[k].1;
        if cuts.len() + 1 < max_bins && seen as f64 >= per_bin * (cuts.len() + 1) as f64 {
            cuts.push(midpoint(distinct[k].0, distinct[k + 1].0));
        }
    }
    cuts
}

/// Binned view of a whole feature matrix.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    columns: Vec<BinnedColumn>,
    n_rows: usize,
}

impl BinnedMatrix {
    pub fn new(features: &Features, max_bins: usize) -> Self {
        let columns = features
            .columns()
            .par_iter()
            .map(|c| BinnedColumn::new(c, max_bins))
            .collect();
        Self {
            columns,
            n_rows: features.n_rows(),
        }
    }

    /// Rebins only column `j` from `values`.
    pub fn replace_column(&mut self, j: usize, values: &[f64], max_bins: usize) {
        self.columns[j] = BinnedColumn::new(values, max_bins);
    }

    pub fn push_column(&mut self, values: &[f64], max_bins: usize) {
        self.columns.push(BinnedColumn::new(values, max_bins));
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &BinnedColumn {
        &self.columns[j]
    }
}
