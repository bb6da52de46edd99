//! Discretization-free multicalibration: a single shallow GBDT over the
//! original features, one indicator column per group, and the base score,
//! boosted from the base logits.

use serde::{Deserialize, Serialize};

use crate::dataset::{check_scores, Dataset, Features};
use crate::error::{Error, Result};
use crate::gbdt::{fit_gbdt, GbdtConfig, TreeEnsemble};
use crate::groups::GroupSet;
use crate::math::sigmoid;
use crate::mcgrad::inverse_sigmoid;

pub const GROUP_PREFIX: &str = "__group__:";
pub const DFMC_MAX_DEPTH: usize = 2;
pub const DFMC_EPS: f64 = 1e-7;

/// LightGBM defaults with the depth fixed at two.
pub fn default_dfmc_config() -> GbdtConfig {
    GbdtConfig {
        max_depth: DFMC_MAX_DEPTH,
        ..GbdtConfig::lightgbm_defaults()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfmcModel {
    pub ensemble: TreeEnsemble,
    pub eps: f64,
    pub feature_names: Vec<String>,
    pub group_names: Vec<String>,
}

fn design(features: &Features, groups: &GroupSet, scores: &[f64]) -> Result<Features> {
    let indicators = groups.indicator_features(features.n_rows(), GROUP_PREFIX)?;
    features.hstack(&indicators)?.with_score(scores)
}

impl DfmcModel {
    pub fn predict(
        &self,
        features: &Features,
        scores: &[f64],
        groups: &GroupSet,
    ) -> Result<Vec<f64>> {
        check_scores(scores, features.n_rows())?;
        if features.names() != self.feature_names.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} features matching the training schema, got {}",
                self.feature_names.len(),
                features.n_cols()
            )));
        }
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
        let x = design(features, groups, scores)?;
        let h = self.ensemble.predict(&x)?;
        Ok(inverse_sigmoid(scores, self.eps)
            .iter()
            .zip(h)
            .map(|(f, dh)| sigmoid(f + dh))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct DfmcFit {
    pub model: DfmcModel,
    pub fitted: Vec<f64>,
}

/// Fits the boosted correction; `config.max_depth` is overridden to two.
pub fn fit_dfmc(
    data: &Dataset,
    base_scores: &[f64],
    groups: &GroupSet,
    config: &GbdtConfig,
) -> Result<DfmcFit> {
    check_scores(base_scores, data.n_rows())?;
    let config = GbdtConfig {
        max_depth: DFMC_MAX_DEPTH,
        ..config.clone()
    };
    let x = design(data.features(), groups, base_scores)?;
    let init = inverse_sigmoid(base_scores, DFMC_EPS);
    let fit = fit_gbdt(&data.with_features(x)?, &init, &config)?;
    let fitted = init
        .iter()
        .zip(&fit.fitted)
        .map(|(f, dh)| sigmoid(f + dh))
        .collect();
    Ok(DfmcFit {
        model: DfmcModel {
            ensemble: fit.ensemble,
            eps: DFMC_EPS,
            feature_names: data.feature_names().to_vec(),
            group_names: groups.names().into_iter().map(String::from).collect(),
        },
        fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_model_is_identity() {
        let features = Features::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let model = DfmcModel {
            ensemble: TreeEnsemble::empty(2, default_dfmc_config()),
            eps: DFMC_EPS,
            feature_names: features.names().to_vec(),
            group_names: vec![],
        };
        let s = [0.3, 0.8];
        let out = model.predict(&features, &s, &GroupSet::default()).unwrap();
        for (a, b) in out.iter().zip(s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn biased_group_is_split_on() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4000;
        let mut x = Vec::with_capacity(n);
        let mut member = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut base = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let g = rng.random::<f64>() < 0.3;
            let z = 0.5 * a;
            labels.push(f64::from(
                rng.random::<f64>() < sigmoid(z + if g { 1.0 } else { 0.0 }),
            ));
            base.push(sigmoid(z));
            x.push(a);
            member.push(g);
        }
        let features = Features::new(vec![x], vec!["a".into()]).unwrap();
        let data = Dataset::new(features, labels, None).unwrap();
        let groups = GroupSet::new(vec![GroupSpec::new("g", member)]);
        let fit = fit_dfmc(&data, &base, &groups, &default_dfmc_config()).unwrap();
        let trees = &fit.model.ensemble.trees;
        assert!(trees.iter().all(|t| t.depth() <= 2));
        // column 1 is the group indicator
        assert!(trees.iter().any(|t| t.split_features().contains(&1)));
        let replay = fit.model.predict(data.features(), &base, &groups).unwrap();
        assert_eq!(replay, fit.fitted);
    }
}
