//! Multi-round multicalibration by recursive gradient boosting.
//!
//! Starting from the base logits `F_0 = logit(f_0)`, round `t` fits a GBDT
//! on the features plus one extra column holding the current probability
//! `sigmoid(F_{t-1})`, adds the ensemble output `h_t` to the logits and
//! rescales: `F_t = theta_t (F_{t-1} + h_t)`, where `theta_t` minimizes the
//! training log loss of the rescaled logits.
//!
//! The number of rounds is picked on a held-out validation split: rounds are
//! added while the validation log loss strictly improves. The selected `T`
//! rounds are then refit on all rows.

use serde::{Deserialize, Serialize};

use crate::dataset::{check_scores, split_indices, Dataset, Features, SplitSpec, SCORE_COLUMN};
use crate::error::{Error, Result};
use crate::gbdt::{fit_gbdt_binned, BinnedMatrix, GbdtConfig, TreeEnsemble};
use crate::math::{logit, logit_loss, mean_logit_loss, sigmoid};

pub const MODEL_VERSION: u32 = 1;

pub const THETA_MIN: f64 = 1e-3;
pub const THETA_MAX: f64 = 1e3;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McGradConfig {
    pub gbdt: GbdtConfig,
    pub max_rounds: usize,
    pub valid_fraction: f64,
    pub seed: u64,
    pub rescale_enabled: bool,
    pub logit_clamp_eps: f64,
}

impl Default for McGradConfig {
    fn default() -> Self {
        Self {
            gbdt: GbdtConfig::default(),
            max_rounds: 100,
            valid_fraction: 0.2,
            seed: 0,
            rescale_enabled: true,
            logit_clamp_eps: 1e-7,
        }
    }
}

impl McGradConfig {
    pub fn validate(&self) -> Result<()> {
        self.gbdt.validate()?;
        if self.max_rounds < 1 {
            return Err(Error::InvalidConfig("max_rounds must be >= 1".into()));
        }
        if !(self.logit_clamp_eps > 0.0 && self.logit_clamp_eps < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "logit_clamp_eps must lie in (0, 0.5), got {}",
                self.logit_clamp_eps
            )));
        }
        self.split().validate()
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec::new(self.valid_fraction, self.seed)
    }
}

/// Clamped logit of every entry of `p`.
pub fn inverse_sigmoid(p: &[f64], eps: f64) -> Vec<f64> {
    p.iter().map(|&x| logit(x, eps)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleStatus {
    Converged,
    /// Newton hit its iteration cap; the last iterate is returned.
    MaxIterations,
    /// Curvature broke down and golden-section search took over.
    GoldenSection,
    /// Every logit is zero, so the objective does not depend on theta.
    DegenerateLogits,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleFit {
    pub theta: f64,
    pub status: RescaleStatus,
    pub iterations: usize,
}

fn rescale_objective(theta: f64, logits: &[f64], labels: &[f64], weights: Option<&[f64]>) -> f64 {
    let (mut total, mut mass) = (0.0, 0.0);
    for i in 0..logits.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w * logit_loss(theta * logits[i], labels[i]);
        mass += w;
    }
    total / mass
}

/// First and second derivative of the objective in theta.
fn rescale_derivatives(
    theta: f64,
    logits: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
) -> (f64, f64) {
    let (mut d1, mut d2, mut mass) = (0.0, 0.0, 0.0);
    for i in 0..logits.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        let f = logits[i];
        let p = sigmoid(theta * f);
        d1 += w * f * (p - labels[i]);
        d2 += w * f * f * p * (1.0 - p);
        mass += w;
    }
    (d1 / mass, d2 / mass)
}

fn golden_section(objective: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (THETA_MIN, THETA_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if (b - a).abs() < NEWTON_TOL {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    (a + b) / 2.0
}

/// Scalar `theta` in `[THETA_MIN, THETA_MAX]` minimizing the weighted mean
/// log loss of `theta * logits`.
///
/// Safeguarded Newton from `theta = 1`: steps are clamped to the interval and
/// halved until the objective does not increase. Non-finite or non-positive
/// curvature hands over to golden-section search.
pub fn optimize_rescale(
    logits: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
) -> Result<RescaleFit> {
    if logits.is_empty() {
        return Err(Error::EmptyData);
    }
    if labels.len() != logits.len() {
        return Err(Error::LengthMismatch {
            expected: logits.len(),
            actual: labels.len(),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("logits must be finite".into()));
    }
    if logits.iter().all(|&v| v == 0.0) {
        return Ok(RescaleFit {
            theta: 1.0,
            status: RescaleStatus::DegenerateLogits,
            iterations: 0,
        });
    }
    let objective = |t: f64| rescale_objective(t, logits, labels, weights);
    let golden = |iterations| RescaleFit {
        theta: golden_section(objective),
        status: RescaleStatus::GoldenSection,
        iterations,
    };

    let mut theta = 1.0;
    let mut current = objective(theta);
    for iter in 1..=NEWTON_MAX_ITER {
        let (d1, d2) = rescale_derivatives(theta, logits, labels, weights);
        if !(d2.is_finite() && d2 > 0.0 && d1.is_finite()) {
            return Ok(golden(iter));
        }
        let mut step = -d1 / d2;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = (theta + step).clamp(THETA_MIN, THETA_MAX);
            let value = objective(candidate);
            if value <= current {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        let Some((next, value)) = accepted else {
            // no descent along the Newton direction: theta is already optimal
            // to working precision
            return Ok(RescaleFit {
                theta,
                status: RescaleStatus::Converged,
                iterations: iter,
            });
        };
        let delta = (next - theta).abs();
        theta = next;
        current = value;
        if delta < NEWTON_TOL {
            return Ok(RescaleFit {
                theta,
                status: RescaleStatus::Converged,
                iterations: iter,
            });
        }
    }
    Ok(RescaleFit {
        theta,
        status: RescaleStatus::MaxIterations,
        iterations: NEWTON_MAX_ITER,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McGradRound {
    pub theta: f64,
    /// Trained on the base features followed by the score column.
    pub ensemble: TreeEnsemble,
}

/// A fitted MCGrad calibrator. No rounds means the identity map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McGradModel {
    pub version: u32,
    pub eps: f64,
    pub rounds: Vec<McGradRound>,
    /// Base feature names; the score column is appended after them.
    pub feature_names: Vec<String>,
}

impl McGradModel {
    pub fn identity(feature_names: Vec<String>, eps: f64) -> Self {
        Self {
            version: MODEL_VERSION,
            eps,
            rounds: Vec::new(),
            feature_names,
        }
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    fn check_features(&self, features: &Features) -> Result<()> {
        if features.n_cols() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                actual: features.n_cols(),
            });
        }
        if features.names() != self.feature_names.as_slice() {
            return Err(Error::ShapeMismatch(
                "feature names differ from the training schema".into(),
            ));
        }
        Ok(())
    }

    /// Final logits `F_T`.
    pub fn predict_logits(&self, features: &Features, base_scores: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        check_scores(base_scores, features.n_rows())?;
        let mut logits = inverse_sigmoid(base_scores, self.eps);
        for round in &self.rounds {
            let h = round_increment(&round.ensemble, features, &logits)?;
            apply_round(&mut logits, &h, round.theta);
        }
        Ok(logits)
    }

    /// Calibrated probabilities. The identity model returns `base_scores`
    /// unchanged.
    pub fn predict(&self, features: &Features, base_scores: &[f64]) -> Result<Vec<f64>> {
        if self.rounds.is_empty() {
            self.check_features(features)?;
            check_scores(base_scores, features.n_rows())?;
            return Ok(base_scores.to_vec());
        }
        Ok(self
            .predict_logits(features, base_scores)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }
}

pub fn predict_mcgrad(
    model: &McGradModel,
    features: &Features,
    base_scores: &[f64],
) -> Result<Vec<f64>> {
    model.predict(features, base_scores)
}

fn round_increment(
    ensemble: &TreeEnsemble,
    features: &Features,
    logits: &[f64],
) -> Result<Vec<f64>> {
    let scores: Vec<f64> = logits.iter().map(|&f| sigmoid(f)).collect();
    ensemble.predict(&features.with_score(&scores)?)
}

#[inline]
fn apply_round(logits: &mut [f64], h: &[f64], theta: f64) {
    for (f, &dh) in logits.iter_mut().zip(h) {
        *f = theta * (*f + dh);
    }
}

/// One row of the selection trace. Round 0 is the base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub theta: f64,
    pub rescale_status: Option<RescaleStatus>,
    /// `false` only for the round that stopped the search.
    pub accepted: bool,
}

/// One refit round on all rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitTrace {
    pub round: usize,
    pub train_loss: f64,
    pub theta: f64,
    pub rescale_status: RescaleStatus,
}

#[derive(Debug, Clone)]
pub struct McGradFit {
    pub model: McGradModel,
    pub trace: Vec<RoundTrace>,
    pub refit: Vec<RefitTrace>,
    /// Final logits on the fitting rows, accumulated during the refit.
    pub fitted_logits: Vec<f64>,
}

impl McGradFit {
    pub fn selected_rounds(&self) -> usize {
        self.model.n_rounds()
    }
}

/// Training rows pre-binned once; only the score column is rebinned per round.
struct RoundFitter<'a> {
    binned: BinnedMatrix,
    data: &'a Dataset,
    config: &'a McGradConfig,
    score_col: usize,
    logits: Vec<f64>,
}

impl<'a> RoundFitter<'a> {
    fn new(data: &'a Dataset, base_scores: &[f64], config: &'a McGradConfig) -> Self {
        let mut binned = BinnedMatrix::new(data.features(), config.gbdt.max_bins);
        let score_col = binned.n_cols();
        // placeholder, replaced at the start of every round
        binned.push_column(&vec![0.0; data.n_rows()], config.gbdt.max_bins);
        Self {
            binned,
            data,
            config,
            score_col,
            logits: inverse_sigmoid(base_scores, config.logit_clamp_eps),
        }
    }

    fn loss(&self) -> f64 {
        mean_logit_loss(&self.logits, self.data.labels(), self.data.weights())
    }

    /// Fits one round and advances the logits. Returns the ensemble, its
    /// training increment and the rescale fit.
    fn step(&mut self) -> Result<(TreeEnsemble, RescaleFit)> {
        let scores: Vec<f64> = self.logits.iter().map(|&f| sigmoid(f)).collect();
        self.binned
            .replace_column(self.score_col, &scores, self.config.gbdt.max_bins);
        let fit = fit_gbdt_binned(
            &self.binned,
            self.data.labels(),
            self.data.weights(),
            &self.logits,
            &self.config.gbdt,
        )?;
        let rescale = if self.config.rescale_enabled {
            let summed: Vec<f64> = self
                .logits
                .iter()
                .zip(&fit.fitted)
                .map(|(f, h)| f + h)
                .collect();
            optimize_rescale(&summed, self.data.labels(), self.data.weights())?
        } else {
            RescaleFit {
                theta: 1.0,
                status: RescaleStatus::Disabled,
                iterations: 0,
            }
        };
        apply_round(&mut self.logits, &fit.fitted, rescale.theta);
        Ok((fit.ensemble, rescale))
    }
}

/// Fits MCGrad on `data` whose base model predicted `base_scores`.
pub fn fit_mcgrad(data: &Dataset, base_scores: &[f64], config: &McGradConfig) -> Result<McGradFit> {
    config.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    check_scores(base_scores, data.n_rows())?;
    if data.features().column_index(SCORE_COLUMN).is_some() {
        return Err(Error::InvalidInput(format!(
            "input features already contain the reserved column {SCORE_COLUMN}"
        )));
    }
    let eps = config.logit_clamp_eps;
    let names = data.feature_names().to_vec();

    // selection on a train/validation split
    let (train_idx, valid_idx) = split_indices(data.n_rows(), &config.split())?;
    let train = data.subset(&train_idx);
    let valid = data.subset(&valid_idx);
    let pick = |idx: &[usize]| idx.iter().map(|&i| base_scores[i]).collect::<Vec<f64>>();
    let mut fitter = RoundFitter::new(&train, &pick(&train_idx), config);
    let mut valid_logits = inverse_sigmoid(&pick(&valid_idx), eps);
    let valid_loss = |l: &[f64]| mean_logit_loss(l, valid.labels(), valid.weights());

    let mut trace = vec![RoundTrace {
        round: 0,
        train_loss: fitter.loss(),
        valid_loss: valid_loss(&valid_logits),
        theta: 1.0,
        rescale_status: None,
        accepted: true,
    }];
    let mut selected = 0;
    for t in 1..=config.max_rounds {
        let (ensemble, rescale) = fitter.step()?;
        let h = round_increment(&ensemble, valid.features(), &valid_logits)?;
        let mut next = valid_logits.clone();
        apply_round(&mut next, &h, rescale.theta);
        let loss = valid_loss(&next);
        let previous = trace.last().expect("trace starts with round 0").valid_loss;
        let improved = previous - loss > 0.0;
        trace.push(RoundTrace {
            round: t,
            train_loss: fitter.loss(),
            valid_loss: loss,
            theta: rescale.theta,
            rescale_status: Some(rescale.status),
            accepted: improved,
        });
        log::debug!(
            "round {t}: valid loss {loss} (previous {previous}), theta {}",
            rescale.theta
        );
        if !improved {
            break;
        }
        selected = t;
        valid_logits = next;
    }
    log::info!("selected {selected} rounds");

    if selected == 0 {
        return Ok(McGradFit {
            model: McGradModel::identity(names, eps),
            trace,
            refit: Vec::new(),
            fitted_logits: inverse_sigmoid(base_scores, eps),
        });
    }

    // refit the selected number of rounds on every row
    let mut fitter = RoundFitter::new(data, base_scores, config);
    let mut rounds = Vec::with_capacity(selected);
    let mut refit = Vec::with_capacity(selected);
    for s in 1..=selected {
        let (ensemble, rescale) = fitter.step()?;
        refit.push(RefitTrace {
            round: s,
            train_loss: fitter.loss(),
            theta: rescale.theta,
            rescale_status: rescale.status,
        });
        rounds.push(McGradRound {
            theta: rescale.theta,
            ensemble,
        });
    }
    Ok(McGradFit {
        model: McGradModel {
            version: MODEL_VERSION,
            eps,
            rounds,
            feature_names: names,
        },
        trace,
        refit,
        fitted_logits: fitter.logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::Tree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> f64 {
        f64::from(rng.random::<f64>() < p)
    }

    #[test]
    fn inverse_sigmoid_examples() {
        let eps = 1e-7;
        assert_eq!(inverse_sigmoid(&[0.5], eps), vec![0.0]);
        let top = inverse_sigmoid(&[1.0], eps)[0];
        // 1 - (1 - eps) is not exactly eps in floating point
        assert!((top - ((1.0 - 1e-7) / 1e-7f64).ln()).abs() < 1e-8);
        assert!((top - 16.118).abs() < 1e-3);
        for p in [1e-7, 0.01, 0.3, 0.77, 0.999, 1.0 - 1e-7] {
            assert!((sigmoid(inverse_sigmoid(&[p], eps)[0]) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_logits_are_degenerate() {
        let r = optimize_rescale(&[0.0; 4], &[0.0, 1.0, 1.0, 0.0], None).unwrap();
        assert_eq!(r.theta, 1.0);
        assert_eq!(r.status, RescaleStatus::DegenerateLogits);
    }

    fn true_logit_sample(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut logits = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let f = rng.random_range(-3.0..3.0);
            labels.push(bernoulli(&mut rng, sigmoid(f)));
            logits.push(f);
        }
        (logits, labels)
    }

    #[test]
    fn rescale_recovers_inverse_scale() {
        let (logits, labels) = true_logit_sample(100_000, 11);
        let halved: Vec<f64> = logits.iter().map(|f| 0.5 * f).collect();
        let r = optimize_rescale(&halved, &labels, None).unwrap();
        assert_eq!(r.status, RescaleStatus::Converged);
        assert!((r.theta - 2.0).abs() < 0.05, "theta {}", r.theta);
    }

    #[test]
    fn rescale_is_near_one_on_well_specified_data() {
        let mut errors = Vec::new();
        for n in [1_000, 10_000, 100_000] {
            let (logits, labels) = true_logit_sample(n, 5);
            errors.push((optimize_rescale(&logits, &labels, None).unwrap().theta - 1.0).abs());
        }
        assert!(errors[2] < errors[0], "{errors:?}");
        assert!(errors[2] < 0.03, "{errors:?}");
    }

    #[test]
    fn rescale_hits_the_bound_on_separable_data() {
        let r = optimize_rescale(&[-1.0, -0.5, 0.5, 1.0], &[0.0, 0.0, 1.0, 1.0], None).unwrap();
        assert!(r.theta > 20.0 && r.theta <= THETA_MAX, "theta {}", r.theta);
    }

    fn offset_data(n: usize, seed: u64, offset: f64) -> (Dataset, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x0 = Vec::with_capacity(n);
        let mut x1 = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut base = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.random_range(-2.0..2.0);
            let b = f64::from(rng.random::<bool>());
            let f = 0.8 * a;
            labels.push(bernoulli(&mut rng, sigmoid(f + offset * b)));
            base.push(sigmoid(f));
            x0.push(a);
            x1.push(b);
        }
        let features = Features::new(vec![x0, x1], vec!["x0".into(), "x1".into()]).unwrap();
        (Dataset::new(features, labels, None).unwrap(), base)
    }

    #[test]
    fn group_offset_is_corrected() {
        let (data, base) = offset_data(20_000, 3, 1.0);
        let fit = fit_mcgrad(&data, &base, &McGradConfig::default()).unwrap();
        assert!(fit.selected_rounds() >= 1);
        let first = &fit.model.rounds[0].ensemble;
        assert_eq!(first.n_features, 3);
        assert!(first.trees.iter().any(|t| t.split_features().contains(&1)));
        // validation trace strictly decreasing through T
        let t = fit.selected_rounds();
        for w in fit.trace[..=t].windows(2) {
            assert!(w[1].valid_loss < w[0].valid_loss);
        }
        assert!(!fit.trace.last().unwrap().accepted || t == 100);
    }

    #[test]
    fn calibrated_base_selects_zero_rounds() {
        let spec = crate::bench::SyntheticSpec::calibrated(20_000, 0);
        let (data, base, _) = crate::bench::generate_synthetic(&spec).unwrap();
        let fit = fit_mcgrad(&data, &base, &McGradConfig::default()).unwrap();
        assert_eq!(fit.selected_rounds(), 0);
        let out = fit.model.predict(data.features(), &base).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn max_rounds_caps_selection() {
        let (data, base) = offset_data(5_000, 1, 1.5);
        let config = McGradConfig {
            max_rounds: 1,
            ..McGradConfig::default()
        };
        let fit = fit_mcgrad(&data, &base, &config).unwrap();
        assert!(fit.selected_rounds() <= 1);
        assert!(fit.trace.len() <= 2);
    }

    #[test]
    fn replay_matches_fit_exactly() {
        let (data, base) = offset_data(6_000, 9, 1.0);
        let fit = fit_mcgrad(&data, &base, &McGradConfig::default()).unwrap();
        assert!(fit.selected_rounds() >= 1);
        let replay = fit.model.predict_logits(data.features(), &base).unwrap();
        assert_eq!(replay, fit.fitted_logits);
        let json = serde_json::to_string(&fit.model).unwrap();
        let back: McGradModel = serde_json::from_str(&json).unwrap();
        assert_eq!(
            back.predict(data.features(), &base).unwrap(),
            fit.model.predict(data.features(), &base).unwrap()
        );
    }

    #[test]
    fn no_rescale_fixes_theta() {
        let (data, base) = offset_data(5_000, 2, 1.0);
        let config = McGradConfig {
            rescale_enabled: false,
            ..McGradConfig::default()
        };
        let fit = fit_mcgrad(&data, &base, &config).unwrap();
        assert!(fit.model.rounds.iter().all(|r| r.theta == 1.0));
        assert!(fit.trace[1..]
            .iter()
            .all(|r| r.rescale_status == Some(RescaleStatus::Disabled)));
    }

    #[test]
    fn zero_leaf_round_is_near_identity() {
        let features = Features::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let mut ensemble = TreeEnsemble::empty(2, GbdtConfig::default());
        ensemble.trees.push(Tree::leaf(0.0, 1.0, 3));
        let model = McGradModel {
            version: MODEL_VERSION,
            eps: 1e-7,
            rounds: vec![McGradRound {
                theta: 1.0,
                ensemble,
            }],
            feature_names: features.names().to_vec(),
        };
        let base = [0.2, 0.5, 0.9];
        let out = model.predict(&features, &base).unwrap();
        for (a, b) in out.iter().zip(base) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn prediction_checks_dimensions() {
        let model = McGradModel::identity(vec!["x0".into(), "x1".into()], 1e-7);
        let features = Features::from_rows(&[vec![0.0]]).unwrap();
        assert!(matches!(
            model.predict(&features, &[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = McGradConfig {
            max_rounds: 0,
            ..McGradConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = McGradConfig {
            logit_clamp_eps: 0.5,
            ..McGradConfig::default()
        };
        assert!(bad.validate().is_err());
        let json = r#"{"max_rounds": 3, "bogus": 1}"#;
        assert!(serde_json::from_str::<McGradConfig>(json).is_err());
    }
}
