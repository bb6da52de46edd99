//! Baseline calibrators and a common envelope for all post-processors.

pub mod dfmc;
pub mod hkrr;
pub mod isotonic;
pub mod logistic;
pub mod platt;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_scores, Dataset, Features};
use crate::error::Result;
use crate::gbdt::GbdtConfig;
use crate::groups::GroupSet;
use crate::mcgrad::{fit_mcgrad, McGradConfig, McGradModel, RefitTrace, RoundTrace};

pub use dfmc::{default_dfmc_config, fit_dfmc, DfmcFit, DfmcModel};
pub use hkrr::{fit_hkrr, HkrrConfig, HkrrFit, HkrrModel, Patch};
pub use isotonic::{fit_isotonic, IsotonicFit, IsotonicModel};
pub use logistic::{fit_logistic, LogisticFit, LogisticModel};
pub use platt::{fit_platt, PlattFit, PlattModel};

/// Any fitted post-processor, serialized as `{"kind": ..., "payload": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "payload",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum Calibrator {
    /// Returns the base scores unchanged.
    None,
    Mcgrad(McGradModel),
    Platt(PlattModel),
    Isotonic(IsotonicModel),
    Hkrr(HkrrModel),
    Dfmc(DfmcModel),
}

impl Calibrator {
    pub fn kind(&self) -> &'static str {
        match self {
            Calibrator::None => "none",
            Calibrator::Mcgrad(_) => "mcgrad",
            Calibrator::Platt(_) => "platt",
            Calibrator::Isotonic(_) => "isotonic",
            Calibrator::Hkrr(_) => "hkrr",
            Calibrator::Dfmc(_) => "dfmc",
        }
    }

    /// Whether [`apply_calibrator`] reads the group set.
    pub fn uses_groups(&self) -> bool {
        matches!(self, Calibrator::Hkrr(_) | Calibrator::Dfmc(_))
    }
}

/// Calibrated probabilities for `scores`. `features` and `groups` must match
/// what the model was fit on when the model uses them.
pub fn apply_calibrator(
    model: &Calibrator,
    scores: &[f64],
    features: &Features,
    groups: &GroupSet,
) -> Result<Vec<f64>> {
    check_scores(scores, features.n_rows())?;
    match model {
        Calibrator::None => Ok(scores.to_vec()),
        Calibrator::Mcgrad(m) => m.predict(features, scores),
        Calibrator::Platt(m) => m.predict(scores),
        Calibrator::Isotonic(m) => m.predict(scores),
        Calibrator::Hkrr(m) => m.predict(scores, groups),
        Calibrator::Dfmc(m) => m.predict(features, scores, groups),
    }
}

/// Which calibrator to fit, with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum CalibratorSpec {
    None,
    Mcgrad(McGradConfig),
    Platt,
    Isotonic,
    Hkrr(HkrrConfig),
    Dfmc(GbdtConfig),
}

/// A fitted calibrator plus whatever diagnostics its fit produced.
#[derive(Debug, Clone)]
pub struct CalibratorFit {
    pub model: Calibrator,
    /// Calibrated scores on the fitting rows.
    pub fitted: Vec<f64>,
    pub trace: Option<Vec<RoundTrace>>,
    pub refit: Option<Vec<RefitTrace>>,
    pub warnings: Vec<String>,
}

impl CalibratorFit {
    fn plain(model: Calibrator, fitted: Vec<f64>) -> Self {
        Self {
            model,
            fitted,
            trace: None,
            refit: None,
            warnings: Vec::new(),
        }
    }
}

pub fn fit_calibrator(
    spec: &CalibratorSpec,
    data: &Dataset,
    base_scores: &[f64],
    groups: &GroupSet,
) -> Result<CalibratorFit> {
    check_scores(base_scores, data.n_rows())?;
    let labels = data.labels();
    let weights = data.weights();
    Ok(match spec {
        CalibratorSpec::None => CalibratorFit::plain(Calibrator::None, base_scores.to_vec()),
        CalibratorSpec::Mcgrad(config) => {
            let fit = fit_mcgrad(data, base_scores, config)?;
            let fitted = fit.model.predict(data.features(), base_scores)?;
            CalibratorFit {
                model: Calibrator::Mcgrad(fit.model),
                fitted,
                trace: Some(fit.trace),
                refit: Some(fit.refit),
                warnings: Vec::new(),
            }
        }
        CalibratorSpec::Platt => {
            let fit = fit_platt(base_scores, labels, weights)?;
            let fitted = fit.model.predict(base_scores)?;
            let mut out = CalibratorFit::plain(Calibrator::Platt(fit.model), fitted);
            if fit.degenerate_labels {
                out.warnings.push("platt: all labels identical".into());
            }
            if !fit.converged {
                out.warnings.push("platt: Newton did not converge".into());
            }
            out
        }
        CalibratorSpec::Isotonic => {
            let fit = fit_isotonic(base_scores, labels, weights)?;
            CalibratorFit::plain(Calibrator::Isotonic(fit.model), fit.fitted)
        }
        CalibratorSpec::Hkrr(config) => {
            let fit = fit_hkrr(base_scores, labels, groups, config)?;
            let mut out = CalibratorFit::plain(Calibrator::Hkrr(fit.model), fit.fitted);
            if fit.hit_max_sweeps {
                out.warnings.push(format!(
                    "hkrr: no fixed point after {} sweeps",
                    config.max_sweeps
                ));
            }
            out
        }
        CalibratorSpec::Dfmc(config) => {
            let fit = fit_dfmc(data, base_scores, groups, config)?;
            CalibratorFit::plain(Calibrator::Dfmc(fit.model), fit.fitted)
        }
    })
}
