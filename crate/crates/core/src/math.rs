//! Scalar helpers shared by the boosting, rescaling and metric code.

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log loss of a single logit against a 0/1 label.
#[inline]
pub fn logit_loss(logit: f64, label: f64) -> f64 {
    softplus(logit) - label * logit
}

/// Logit of `p` after clamping it to `[eps, 1 - eps]`.
#[inline]
pub fn logit(p: f64, eps: f64) -> f64 {
    let q = p.clamp(eps, 1.0 - eps);
    (q / (1.0 - q)).ln()
}

/// Weighted mean log loss of `logits` against `labels`.
///
/// `weights == None` means unit weights.
pub fn mean_logit_loss(logits: &[f64], labels: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut total = 0.0;
    let mut mass = 0.0;
    for i in 0..logits.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w * logit_loss(logits[i], labels[i]);
        mass += w;
    }
    if mass > 0.0 {
        total / mass
    } else {
        0.0
    }
}
