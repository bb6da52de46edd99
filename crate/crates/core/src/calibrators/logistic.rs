//! L2-regularized logistic regression, used as the base predictor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Features};
use crate::error::{Error, Result};
use crate::math::{logit_loss, sigmoid};

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

/// Coefficients act on standardized features `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub l2: f64,
    pub means: Vec<f64>,
    /// Standard deviations; zero marks a constant column, which is ignored.
    pub scales: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl LogisticModel {
    fn standardized(&self, x: f64, j: usize) -> f64 {
        if self.scales[j] > 0.0 {
            (x - self.means[j]) / self.scales[j]
        } else {
            0.0
        }
    }

    pub fn predict_logits(&self, features: &Features) -> Result<Vec<f64>> {
        if features.n_cols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                actual: features.n_cols(),
            });
        }
        let mut out = vec![self.intercept; features.n_rows()];
        for (j, &w) in self.coefficients.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(features.column(j)) {
                *o += w * self.standardized(x, j);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, features: &Features) -> Result<Vec<f64>> {
        Ok(self
            .predict_logits(features)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// `(weights, intercept)` on the original feature scale.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let mut b = self.intercept;
        let w = (0..self.coefficients.len())
            .map(|j| {
                if self.scales[j] > 0.0 {
                    let raw = self.coefficients[j] / self.scales[j];
                    b -= raw * self.means[j];
                    raw
                } else {
                    0.0
                }
            })
            .collect();
        (w, b)
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LogisticModel,
    pub converged: bool,
    pub iterations: usize,
    /// Largest absolute gradient entry at the returned parameters.
    pub grad_norm: f64,
    /// Objective value before the first and after every Newton step.
    pub objective_trace: Vec<f64>,
}

struct Problem<'a> {
    /// Standardized columns.
    x: Vec<Vec<f64>>,
    labels: &'a [f64],
    weights: Option<&'a [f64]>,
    mass: f64,
    l2: f64,
}

impl Problem<'_> {
    fn w(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn logits(&self, beta: &DVector<f64>) -> Vec<f64> {
        let d = self.x.len();
        let mut z = vec![beta[d]; self.labels.len()];
        for (j, col) in self.x.iter().enumerate() {
            for (zi, &x) in z.iter_mut().zip(col) {
                *zi += beta[j] * x;
            }
        }
        z
    }

    fn objective(&self, beta: &DVector<f64>) -> f64 {
        let z = self.logits(beta);
        let loss: f64 = (0..z.len())
            .map(|i| self.w(i) * logit_loss(z[i], self.labels[i]))
            .sum();
        let d = self.x.len();
        let penalty: f64 = (0..d).map(|j| beta[j] * beta[j]).sum();
        loss / self.mass + 0.5 * self.l2 * penalty
    }

    fn gradient_hessian(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.x.len();
        let z = self.logits(beta);
        let mut grad = DVector::zeros(d + 1);
        let mut hess = DMatrix::zeros(d + 1, d + 1);
        let mut row = vec![0.0; d + 1];
        for i in 0..z.len() {
            let p = sigmoid(z[i]);
            let w = self.w(i) / self.mass;
            let r = w * (p - self.labels[i]);
            let c = w * p * (1.0 - p);
            for j in 0..d {
                row[j] = self.x[j][i];
            }
            row[d] = 1.0;
            for a in 0..=d {
                grad[a] += r * row[a];
                let ca = c * row[a];
                for b in 0..=a {
                    hess[(a, b)] += ca * row[b];
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        for j in 0..d {
            grad[j] += self.l2 * beta[j];
            hess[(j, j)] += self.l2;
        }
        (grad, hess)
    }
}

/// Newton iterations on the mean log loss plus `l2 / 2 * |w|^2` (the
/// intercept is not penalized). Each step is halved until the objective does
/// not increase.
pub fn fit_logistic(data: &Dataset, l2: f64) -> Result<LogisticFit> {
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::InvalidConfig(format!("l2 must be >= 0, got {l2}")));
    }
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let features = data.features();
    let d = features.n_cols();
    let mass: f64 = (0..n).map(|i| data.weight(i)).sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidInput("total weight must be positive".into()));
    }
    let mut means = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    let mut x = Vec::with_capacity(d);
    for col in features.columns() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let scale = if sd > 1e-12 * mean.abs().max(1.0) {
            sd
        } else {
            0.0
        };
        x.push(if scale > 0.0 {
            col.iter().map(|v| (v - mean) / scale).collect()
        } else {
            vec![0.0; n]
        });
        means.push(mean);
        scales.push(scale);
    }
    let problem = Problem {
        x,
        labels: data.labels(),
        weights: data.weights(),
        mass,
        l2,
    };

    let mut beta = DVector::zeros(d + 1);
    let mut current = problem.objective(&beta);
    let mut trace = vec![current];
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let (grad, mut hess) = problem.gradient_hessian(&beta);
        grad_norm = grad.amax();
        if grad_norm < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        // constant columns have an all-zero row; keep the system solvable
        for j in 0..d {
            if scales[j] == 0.0 {
                hess[(j, j)] += 1.0;
            }
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hess.lu().solve(&grad) {
                Some(s) => s,
                None => grad.clone(),
            },
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let candidate = &beta - &step * t;
            let value = problem.objective(&candidate);
            if value <= current {
                beta = candidate;
                current = value;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        trace.push(current);
        if !moved {
            break;
        }
    }
    if !converged {
        let (grad, _) = problem.gradient_hessian(&beta);
        grad_norm = grad.amax();
        converged = grad_norm < GRAD_TOL;
    }
    if !converged {
        log::warn!("logistic regression did not converge: max |gradient| = {grad_norm:e}");
    }
    Ok(LogisticFit {
        model: LogisticModel {
            coefficients: beta.iter().take(d).copied().collect(),
            intercept: beta[d],
            l2,
            means,
            scales,
            feature_names: features.names().to_vec(),
        },
        converged,
        iterations,
        grad_norm,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_features_give_intercept_only() {
        let features = Features::from_rows(&vec![vec![3.0, -1.0]; 8]).unwrap();
        let labels = vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let data = Dataset::new(features, labels, None).unwrap();
        let fit = fit_logistic(&data, 0.0).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.model.coefficients, vec![0.0, 0.0]);
        assert!((fit.model.intercept - (5.0f64 / 3.0).ln()).abs() < 1e-9);
        let p = fit.model.predict(data.features()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.625).abs() < 1e-9));
    }

    #[test]
    fn separable_data_stays_finite() {
        let features =
            Features::from_rows(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]]).unwrap();
        let data = Dataset::new(features, vec![0.0, 0.0, 1.0, 1.0], None).unwrap();
        let fit = fit_logistic(&data, 0.1).unwrap();
        assert!(fit.converged);
        assert!(fit.model.coefficients[0].is_finite() && fit.model.coefficients[0] > 0.0);
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recovers_generating_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (w, b) = ([1.0, -0.5, 0.25], -0.3);
        let n = 50_000;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let z = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            labels.push(f64::from(rng.random::<f64>() < sigmoid(z)));
            rows.push(x);
        }
        let data = Dataset::new(Features::from_rows(&rows).unwrap(), labels, None).unwrap();
        let fit = fit_logistic(&data, 1e-6).unwrap();
        assert!(fit.converged);
        assert!(fit.objective_trace.windows(2).all(|p| p[1] <= p[0]));
        let (est, intercept) = fit.model.raw_coefficients();
        for (e, t) in est.iter().zip(w) {
            assert!((e - t).abs() < 0.05, "{est:?}");
        }
        assert!((intercept - b).abs() < 0.05);
    }
}
