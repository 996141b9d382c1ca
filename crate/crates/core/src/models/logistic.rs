//! Hierarchical Bayesian logistic regression.
//!
//! ```text
//! alpha        ~ Gamma(a, b)            (shape a, inverse scale b)
//! w_k | alpha  ~ N(0, 1 / alpha)
//! p(c_t = 1)   = sigmoid(w . x_t),      c_t in {-1, +1}
//! ```
//!
//! Engines see the unconstrained vector `(w_1..w_K, log alpha)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::data::{DatasetTable, Targets};
use crate::error::{Error, Result};
use crate::math::{dot, log_sigmoid, log_sum_exp, sigmoid, stream_rng, LN_2PI};
use crate::model::{Derivatives, Evaluation, LogJointModel, ParameterVector};
use crate::transform::{Transform, TransformSpec, TransformedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModelSpec {
    pub a: f64,
    pub b: f64,
    pub data: DatasetTable,
}

impl LogisticModelSpec {
    pub fn new(data: DatasetTable) -> Self {
        Self { a: 1.0, b: 0.01, data }
    }
}

/// Log joint on the constrained space `(w, alpha)`, `alpha > 0`.
#[derive(Debug, Clone)]
pub struct LogisticJoint {
    a: f64,
    b: f64,
    k: usize,
    /// Rows pre-multiplied by their label, `c_t x_t`.
    signed_rows: Vec<Vec<f64>>,
    log_prior_const: f64,
}

pub type LogisticModel = TransformedModel<LogisticJoint>;

impl LogisticJoint {
    pub fn new(spec: &LogisticModelSpec) -> Result<Self> {
        if !(spec.a > 0.0 && spec.b > 0.0) {
            return Err(Error::Config("logistic hyperparameters a and b must be positive".into()));
        }
        let labels = spec.data.labels().ok_or_else(|| Error::Config("logistic model needs labelled data".into()))?;
        let signed_rows = spec.data.covariates.iter().zip(labels).map(|(x, c)| x.iter().map(|v| c * v).collect()).collect();
        let k = spec.data.num_covariates();
        Ok(Self { a: spec.a, b: spec.b, k, signed_rows, log_prior_const: spec.a * spec.b.ln() - ln_gamma(spec.a) })
    }

    /// Prior-only model with `k` weights and no observations.
    pub fn prior_only(k: usize, a: f64, b: f64) -> Self {
        Self { a, b, k, signed_rows: Vec::new(), log_prior_const: a * b.ln() - ln_gamma(a) }
    }

    pub fn num_weights(&self) -> usize {
        self.k
    }
}

impl LogJointModel for LogisticJoint {
    fn dim(&self) -> usize {
        self.k + 1
    }

    fn capability(&self) -> Derivatives {
        Derivatives::HessianDiag
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let k = self.k;
        let (w, alpha) = (&theta[..k], theta[k]);
        if !(alpha > 0.0) {
            return Evaluation {
                value: f64::NEG_INFINITY,
                gradient: (order >= Derivatives::Gradient).then(|| vec![0.0; k + 1]),
                hessian_diag: (order >= Derivatives::HessianDiag).then(|| vec![0.0; k + 1]),
            };
        }
        let kf = k as f64;
        let ww = dot(w, w);
        let ln_alpha = alpha.ln();
        let mut value = self.log_prior_const + (self.a - 1.0) * ln_alpha - self.b * alpha;
        value += 0.5 * kf * (ln_alpha - LN_2PI) - 0.5 * alpha * ww;

        let want_g = order >= Derivatives::Gradient;
        let want_h = order >= Derivatives::HessianDiag;
        let mut g = vec![0.0; k + 1];
        let mut h = vec![0.0; k + 1];
        for row in &self.signed_rows {
            let z = dot(w, row);
            value += log_sigmoid(z);
            if want_g {
                let s = sigmoid(-z);
                for i in 0..k {
                    g[i] += row[i] * s;
                }
                if want_h {
                    let v = s * sigmoid(z);
                    for i in 0..k {
                        h[i] -= row[i] * row[i] * v;
                    }
                }
            }
        }
        if !want_g {
            return Evaluation::value(value);
        }
        for i in 0..k {
            g[i] -= alpha * w[i];
            h[i] -= alpha;
        }
        g[k] = (self.a - 1.0) / alpha - self.b + 0.5 * kf / alpha - 0.5 * ww;
        h[k] = -(self.a - 1.0 + 0.5 * kf) / (alpha * alpha);
        Evaluation { value, gradient: Some(g), hessian_diag: want_h.then_some(h) }
    }
}

/// The model on unconstrained `(w, log alpha)`, including the log-Jacobian.
pub fn logistic_log_joint(spec: &LogisticModelSpec) -> Result<LogisticModel> {
    let joint = LogisticJoint::new(spec)?;
    let k = joint.num_weights();
    let mut tags = vec![Transform::Identity; k];
    tags.push(Transform::LogPositive);
    TransformedModel::new(joint, TransformSpec::new(tags))
}

/// Monte Carlo predictive probability `mean_s sigmoid(w_s . x_new)`. Only
/// the leading `x_new.len()` entries of each sample (the weights) are used.
pub fn logistic_predict(samples: &[ParameterVector], x_new: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("no posterior samples".into()));
    }
    check_sample_width(samples, x_new.len())?;
    let total: f64 = samples.iter().map(|s| sigmoid(dot(&s[..x_new.len()], x_new))).sum();
    Ok(total / samples.len() as f64)
}

fn check_sample_width(samples: &[ParameterVector], k: usize) -> Result<()> {
    if samples.iter().any(|s| s.len() < k) {
        return Err(Error::Config(format!("samples have fewer than {k} weight entries")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictiveEstimator {
    /// Mean over samples of the test-set log-likelihood.
    #[default]
    AverageOfLog,
    /// Per test point, log of the sample-averaged predictive probability.
    LogOfAverage,
}

/// Test-set log-likelihood `sum_t log p(c_t | x_t)` under posterior samples.
pub fn logistic_test_log_likelihood(samples: &[ParameterVector], test: &DatasetTable, estimator: PredictiveEstimator) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("no posterior samples".into()));
    }
    let labels = test.labels().ok_or_else(|| Error::Config("test data has no labels".into()))?;
    let k = test.num_covariates();
    check_sample_width(samples, k)?;
    let s = samples.len() as f64;
    let ll = match estimator {
        PredictiveEstimator::AverageOfLog => {
            samples
                .iter()
                .map(|w| test.covariates.iter().zip(labels).map(|(x, c)| log_sigmoid(c * dot(&w[..k], x))).sum::<f64>())
                .sum::<f64>()
                / s
        }
        PredictiveEstimator::LogOfAverage => test
            .covariates
            .iter()
            .zip(labels)
            .map(|(x, c)| {
                let logs: Vec<f64> = samples.iter().map(|w| log_sigmoid(c * dot(&w[..k], x))).collect();
                log_sum_exp(&logs) - s.ln()
            })
            .sum(),
    };
    Ok(ll)
}

/// Draws `rows` labelled points with standard normal covariates. When
/// `w_true` is `None` the weights are drawn from `N(0, 1 / alpha_true)`.
/// Returns the table and the weights used.
pub fn synth_logistic(seed: u64, rows: usize, k: usize, w_true: Option<&[f64]>, alpha_true: f64) -> Result<(DatasetTable, Vec<f64>)> {
    if rows == 0 || k == 0 {
        return Err(Error::Config("synthetic logistic data needs rows >= 1 and K >= 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let w: Vec<f64> = match w_true {
        Some(w) if w.len() == k => w.to_vec(),
        Some(w) => return Err(Error::Config(format!("w_true has {} entries, expected {k}", w.len()))),
        None => {
            if !(alpha_true > 0.0) {
                return Err(Error::Config("alpha_true must be positive".into()));
            }
            let sd = alpha_true.powf(-0.5);
            (0..k).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        }
    };
    let mut x = Vec::with_capacity(rows);
    let mut c = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let p = sigmoid(dot(&w, &row));
        c.push(if rng.random::<f64>() < p { 1.0 } else { -1.0 });
        x.push(row);
    }
    Ok((DatasetTable::new(x, Targets::Labels(c))?, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> LogisticModelSpec {
        LogisticModelSpec::new(DatasetTable::new(rows, Targets::Labels(labels)).unwrap())
    }

    #[test]
    fn prior_only_optimum() {
        let joint = LogisticJoint::prior_only(1, 1.0, 0.01);
        let spec = TransformSpec::new(vec![Transform::Identity, Transform::LogPositive]);
        let model = TransformedModel::new(joint, spec).unwrap();
        let best = (1..4000)
            .map(|i| 150.0 * (1.0 + (i as f64 - 2000.0) * 1e-4))
            .max_by(|a, b| model.log_joint(&[0.0, a.ln()]).total_cmp(&model.log_joint(&[0.0, b.ln()])))
            .unwrap();
        assert!((best - 150.0).abs() < 0.02, "{best}");
        let g = model.eval(&[0.0, 150f64.ln()], Derivatives::Gradient).gradient.unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn single_point_likelihood_term() {
        let with = LogisticJoint::new(&spec_with(vec![vec![1.0]], vec![1.0])).unwrap();
        let without = LogisticJoint::prior_only(1, 1.0, 0.01);
        let d = with.log_joint(&[0.0, 2.0]) - without.log_joint(&[0.0, 2.0]);
        assert!((d + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sign_flip_invariance() {
        let rows = vec![vec![0.5, -1.0], vec![2.0, 0.3], vec![-0.7, 0.1]];
        let labels = vec![1.0, -1.0, 1.0];
        let flipped_rows = rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let flipped_labels = labels.iter().map(|c| -c).collect();
        let m1 = logistic_log_joint(&spec_with(rows, labels)).unwrap();
        let m2 = logistic_log_joint(&spec_with(flipped_rows, flipped_labels)).unwrap();
        for u in [[0.1, 0.2, 0.0], [-1.0, 3.0, 2.0]] {
            assert_eq!(m1.eval(&u, Derivatives::HessianDiag), m2.eval(&u, Derivatives::HessianDiag));
        }
    }

    #[test]
    fn non_positive_precision_is_outside_support() {
        let joint = LogisticJoint::prior_only(2, 1.0, 0.01);
        assert_eq!(joint.log_joint(&[0.0, 0.0, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn predict_examples() {
        let zeros = vec![ParameterVector::zeros(3); 4];
        assert_eq!(logistic_predict(&zeros, &[1.0, -5.0]).unwrap(), 0.5);
        let one = vec![ParameterVector::new(vec![10.0, 0.0]).unwrap()];
        assert!((logistic_predict(&one, &[1.0]).unwrap() - 0.999_954_6).abs() < 1e-7);
        assert!(logistic_predict(&[], &[1.0]).is_err());
        let extreme = [ParameterVector::new(vec![50.0]).unwrap(), ParameterVector::new(vec![-50.0]).unwrap()];
        let p = logistic_predict(&extreme[..1], &[1.0]).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn average_of_log_never_exceeds_log_of_average() {
        let (data, _) = synth_logistic(3, 40, 2, None, 1.0).unwrap();
        let samples: Vec<ParameterVector> =
            (0..20).map(|i| ParameterVector::new(vec![0.1 * i as f64 - 1.0, 0.5, 0.0]).unwrap()).collect();
        let a = logistic_test_log_likelihood(&samples, &data, PredictiveEstimator::AverageOfLog).unwrap();
        let b = logistic_test_log_likelihood(&samples, &data, PredictiveEstimator::LogOfAverage).unwrap();
        assert!(a <= b + 1e-12);
    }

    #[test]
    fn synthetic_labels_are_balanced_for_zero_weights() {
        let (d, _) = synth_logistic(5, 10_000, 3, Some(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        let pos = d.labels().unwrap().iter().filter(|c| **c > 0.0).count() as f64 / 1e4;
        assert!((pos - 0.5).abs() < 0.02, "{pos}");
        assert_eq!(synth_logistic(5, 50, 3, None, 2.0).unwrap(), synth_logistic(5, 50, 3, None, 2.0).unwrap());
    }
}
