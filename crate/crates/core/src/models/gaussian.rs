use crate::error::{Error, Result};
use crate::math::{log_sum_exp, LN_2PI};
use crate::model::{Derivatives, Evaluation, LogJointModel};

/// Normalized diagonal Gaussian log density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

pub fn gaussian_target(mean: Vec<f64>, variance_diag: Vec<f64>) -> Result<GaussianTarget> {
    GaussianTarget::new(mean, variance_diag)
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            return Err(Error::Config("gaussian target needs matching non-empty mean and variance".into()));
        }
        if variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("gaussian target variances must be positive".into()));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], variance: vec![1.0; dim] }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }
}

impl LogJointModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn capability(&self) -> Derivatives {
        Derivatives::HessianDiag
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let mut value = 0.0;
        for ((x, m), v) in theta.iter().zip(&self.mean).zip(&self.variance) {
            value -= 0.5 * (LN_2PI + v.ln() + (x - m) * (x - m) / v);
        }
        let gradient = (order >= Derivatives::Gradient)
            .then(|| theta.iter().zip(&self.mean).zip(&self.variance).map(|((x, m), v)| -(x - m) / v).collect());
        let hessian_diag = (order >= Derivatives::HessianDiag).then(|| self.variance.iter().map(|v| -1.0 / v).collect());
        Evaluation { value, gradient, hessian_diag }
    }
}

/// Weighted mixture of diagonal Gaussians, e.g. a bimodal 1-D target.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureTarget {
    log_weights: Vec<f64>,
    components: Vec<GaussianTarget>,
}

impl GaussianMixtureTarget {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianTarget>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Config("mixture target needs one weight per component".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("mixture target weights must be positive".into()));
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::Config("mixture target components differ in dimension".into()));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self { log_weights: weights.iter().map(|w| (w / total).ln()).collect(), components })
    }

    /// `(1/2) N(-3, 0.5^2) + (1/2) N(3, 0.5^2)` on the real line.
    pub fn symmetric_bimodal() -> Self {
        let c = |m: f64| GaussianTarget::new(vec![m], vec![0.25]).unwrap();
        Self::new(vec![0.5, 0.5], vec![c(-3.0), c(3.0)]).unwrap()
    }
}

impl LogJointModel for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn capability(&self) -> Derivatives {
        Derivatives::HessianDiag
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let evals: Vec<Evaluation> = self.components.iter().map(|c| c.eval(theta, order)).collect();
        let logs: Vec<f64> = evals.iter().zip(&self.log_weights).map(|(e, w)| e.value + w).collect();
        mix_evaluations(&logs, &evals, order, theta.len())
    }
}

/// Combines component evaluations of `log sum_k exp(l_k)` where `l_k` are
/// the (weighted) component log densities.
pub(crate) fn mix_evaluations(logs: &[f64], evals: &[Evaluation], order: Derivatives, dim: usize) -> Evaluation {
    let value = log_sum_exp(logs);
    if order == Derivatives::ValueOnly {
        return Evaluation::value(value);
    }
    let resp: Vec<f64> = logs.iter().map(|l| (l - value).exp()).collect();
    let mut grad = vec![0.0; dim];
    for (r, e) in resp.iter().zip(evals) {
        for (g, gi) in grad.iter_mut().zip(e.gradient.as_ref().unwrap()) {
            *g += r * gi;
        }
    }
    let hessian_diag = (order >= Derivatives::HessianDiag).then(|| {
        let mut h = vec![0.0; dim];
        for (r, e) in resp.iter().zip(evals) {
            let g = e.gradient.as_ref().unwrap();
            let hd = e.hessian_diag.as_ref().unwrap();
            for i in 0..dim {
                h[i] += r * (hd[i] + g[i] * g[i]);
            }
        }
        for i in 0..dim {
            h[i] -= grad[i] * grad[i];
        }
        h
    });
    Evaluation { value, gradient: Some(grad), hessian_diag }
}

/// `f = 0` on `R^D`.
#[derive(Debug, Clone, Copy)]
pub struct FlatTarget {
    dim: usize,
}

impl FlatTarget {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LogJointModel for FlatTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn capability(&self) -> Derivatives {
        Derivatives::HessianDiag
    }

    fn eval(&self, _theta: &[f64], order: Derivatives) -> Evaluation {
        Evaluation {
            value: 0.0,
            gradient: (order >= Derivatives::Gradient).then(|| vec![0.0; self.dim]),
            hessian_diag: (order >= Derivatives::HessianDiag).then(|| vec![0.0; self.dim]),
        }
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VecFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A model assembled from closures.
pub struct FnModel {
    dim: usize,
    value: ValueFn,
    gradient: Option<VecFn>,
    hessian_diag: Option<VecFn>,
}

impl FnModel {
    pub fn value_only(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, value: Box::new(value), gradient: None, hessian_diag: None }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_hessian_diag(mut self, h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.hessian_diag = Some(Box::new(h));
        self
    }
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel").field("dim", &self.dim).field("capability", &self.capability()).finish()
    }
}

impl LogJointModel for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn capability(&self) -> Derivatives {
        match (&self.gradient, &self.hessian_diag) {
            (Some(_), Some(_)) => Derivatives::HessianDiag,
            (Some(_), None) => Derivatives::Gradient,
            _ => Derivatives::ValueOnly,
        }
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let gradient = if order >= Derivatives::Gradient { self.gradient.as_ref().map(|g| g(theta)) } else { None };
        let hessian_diag = match (&self.gradient, &self.hessian_diag) {
            (Some(_), Some(h)) if order >= Derivatives::HessianDiag => Some(h(theta)),
            _ => None,
        };
        Evaluation { value: (self.value)(theta), gradient, hessian_diag }
    }
}
