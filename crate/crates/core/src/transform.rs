//! Coordinate-wise maps from unconstrained space onto bounded parameters.
//!
//! Engines always work on `R^D`. A model defined on a constrained space is
//! wrapped in a [`TransformedModel`], whose log joint picks up the
//! log-Jacobian of the map so that densities stay correct.
//!
//! The `LogPositive` and `Logit` maps clamp the unconstrained input to
//! `[-700, 700]` before exponentiating; beyond the clamp the returned
//! derivatives are those at the clamp boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sigmoid, sigmoid};
use crate::model::{Derivatives, Evaluation, LogJointModel, ParameterVector};

/// Largest unconstrained magnitude fed to `exp`.
pub const EXP_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `theta = exp(u)`, for parameters on `(0, inf)`.
    LogPositive,
    /// `theta = sigmoid(u)`, for parameters on `(0, 1)`.
    Logit,
}

/// Values and first two derivatives at one coordinate, of both the map
/// `t(u)` and its log-derivative `log t'(u)`.
#[derive(Debug, Clone, Copy)]
struct Local {
    value: f64,
    d1: f64,
    d2: f64,
    log_jac: f64,
    log_jac_d1: f64,
    log_jac_d2: f64,
}

impl Transform {
    pub fn forward(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::LogPositive => u.clamp(-EXP_CLAMP, EXP_CLAMP).exp(),
            Transform::Logit => sigmoid(u.clamp(-EXP_CLAMP, EXP_CLAMP)),
        }
    }

    pub fn inverse(self, theta: f64) -> f64 {
        match self {
            Transform::Identity => theta,
            Transform::LogPositive => theta.ln(),
            Transform::Logit => theta.ln() - (-theta).ln_1p(),
        }
    }

    /// `log |dt/du|`.
    pub fn log_jacobian(self, u: f64) -> f64 {
        self.local(u).log_jac
    }

    fn local(self, u: f64) -> Local {
        match self {
            Transform::Identity => Local { value: u, d1: 1.0, d2: 0.0, log_jac: 0.0, log_jac_d1: 0.0, log_jac_d2: 0.0 },
            Transform::LogPositive => {
                let e = u.clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                Local { value: e, d1: e, d2: e, log_jac: u.clamp(-EXP_CLAMP, EXP_CLAMP), log_jac_d1: 1.0, log_jac_d2: 0.0 }
            }
            Transform::Logit => {
                let u = u.clamp(-EXP_CLAMP, EXP_CLAMP);
                let s = sigmoid(u);
                let sc = sigmoid(-u);
                let v = s * sc;
                Local {
                    value: s,
                    d1: v,
                    d2: v * (sc - s),
                    log_jac: log_sigmoid(u) + log_sigmoid(-u),
                    log_jac_d1: sc - s,
                    log_jac_d2: -2.0 * v,
                }
            }
        }
    }
}

/// One [`Transform`] per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformSpec(Vec<Transform>);

impl TransformSpec {
    pub fn new(tags: Vec<Transform>) -> Self {
        Self(tags)
    }

    pub fn identity(dim: usize) -> Self {
        Self(vec![Transform::Identity; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tags(&self) -> &[Transform] {
        &self.0
    }

    pub fn forward(&self, u: &[f64]) -> Vec<f64> {
        self.0.iter().zip(u).map(|(t, &x)| t.forward(x)).collect()
    }

    pub fn inverse(&self, theta: &[f64]) -> Vec<f64> {
        self.0.iter().zip(theta).map(|(t, &x)| t.inverse(x)).collect()
    }

    pub fn log_jacobian(&self, u: &[f64]) -> f64 {
        self.0.iter().zip(u).map(|(t, &x)| t.log_jacobian(x)).sum()
    }
}

/// Coordinate-wise image of `u` under `spec`.
pub fn apply_transform(spec: &TransformSpec, u: &ParameterVector) -> Result<ParameterVector> {
    if spec.len() != u.len() {
        return Err(Error::Config(format!("transform spec has {} tags but vector has {} entries", spec.len(), u.len())));
    }
    ParameterVector::new(spec.forward(u))
}

/// `log |det J(u)|` of the coordinate-wise map.
pub fn log_jacobian(spec: &TransformSpec, u: &ParameterVector) -> f64 {
    spec.log_jacobian(u)
}

/// A constrained-space model viewed on unconstrained space.
///
/// `f(u) = inner.f(t(u)) + log|J(u)|`, with gradient and Hessian diagonal
/// propagated through the chain rule. Because the map is coordinate-wise the
/// Hessian diagonal in `u` only needs the inner Hessian diagonal:
/// `h_u = h_theta t'^2 + g_theta t'' + (log t')''`.
#[derive(Debug, Clone)]
pub struct TransformedModel<M> {
    inner: M,
    spec: TransformSpec,
}

pub fn wrap_transformed<M: LogJointModel>(inner: M, spec: TransformSpec) -> Result<TransformedModel<M>> {
    TransformedModel::new(inner, spec)
}

impl<M: LogJointModel> TransformedModel<M> {
    pub fn new(inner: M, spec: TransformSpec) -> Result<Self> {
        if spec.len() != inner.dim() {
            return Err(Error::Config(format!(
                "transform spec has {} tags but the model has dimension {}",
                spec.len(),
                inner.dim()
            )));
        }
        Ok(Self { inner, spec })
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    /// Maps an unconstrained point to the inner model's parameter space.
    pub fn constrain(&self, u: &[f64]) -> Vec<f64> {
        self.spec.forward(u)
    }

    pub fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        self.spec.inverse(theta)
    }
}

impl<M: LogJointModel> LogJointModel for TransformedModel<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn capability(&self) -> Derivatives {
        self.inner.capability()
    }

    fn eval(&self, u: &[f64], order: Derivatives) -> Evaluation {
        let locals: Vec<Local> = self.spec.0.iter().zip(u).map(|(t, &x)| t.local(x)).collect();
        let theta: Vec<f64> = locals.iter().map(|l| l.value).collect();
        let log_jac: f64 = locals.iter().map(|l| l.log_jac).sum();
        let inner = self.inner.eval(&theta, order);

        let gradient = inner.gradient.as_ref().map(|g| {
            g.iter().zip(&locals).map(|(gi, l)| gi * l.d1 + l.log_jac_d1).collect::<Vec<_>>()
        });
        let hessian_diag = match (&inner.hessian_diag, &inner.gradient) {
            (Some(h), Some(g)) => Some(
                h.iter()
                    .zip(g)
                    .zip(&locals)
                    .map(|((hi, gi), l)| hi * l.d1 * l.d1 + gi * l.d2 + l.log_jac_d2)
                    .collect::<Vec<_>>(),
            ),
            _ => None,
        };
        Evaluation { value: inner.value + log_jac, gradient, hessian_diag }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParameterVector {
        ParameterVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn forward_examples() {
        let id = TransformSpec::new(vec![Transform::Identity]);
        assert_eq!(apply_transform(&id, &pv(&[1.5])).unwrap().as_slice(), &[1.5]);
        let lp = TransformSpec::new(vec![Transform::LogPositive]);
        assert_eq!(apply_transform(&lp, &pv(&[0.0])).unwrap().as_slice(), &[1.0]);
        let lg = TransformSpec::new(vec![Transform::Logit]);
        assert_eq!(apply_transform(&lg, &pv(&[0.0])).unwrap().as_slice(), &[0.5]);
    }

    #[test]
    fn log_jacobian_examples() {
        assert_eq!(log_jacobian(&TransformSpec::identity(3), &pv(&[1.0, -2.0, 3.0])), 0.0);
        let lp = TransformSpec::new(vec![Transform::LogPositive]);
        assert_eq!(log_jacobian(&lp, &pv(&[2.0])), 2.0);
        let lg = TransformSpec::new(vec![Transform::Logit]);
        assert!((log_jacobian(&lg, &pv(&[0.0])) - 0.25f64.ln()).abs() < 1e-15);
        assert!((log_jacobian(&lg, &pv(&[0.0])) + 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn clamp_keeps_images_in_range() {
        let lg = Transform::Logit;
        assert!(lg.forward(-1e6) > 0.0 && lg.forward(-1e6) < 1.0);
        assert!(lg.forward(30.0) <= 1.0);
        let lp = Transform::LogPositive;
        assert!(lp.forward(1e6).is_finite());
        assert!(lp.forward(-1e6) > 0.0);
        assert!(lp.log_jacobian(1e6).is_finite());
    }

    #[test]
    fn inverse_round_trips() {
        for t in [Transform::Identity, Transform::LogPositive, Transform::Logit] {
            for u in [-3.0, -0.5, 0.0, 0.7, 4.0] {
                assert!((t.inverse(t.forward(u)) - u).abs() < 1e-12, "{t:?} {u}");
            }
        }
    }

    #[test]
    fn wrap_rejects_dimension_mismatch() {
        let m = crate::models::gaussian_target(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(wrap_transformed(m, TransformSpec::identity(3)), Err(Error::Config(_))));
    }
}
