//! The contract every inference engine consumes.

use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in unconstrained parameter space. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("parameter entry {i} is not finite ({})", values[i])));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ParameterVector> for Vec<f64> {
    fn from(p: ParameterVector) -> Self {
        p.0
    }
}

/// Highest derivative order a model can supply, or that a caller requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Derivatives {
    ValueOnly,
    Gradient,
    HessianDiag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `log p(y, theta)` in nats; `-inf` outside the support.
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub hessian_diag: Option<Vec<f64>>,
}

impl Evaluation {
    pub fn value(value: f64) -> Self {
        Self { value, gradient: None, hessian_diag: None }
    }
}

/// A log joint density `f(theta) = log p(y, theta)` over `R^D`.
///
/// `eval` must be deterministic and reentrant. Implementations fill in the
/// gradient when `order >= Gradient` and the Hessian diagonal when
/// `order >= HessianDiag`, as far as [`capability`](Self::capability) allows.
pub trait LogJointModel: Send + Sync {
    fn dim(&self) -> usize;

    fn capability(&self) -> Derivatives;

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation;

    fn log_joint(&self, theta: &[f64]) -> f64 {
        self.eval(theta, Derivatives::ValueOnly).value
    }
}

impl<M: LogJointModel + ?Sized> LogJointModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn capability(&self) -> Derivatives {
        (**self).capability()
    }
    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        (**self).eval(theta, order)
    }
}

impl<M: LogJointModel + ?Sized> LogJointModel for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn capability(&self) -> Derivatives {
        (**self).capability()
    }
    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        (**self).eval(theta, order)
    }
}

impl<M: LogJointModel + ?Sized> LogJointModel for Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn capability(&self) -> Derivatives {
        (**self).capability()
    }
    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        (**self).eval(theta, order)
    }
}

/// Fails with a capability error unless `model` supplies `needed`.
pub fn require(model: &impl LogJointModel, needed: Derivatives, engine: &'static str) -> Result<()> {
    if model.capability() >= needed {
        return Ok(());
    }
    let needed = match needed {
        Derivatives::ValueOnly => "values",
        Derivatives::Gradient => "a gradient",
        Derivatives::HessianDiag => "a Hessian diagonal",
    };
    Err(Error::Capability { needed, engine })
}

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Config(format!("{what}: dimension mismatch (expected {expected}, got {got})")));
    }
    Ok(())
}

/// Value and gradient of `model` at `theta`.
pub(crate) fn value_and_gradient(model: &impl LogJointModel, theta: &[f64]) -> (f64, Vec<f64>) {
    let e = model.eval(theta, Derivatives::Gradient);
    let g = e.gradient.unwrap_or_else(|| vec![f64::NAN; theta.len()]);
    (e.value, g)
}
