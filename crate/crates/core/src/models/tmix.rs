//! Mixture of skewed bivariate Student-t densities.
//!
//! Skew uses a two-piece scale construction: with `z = theta - location`,
//! coordinate `i` is divided by `kappa_i = 1 + skew_i` when `z_i > 0` and
//! left alone otherwise, and the resulting `z'` is fed to an ordinary
//! bivariate t. The normalizer follows from the orthant probabilities of an
//! elliptical law, `P(z_1 > 0, z_2 > 0) = 1/4 + asin(rho) / (2 pi)`.
//! The density is continuous but its derivatives jump across the lines
//! `z_i = 0` (except at the location itself).

use serde::{Deserialize, Serialize};

use super::gaussian::mix_evaluations;
use crate::error::{Error, Result};
use crate::model::{Derivatives, Evaluation, LogJointModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TComponent {
    pub location: [f64; 2],
    /// Positive definite scale matrix.
    pub scale: [[f64; 2]; 2],
    pub dof: f64,
    /// Positive-side scale multiplier minus one, per axis; must exceed -1.
    #[serde(default)]
    pub skew: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TMixtureSpec {
    pub components: Vec<TComponent>,
    pub weights: Vec<f64>,
}

impl TMixtureSpec {
    /// The reference two-mode fixture: locations (-2, -1) and (2, 1), five
    /// degrees of freedom, opposite correlations, scale doubled along the
    /// positive first axis, equal weights.
    pub fn canonical() -> Self {
        Self {
            components: vec![
                TComponent { location: [-2.0, -1.0], scale: [[1.0, 0.6], [0.6, 1.0]], dof: 5.0, skew: [1.0, 0.0] },
                TComponent { location: [2.0, 1.0], scale: [[1.0, -0.4], [-0.4, 1.0]], dof: 5.0, skew: [1.0, 0.0] },
            ],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.components.len() != self.weights.len() {
            return Err(Error::Config("t mixture needs one weight per component".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("t mixture weights must be positive and sum to 1".into()));
        }
        for (k, c) in self.components.iter().enumerate() {
            let [[a, b], [b2, d]] = c.scale;
            if (b - b2).abs() > 1e-12 || !(a > 0.0) || !(a * d - b * b > 0.0) {
                return Err(Error::Config(format!("t component {k}: scale matrix is not symmetric positive definite")));
            }
            if !(c.dof > 0.0) {
                return Err(Error::Config(format!("t component {k}: degrees of freedom must be positive")));
            }
            if c.skew.iter().any(|s| !(*s > -1.0)) {
                return Err(Error::Config(format!("t component {k}: skew must exceed -1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Prepared {
    location: [f64; 2],
    precision: [[f64; 2]; 2],
    kappa: [f64; 2],
    dof: f64,
    log_norm: f64,
}

impl Prepared {
    fn new(c: &TComponent) -> Self {
        let [[a, b], [_, d]] = c.scale;
        let det = a * d - b * b;
        let precision = [[d / det, -b / det], [-b / det, a / det]];
        let kappa = [1.0 + c.skew[0], 1.0 + c.skew[1]];
        let rho = b / (a * d).sqrt();
        let same = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        let opposite = 0.5 - same;
        // Orthants (+,+), (-,-), (+,-), (-,+).
        let z = kappa[0] * kappa[1] * same + same + kappa[0] * opposite + kappa[1] * opposite;
        let log_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - z.ln();
        Self { location: c.location, precision, kappa, dof: c.dof, log_norm }
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let mut zp = [0.0; 2];
        let mut inv_k = [1.0; 2];
        for i in 0..2 {
            let z = theta[i] - self.location[i];
            if z > 0.0 {
                inv_k[i] = 1.0 / self.kappa[i];
            }
            zp[i] = z * inv_k[i];
        }
        let p = &self.precision;
        let v = [p[0][0] * zp[0] + p[0][1] * zp[1], p[1][0] * zp[0] + p[1][1] * zp[1]];
        let q = zp[0] * v[0] + zp[1] * v[1];
        let alpha = 0.5 * (self.dof + 2.0);
        let value = self.log_norm - alpha * (q / self.dof).ln_1p();
        if order == Derivatives::ValueOnly {
            return Evaluation::value(value);
        }
        let denom = self.dof + q;
        let dq = [2.0 * v[0] * inv_k[0], 2.0 * v[1] * inv_k[1]];
        let gradient = vec![-alpha * dq[0] / denom, -alpha * dq[1] / denom];
        let hessian_diag = (order >= Derivatives::HessianDiag).then(|| {
            (0..2)
                .map(|i| {
                    let d2q = 2.0 * p[i][i] * inv_k[i] * inv_k[i];
                    alpha * dq[i] * dq[i] / (denom * denom) - alpha * d2q / denom
                })
                .collect()
        });
        Evaluation { value, gradient: Some(gradient), hessian_diag }
    }
}

#[derive(Debug, Clone)]
pub struct TMixtureTarget {
    spec: TMixtureSpec,
    prepared: Vec<Prepared>,
    log_weights: Vec<f64>,
}

pub fn t_mixture_target(spec: TMixtureSpec) -> Result<TMixtureTarget> {
    spec.validate()?;
    let prepared = spec.components.iter().map(Prepared::new).collect();
    let log_weights = spec.weights.iter().map(|w| w.ln()).collect();
    Ok(TMixtureTarget { spec, prepared, log_weights })
}

impl TMixtureTarget {
    pub fn spec(&self) -> &TMixtureSpec {
        &self.spec
    }
}

impl LogJointModel for TMixtureTarget {
    fn dim(&self) -> usize {
        2
    }

    fn capability(&self) -> Derivatives {
        Derivatives::HessianDiag
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let evals: Vec<Evaluation> = self.prepared.iter().map(|c| c.eval(theta, order)).collect();
        let logs: Vec<f64> = evals.iter().zip(&self.log_weights).map(|(e, w)| e.value + w).collect();
        mix_evaluations(&logs, &evals, order, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_log_density(x: &[f64], loc: [f64; 2], s: [[f64; 2]; 2]) -> f64 {
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let z = [x[0] - loc[0], x[1] - loc[1]];
        let q = (s[1][1] * z[0] * z[0] - 2.0 * s[0][1] * z[0] * z[1] + s[0][0] * z[1] * z[1]) / det;
        -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q
    }

    #[test]
    fn large_dof_approaches_gaussian() {
        let loc = [0.5, -1.0];
        let scale = [[1.5, 0.4], [0.4, 0.8]];
        let spec = TMixtureSpec {
            components: vec![TComponent { location: loc, scale, dof: 1e6, skew: [0.0, 0.0] }],
            weights: vec![1.0],
        };
        let t = t_mixture_target(spec).unwrap();
        for i in 0..10 {
            let x = [loc[0] + 0.3 * i as f64 - 1.2, loc[1] - 0.2 * i as f64 + 0.7];
            let d = (t.log_joint(&x) - gaussian_log_density(&x, loc, scale)).abs();
            assert!(d < 1e-4, "{x:?}: {d}");
        }
    }

    #[test]
    fn mirror_symmetric_spec_is_even() {
        let c = |l: [f64; 2]| TComponent { location: l, scale: [[1.0, 0.3], [0.3, 2.0]], dof: 4.0, skew: [0.0, 0.0] };
        let spec = TMixtureSpec { components: vec![c([1.0, 2.0]), c([-1.0, -2.0])], weights: vec![0.5, 0.5] };
        let t = t_mixture_target(spec).unwrap();
        for x in [[0.3, 0.1], [2.0, -1.0], [-4.0, 5.0]] {
            assert!((t.log_joint(&x) - t.log_joint(&[-x[0], -x[1]])).abs() < 1e-13);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = TMixtureSpec::canonical();
        s.weights = vec![0.7, 0.7];
        assert!(t_mixture_target(s).is_err());
        let mut s = TMixtureSpec::canonical();
        s.components[0].scale = [[1.0, 2.0], [2.0, 1.0]];
        assert!(t_mixture_target(s).is_err());
        let mut s = TMixtureSpec::canonical();
        s.components[1].dof = 0.0;
        assert!(t_mixture_target(s).is_err());
    }
}
