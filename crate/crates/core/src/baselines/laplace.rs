use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::stream_rng;
use crate::model::{require, Derivatives, LogJointModel, ParameterVector};

/// Gaussian with a diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn sample(&self, count: usize, seed: u64) -> Vec<ParameterVector> {
        let mut rng = stream_rng(seed, 0);
        (0..count)
            .map(|_| {
                let v = self
                    .mean
                    .iter()
                    .zip(&self.variances)
                    .map(|(m, s2)| m + s2.sqrt() * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                ParameterVector::new(v).expect("finite draw")
            })
            .collect()
    }
}

/// Diagonal Laplace approximation at `theta_map`: variances `-1 / H_ii`.
pub fn laplace_diagonal(model: &impl LogJointModel, theta_map: &ParameterVector) -> Result<DiagonalGaussian> {
    require(model, Derivatives::HessianDiag, "laplace_diagonal")?;
    if theta_map.len() != model.dim() {
        return Err(Error::Config("MAP point has the wrong dimension".into()));
    }
    let h = model
        .eval(theta_map, Derivatives::HessianDiag)
        .hessian_diag
        .ok_or(Error::Capability { needed: "a Hessian diagonal", engine: "laplace_diagonal" })?;
    let mut variances = Vec::with_capacity(h.len());
    for (i, hi) in h.iter().enumerate() {
        if !(*hi < 0.0) {
            return Err(Error::NotLocalMaximum { coordinate: i, value: *hi });
        }
        variances.push(-1.0 / hi);
    }
    Ok(DiagonalGaussian { mean: theta_map.to_vec(), variances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gaussian_target, FnModel};

    #[test]
    fn examples() {
        let m = gaussian_target(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let l = laplace_diagonal(&m, &ParameterVector::zeros(3)).unwrap();
        assert_eq!(l.variances, vec![1.0; 3]);

        let m = gaussian_target(vec![0.0], vec![4.0]).unwrap();
        let l = laplace_diagonal(&m, &ParameterVector::zeros(1)).unwrap();
        assert_eq!(l.variances, vec![4.0]);

        let saddle = FnModel::value_only(2, |t: &[f64]| t[0] * t[0] - t[1] * t[1])
            .with_gradient(|t: &[f64]| vec![2.0 * t[0], -2.0 * t[1]])
            .with_hessian_diag(|_: &[f64]| vec![2.0, -2.0]);
        let err = laplace_diagonal(&saddle, &ParameterVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::NotLocalMaximum { coordinate: 0, .. }));
        assert!(err.to_string().contains("coordinate 0"));
    }
}
