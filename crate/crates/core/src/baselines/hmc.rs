use log::debug;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, stream_rng};
use crate::model::{require, value_and_gradient, Derivatives, LogJointModel, ParameterVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub num_samples: usize,
    pub keep_last: usize,
    pub seed: u64,
    /// Defaults to the origin.
    pub initial_state: Option<Vec<f64>>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self { step_size: 0.05, leapfrog_steps: 20, num_samples: 5000, keep_last: 200, seed: 0, initial_state: None }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::Config("leapfrog_steps must be at least 1".into()));
        }
        if self.num_samples == 0 || self.keep_last == 0 || self.keep_last > self.num_samples {
            return Err(Error::Config(format!(
                "need 1 <= keep_last <= num_samples, got keep_last = {} and num_samples = {}",
                self.keep_last, self.num_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub samples: Vec<ParameterVector>,
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub proposals: usize,
}

impl PosteriorSamples {
    pub fn mean(&self) -> Vec<f64> {
        let d = self.samples.first().map_or(0, |s| s.len());
        let mut m = vec![0.0; d];
        for s in &self.samples {
            for (mi, si) in m.iter_mut().zip(s.iter()) {
                *mi += si;
            }
        }
        let n = self.samples.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// `-f(q) + |p|^2 / 2`.
pub fn hamiltonian(model: &impl LogJointModel, q: &[f64], p: &[f64]) -> f64 {
    -model.log_joint(q) + 0.5 * dot(p, p)
}

/// Runs `steps` leapfrog steps in place. Returns `false` if the trajectory
/// left the region where `f` and its gradient are finite.
pub fn leapfrog(model: &impl LogJointModel, q: &mut [f64], p: &mut [f64], step: f64, steps: usize) -> bool {
    let (_, mut g) = value_and_gradient(model, q);
    for _ in 0..steps {
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step * gi;
        }
        for (qi, pi) in q.iter_mut().zip(p.iter()) {
            *qi += step * pi;
        }
        let (f, g_new) = value_and_gradient(model, q);
        g = g_new;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step * gi;
        }
    }
    true
}

/// Leapfrog HMC with identity mass matrix and Metropolis correction.
pub fn hmc_sample(model: &impl LogJointModel, config: &HmcConfig) -> Result<PosteriorSamples> {
    require(model, Derivatives::Gradient, "hmc")?;
    config.validate()?;
    let d = model.dim();
    let mut q = match &config.initial_state {
        Some(x) if x.len() != d => {
            return Err(Error::Config(format!("initial_state has length {}, model has dimension {d}", x.len())))
        }
        Some(x) => x.clone(),
        None => vec![0.0; d],
    };
    let mut f = model.log_joint(&q);
    if !f.is_finite() {
        return Err(Error::Input(format!("log joint is {f} at the initial state")));
    }
    let mut rng = stream_rng(config.seed, 0);
    let mut kept = Vec::with_capacity(config.keep_last);
    let mut accepted = 0;
    let mut q_new = vec![0.0; d];
    let mut p = vec![0.0; d];
    for i in 0..config.num_samples {
        p.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let h0 = -f + 0.5 * dot(&p, &p);
        q_new.copy_from_slice(&q);
        let ok = leapfrog(model, &mut q_new, &mut p, config.step_size, config.leapfrog_steps);
        let u: f64 = rng.random();
        if ok {
            let f_new = model.log_joint(&q_new);
            let h1 = -f_new + 0.5 * dot(&p, &p);
            if h1.is_finite() && u.ln() < h0 - h1 {
                std::mem::swap(&mut q, &mut q_new);
                f = f_new;
                accepted += 1;
            }
        }
        if i + config.keep_last >= config.num_samples {
            kept.push(ParameterVector::new(q.clone())?);
        }
    }
    let acceptance_rate = accepted as f64 / config.num_samples as f64;
    debug!("HMC acceptance rate {acceptance_rate:.3}");
    Ok(PosteriorSamples { samples: kept, acceptance_rate, accepted, proposals: config.num_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gaussian_target, FnModel};

    #[test]
    fn standard_normal_moments() {
        let m = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        let cfg = HmcConfig { step_size: 0.1, leapfrog_steps: 20, ..HmcConfig::default() };
        let s = hmc_sample(&m, &cfg).unwrap();
        assert_eq!(s.samples.len(), 200);
        let mean = s.mean()[0];
        let var = s.samples.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / 199.0;
        assert!(mean.abs() < 0.15, "{mean}");
        assert!((0.6..=1.5).contains(&var), "{var}");
    }

    #[test]
    fn huge_step_rarely_accepts() {
        let m = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        let cfg = HmcConfig { step_size: 10.0, num_samples: 1000, ..HmcConfig::default() };
        let s = hmc_sample(&m, &cfg).unwrap();
        assert!(s.acceptance_rate < 0.1, "{}", s.acceptance_rate);
    }

    #[test]
    fn invalid_configs() {
        let m = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        for cfg in [
            HmcConfig { leapfrog_steps: 0, ..HmcConfig::default() },
            HmcConfig { step_size: 0.0, ..HmcConfig::default() },
            HmcConfig { keep_last: 6000, ..HmcConfig::default() },
            HmcConfig { initial_state: Some(vec![0.0, 0.0]), ..HmcConfig::default() },
        ] {
            assert!(matches!(hmc_sample(&m, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn non_finite_start_is_input_error() {
        let m = FnModel::value_only(1, |t: &[f64]| if t[0] > 0.0 { -t[0] } else { f64::NEG_INFINITY })
            .with_gradient(|_: &[f64]| vec![-1.0]);
        assert!(matches!(hmc_sample(&m, &HmcConfig::default()), Err(Error::Input(_))));
    }

    #[test]
    fn deterministic() {
        let m = gaussian_target(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let cfg = HmcConfig { num_samples: 300, keep_last: 50, seed: 9, ..HmcConfig::default() };
        assert_eq!(hmc_sample(&m, &cfg).unwrap(), hmc_sample(&m, &cfg).unwrap());
    }
}
