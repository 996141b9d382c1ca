//! The alternating fitting driver.
//!
//! Each outer iteration maximizes `L1` over one mean at a time (the others
//! held fixed), then maximizes `L2` over all log-bandwidths jointly, and
//! records `L2`. Iteration stops once `|delta L2|` falls below the
//! tolerance.

use std::time::Instant;

use log::{debug, warn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::elbo::{entropy_grad_log_sigma, entropy_grad_mean, evaluate_means, l2_from_parts};
use crate::error::{Error, Result};
use crate::math::stream_rng;
use crate::mixture::MixtureApproximation;
use crate::model::{require, value_and_gradient, Derivatives, LogJointModel};
use crate::optim::{maximize, OptimOptions, OptimStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanUpdate {
    /// One mean at a time, in component order.
    #[default]
    Coordinate,
    /// All means jointly (experimental).
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub seed: u64,
    /// Means start i.i.d. from `N(0, mean_init_scale^2 I)`.
    pub mean_init_scale: f64,
    pub initial_sigma: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { seed: 0, mean_init_scale: 1.0, initial_sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NpvConfig {
    pub num_components: usize,
    /// Outer loop stops when `|delta L2|` drops below this.
    pub tolerance: f64,
    pub max_outer_iterations: usize,
    /// Bandwidths are clamped to `[sigma_min, sigma_max]` (in log space).
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub init: InitConfig,
    pub mean_optim: OptimOptions,
    pub sigma_optim: OptimOptions,
    pub mean_update: MeanUpdate,
    /// Keep every bandwidth at `init.initial_sigma`.
    pub freeze_bandwidths: bool,
}

impl Default for NpvConfig {
    fn default() -> Self {
        Self {
            num_components: 1,
            tolerance: 1e-4,
            max_outer_iterations: 50,
            sigma_min: 1e-6,
            sigma_max: 1e3,
            init: InitConfig::default(),
            mean_optim: OptimOptions::default().with_max_iterations(25),
            sigma_optim: OptimOptions::default().with_max_iterations(50),
            mean_update: MeanUpdate::Coordinate,
            freeze_bandwidths: false,
        }
    }
}

impl NpvConfig {
    pub fn with_components(n: usize) -> Self {
        Self { num_components: n, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_components < 1 {
            return Err(Error::Config("num_components must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::Config("bandwidth bounds must satisfy 0 < sigma_min < sigma_max < inf".into()));
        }
        if !(self.init.initial_sigma > 0.0 && self.init.initial_sigma.is_finite()) {
            return Err(Error::Config("initial_sigma must be positive".into()));
        }
        if !(self.init.mean_init_scale >= 0.0 && self.init.mean_init_scale.is_finite()) {
            return Err(Error::Config("mean_init_scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mixture: MixtureApproximation,
    /// `L2` at initialization followed by its value after each outer iteration.
    pub l2_trace: Vec<f64>,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl FitResult {
    pub fn initial_l2(&self) -> f64 {
        self.l2_trace[0]
    }

    pub fn final_l2(&self) -> f64 {
        *self.l2_trace.last().unwrap()
    }
}

const MAX_REINITIALIZATIONS: usize = 5;

/// Fits the mixture approximation to `model`.
pub fn fit(model: &impl LogJointModel, config: &NpvConfig) -> Result<FitResult> {
    config.validate()?;
    require(model, Derivatives::HessianDiag, "npv fit")?;
    let start = Instant::now();
    let d = model.dim();
    let n = config.num_components;
    let mut rng = stream_rng(config.init.seed, 0);

    let mut attempt = 0;
    let (mut q, initial_l2) = loop {
        let q = initial_mixture(&mut rng, n, d, &config.init)?;
        let l2 = current_l2(&q, model);
        if l2.is_finite() {
            break (q, l2);
        }
        attempt += 1;
        if attempt > MAX_REINITIALIZATIONS {
            return Err(Error::Numerical(format!("L2 is not finite at initialization after {MAX_REINITIALIZATIONS} reinitializations")));
        }
        warn!("L2 not finite at initialization; reinitializing ({attempt}/{MAX_REINITIALIZATIONS})");
    };

    let mut trace = vec![initial_l2];
    let mut converged = false;
    let mut outer = 0;
    let log_bounds = (config.sigma_min.ln(), config.sigma_max.ln());

    while outer < config.max_outer_iterations {
        match config.mean_update {
            MeanUpdate::Coordinate => {
                for m in 0..n {
                    update_mean(&mut q, model, m, &config.mean_optim);
                }
            }
            MeanUpdate::Batch => update_all_means(&mut q, model, &config.mean_optim),
        }
        let l2 = if config.freeze_bandwidths {
            current_l2(&q, model)
        } else {
            update_bandwidths(&mut q, model, log_bounds, &config.sigma_optim)?
        };
        outer += 1;
        let prev = *trace.last().unwrap();
        trace.push(l2);
        debug!("outer iteration {outer}: L2 = {l2}");
        if (l2 - prev).abs() < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(FitResult { mixture: q, l2_trace: trace, converged, outer_iterations: outer, wall_time: start.elapsed().as_secs_f64() })
}

fn initial_mixture(rng: &mut ChaCha8Rng, n: usize, d: usize, init: &InitConfig) -> Result<MixtureApproximation> {
    let means = (0..n)
        .map(|_| (0..d).map(|_| init.mean_init_scale * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    MixtureApproximation::new(means, vec![init.initial_sigma; n])
}

fn current_l2(q: &MixtureApproximation, model: &impl LogJointModel) -> f64 {
    let evals = evaluate_means(q, model, Derivatives::HessianDiag);
    match evals.traces {
        Some(t) => l2_from_parts(&evals.values, &t, q),
        None => f64::NAN,
    }
}

/// Maximizes `L1` over mean `m`; keeps the old mean if the optimizer fails.
fn update_mean(q: &mut MixtureApproximation, model: &impl LogJointModel, m: usize, opts: &OptimOptions) {
    let n = q.num_components() as f64;
    let others: f64 = (0..q.num_components()).filter(|&j| j != m).map(|j| model.log_joint(q.mean(j))).sum();
    let scratch = std::cell::RefCell::new(q.clone());
    let objective = |mu: &[f64]| {
        let mut s = scratch.borrow_mut();
        s.set_mean(m, mu);
        (others + model.log_joint(mu)) / n + s.entropy_lower_bound()
    };
    let gradient = |mu: &[f64]| {
        let mut s = scratch.borrow_mut();
        s.set_mean(m, mu);
        let (_, gf) = value_and_gradient(model, mu);
        let ge = entropy_grad_mean(&s, m);
        gf.iter().zip(&ge).map(|(a, b)| a / n + b).collect()
    };
    let start = q.mean(m).to_vec();
    match maximize(objective, gradient, &start, opts) {
        Ok(r) => {
            if r.status == OptimStatus::LineSearchFailure {
                debug!("mean {m}: line search stalled after {} iterations; keeping best iterate", r.iterations);
            }
            q.set_mean(m, &r.argmax);
        }
        Err(e) => warn!("mean {m}: optimizer failed ({e}); keeping previous mean"),
    }
}

fn update_all_means(q: &mut MixtureApproximation, model: &impl LogJointModel, opts: &OptimOptions) {
    let (nc, d) = (q.num_components(), q.dim());
    let nf = nc as f64;
    let scratch = std::cell::RefCell::new(q.clone());
    let load = |s: &mut MixtureApproximation, x: &[f64]| {
        for j in 0..nc {
            s.set_mean(j, &x[j * d..(j + 1) * d]);
        }
    };
    let objective = |x: &[f64]| {
        let mut s = scratch.borrow_mut();
        load(&mut s, x);
        let fsum: f64 = (0..nc).map(|j| model.log_joint(&x[j * d..(j + 1) * d])).sum();
        fsum / nf + s.entropy_lower_bound()
    };
    let gradient = |x: &[f64]| {
        let mut s = scratch.borrow_mut();
        load(&mut s, x);
        let mut g = Vec::with_capacity(nc * d);
        for j in 0..nc {
            let (_, gf) = value_and_gradient(model, &x[j * d..(j + 1) * d]);
            let ge = entropy_grad_mean(&s, j);
            g.extend(gf.iter().zip(&ge).map(|(a, b)| a / nf + b));
        }
        g
    };
    let start: Vec<f64> = q.means().iter().flatten().copied().collect();
    match maximize(objective, gradient, &start, opts) {
        Ok(r) => load(q, &r.argmax),
        Err(e) => warn!("batch mean update failed ({e}); keeping previous means"),
    }
}

/// Maximizes `L2` over the clamped log-bandwidths and returns the new `L2`.
fn update_bandwidths(
    q: &mut MixtureApproximation,
    model: &impl LogJointModel,
    (lo, hi): (f64, f64),
    opts: &OptimOptions,
) -> Result<f64> {
    let evals = evaluate_means(q, model, Derivatives::HessianDiag);
    let values = evals.values;
    let traces = evals.traces.ok_or(Error::Capability { needed: "a Hessian diagonal", engine: "npv fit" })?;
    let n = q.num_components() as f64;
    for (m, t) in traces.iter().enumerate() {
        if *t > 0.0 {
            debug!("component {m}: positive Hessian trace {t}; L2 grows with its bandwidth");
        }
    }
    let clamp = |x: &[f64]| x.iter().map(|v| v.clamp(lo, hi)).collect::<Vec<f64>>();
    let scratch = std::cell::RefCell::new(q.clone());
    let objective = |x: &[f64]| {
        let mut s = scratch.borrow_mut();
        s.set_sigmas_from_log(&clamp(x));
        l2_from_parts(&values, &traces, &s)
    };
    let gradient = |x: &[f64]| {
        let mut s = scratch.borrow_mut();
        s.set_sigmas_from_log(&clamp(x));
        let ge = entropy_grad_log_sigma(&s);
        ge.iter()
            .zip(&traces)
            .zip(s.sigmas())
            .zip(x)
            .map(|(((g, t), sig), xi)| if *xi < lo || *xi > hi { 0.0 } else { g + sig * sig * t / n })
            .collect()
    };
    let start = q.log_sigmas();
    let before = objective(&start);
    match maximize(objective, gradient, &start, opts) {
        Ok(r) => {
            let clamped = clamp(&r.argmax);
            if clamped.iter().any(|v| *v >= hi) {
                warn!("bandwidth clamped at the upper bound {:.3e}", hi.exp());
            }
            q.set_sigmas_from_log(&clamped);
            Ok(r.value)
        }
        Err(e) => {
            warn!("bandwidth update failed ({e}); keeping previous bandwidths");
            Ok(before)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gaussian_target, FnModel, GaussianMixtureTarget};

    #[test]
    fn standard_normal_optimum() {
        let model = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        let r = fit(&model, &NpvConfig::with_components(1).with_seed(3)).unwrap();
        let mu = r.mixture.mean(0)[0];
        let s2 = r.mixture.sigmas()[0].powi(2);
        assert!(mu.abs() < 1e-3, "{mu}");
        assert!((s2 - 1.0).abs() < 1e-3, "{s2}");
        assert!((r.final_l2() - (0.5 * 2f64.ln() - 0.5)).abs() < 1e-4);
        assert!(r.converged);
        assert_eq!(r.l2_trace.len(), r.outer_iterations + 1);
    }

    #[test]
    fn bimodal_components_find_both_modes() {
        let model = GaussianMixtureTarget::symmetric_bimodal();
        let r = fit(&model, &NpvConfig::with_components(2).with_seed(0)).unwrap();
        let mut means: Vec<f64> = r.mixture.means().iter().map(|m| m[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 3.0).abs() < 0.1 && (means[1] - 3.0).abs() < 0.1, "{means:?}");
    }

    #[test]
    fn requires_hessian() {
        let m = FnModel::value_only(1, |t: &[f64]| -t[0] * t[0]).with_gradient(|t: &[f64]| vec![-2.0 * t[0]]);
        assert!(matches!(fit(&m, &NpvConfig::default()), Err(Error::Capability { .. })));
    }

    #[test]
    fn invalid_configs() {
        let model = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        let mut c = NpvConfig::default();
        c.num_components = 0;
        assert!(fit(&model, &c).is_err());
        let mut c = NpvConfig::default();
        c.sigma_min = 2e3;
        assert!(fit(&model, &c).is_err());
    }

    #[test]
    fn non_finite_initialization_is_a_hard_error() {
        let m = FnModel::value_only(1, |_: &[f64]| f64::NEG_INFINITY)
            .with_gradient(|_: &[f64]| vec![0.0])
            .with_hessian_diag(|_: &[f64]| vec![0.0]);
        assert!(matches!(fit(&m, &NpvConfig::default()), Err(Error::Numerical(_))));
    }

    #[test]
    fn positive_curvature_clamps_bandwidth() {
        // Reported curvature is positive, so L2 grows without bound in sigma.
        let m = FnModel::value_only(1, |t: &[f64]| -0.5 * t[0] * t[0])
            .with_gradient(|t: &[f64]| vec![-t[0]])
            .with_hessian_diag(|_: &[f64]| vec![1.0]);
        let mut c = NpvConfig::default();
        c.max_outer_iterations = 3;
        let r = fit(&m, &c).unwrap();
        let s = r.mixture.sigmas()[0];
        assert!((s - 1e3).abs() < 1e-9, "{s}");
        assert!(r.final_l2().is_finite());
    }

    #[test]
    fn batch_update_matches_on_a_concave_target() {
        let model = gaussian_target(vec![1.0, -1.0], vec![1.0, 2.0]).unwrap();
        let mut c = NpvConfig::with_components(1).with_seed(2);
        c.mean_update = MeanUpdate::Batch;
        let r = fit(&model, &c).unwrap();
        assert!((r.mixture.mean(0)[0] - 1.0).abs() < 1e-3);
        assert!((r.mixture.mean(0)[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn deterministic_per_seed() {
        let model = GaussianMixtureTarget::symmetric_bimodal();
        let c = NpvConfig::with_components(3).with_seed(9);
        let a = fit(&model, &c).unwrap();
        let b = fit(&model, &c).unwrap();
        assert_eq!(a.mixture, b.mixture);
        assert_eq!(a.l2_trace, b.l2_trace);
    }
}
