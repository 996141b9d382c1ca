use log::debug;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{inf_norm, stream_rng};
use crate::model::{require, value_and_gradient, Derivatives, LogJointModel, ParameterVector};
use crate::optim::{maximize, OptimOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapOptions {
    pub restarts: usize,
    pub seed: u64,
    pub optim: OptimOptions,
    /// A result is accepted only if `|grad f|_inf` is below this.
    pub gradient_check: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            seed: 0,
            optim: OptimOptions::default().with_max_iterations(2000).with_gradient_tolerance(1e-8),
            gradient_check: 1e-5,
        }
    }
}

/// Best-of-`restarts` quasi-Newton maximizer of `f`, restart `i` starting
/// from a `N(0, I)` draw on stream `seed + i`.
pub fn map_estimate(model: &impl LogJointModel, restarts: usize, seed: u64) -> Result<ParameterVector> {
    map_estimate_with(model, &MapOptions { restarts, seed, ..MapOptions::default() })
}

pub fn map_estimate_with(model: &impl LogJointModel, opts: &MapOptions) -> Result<ParameterVector> {
    require(model, Derivatives::Gradient, "map_estimate")?;
    if opts.restarts == 0 {
        return Err(Error::Config("map_estimate needs at least one restart".into()));
    }
    let d = model.dim();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut failures = Vec::new();
    for i in 0..opts.restarts {
        let mut rng = stream_rng(opts.seed, i as u64);
        let x0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let run = maximize(|x| model.log_joint(x), |x| value_and_gradient(model, x).1, &x0, &opts.optim);
        match run {
            Ok(r) => {
                let gnorm = inf_norm(&value_and_gradient(model, &r.argmax).1);
                if !(gnorm < opts.gradient_check) || !r.value.is_finite() {
                    failures.push(format!("restart {i}: {:?} with |grad| = {gnorm:.3e}", r.status));
                    continue;
                }
                debug!("MAP restart {i}: f = {} after {} iterations", r.value, r.iterations);
                if best.as_ref().is_none_or(|(v, _)| r.value > *v) {
                    best = Some((r.value, r.argmax));
                }
            }
            Err(e) => failures.push(format!("restart {i}: {e}")),
        }
    }
    match best {
        Some((_, x)) => ParameterVector::new(x),
        None => Err(Error::Numerical(format!("all MAP restarts failed: {}", failures.join("; ")))),
    }
}
