//! Approximate evidence lower bounds and their analytic gradients.
//!
//! * `L1[q] = (1/N) sum_n [ f(mu_n) - log q_n ]` uses a first-order
//!   expansion of `f` at each mean, so it needs only `f`.
//! * `L2[q] = (1/N) sum_n [ f(mu_n) + (sigma_n^2 / 2) tr H_n - log q_n ]`
//!   adds the second-order (delta method) curvature term.
//!
//! Both share the entropy bound `E = -(1/N) sum_n log q_n`. With
//! `a_nj = log N(mu_n; mu_j, s_nj^2 I)`, `s_nj^2 = sigma_n^2 + sigma_j^2` and
//! responsibilities `r_nj = softmax_j(a_nj)`:
//!
//! ```text
//! dE/dmu_m      = -(1/N) sum_{j != m} (r_mj + r_jm) (mu_j - mu_m) / s_mj^2
//! dE/dsigma_m^2 = -(1/N) sum_j (r_mj + r_jm) (-D / (2 s_mj^2) + d_mj^2 / (2 s_mj^4))
//! ```

use crate::error::{Error, Result};
use crate::math::squared_distance;
use crate::mixture::MixtureApproximation;
use crate::model::{check_dim, require, Derivatives, LogJointModel};

/// Per-component model evaluations at the mixture means.
#[derive(Debug, Clone)]
pub(crate) struct MeanEvaluations {
    pub values: Vec<f64>,
    pub traces: Option<Vec<f64>>,
}

pub(crate) fn evaluate_means(q: &MixtureApproximation, model: &impl LogJointModel, order: Derivatives) -> MeanEvaluations {
    let mut values = Vec::with_capacity(q.num_components());
    let mut traces = Vec::with_capacity(q.num_components());
    for m in q.means() {
        let e = model.eval(m, order);
        values.push(e.value);
        if let Some(h) = e.hessian_diag {
            traces.push(h.iter().sum());
        }
    }
    let traces = (order >= Derivatives::HessianDiag).then_some(traces);
    MeanEvaluations { values, traces }
}

fn check_model(q: &MixtureApproximation, model: &impl LogJointModel) -> Result<()> {
    check_dim(model.dim(), q.dim(), "mixture vs model")
}

/// First-order approximate ELBO. Only `f` at the means is evaluated. A
/// mean outside the support yields `-inf`.
pub fn elbo_l1(q: &MixtureApproximation, model: &impl LogJointModel) -> Result<f64> {
    check_model(q, model)?;
    let evals = evaluate_means(q, model, Derivatives::ValueOnly);
    Ok(l1_from_parts(&evals.values, q))
}

pub(crate) fn l1_from_parts(values: &[f64], q: &MixtureApproximation) -> f64 {
    let n = values.len() as f64;
    values.iter().sum::<f64>() / n + q.entropy_lower_bound()
}

/// Second-order approximate ELBO. Needs the Hessian diagonal.
pub fn elbo_l2(q: &MixtureApproximation, model: &impl LogJointModel) -> Result<f64> {
    check_model(q, model)?;
    require(model, Derivatives::HessianDiag, "elbo_l2")?;
    let evals = evaluate_means(q, model, Derivatives::HessianDiag);
    let traces = evals.traces.as_deref().ok_or(Error::Capability { needed: "a Hessian diagonal", engine: "elbo_l2" })?;
    Ok(l2_from_parts(&evals.values, traces, q))
}

pub(crate) fn l2_from_parts(values: &[f64], traces: &[f64], q: &MixtureApproximation) -> f64 {
    let n = values.len() as f64;
    let curvature: f64 = values
        .iter()
        .zip(traces)
        .zip(q.sigmas())
        .map(|((f, t), s)| f + 0.5 * s * s * t)
        .sum();
    curvature / n + q.entropy_lower_bound()
}

/// `dE/dmu_m` for the entropy bound.
pub fn entropy_grad_mean(q: &MixtureApproximation, m: usize) -> Vec<f64> {
    let terms = q.overlap_terms();
    entropy_grad_mean_with(q, &terms.resp, m)
}

fn entropy_grad_mean_with(q: &MixtureApproximation, resp: &[Vec<f64>], m: usize) -> Vec<f64> {
    let n = q.num_components();
    let sig = q.sigmas();
    let mu_m = q.mean(m);
    let mut g = vec![0.0; q.dim()];
    for j in 0..n {
        if j == m {
            continue;
        }
        let w = (resp[m][j] + resp[j][m]) / (sig[m] * sig[m] + sig[j] * sig[j]);
        for (gi, (a, b)) in g.iter_mut().zip(q.mean(j).iter().zip(mu_m)) {
            *gi += w * (a - b);
        }
    }
    let scale = -1.0 / n as f64;
    g.iter_mut().for_each(|v| *v *= scale);
    g
}

/// `dE/d(log sigma_m)` for every component.
pub fn entropy_grad_log_sigma(q: &MixtureApproximation) -> Vec<f64> {
    let terms = q.overlap_terms();
    let n = q.num_components();
    let d = q.dim() as f64;
    let sig = q.sigmas();
    (0..n)
        .map(|m| {
            let mut acc = 0.0;
            for j in 0..n {
                let s2 = sig[m] * sig[m] + sig[j] * sig[j];
                let d2 = squared_distance(q.mean(m), q.mean(j));
                let da_ds2 = -0.5 * d / s2 + 0.5 * d2 / (s2 * s2);
                acc += (terms.resp[m][j] + terms.resp[j][m]) * da_ds2;
            }
            // dE/dsigma_m^2 times dsigma_m^2/dlog sigma_m
            -acc / n as f64 * 2.0 * sig[m] * sig[m]
        })
        .collect()
}

/// `dL1/dmu_m`: the model gradient at `mu_m` scaled by `1/N`, plus the
/// dependence of every `q_n` on `mu_m`.
pub fn grad_l1_mean(q: &MixtureApproximation, model: &impl LogJointModel, m: usize) -> Result<Vec<f64>> {
    check_model(q, model)?;
    require(model, Derivatives::Gradient, "grad_l1_mean")?;
    if m >= q.num_components() {
        return Err(Error::Config(format!("component index {m} out of range")));
    }
    let e = model.eval(q.mean(m), Derivatives::Gradient);
    let gf = e.gradient.ok_or(Error::Capability { needed: "a gradient", engine: "grad_l1_mean" })?;
    let n = q.num_components() as f64;
    let ge = entropy_grad_mean(q, m);
    Ok(gf.iter().zip(&ge).map(|(a, b)| a / n + b).collect())
}

/// `dL2/d(log sigma_n)` for every component.
pub fn grad_l2_log_sigma(q: &MixtureApproximation, model: &impl LogJointModel) -> Result<Vec<f64>> {
    check_model(q, model)?;
    require(model, Derivatives::HessianDiag, "grad_l2_log_sigma")?;
    let evals = evaluate_means(q, model, Derivatives::HessianDiag);
    let traces = evals.traces.ok_or(Error::Capability { needed: "a Hessian diagonal", engine: "grad_l2_log_sigma" })?;
    Ok(grad_l2_log_sigma_from_traces(q, &traces))
}

pub(crate) fn grad_l2_log_sigma_from_traces(q: &MixtureApproximation, traces: &[f64]) -> Vec<f64> {
    let n = q.num_components() as f64;
    let ge = entropy_grad_log_sigma(q);
    ge.iter()
        .zip(traces)
        .zip(q.sigmas())
        .map(|((g, t), s)| g + s * s * t / n)
        .collect()
}
