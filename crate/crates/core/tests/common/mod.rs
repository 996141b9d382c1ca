#![allow(dead_code)]

use npvi_core::elbo::{elbo_l1, elbo_l2, grad_l1_mean, grad_l2_log_sigma};
use npvi_core::math::stream_rng;
use npvi_core::models::*;
use npvi_core::oracles::fd_gradient;
use npvi_core::{Derivatives, LogJointModel, MixtureApproximation, Transform, TransformSpec, TransformedModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;

/// Normwise relative error `|a - b| / |b|`, with the denominator floored
/// at `1e-8`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    num / den
}

pub fn normal_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub struct ZooEntry {
    pub name: &'static str,
    pub model: Box<dyn LogJointModel>,
    /// Scale of the random evaluation points around the origin.
    pub spread: f64,
}

pub fn tlsa_small(seed: u64) -> TlsaModel {
    let mut rng = stream_rng(seed, 7);
    let voxels = unit_grid(5);
    let x: Vec<Vec<f64>> = (0..5).map(|_| normal_vec(&mut rng, 2, 1.0)).collect();
    let truth = TlsaParams::sample_prior(seed, 2, 2, 2, 5.0, 1.0).unwrap();
    let mut spec = TlsaModelSpec::new(2, voxels, x, vec![vec![0.0; 25]; 5]);
    spec.activations = synth_tlsa(seed, &spec, &truth).unwrap();
    tlsa_log_joint(spec).unwrap()
}

pub fn logistic_small(seed: u64) -> LogisticModel {
    let (data, _) = synth_logistic(seed, 30, 3, None, 1.0).unwrap();
    logistic_log_joint(&LogisticModelSpec::new(data)).unwrap()
}

/// Every shipped model plus transformed wrappers of simple targets.
pub fn zoo(seed: u64) -> Vec<ZooEntry> {
    let mut rng = stream_rng(seed, 99);
    let d = 1 + rng.random_range(0..5);
    let mean = normal_vec(&mut rng, d, 1.0);
    let var: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..3.0)).collect();
    let bounded = TransformedModel::new(
        GaussianTarget::new(vec![0.3, 2.0, -0.5], vec![0.05, 1.5, 2.0]).unwrap(),
        TransformSpec::new(vec![Transform::Logit, Transform::LogPositive, Transform::Identity]),
    )
    .unwrap();
    let mix = GaussianMixtureTarget::new(
        vec![0.3, 0.7],
        vec![
            GaussianTarget::new(vec![-1.0, 0.5], vec![0.5, 2.0]).unwrap(),
            GaussianTarget::new(vec![1.5, -0.5], vec![1.0, 0.7]).unwrap(),
        ],
    )
    .unwrap();
    vec![
        ZooEntry { name: "gaussian", model: Box::new(GaussianTarget::new(mean, var).unwrap()), spread: 2.0 },
        ZooEntry { name: "gaussian-mixture", model: Box::new(mix), spread: 2.0 },
        ZooEntry { name: "bimodal", model: Box::new(GaussianMixtureTarget::symmetric_bimodal()), spread: 3.0 },
        ZooEntry { name: "t-mixture", model: Box::new(t_mixture_target(TMixtureSpec::canonical()).unwrap()), spread: 2.5 },
        ZooEntry { name: "transformed-gaussian", model: Box::new(bounded), spread: 1.0 },
        ZooEntry { name: "logistic", model: Box::new(logistic_small(seed)), spread: 1.0 },
        ZooEntry { name: "tlsa", model: Box::new(tlsa_small(seed)), spread: 1.0 },
    ]
}

/// Worst relative error of the gradient and Hessian diagonal against finite
/// differences over `points` random points.
pub fn model_derivative_errors(model: &dyn LogJointModel, spread: f64, points: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 1);
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let x = normal_vec(&mut rng, model.dim(), spread);
        let e = model.eval(&x, Derivatives::HessianDiag);
        let g = e.gradient.unwrap();
        let h = e.hessian_diag.unwrap();
        let fg = fd_gradient(|t| model.log_joint(t), &x, FD_STEP).unwrap();
        let fh: Vec<f64> = (0..x.len())
            .map(|i| {
                let gi = |t: &[f64]| model.eval(t, Derivatives::Gradient).gradient.unwrap()[i];
                fd_gradient(gi, &x, FD_STEP).unwrap()[i]
            })
            .collect();
        eg = eg.max(rel_err(&g, &fg));
        eh = eh.max(rel_err(&h, &fh));
    }
    (eg, eh)
}

pub fn random_mixture(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> MixtureApproximation {
    let means = (0..n).map(|_| normal_vec(rng, d, spread)).collect();
    let sigmas = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    MixtureApproximation::new(means, sigmas).unwrap()
}

/// Worst relative errors of the L1 mean gradient and the L2 log-bandwidth
/// gradient against finite differences over `instances` random mixtures.
pub fn objective_gradient_errors(model: &dyn LogJointModel, spread: f64, instances: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 2);
    let d = model.dim();
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let n = rng.random_range(1..5);
        let q = random_mixture(&mut rng, n, d, spread);
        let m = rng.random_range(0..n);
        let g = grad_l1_mean(&q, &model, m).unwrap();
        let l1 = |mu: &[f64]| {
            let mut means = q.means().to_vec();
            means[m] = mu.to_vec();
            elbo_l1(&MixtureApproximation::new(means, q.sigmas().to_vec()).unwrap(), &model).unwrap()
        };
        e1 = e1.max(rel_err(&g, &fd_gradient(l1, q.mean(m), FD_STEP).unwrap()));

        let g = grad_l2_log_sigma(&q, &model).unwrap();
        let l2 = |ls: &[f64]| {
            let s = ls.iter().map(|v| v.exp()).collect();
            elbo_l2(&MixtureApproximation::new(q.means().to_vec(), s).unwrap(), &model).unwrap()
        };
        e2 = e2.max(rel_err(&g, &fd_gradient(l2, &q.log_sigmas(), FD_STEP).unwrap()));
    }
    (e1, e2)
}
