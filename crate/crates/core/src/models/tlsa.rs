//! Topographic latent source analysis.
//!
//! Voxel activations are a covariate-weighted superposition of `K` radial
//! basis images:
//!
//! ```text
//! u_tv = sum_c x_tc sum_k w_ck g_kv + eps_tv,   eps_tv ~ N(0, 1 / tau)
//! g_kv = exp(-|r_v - rbar_k|^2 / lambda_k)
//! w_ck ~ N(0, sigma_w^2),  rbar_kd ~ Beta(1, 1),  lambda_k ~ Exp(rho)
//! ```
//!
//! The parameter vector is laid out as `W` (row-major `C x K`), then the
//! centers (row-major `K x M`), then the `K` widths. Engines see centers
//! through a logit and widths through a log.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{squared_distance, stream_rng, LN_2PI};
use crate::model::{Derivatives, Evaluation, LogJointModel, ParameterVector};
use crate::transform::{Transform, TransformSpec, TransformedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TlsaModelSpec {
    pub sources: usize,
    /// Voxel locations in `[0,1]^M`.
    pub voxels: Vec<Vec<f64>>,
    /// `T x C`.
    pub covariates: Vec<Vec<f64>>,
    /// `T x V`.
    pub activations: Vec<Vec<f64>>,
    pub tau: f64,
    pub sigma_w2: f64,
    pub rho: f64,
}

impl TlsaModelSpec {
    pub fn new(sources: usize, voxels: Vec<Vec<f64>>, covariates: Vec<Vec<f64>>, activations: Vec<Vec<f64>>) -> Self {
        Self { sources, voxels, covariates, activations, tau: 1.0, sigma_w2: 5.0, rho: 1.0 }
    }

    pub fn num_covariates(&self) -> usize {
        self.covariates.first().map_or(0, |r| r.len())
    }

    pub fn spatial_dim(&self) -> usize {
        self.voxels.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 {
            return Err(Error::Config("TLSA needs at least one source".into()));
        }
        if self.voxels.is_empty() || self.spatial_dim() == 0 {
            return Err(Error::Config("TLSA needs voxel locations".into()));
        }
        let m = self.spatial_dim();
        if self.voxels.iter().any(|r| r.len() != m || r.iter().any(|x| !(0.0..=1.0).contains(x))) {
            return Err(Error::Config("voxel locations must lie in the unit hypercube".into()));
        }
        if self.covariates.is_empty() || self.num_covariates() == 0 {
            return Err(Error::Config("TLSA needs at least one covariate row".into()));
        }
        let c = self.num_covariates();
        if self.covariates.iter().any(|r| r.len() != c) {
            return Err(Error::Config("ragged TLSA covariates".into()));
        }
        if self.activations.len() != self.covariates.len() || self.activations.iter().any(|r| r.len() != self.voxels.len()) {
            return Err(Error::Config("activations must be T x V".into()));
        }
        if !(self.tau > 0.0 && self.sigma_w2 > 0.0 && self.rho > 0.0) {
            return Err(Error::Config("TLSA tau, sigma_w2 and rho must be positive".into()));
        }
        Ok(())
    }
}

/// Constrained TLSA parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsaParams {
    /// `C x K`.
    pub weights: Vec<Vec<f64>>,
    /// `K x M`, each in `(0,1)`.
    pub centers: Vec<Vec<f64>>,
    /// `K`, each positive.
    pub widths: Vec<f64>,
}

impl TlsaParams {
    pub fn pack(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.weights.iter().flatten().copied().collect();
        v.extend(self.centers.iter().flatten());
        v.extend(&self.widths);
        v
    }

    pub fn unpack(theta: &[f64], c: usize, k: usize, m: usize) -> Self {
        let weights = (0..c).map(|i| theta[i * k..(i + 1) * k].to_vec()).collect();
        let off = c * k;
        let centers = (0..k).map(|i| theta[off + i * m..off + (i + 1) * m].to_vec()).collect();
        let widths = theta[off + k * m..off + k * m + k].to_vec();
        Self { weights, centers, widths }
    }

    /// One draw from the priors.
    pub fn sample_prior(seed: u64, c: usize, k: usize, m: usize, sigma_w2: f64, rho: f64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0);
        let exp = Exp::new(rho).map_err(|e| Error::Config(format!("width prior: {e}")))?;
        let sd = sigma_w2.sqrt();
        let weights = (0..c).map(|_| (0..k).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let centers = (0..k).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
        let widths = (0..k).map(|_| rng.sample(exp)).collect();
        Ok(Self { weights, centers, widths })
    }

    /// Noiseless activations for covariate rows `x`.
    pub fn predict(&self, voxels: &[Vec<f64>], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let basis: Vec<Vec<f64>> = self.centers.iter().zip(&self.widths).map(|(r, l)| tlsa_basis(r, *l, voxels)).collect();
        let k = self.widths.len();
        x.iter()
            .map(|row| {
                let z: Vec<f64> = (0..k).map(|kk| row.iter().zip(&self.weights).map(|(xc, w)| xc * w[kk]).sum()).collect();
                (0..voxels.len()).map(|v| (0..k).map(|kk| z[kk] * basis[kk][v]).sum()).collect()
            })
            .collect()
    }
}

/// Radial basis image `g_v = exp(-|r_v - center|^2 / width)`.
/// Values are floored at the smallest normal float so they stay positive.
pub fn tlsa_basis(center: &[f64], width: f64, voxels: &[Vec<f64>]) -> Vec<f64> {
    voxels.iter().map(|r| (-squared_distance(r, center) / width).exp().max(f64::MIN_POSITIVE)).collect()
}

/// `side^2` voxel centers on a regular grid in `[0,1]^2`.
pub fn unit_grid(side: usize) -> Vec<Vec<f64>> {
    let h = 1.0 / side as f64;
    (0..side).flat_map(|i| (0..side).map(move |j| vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h])).collect()
}

/// Log joint on the constrained space.
#[derive(Debug, Clone)]
pub struct TlsaJoint {
    spec: TlsaModelSpec,
}

pub type TlsaModel = TransformedModel<TlsaJoint>;

impl TlsaJoint {
    pub fn new(spec: TlsaModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &TlsaModelSpec {
        &self.spec
    }

    pub fn unpack(&self, theta: &[f64]) -> TlsaParams {
        TlsaParams::unpack(theta, self.spec.num_covariates(), self.spec.sources, self.spec.spatial_dim())
    }

    pub fn transform_spec(&self) -> TransformSpec {
        let (c, k, m) = (self.spec.num_covariates(), self.spec.sources, self.spec.spatial_dim());
        let mut tags = vec![Transform::Identity; c * k];
        tags.extend(std::iter::repeat_n(Transform::Logit, k * m));
        tags.extend(std::iter::repeat_n(Transform::LogPositive, k));
        TransformSpec::new(tags)
    }
}

impl LogJointModel for TlsaJoint {
    fn dim(&self) -> usize {
        let s = &self.spec;
        s.num_covariates() * s.sources + s.sources * s.spatial_dim() + s.sources
    }

    fn capability(&self) -> Derivatives {
        Derivatives::HessianDiag
    }

    fn eval(&self, theta: &[f64], order: Derivatives) -> Evaluation {
        let s = &self.spec;
        let (nc, nk, nm, nv, nt) = (s.num_covariates(), s.sources, s.spatial_dim(), s.voxels.len(), s.covariates.len());
        let dim = self.dim();
        let p = self.unpack(theta);
        let outside = p.centers.iter().flatten().any(|r| !(*r > 0.0 && *r < 1.0)) || p.widths.iter().any(|l| !(*l > 0.0));
        if outside {
            return Evaluation {
                value: f64::NEG_INFINITY,
                gradient: (order >= Derivatives::Gradient).then(|| vec![0.0; dim]),
                hessian_diag: (order >= Derivatives::HessianDiag).then(|| vec![0.0; dim]),
            };
        }

        let basis: Vec<Vec<f64>> = p.centers.iter().zip(&p.widths).map(|(r, l)| tlsa_basis(r, *l, &s.voxels)).collect();
        // z_tk = sum_c x_tc w_ck
        let z: Vec<Vec<f64>> = s
            .covariates
            .iter()
            .map(|row| (0..nk).map(|k| row.iter().zip(&p.weights).map(|(x, w)| x * w[k]).sum()).collect())
            .collect();
        let resid: Vec<Vec<f64>> = (0..nt)
            .map(|t| (0..nv).map(|v| s.activations[t][v] - (0..nk).map(|k| z[t][k] * basis[k][v]).sum::<f64>()).collect())
            .collect();

        let tau = s.tau;
        let sse: f64 = resid.iter().flatten().map(|e| e * e).sum();
        let mut value = -0.5 * tau * sse + 0.5 * (nt * nv) as f64 * (tau.ln() - LN_2PI);
        let ww: f64 = p.weights.iter().flatten().map(|w| w * w).sum();
        value += -0.5 * (nc * nk) as f64 * (LN_2PI + s.sigma_w2.ln()) - 0.5 * ww / s.sigma_w2;
        // Beta(1,1) on each center coordinate: log density 0 on (0,1).
        value += 0.0;
        value += nk as f64 * s.rho.ln() - s.rho * p.widths.iter().sum::<f64>();

        if order == Derivatives::ValueOnly {
            return Evaluation::value(value);
        }
        let want_h = order >= Derivatives::HessianDiag;
        let mut g = vec![0.0; dim];
        let mut h = vec![0.0; dim];

        // Weights: dm_tv/dw_ck = x_tc g_kv.
        for c in 0..nc {
            for k in 0..nk {
                let mut gr = 0.0;
                let mut hs = 0.0;
                for t in 0..nt {
                    let x = s.covariates[t][c];
                    let er: f64 = (0..nv).map(|v| resid[t][v] * basis[k][v]).sum();
                    gr += x * er;
                    if want_h {
                        let gg: f64 = basis[k].iter().map(|b| b * b).sum();
                        hs += x * x * gg;
                    }
                }
                let i = c * nk + k;
                g[i] = tau * gr - p.weights[c][k] / s.sigma_w2;
                h[i] = -tau * hs - 1.0 / s.sigma_w2;
            }
        }

        // Source parameters: dm_tv/dp = z_tk dg_kv/dp.
        let off_r = nc * nk;
        let off_l = off_r + nk * nm;
        for k in 0..nk {
            let lam = p.widths[k];
            // e_kv = sum_t resid_tv z_tk, z2_k = sum_t z_tk^2
            let ez: Vec<f64> = (0..nv).map(|v| (0..nt).map(|t| resid[t][v] * z[t][k]).sum()).collect();
            let z2: f64 = (0..nt).map(|t| z[t][k] * z[t][k]).sum();
            for d in 0..nm {
                let mut gr = 0.0;
                let mut hs = 0.0;
                for v in 0..nv {
                    let delta = s.voxels[v][d] - p.centers[k][d];
                    let gv = basis[k][v];
                    let g1 = gv * 2.0 * delta / lam;
                    let g2 = gv * (4.0 * delta * delta / (lam * lam) - 2.0 / lam);
                    gr += ez[v] * g1;
                    hs += ez[v] * g2 - z2 * g1 * g1;
                }
                g[off_r + k * nm + d] = tau * gr;
                h[off_r + k * nm + d] = tau * hs;
            }
            let mut gr = 0.0;
            let mut hs = 0.0;
            for v in 0..nv {
                let dist = squared_distance(&s.voxels[v], &p.centers[k]);
                let gv = basis[k][v];
                let g1 = gv * dist / (lam * lam);
                let g2 = gv * (dist * dist / lam.powi(4) - 2.0 * dist / lam.powi(3));
                gr += ez[v] * g1;
                hs += ez[v] * g2 - z2 * g1 * g1;
            }
            g[off_l + k] = tau * gr - s.rho;
            h[off_l + k] = tau * hs;
        }
        Evaluation { value, gradient: Some(g), hessian_diag: want_h.then_some(h) }
    }
}

/// The TLSA log joint on unconstrained space.
pub fn tlsa_log_joint(spec: TlsaModelSpec) -> Result<TlsaModel> {
    let joint = TlsaJoint::new(spec)?;
    let tags = joint.transform_spec();
    TransformedModel::new(joint, tags)
}

/// Monte Carlo average of the noiseless activations for `x_test` over
/// unconstrained posterior samples.
pub fn tlsa_reconstruct(model: &TlsaModel, samples: &[ParameterVector], x_test: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::Input("no posterior samples".into()));
    }
    let joint = model.inner();
    let nc = joint.spec().num_covariates();
    if x_test.iter().any(|r| r.len() != nc) {
        return Err(Error::Config(format!("test covariates must have {nc} columns")));
    }
    let nv = joint.spec().voxels.len();
    let mut acc = vec![vec![0.0; nv]; x_test.len()];
    for u in samples {
        if u.len() != model.dim() {
            return Err(Error::Config("sample dimension does not match the TLSA model".into()));
        }
        let params = joint.unpack(&model.constrain(u));
        for (a, p) in acc.iter_mut().zip(params.predict(&joint.spec().voxels, x_test)) {
            for (ai, pi) in a.iter_mut().zip(p) {
                *ai += pi;
            }
        }
    }
    let s = samples.len() as f64;
    acc.iter_mut().flatten().for_each(|v| *v /= s);
    Ok(acc)
}

/// Activations drawn from the generative model at `params`, using the
/// covariates, voxels and noise precision of `spec`.
pub fn synth_tlsa(seed: u64, spec: &TlsaModelSpec, params: &TlsaParams) -> Result<Vec<Vec<f64>>> {
    if !(spec.tau > 0.0) {
        return Err(Error::Config("tau must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let sd = spec.tau.powf(-0.5);
    let mut u = params.predict(&spec.voxels, &spec.covariates);
    for v in u.iter_mut().flatten() {
        *v += sd * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(u)
}
