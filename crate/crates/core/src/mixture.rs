//! The uniformly weighted isotropic Gaussian mixture
//! `q(theta) = (1/N) sum_n N(theta; mu_n, sigma_n^2 I)`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, squared_distance, stream_rng, LN_2PI};
use crate::model::ParameterVector;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureApproximation {
    means: Vec<Vec<f64>>,
    sigmas: Vec<f64>,
}

/// `log N(x; m, s2 I)` given the squared distance `d2 = |x - m|^2`.
#[inline]
pub(crate) fn log_isotropic_normal(d2: f64, s2: f64, dim: usize) -> f64 {
    -0.5 * dim as f64 * (LN_2PI + s2.ln()) - 0.5 * d2 / s2
}

impl MixtureApproximation {
    pub fn new(means: Vec<Vec<f64>>, sigmas: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if means.len() != sigmas.len() {
            return Err(Error::Config(format!("{} means but {} bandwidths", means.len(), sigmas.len())));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Config("mixture dimension must be positive".into()));
        }
        for (n, (m, &s)) in means.iter().zip(&sigmas).enumerate() {
            if m.len() != dim {
                return Err(Error::Config(format!("mean {n} has length {} but dimension is {dim}", m.len())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("mean {n} has a non-finite entry")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Input(format!("bandwidth {n} must be positive and finite, got {s}")));
            }
        }
        Ok(Self { means, sigmas })
    }

    /// `n` copies of one component.
    pub fn replicated(mean: Vec<f64>, sigma: f64, n: usize) -> Result<Self> {
        Self::new(vec![mean; n], vec![sigma; n])
    }

    pub fn num_components(&self) -> usize {
        self.sigmas.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn mean(&self, n: usize) -> &[f64] {
        &self.means[n]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn log_sigmas(&self) -> Vec<f64> {
        self.sigmas.iter().map(|s| s.ln()).collect()
    }

    pub(crate) fn set_mean(&mut self, n: usize, mean: &[f64]) {
        self.means[n].copy_from_slice(mean);
    }

    pub(crate) fn set_sigmas_from_log(&mut self, log_sigmas: &[f64]) {
        for (s, l) in self.sigmas.iter_mut().zip(log_sigmas) {
            *s = l.exp();
        }
    }

    /// Log density of the mixture at `theta`.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let d = self.dim();
        let terms: Vec<f64> = self
            .means
            .iter()
            .zip(&self.sigmas)
            .map(|(m, s)| log_isotropic_normal(squared_distance(theta, m), s * s, d))
            .collect();
        log_sum_exp(&terms) - (self.num_components() as f64).ln()
    }

    /// `log q_n` for every component, where
    /// `q_n = (1/N) sum_j N(mu_n; mu_j, (sigma_n^2 + sigma_j^2) I)`.
    pub fn log_overlaps(&self) -> Vec<f64> {
        self.overlap_terms().log_q
    }

    /// `q_n`, the expected density of component `n` under the mixture.
    pub fn component_overlap(&self, n: usize) -> f64 {
        self.log_overlaps()[n].exp()
    }

    /// The Jensen bound `H[q] >= -(1/N) sum_n log q_n`.
    pub fn entropy_lower_bound(&self) -> f64 {
        let lq = self.log_overlaps();
        -lq.iter().sum::<f64>() / lq.len() as f64
    }

    /// Pairwise convolution log densities, their row-wise normalizers and
    /// the resulting responsibilities `r_nj = exp(a_nj - log_sum_exp_j a_nj)`.
    pub(crate) fn overlap_terms(&self) -> OverlapTerms {
        let n = self.num_components();
        let d = self.dim();
        let ln_n = (n as f64).ln();
        let mut log_conv = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let s2 = self.sigmas[i] * self.sigmas[i] + self.sigmas[j] * self.sigmas[j];
                let a = log_isotropic_normal(squared_distance(&self.means[i], &self.means[j]), s2, d);
                log_conv[i][j] = a;
                log_conv[j][i] = a;
            }
        }
        let mut log_q = Vec::with_capacity(n);
        let mut resp = Vec::with_capacity(n);
        for row in &log_conv {
            let lse = log_sum_exp(row);
            log_q.push(lse - ln_n);
            resp.push(row.iter().map(|a| (a - lse).exp()).collect());
        }
        OverlapTerms { log_q, resp }
    }

    /// `count` i.i.d. draws: a uniformly chosen component, then its Gaussian.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<ParameterVector> {
        let mut rng = stream_rng(seed, 0);
        let n = self.num_components();
        (0..count)
            .map(|_| {
                let k = rng.random_range(0..n);
                let s = self.sigmas[k];
                let v = self.means[k]
                    .iter()
                    .map(|m| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + s * z
                    })
                    .collect();
                ParameterVector::new(v).expect("finite mixture draws")
            })
            .collect()
    }

    /// `{"means": [[...], ...], "sigmas": [...]}` with every float written
    /// to 17 significant digits, so parsing restores the exact bits.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\"means\":[");
        for (n, m) in self.means.iter().enumerate() {
            if n > 0 {
                s.push(',');
            }
            s.push('[');
            write_floats(&mut s, m);
            s.push(']');
        }
        s.push_str("],\"sigmas\":[");
        write_floats(&mut s, &self.sigmas);
        s.push_str("]}");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            means: Vec<Vec<f64>>,
            sigmas: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::new(raw.means, raw.sigmas)
    }
}

/// Decimal float with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_floats(out: &mut String, xs: &[f64]) {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{x:.16e}").unwrap();
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OverlapTerms {
    pub log_q: Vec<f64>,
    pub resp: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mix(means: Vec<Vec<f64>>, sigmas: Vec<f64>) -> MixtureApproximation {
        MixtureApproximation::new(means, sigmas).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(MixtureApproximation::new(vec![], vec![]).is_err());
        assert!(MixtureApproximation::new(vec![vec![0.0]], vec![0.0]).is_err());
        assert!(MixtureApproximation::new(vec![vec![0.0], vec![0.0, 1.0]], vec![1.0, 1.0]).is_err());
        assert!(MixtureApproximation::new(vec![vec![f64::NAN]], vec![1.0]).is_err());
    }

    #[test]
    fn log_density_examples() {
        let q = mix(vec![vec![0.0]], vec![1.0]);
        assert!((q.log_density(&[0.0]) - (-0.918_938_533_204_672_8)).abs() < 1e-14);
        let q2 = mix(vec![vec![0.3], vec![0.3]], vec![0.7, 0.7]);
        let q1 = mix(vec![vec![0.3]], vec![0.7]);
        for x in [-2.0, 0.0, 0.3, 5.0] {
            assert!((q2.log_density(&[x]) - q1.log_density(&[x])).abs() < 1e-14);
        }
        let q = mix(vec![vec![0.0, 0.0]], vec![1.0]);
        let expected = (1.0 / (2.0 * std::f64::consts::PI) * (-0.5f64).exp()).ln();
        assert!((q.log_density(&[1.0, 0.0]) - expected).abs() < 1e-14);
        assert!((q.log_density(&[1.0, 0.0]).exp() - 0.096_532).abs() < 1e-6);
    }

    #[test]
    fn overlap_examples() {
        let self_conv = (4.0 * std::f64::consts::PI).powf(-0.5);
        let q = mix(vec![vec![0.0]], vec![1.0]);
        assert!((q.component_overlap(0) - self_conv).abs() < 1e-15);
        assert!((q.component_overlap(0) - 0.282_095).abs() < 1e-6);

        let q = mix(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]);
        assert!((q.component_overlap(0) - self_conv).abs() < 1e-15);
        assert!((q.component_overlap(1) - self_conv).abs() < 1e-15);

        let q = mix(vec![vec![-10.0], vec![10.0]], vec![1.0, 1.0]);
        let cross = (-400.0f64 / 4.0).exp() * self_conv / 2.0;
        assert!(cross < 1e-11);
        assert!((q.component_overlap(0) - 0.5 * self_conv).abs() < 1e-11);
        assert!((q.component_overlap(0) - 0.141_047).abs() < 1e-6);
    }

    #[test]
    fn entropy_bound_examples() {
        let q = mix(vec![vec![0.0]], vec![1.0]);
        let half_log_4pi = 0.5 * (4.0 * std::f64::consts::PI).ln();
        assert!((q.entropy_lower_bound() - half_log_4pi).abs() < 1e-14);
        assert!((q.entropy_lower_bound() - 1.265_512).abs() < 1e-6);
        assert!(q.entropy_lower_bound() < 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());

        let q = mix(vec![vec![-10.0], vec![10.0]], vec![1.0, 1.0]);
        assert!((q.entropy_lower_bound() - (2f64.ln() + half_log_4pi)).abs() < 1e-11);
        assert!((q.entropy_lower_bound() - 1.958_659).abs() < 1e-6);
    }

    #[test]
    fn overlaps_never_underflow() {
        let q = mix(vec![vec![0.0; 3], vec![1e6; 3]], vec![1e-6, 1e-6]);
        assert!(q.log_overlaps().iter().all(|v| v.is_finite()));
        assert!(q.entropy_lower_bound().is_finite());
    }

    #[test]
    fn sampling_examples() {
        let q = mix(vec![vec![2.0]], vec![1.0]);
        let draws = q.sample(100_000, 7);
        let mean = draws.iter().map(|d| d[0]).sum::<f64>() / draws.len() as f64;
        assert!((mean - 2.0).abs() < 0.01, "{mean}");

        let q = mix(vec![vec![-1.0, 4.0], vec![3.0, 0.5], vec![0.0, 0.0]], vec![1e-12; 3]);
        for d in q.sample(1000, 3) {
            let near = q.means().iter().any(|m| squared_distance(&d, m).sqrt() < 1e-9);
            assert!(near);
        }
        assert_eq!(q.sample(50, 11), q.sample(50, 11));
        assert_ne!(q.sample(50, 11), q.sample(50, 12));
    }

    #[test]
    fn json_layout() {
        let q = mix(vec![vec![1.0, -0.5]], vec![0.25]);
        assert_eq!(
            q.to_json(),
            "{\"means\":[[1.0000000000000000e0,-5.0000000000000000e-1]],\"sigmas\":[2.5000000000000000e-1]}"
        );
        assert!(MixtureApproximation::from_json("{\"means\":[[1.0]],\"sigmas\":[-1.0]}").is_err());
    }

    fn arb_mixture() -> impl Strategy<Value = MixtureApproximation> {
        (1usize..5, 1usize..4).prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(prop::collection::vec(-1e6f64..1e6, d), n),
                prop::collection::vec(1e-8f64..1e4, n),
            )
                .prop_map(|(m, s)| MixtureApproximation::new(m, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn json_round_trips_bit_exactly(q in arb_mixture()) {
            let back = MixtureApproximation::from_json(&q.to_json()).unwrap();
            for (a, b) in q.means().iter().flatten().zip(back.means().iter().flatten()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in q.sigmas().iter().zip(back.sigmas()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn entropy_bound_translation_invariant(
            means in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..5),
            shift in prop::collection::vec(-100.0f64..100.0, 2),
            sig in 0.1f64..2.0,
        ) {
            let n = means.len();
            let q = MixtureApproximation::new(means.clone(), vec![sig; n]).unwrap();
            let shifted: Vec<Vec<f64>> = means.iter().map(|m| m.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
            let qs = MixtureApproximation::new(shifted, vec![sig; n]).unwrap();
            prop_assert!((q.entropy_lower_bound() - qs.entropy_lower_bound()).abs() < 1e-10);
        }
    }
}
