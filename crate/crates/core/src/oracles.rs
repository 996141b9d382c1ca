//! Independent numerical ground truth: finite differences, Monte Carlo
//! entropy and low-dimensional grid quadrature.

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::mixture::MixtureApproximation;
use crate::model::LogJointModel;

/// Minimum gap (in nats) between the peak and the boundary of the log
/// density accepted by [`grid_log_evidence`].
pub const BOUNDARY_GAP: f64 = 50.0;

pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut x = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        x[i] = theta[i] + step;
        let fp = f(&x);
        x[i] = theta[i] - step;
        let fm = f(&x);
        x[i] = theta[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFiniteStencil { coordinate: i });
        }
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

pub fn fd_hessian_diag(f: impl Fn(&[f64]) -> f64, theta: &[f64], step: f64) -> Result<Vec<f64>> {
    let f0 = f(theta);
    let mut x = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        x[i] = theta[i] + step;
        let fp = f(&x);
        x[i] = theta[i] - step;
        let fm = f(&x);
        x[i] = theta[i];
        if !f0.is_finite() || !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFiniteStencil { coordinate: i });
        }
        out.push((fp - 2.0 * f0 + fm) / (step * step));
    }
    Ok(out)
}

/// Monte Carlo estimate of the mixture entropy and its standard error.
pub fn mc_entropy(q: &MixtureApproximation, num_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if num_samples < 1000 {
        return Err(Error::Config(format!("mc_entropy needs at least 1000 samples, got {num_samples}")));
    }
    let vals: Vec<f64> = q.sample(num_samples, seed).iter().map(|x| -q.log_density(x)).collect();
    let n = num_samples as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Tensor grid over at most two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || d > 2 || upper.len() != d || counts.len() != d {
            return Err(Error::Config("grid must have one or two dimensions with matching bounds and counts".into()));
        }
        for i in 0..d {
            if !lower[i].is_finite() || !upper[i].is_finite() || lower[i] >= upper[i] {
                return Err(Error::Config(format!("bad bounds [{}, {}] in dimension {i}", lower[i], upper[i])));
            }
            if counts[i] < 16 {
                return Err(Error::Config(format!("grid needs at least 16 points per dimension, got {}", counts[i])));
            }
        }
        Ok(Self { lower, upper, counts })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn spacing(&self, i: usize) -> f64 {
        (self.upper[i] - self.lower[i]) / (self.counts[i] - 1) as f64
    }

    pub fn axis(&self, i: usize) -> Vec<f64> {
        let h = self.spacing(i);
        (0..self.counts[i]).map(|k| self.lower[i] + k as f64 * h).collect()
    }

    fn points(&self) -> Vec<(Vec<f64>, f64, bool)> {
        // (point, log trapezoid weight, on boundary)
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.axis(i)).collect();
        let lw = |i: usize, k: usize| {
            let h = self.spacing(i).ln();
            if k == 0 || k + 1 == self.counts[i] {
                h - std::f64::consts::LN_2
            } else {
                h
            }
        };
        let edge = |i: usize, k: usize| k == 0 || k + 1 == self.counts[i];
        let mut out = Vec::new();
        if self.dim() == 1 {
            for (k, x) in axes[0].iter().enumerate() {
                out.push((vec![*x], lw(0, k), edge(0, k)));
            }
        } else {
            for (a, x) in axes[0].iter().enumerate() {
                for (b, y) in axes[1].iter().enumerate() {
                    out.push((vec![*x, *y], lw(0, a) + lw(1, b), edge(0, a) || edge(1, b)));
                }
            }
        }
        out
    }
}

/// Log of the trapezoid-rule integral of `exp(f)`; no boundary check.
pub fn grid_log_integral(f: impl Fn(&[f64]) -> f64, grid: &GridSpec) -> f64 {
    let terms: Vec<f64> = grid.points().into_iter().map(|(x, lw, _)| f(&x) + lw).collect();
    log_sum_exp(&terms)
}

/// Log evidence by trapezoid quadrature, refusing grids whose boundary still
/// carries appreciable mass.
pub fn grid_log_evidence(model: &impl LogJointModel, grid: &GridSpec) -> Result<f64> {
    if model.dim() != grid.dim() {
        return Err(Error::Config(format!("model dimension {} does not match grid dimension {}", model.dim(), grid.dim())));
    }
    let pts = grid.points();
    let vals: Vec<f64> = pts.iter().map(|(x, _, _)| model.log_joint(x)).collect();
    let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Numerical("log joint is not finite anywhere on the grid".into()));
    }
    let edge = pts.iter().zip(&vals).filter(|((_, _, b), _)| *b).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    if peak - edge < BOUNDARY_GAP {
        return Err(Error::GridTooSmall { gap: peak - edge });
    }
    let terms: Vec<f64> = pts.iter().zip(&vals).map(|((_, lw, _), v)| v + lw).collect();
    Ok(log_sum_exp(&terms))
}

/// Interior local maxima of `f` on the grid, each refined by compass search
/// until the step is below `tol`. Sorted by decreasing value.
pub fn grid_local_maxima(f: impl Fn(&[f64]) -> f64, grid: &GridSpec, tol: f64) -> Vec<(Vec<f64>, f64)> {
    let d = grid.dim();
    let axes: Vec<Vec<f64>> = (0..d).map(|i| grid.axis(i)).collect();
    let n1 = if d == 2 { grid.counts[1] } else { 1 };
    let at = |a: usize, b: usize| -> Vec<f64> { if d == 1 { vec![axes[0][a]] } else { vec![axes[0][a], axes[1][b]] } };
    let vals: Vec<Vec<f64>> = (0..grid.counts[0]).map(|a| (0..n1).map(|b| f(&at(a, b))).collect()).collect();
    let mut found = Vec::new();
    for a in 1..grid.counts[0] - 1 {
        for b in 0..n1 {
            if d == 2 && (b == 0 || b + 1 == n1) {
                continue;
            }
            let v = vals[a][b];
            if !v.is_finite() {
                continue;
            }
            let mut is_max = true;
            for da in -1i64..=1 {
                for db in -1i64..=1 {
                    if (da == 0 && db == 0) || (d == 1 && db != 0) {
                        continue;
                    }
                    let (aa, bb) = ((a as i64 + da) as usize, (b as i64 + db) as usize);
                    if vals[aa][bb] > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                let h: Vec<f64> = (0..d).map(|i| grid.spacing(i)).collect();
                found.push(compass_refine(&f, at(a, b), v, h, tol));
            }
        }
    }
    found.sort_by(|x, y| y.1.total_cmp(&x.1));
    // plateau neighbours can refine to the same point
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (x, v) in found {
        if out.iter().all(|(y, _)| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 10.0 * tol) {
            out.push((x, v));
        }
    }
    out
}

fn compass_refine(f: &impl Fn(&[f64]) -> f64, mut x: Vec<f64>, mut v: f64, mut h: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let d = x.len();
    while h.iter().any(|hi| *hi > tol * 1e-2) {
        let mut moved = false;
        for i in 0..d {
            for s in [-1.0, 1.0] {
                let mut y = x.clone();
                y[i] += s * h[i];
                let fy = f(&y);
                if fy > v {
                    x = y;
                    v = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            h.iter_mut().for_each(|hi| *hi *= 0.5);
        }
    }
    (x, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LN_2PI;
    use crate::models::gaussian_target;

    #[test]
    fn fd_examples() {
        let half_sq = |t: &[f64]| 0.5 * t.iter().map(|v| v * v).sum::<f64>();
        let g = fd_gradient(half_sq, &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
        assert_eq!(fd_gradient(|_: &[f64]| 3.0, &[1.0, 2.0], 1e-5).unwrap(), vec![0.0, 0.0]);
        let g = fd_gradient(|t: &[f64]| t[0].sin(), &[0.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-10);

        let h = fd_hessian_diag(half_sq, &[0.3, -1.0], 1e-4).unwrap();
        assert!(h.iter().all(|v| (v - 1.0).abs() < 1e-6));
        let h = fd_hessian_diag(|t: &[f64]| 2.0 * t[0] - t[1], &[0.3, -1.0], 1e-4).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1e-6));
        let h = fd_hessian_diag(|t: &[f64]| -t[0].cos(), &[0.0], 1e-4).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fd_non_finite_names_coordinate() {
        let f = |t: &[f64]| if t[1] >= 0.0 { t[1] } else { f64::NAN };
        assert!(matches!(fd_gradient(f, &[1.0, 0.0], 1e-3), Err(Error::NonFiniteStencil { coordinate: 1 })));
        assert!(matches!(fd_hessian_diag(f, &[1.0, 1e-4], 1e-3), Err(Error::NonFiniteStencil { coordinate: 1 })));
    }

    #[test]
    fn mc_entropy_examples() {
        let h1 = 0.5 * (LN_2PI + 1.0);
        let q = MixtureApproximation::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let (e, se) = mc_entropy(&q, 100_000, 1).unwrap();
        assert!((e - h1).abs() < 0.01 && se > 0.0);
        let q = MixtureApproximation::new(vec![vec![0.0; 3]], vec![1.0]).unwrap();
        let (e, _) = mc_entropy(&q, 100_000, 2).unwrap();
        assert!((e - 3.0 * h1).abs() < 0.02);
        assert_eq!(mc_entropy(&q, 2000, 5).unwrap(), mc_entropy(&q, 2000, 5).unwrap());
        assert!(mc_entropy(&q, 999, 5).is_err());
    }

    #[test]
    fn grid_examples() {
        let g = GridSpec::uniform(1, -8.0, 8.0, 2001).unwrap();
        let lognorm = |t: &[f64]| -0.5 * t[0] * t[0] - 0.5 * LN_2PI;
        assert!(grid_log_integral(lognorm, &g).abs() < 1e-6);
        assert!((grid_log_integral(|t: &[f64]| lognorm(t) + 5f64.ln(), &g) - 5f64.ln()).abs() < 1e-6);

        let g = GridSpec::uniform(1, -12.0, 12.0, 3001).unwrap();
        let m = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        assert!(grid_log_evidence(&m, &g).unwrap().abs() < 1e-6);

        let g = GridSpec::uniform(2, -12.0, 12.0, 401).unwrap();
        let m = gaussian_target(vec![0.0; 2], vec![1.0; 2]).unwrap();
        assert!(grid_log_evidence(&m, &g).unwrap().abs() < 1e-5);
    }

    #[test]
    fn grid_boundary_check() {
        let g = GridSpec::uniform(1, -8.0, 8.0, 2001).unwrap();
        let m = gaussian_target(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(grid_log_evidence(&m, &g), Err(Error::GridTooSmall { .. })));
        assert!(GridSpec::uniform(1, -1.0, 1.0, 15).is_err());
        assert!(GridSpec::uniform(3, -1.0, 1.0, 20).is_err());
    }

    #[test]
    fn local_maxima_refine() {
        let f = |t: &[f64]| {
            let a = -2.0 * ((t[0] - 1.234567).powi(2) + (t[1] + 0.5).powi(2));
            let b = -2.0 * ((t[0] + 2.0).powi(2) + (t[1] - 1.1).powi(2)) - 1.0;
            log_sum_exp(&[a, b])
        };
        let g = GridSpec::uniform(2, -5.0, 5.0, 41).unwrap();
        let maxima = grid_local_maxima(f, &g, 1e-5);
        assert_eq!(maxima.len(), 2);
        assert!((maxima[0].0[0] - 1.234567).abs() < 1e-4 && (maxima[0].0[1] + 0.5).abs() < 1e-4);
        assert!((maxima[1].0[0] + 2.0).abs() < 1e-3);
    }
}
