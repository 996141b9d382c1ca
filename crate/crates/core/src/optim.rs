//! Limited-memory BFGS maximizer.
//!
//! Internally this minimizes the negated objective with the standard
//! two-loop recursion and a backtracking Armijo line search. After a step is
//! accepted, the minimizer of the quadratic interpolating the line search
//! data is tried once; it is kept only if it improves the objective. On
//! quadratics this makes the line search exact.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, inf_norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the infinity norm of the gradient falls below this.
    pub gradient_tolerance: f64,
    /// Sufficient-increase constant of the Armijo condition.
    pub armijo: f64,
    /// Step contraction factor during backtracking.
    pub contraction: f64,
    pub max_halvings: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { memory: 10, max_iterations: 100, gradient_tolerance: 1e-6, armijo: 1e-4, contraction: 0.5, max_halvings: 60 }
    }
}

impl OptimOptions {
    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_gradient_tolerance(mut self, tol: f64) -> Self {
        self.gradient_tolerance = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.memory < 1 {
            return Err(Error::Config("L-BFGS memory must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0 && self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Config("L-BFGS tolerances must be positive (armijo in (0,1))".into()));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::Config("line-search contraction must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimReport {
    pub argmax: Vec<f64>,
    /// Objective at `argmax`, as last evaluated.
    pub value: f64,
    pub iterations: usize,
    pub status: OptimStatus,
    /// Objective at each accepted iterate, starting with `x0`.
    pub trace: Vec<f64>,
}

/// Maximizes `objective` from `x0` given its `gradient`.
pub fn maximize<F, G>(objective: F, gradient: G, x0: &[f64], opts: &OptimOptions) -> Result<OptimReport>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    opts.validate()?;
    let mut objective = objective;
    let mut gradient = gradient;
    // Minimize phi = -objective.
    let mut x = x0.to_vec();
    let mut fx = -objective(&x);
    if !fx.is_finite() {
        return Err(Error::Input(format!("objective is not finite at the starting point ({})", -fx)));
    }
    let mut g: Vec<f64> = gradient(&x).into_iter().map(|v| -v).collect();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("gradient is not finite at the starting point".into()));
    }

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut trace = vec![-fx];
    let mut iterations = 0;

    let status = loop {
        if inf_norm(&g) < opts.gradient_tolerance {
            break OptimStatus::Converged;
        }
        if iterations >= opts.max_iterations {
            break OptimStatus::MaxIterations;
        }

        let mut dir = two_loop(&g, &pairs);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || dir.iter().any(|v| !v.is_finite()) {
            pairs.clear();
            dir = steepest(&g);
            slope = dot(&g, &dir);
        }

        let Some((alpha, mut x_new, mut f_new)) = backtrack(&mut objective, &x, fx, &dir, slope, opts) else {
            if pairs.is_empty() {
                break OptimStatus::LineSearchFailure;
            }
            // Retry from steepest ascent with a fresh memory.
            pairs.clear();
            continue;
        };

        // Quadratic refinement along the line.
        let curvature = f_new - fx - slope * alpha;
        if curvature > 0.0 {
            let alpha_q = -slope * alpha * alpha / (2.0 * curvature);
            if alpha_q.is_finite() && alpha_q > 0.0 && (alpha_q - alpha).abs() > 1e-12 * alpha {
                let x_q: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha_q * di).collect();
                let f_q = -objective(&x_q);
                if f_q.is_finite() && f_q < f_new {
                    x_new = x_q;
                    f_new = f_q;
                }
            }
        }

        let g_new: Vec<f64> = gradient(&x_new).into_iter().map(|v| -v).collect();
        if g_new.iter().any(|v| !v.is_finite()) {
            break OptimStatus::LineSearchFailure;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
        trace.push(-fx);
    };

    Ok(OptimReport { argmax: x, value: -fx, iterations, status, trace })
}

fn steepest(g: &[f64]) -> Vec<f64> {
    let norm = dot(g, g).sqrt();
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    g.iter().map(|v| -v * scale).collect()
}

/// `-H g` from the stored pairs, with the usual `s'y / y'y` initial scaling.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    if pairs.is_empty() {
        return steepest(g);
    }
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = pairs.back().unwrap();
    let gamma = dot(s, y) / dot(y, y);
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Armijo backtracking on the minimized function. Non-finite trial values
/// count as failures and shrink the step.
fn backtrack<F: FnMut(&[f64]) -> f64>(
    objective: &mut F,
    x: &[f64],
    fx: f64,
    dir: &[f64],
    slope: f64,
    opts: &OptimOptions,
) -> Option<(f64, Vec<f64>, f64)> {
    let mut alpha = 1.0;
    for _ in 0..=opts.max_halvings {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        let f = -objective(&trial);
        if f.is_finite() && f <= fx + opts.armijo * alpha * slope && f < fx {
            return Some((alpha, trial, f));
        }
        alpha *= opts.contraction;
    }
    None
}
