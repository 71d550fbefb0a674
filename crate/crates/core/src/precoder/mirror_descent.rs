//! Entropic mirror descent on the probability simplex.
//!
//! Each step is the KL-prox update `lambda_k <- lambda_k exp(-eta g_k) / Z`.
//! The step `eta` is found by backtracking so that the sufficient-decrease
//! inequality `f(lambda+) <= f(lambda) + <g, lambda+ - lambda> + KL(lambda+, lambda) / eta`
//! holds, starting each iteration from twice the previously accepted step.
//!
//! Stationarity is measured by `sum_k lambda_k g_k - min_k g_k`, which is zero
//! exactly at KKT points of the simplex-constrained problem. For the Huber dual
//! it also equals the primal-dual gap of the regularized relaxation at the
//! recovered primal point.

use serde::{Deserialize, Serialize};

use super::dual::{knee, value_and_gradient_at, DualVariable, Huber};
use super::CoefficientMatrix;

/// Outcome of an iterative inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    /// Backtracking could not find a decreasing step.
    Stalled,
}

impl SolverStatus {
    pub fn is_converged(self) -> bool {
        self == SolverStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MirrorDescentOptions {
    pub max_iterations: usize,
    /// Stopping threshold on the stationarity measure.
    pub tolerance: f64,
    /// Initial step as a multiple of `mu / max_k ||c_k||^2`.
    pub initial_step_scale: f64,
    pub shrink: f64,
    pub growth: f64,
    pub max_backtracks: usize,
    pub record_trace: bool,
}

impl Default for MirrorDescentOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tolerance: 1e-8,
            initial_step_scale: 1.0,
            shrink: 0.5,
            growth: 2.0,
            max_backtracks: 100,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdTraceRecord {
    pub iteration: usize,
    pub value: f64,
    pub step: f64,
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorDescentResult {
    pub lambda: DualVariable,
    pub value: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    pub trace: Vec<MdTraceRecord>,
}

// Entries never drop below this so a coordinate zeroed by an aggressive step
// can regrow if its partial derivative later becomes the smallest.
const FLOOR: f64 = 1e-300;

fn stationarity(lambda: &[f64], grad: &[f64]) -> f64 {
    let min = grad.iter().copied().fold(f64::INFINITY, f64::min);
    lambda.iter().zip(grad).map(|(l, g)| l * (g - min)).sum()
}

struct Iterate {
    lambda: Vec<f64>,
    // C lambda
    y: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

impl Iterate {
    fn new(lambda: Vec<f64>, coeffs: &CoefficientMatrix, mu: f64) -> Self {
        let y = coeffs.apply(&lambda);
        let (value, grad) = value_and_gradient_at(&y, coeffs, mu);
        Self { lambda, y, value, grad }
    }
}

/// Candidate of one KL-prox step, with the increment `lambda+ - lambda` and
/// `KL(lambda+, lambda)` evaluated without cancellation.
struct Step {
    lambda: Vec<f64>,
    delta: Vec<f64>,
    kl: f64,
}

fn multiplicative_step(lambda: &[f64], grad: &[f64], eta: f64) -> Step {
    let min = grad.iter().copied().fold(f64::INFINITY, f64::min);
    // e_k = exp(-eta d_k) - 1, z = sum_j lambda_j e_j = Z - 1
    let e: Vec<f64> = grad.iter().map(|g| (-eta * (g - min)).exp_m1()).collect();
    let z: f64 = lambda.iter().zip(&e).map(|(l, ek)| l * ek).sum();
    let delta: Vec<f64> = lambda.iter().zip(&e).map(|(l, ek)| l * (ek - z) / (1.0 + z)).collect();
    let mut next: Vec<f64> = lambda
        .iter()
        .zip(&e)
        .map(|(l, ek)| (l * (1.0 + ek)).max(FLOOR))
        .collect();
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v /= sum);
    let kl = next
        .iter()
        .zip(lambda.iter().zip(&delta))
        .map(|(p, (q, d))| if *p > 0.0 { p * (d / q).ln_1p() } else { 0.0 })
        .sum();
    Step {
        lambda: next,
        delta,
        kl,
    }
}

/// `<grad f(lambda + delta) - grad f(lambda), delta>` from row increments, so the
/// result is accurate relative to the increment rather than to `f`.
fn gradient_increment(cur: &Iterate, delta: &[f64], coeffs: &CoefficientMatrix, huber: Huber) -> f64 {
    let s = coeffs.amplitude();
    let rho = huber.rho();
    let dy = coeffs.apply(delta);
    cur.y
        .iter()
        .zip(&dy)
        .map(|(&y, &d)| {
            let next = y + d;
            let dh = if y.abs() <= rho && next.abs() <= rho {
                d / rho
            } else {
                huber.derivative(next) - huber.derivative(y)
            };
            s * dh * d
        })
        .sum()
}

/// Minimizes the Huber dual `f_mu` over the simplex from the uniform point.
///
/// Backtracking accepts a step once
/// `<grad f(lambda+) - grad f(lambda), lambda+ - lambda> <= KL(lambda+, lambda) / eta`,
/// which implies the sufficient-decrease inequality above by convexity and stays
/// decidable when the decrease itself is below the rounding level of `f`.
pub fn mirror_descent(coeffs: &CoefficientMatrix, mu: f64, opts: &MirrorDescentOptions) -> MirrorDescentResult {
    let n = coeffs.cols();
    let huber = knee(coeffs, mu);
    let mut cur = Iterate::new(vec![1.0 / n as f64; n], coeffs, mu);
    let col_norm = coeffs.max_column_norm_sqr();
    let mut eta = if col_norm > 0.0 {
        opts.initial_step_scale * mu / col_norm
    } else {
        1.0
    };
    let mut trace = Vec::new();
    let mut status = SolverStatus::MaxIterations;
    let mut gap = stationarity(&cur.lambda, &cur.grad);
    let mut iterations = 0;

    for r in 0..opts.max_iterations {
        iterations = r;
        if opts.record_trace {
            trace.push(MdTraceRecord {
                iteration: r,
                value: cur.value,
                step: eta,
                stationarity: gap,
            });
        }
        if gap <= opts.tolerance {
            status = SolverStatus::Converged;
            break;
        }
        let mut step = eta * opts.growth;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let cand = multiplicative_step(&cur.lambda, &cur.grad, step);
            let curvature = gradient_increment(&cur, &cand.delta, coeffs, huber);
            if curvature <= cand.kl / step {
                accepted = Some(cand);
                break;
            }
            step *= opts.shrink;
        }
        match accepted {
            Some(cand) => {
                cur = Iterate::new(cand.lambda, coeffs, mu);
                eta = step;
                gap = stationarity(&cur.lambda, &cur.grad);
                iterations = r + 1;
            }
            None => {
                status = SolverStatus::Stalled;
                break;
            }
        }
    }
    if status == SolverStatus::MaxIterations && gap <= opts.tolerance {
        status = SolverStatus::Converged;
    }
    MirrorDescentResult {
        lambda: DualVariable::from_normalized(cur.lambda),
        value: cur.value,
        stationarity: gap,
        iterations,
        status,
        trace,
    }
}
