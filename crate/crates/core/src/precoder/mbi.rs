//! Maximum-block-improvement rounding of the fractional entries of a relaxed
//! transmit vector onto `{-s, +s}`.

use rand::Rng;

use super::{worst_objective, CoefficientMatrix};

/// Relative distance below the amplitude at which an entry counts as fractional.
pub const FRACTIONAL_TOLERANCE: f64 = 1e-6;

/// Indices `m` with `|x_m| < s (1 - 1e-6)`.
pub fn fractional_set(x: &[f64], amplitude: f64) -> Vec<usize> {
    let threshold = amplitude * (1.0 - FRACTIONAL_TOLERANCE);
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() < threshold)
        .map(|(m, _)| m)
        .collect()
}

fn signed(v: f64, amplitude: f64) -> f64 {
    if v < 0.0 {
        -amplitude
    } else {
        amplitude
    }
}

/// Elementwise sign rounding, zero mapped to `+s`.
pub fn sign_round(x: &[f64], amplitude: f64) -> Vec<f64> {
    x.iter().map(|&v| signed(v, amplitude)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbiResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub fractional: Vec<usize>,
    /// Final objective of every restart, in order.
    pub restart_objectives: Vec<f64>,
}

/// Greedy single-flip descent over `free`; returns the final objective.
///
/// Every pass evaluates all flips and applies the single best one (lowest
/// index on ties); a pass without strict improvement terminates.
fn improve(x: &mut [f64], free: &[usize], coeffs: &CoefficientMatrix) -> f64 {
    let mut v = coeffs.apply_transpose(x);
    let mut current = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    loop {
        let mut best: Option<(usize, f64)> = None;
        for &m in free {
            let delta = -2.0 * x[m];
            let flipped = v
                .iter()
                .zip(coeffs.row(m))
                .map(|(a, c)| a + delta * c)
                .fold(f64::NEG_INFINITY, f64::max);
            if flipped < best.map_or(current, |b| b.1) {
                best = Some((m, flipped));
            }
        }
        match best {
            Some((m, _)) => {
                x[m] = -x[m];
                v = coeffs.apply_transpose(x);
                current = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            None => return current,
        }
    }
}

/// Rounds `x_relaxed` to a one-bit vector.
///
/// Saturated entries keep their sign; the fractional set is searched by MBI
/// from `restarts` starting points. The first start is the sign pattern of
/// `x_relaxed`, the others are i.i.d. uniform signs. The best restart is
/// returned (earliest on ties).
pub fn mbi_round<R: Rng + ?Sized>(
    x_relaxed: &[f64],
    coeffs: &CoefficientMatrix,
    restarts: usize,
    rng: &mut R,
) -> MbiResult {
    let s = coeffs.amplitude();
    let fractional = fractional_set(x_relaxed, s);
    let base = sign_round(x_relaxed, s);
    let restarts = restarts.max(1);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut restart_objectives = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut x = base.clone();
        if r > 0 {
            for &m in &fractional {
                x[m] = if rng.random::<bool>() { s } else { -s };
            }
        }
        let obj = if fractional.is_empty() {
            worst_objective(&x, coeffs)
        } else {
            improve(&mut x, &fractional, coeffs)
        };
        restart_objectives.push(obj);
        if best.as_ref().is_none_or(|b| obj < b.1) {
            best = Some((x, obj));
        }
        if fractional.is_empty() {
            break;
        }
    }
    let (x, objective) = best.expect("at least one restart");
    MbiResult {
        x,
        objective,
        fractional,
        restart_objectives,
    }
}
