//! Smooth dual of the regularized box relaxation.
//!
//! For a fixed `lambda` the inner minimization over the box `[-s, s]^{2M}` of
//! `lambda^T C^T x + (mu/2)||x||^2` separates per coordinate; its negated value is
//! a sum of Huber functions of the rows of `C lambda`.

use std::ops::Deref;

use crate::error::{invalid, Result};

use super::CoefficientMatrix;

/// Huber function with knee `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Huber {
    rho: f64,
}

impl Huber {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(invalid("rho", format!("must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn value(&self, y: f64) -> f64 {
        if y.abs() <= self.rho {
            y * y / (2.0 * self.rho)
        } else {
            y.abs() - self.rho / 2.0
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        (y / self.rho).clamp(-1.0, 1.0)
    }
}

/// `h_rho(y)`: quadratic for `|y| <= rho`, linear beyond.
pub fn huber(y: f64, rho: f64) -> Result<f64> {
    Ok(Huber::new(rho)?.value(y))
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariable(Vec<f64>);

impl DualVariable {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(invalid("lambda", "empty"));
        }
        if lambda.iter().any(|&l| !(l >= 0.0)) {
            return Err(invalid("lambda", "entries must be nonnegative"));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("lambda", format!("entries sum to {sum}")));
        }
        Ok(Self(lambda))
    }

    pub(crate) fn from_normalized(lambda: Vec<f64>) -> Self {
        Self(lambda)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DualVariable {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn knee(coeffs: &CoefficientMatrix, mu: f64) -> Huber {
    Huber {
        rho: mu * coeffs.amplitude(),
    }
}

/// `f_mu(lambda) = s * sum_m h_{mu s}(cbar_m lambda)`.
///
/// Defined for any real `lambda` (not only simplex points) so that it can be
/// probed by finite differences.
pub fn dual_value(lambda: &[f64], coeffs: &CoefficientMatrix, mu: f64) -> f64 {
    let h = knee(coeffs, mu);
    let s = coeffs.amplitude();
    coeffs.apply(lambda).into_iter().map(|y| s * h.value(y)).sum()
}

/// Gradient of [`dual_value`]: `s * sum_m h'(cbar_m lambda) cbar_m^T`.
pub fn dual_gradient(lambda: &[f64], coeffs: &CoefficientMatrix, mu: f64) -> Vec<f64> {
    let h = knee(coeffs, mu);
    let s = coeffs.amplitude();
    let mut grad = vec![0.0; coeffs.cols()];
    for (m, y) in coeffs.apply(lambda).into_iter().enumerate() {
        let w = s * h.derivative(y);
        if w != 0.0 {
            for (g, c) in grad.iter_mut().zip(coeffs.row(m)) {
                *g += w * c;
            }
        }
    }
    grad
}

#[cfg(test)]
fn dual_value_and_gradient(lambda: &[f64], coeffs: &CoefficientMatrix, mu: f64) -> (f64, Vec<f64>) {
    value_and_gradient_at(&coeffs.apply(lambda), coeffs, mu)
}

/// Value and gradient given `y = C lambda`.
pub(crate) fn value_and_gradient_at(y: &[f64], coeffs: &CoefficientMatrix, mu: f64) -> (f64, Vec<f64>) {
    let h = knee(coeffs, mu);
    let s = coeffs.amplitude();
    let mut value = 0.0;
    let mut grad = vec![0.0; coeffs.cols()];
    for (m, &ym) in y.iter().enumerate() {
        value += s * h.value(ym);
        let w = s * h.derivative(ym);
        if w != 0.0 {
            for (g, c) in grad.iter_mut().zip(coeffs.row(m)) {
                *g += w * c;
            }
        }
    }
    (value, grad)
}

/// Minimizer of the inner problem: `x = -clip(C lambda / mu, -s, s)`.
pub fn recover_x(lambda: &[f64], coeffs: &CoefficientMatrix, mu: f64) -> Vec<f64> {
    let s = coeffs.amplitude();
    coeffs
        .apply(lambda)
        .into_iter()
        .map(|y| -(y / mu).clamp(-s, s))
        .collect()
}

/// Lagrangian lower bound `-s ||C lambda||_1` on the unregularized box relaxation
/// (and hence on every one-bit objective) at an arbitrary simplex point.
pub fn box_lower_bound(lambda: &[f64], coeffs: &CoefficientMatrix) -> f64 {
    -coeffs.amplitude() * coeffs.apply(lambda).iter().map(|y| y.abs()).sum::<f64>()
}
