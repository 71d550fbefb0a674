//! Per-slot one-bit transmit design.
//!
//! The one-bit problem `min max_k c_k^T x` over `{-s, +s}^{2M}` is relaxed to the
//! box with a `(mu/2)||x||^2` regularizer, solved through its `2K`-dimensional
//! Huber dual by mirror descent, and the few entries left strictly inside the box
//! are rounded by maximum-block-improvement search.

mod brute_force;
mod coefficients;
mod dual;
mod mbi;
mod mirror_descent;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::PskConstellation;
use crate::error::{invalid, Error, Result};

pub use brute_force::{brute_force_onebit, MAX_ENUMERATION_BITS};
pub use coefficients::{build_coefficients, worst_objective, CoefficientMatrix};
pub use dual::{box_lower_bound, dual_gradient, dual_value, huber, recover_x, DualVariable, Huber};
pub use mbi::{fractional_set, mbi_round, sign_round, MbiResult, FRACTIONAL_TOLERANCE};
pub use mirror_descent::{mirror_descent, MdTraceRecord, MirrorDescentOptions, MirrorDescentResult, SolverStatus};

/// `T x M` complex transmit block, one row per slot.
pub type ComplexFrame = Vec<Vec<Complex64>>;

/// `[Re x; Im x]`.
pub fn lift(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)).collect()
}

/// Inverse of [`lift`].
pub fn unlift(x: &[f64]) -> Vec<Complex64> {
    let m = x.len() / 2;
    (0..m).map(|i| Complex64::new(x[i], x[i + m])).collect()
}

/// One-bit transmit block: every real and imaginary part equals `+-s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneBitFrame {
    amplitude: f64,
    slots: Vec<Vec<f64>>,
}

impl OneBitFrame {
    /// Builds a frame from lifted slot vectors, checking the alphabet exactly.
    pub fn new(amplitude: f64, slots: Vec<Vec<f64>>) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(invalid("amplitude", "must be positive"));
        }
        let len = slots.first().map_or(0, Vec::len);
        if len == 0 || !len.is_multiple_of(2) || slots.iter().any(|x| x.len() != len) {
            return Err(Error::DimensionMismatch(
                "one-bit slots must share an even length".into(),
            ));
        }
        if slots.iter().flatten().any(|v| v.abs() != amplitude) {
            return Err(invalid("slots", "entry outside {-s, +s}"));
        }
        Ok(Self { amplitude, slots })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn antennas(&self) -> usize {
        self.slots[0].len() / 2
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn lifted(&self, t: usize) -> &[f64] {
        &self.slots[t]
    }

    pub fn slot(&self, t: usize) -> Vec<Complex64> {
        unlift(&self.slots[t])
    }

    pub fn to_complex(&self) -> ComplexFrame {
        (0..self.len()).map(|t| self.slot(t)).collect()
    }
}

/// One-bit amplitude `sqrt(P / 2M)`.
pub fn one_bit_amplitude(power: f64, antennas: usize) -> f64 {
    (power / (2 * antennas) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecoderOptions {
    /// Regularization weight of the box relaxation.
    pub mu: f64,
    pub mirror_descent: MirrorDescentOptions,
    pub mbi_restarts: usize,
}

impl Default for PrecoderOptions {
    fn default() -> Self {
        Self {
            mu: 5e-4,
            mirror_descent: MirrorDescentOptions::default(),
            mbi_restarts: 5,
        }
    }
}

impl PrecoderOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(invalid("mu", "must be positive"));
        }
        if self.mbi_restarts == 0 {
            return Err(invalid("mbi_restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Solution of the regularized box relaxation for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub coeffs: CoefficientMatrix,
    pub lambda: DualVariable,
    /// Lifted box-feasible transmit vector.
    pub x: Vec<f64>,
    /// `-f_mu(lambda*)`, the optimal value of the regularized relaxation.
    pub regularized_value: f64,
    /// `-s ||C lambda*||_1`, a lower bound on every one-bit objective.
    pub lower_bound: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub status: SolverStatus,
}

/// Relaxed (box) design of one slot.
pub fn relax_symbol(
    h_eff: &[Vec<Complex64>],
    symbols: &[Complex64],
    constellation: &PskConstellation,
    power: f64,
    opts: &PrecoderOptions,
) -> Result<RelaxedSolution> {
    opts.validate()?;
    let coeffs = build_coefficients(h_eff, symbols, constellation, power)?;
    let md = mirror_descent(&coeffs, opts.mu, &opts.mirror_descent);
    let x = recover_x(&md.lambda, &coeffs, opts.mu);
    let lower_bound = box_lower_bound(&md.lambda, &coeffs);
    Ok(RelaxedSolution {
        x,
        regularized_value: -md.value,
        lower_bound,
        stationarity: md.stationarity,
        iterations: md.iterations,
        status: md.status,
        lambda: md.lambda,
        coeffs,
    })
}

/// One-bit design of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSolution {
    /// Lifted one-bit transmit vector.
    pub x: Vec<f64>,
    /// `max_k c_k^T x`, the negated worst margin.
    pub objective: f64,
    pub relaxed: RelaxedSolution,
    pub fractional: usize,
}

impl SymbolSolution {
    pub fn status(&self) -> SolverStatus {
        self.relaxed.status
    }
}

/// Relax, solve the dual, recover the primal and round with MBI.
pub fn solve_symbol<R: Rng + ?Sized>(
    h_eff: &[Vec<Complex64>],
    symbols: &[Complex64],
    constellation: &PskConstellation,
    power: f64,
    opts: &PrecoderOptions,
    rng: &mut R,
) -> Result<SymbolSolution> {
    let relaxed = relax_symbol(h_eff, symbols, constellation, power, opts)?;
    let rounded = mbi_round(&relaxed.x, &relaxed.coeffs, opts.mbi_restarts, rng);
    Ok(SymbolSolution {
        x: rounded.x,
        objective: rounded.objective,
        fractional: rounded.fractional.len(),
        relaxed,
    })
}
