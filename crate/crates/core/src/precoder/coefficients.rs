use num_complex::Complex64;

use crate::constellation::PskConstellation;
use crate::error::{invalid, Error, Result};

/// Real `2M x 2K` matrix whose columns `c_k` turn the worst-user margin into
/// `max_k c_k^T x`, together with the one-bit amplitude `s = sqrt(P/2M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    rows: usize,
    cols: usize,
    // row-major, rows index the lifted antenna dimension
    data: Vec<f64>,
    amplitude: f64,
}

impl CoefficientMatrix {
    /// Assembles `C` from its columns (each of length `2M`).
    pub fn from_columns(columns: &[Vec<f64>], amplitude: f64) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::DimensionMismatch("no columns".into()));
        }
        let rows = columns[0].len();
        if rows == 0 || columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged or empty columns".into()));
        }
        if !(amplitude >= 0.0) {
            return Err(invalid("amplitude", "must be nonnegative"));
        }
        let mut data = vec![0.0; rows * cols];
        for (k, col) in columns.iter().enumerate() {
            for (m, &v) in col.iter().enumerate() {
                data[m * cols + k] = v;
            }
        }
        Ok(Self {
            rows,
            cols,
            data,
            amplitude,
        })
    }

    /// Number of lifted transmit dimensions `2M`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of constraints `2K`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.data[m * self.cols + k]
    }

    /// Row `m` (the coefficients of `x_m` in every constraint).
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|m| self.get(m, k)).collect()
    }

    /// `C lambda`.
    pub fn apply(&self, lambda: &[f64]) -> Vec<f64> {
        debug_assert_eq!(lambda.len(), self.cols);
        (0..self.rows)
            .map(|m| self.row(m).iter().zip(lambda).map(|(c, l)| c * l).sum())
            .collect()
    }

    /// `C^T x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (m, &xm) in x.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.row(m)) {
                *o += c * xm;
            }
        }
        out
    }

    /// Largest squared column norm, used to seed step sizes.
    pub fn max_column_norm_sqr(&self) -> f64 {
        (0..self.cols)
            .map(|k| (0..self.rows).map(|m| self.get(m, k).powi(2)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Builds the per-slot constraint matrix from the users' effective channel rows
/// `h_k^H` and their intended symbols.
///
/// With `g = s_k^* h_k^H`, `a_k = [Re g; -Im g]`, `b_k = cot(pi/L) [Im g; Re g]`,
/// columns `k < K` are `-a_k + b_k` and columns `K + k` are `-a_k - b_k`.
pub fn build_coefficients(
    h_eff: &[Vec<Complex64>],
    symbols: &[Complex64],
    constellation: &PskConstellation,
    power: f64,
) -> Result<CoefficientMatrix> {
    let users = h_eff.len();
    if users == 0 {
        return Err(Error::DimensionMismatch("no users".into()));
    }
    if symbols.len() != users {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols for {users} users",
            symbols.len()
        )));
    }
    let antennas = h_eff[0].len();
    if antennas == 0 || h_eff.iter().any(|h| h.len() != antennas) {
        return Err(Error::DimensionMismatch("ragged effective channels".into()));
    }
    if !(power > 0.0) {
        return Err(invalid("power", "must be positive"));
    }
    let cot = constellation.cot();
    let mut plus = Vec::with_capacity(users);
    let mut minus = Vec::with_capacity(users);
    for (h, s) in h_eff.iter().zip(symbols) {
        let g: Vec<Complex64> = h.iter().map(|z| s.conj() * z).collect();
        let a: Vec<f64> = g.iter().map(|z| z.re).chain(g.iter().map(|z| -z.im)).collect();
        let b: Vec<f64> = g
            .iter()
            .map(|z| cot * z.im)
            .chain(g.iter().map(|z| cot * z.re))
            .collect();
        plus.push(a.iter().zip(&b).map(|(a, b)| -a + b).collect::<Vec<_>>());
        minus.push(a.iter().zip(&b).map(|(a, b)| -a - b).collect::<Vec<_>>());
    }
    plus.extend(minus);
    CoefficientMatrix::from_columns(&plus, (power / (2 * antennas) as f64).sqrt())
}

/// `max_k c_k^T x`.
pub fn worst_objective(x: &[f64], coeffs: &CoefficientMatrix) -> f64 {
    coeffs.apply_transpose(x).into_iter().fold(f64::NEG_INFINITY, f64::max)
}
