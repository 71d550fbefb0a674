//! Exhaustive search over one-bit sign patterns, used as a test oracle.

use crate::error::{Error, Result};

use super::{worst_objective, CoefficientMatrix};

/// Largest lifted dimension accepted by [`brute_force_onebit`].
pub const MAX_ENUMERATION_BITS: usize = 24;

/// Minimizes `worst_objective` over the coordinates in `free` with all other
/// entries of `x` fixed. Walks the sign patterns in Gray-code order so each step
/// flips one entry.
pub(crate) fn enumerate_free(x: &[f64], free: &[usize], coeffs: &CoefficientMatrix) -> (Vec<f64>, f64) {
    let mut x = x.to_vec();
    for &m in free {
        x[m] = -x[m].abs();
    }
    let mut v = coeffs.apply_transpose(&x);
    let mut best_obj = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best_code = 0u64;
    let mut code = 0u64;
    for i in 1u64..(1u64 << free.len()) {
        let bit = i.trailing_zeros() as usize;
        let m = free[bit];
        let delta = -2.0 * x[m];
        x[m] = -x[m];
        code ^= 1 << bit;
        if i % 4096 == 0 {
            v = coeffs.apply_transpose(&x);
        } else {
            for (a, c) in v.iter_mut().zip(coeffs.row(m)) {
                *a += delta * c;
            }
        }
        let obj = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if obj < best_obj {
            best_obj = obj;
            best_code = code;
        }
    }
    for (bit, &m) in free.iter().enumerate() {
        x[m] = if best_code >> bit & 1 == 1 {
            x[m].abs()
        } else {
            -x[m].abs()
        };
    }
    let obj = worst_objective(&x, coeffs);
    (x, obj)
}

/// Global minimizer of `max_k c_k^T x` over `{-s, +s}^{2M}`.
pub fn brute_force_onebit(coeffs: &CoefficientMatrix) -> Result<(Vec<f64>, f64)> {
    let bits = coeffs.rows();
    if bits > MAX_ENUMERATION_BITS {
        return Err(Error::EnumerationTooLarge(bits));
    }
    let start = vec![coeffs.amplitude(); bits];
    let free: Vec<usize> = (0..bits).collect();
    Ok(enumerate_free(&start, &free, coeffs))
}
