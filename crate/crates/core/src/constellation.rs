//! PSK constellation geometry, decision regions and safety margins.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Gaussian tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Binary-reflected Gray label of symbol index `index` in an `order`-ary alphabet.
pub fn gray_code(index: usize, order: usize) -> Result<u32> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(order));
    }
    if index >= order {
        return Err(Error::IndexOutOfRange { index, len: order });
    }
    let i = index as u32;
    Ok(i ^ (i >> 1))
}

/// L-ary PSK alphabet `{exp(j 2 pi l / L)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct PskConstellation {
    order: usize,
    points: Vec<Complex64>,
    cot: f64,
    sin: f64,
}

impl PskConstellation {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 2 | 4 | 8 | 16) {
            return Err(Error::UnsupportedOrder(order));
        }
        let points = (0..order)
            .map(|l| Complex64::from_polar(1.0, 2.0 * PI * l as f64 / order as f64))
            .collect();
        // cot(pi/2) evaluates to ~6e-17; BPSK has no angular constraint.
        let cot = if order == 2 {
            0.0
        } else {
            1.0 / (PI / order as f64).tan()
        };
        Ok(Self {
            order,
            points,
            cot,
            sin: (PI / order as f64).sin(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    /// `cot(pi/L)`, exactly zero for BPSK.
    pub fn cot(&self) -> f64 {
        self.cot
    }

    /// `sin(pi/L)`.
    pub fn sin(&self) -> f64 {
        self.sin
    }

    /// Index of the decision sector containing `y`.
    ///
    /// Sector `l` is the half-open phase interval `[2 pi l/L - pi/L, 2 pi l/L + pi/L)`.
    /// Points within 1e-12 (in units of sectors) below an upper boundary are
    /// snapped onto it, so `exp(j pi/4)` decides to index 1 for QPSK despite
    /// rounding in `atan2`. `y = 0` decides to index 0.
    pub fn decide_index(&self, y: Complex64) -> usize {
        let sector = 2.0 * PI / self.order as f64;
        let u = (y.arg() + PI / self.order as f64) / sector;
        let l = (u + 1e-12).floor() as i64;
        l.rem_euclid(self.order as i64) as usize
    }

    /// Hard decision `dec(y)`.
    pub fn decide(&self, y: Complex64) -> Complex64 {
        self.points[self.decide_index(y)]
    }

    /// Safety margin `Re z - |Im z| cot(pi/L)` of a rotated noise-free receive point.
    pub fn margin(&self, z: Complex64) -> f64 {
        z.re - z.im.abs() * self.cot
    }

    /// Upper bound `2 Q(alpha sin(pi/L) / (sigma/sqrt 2))` on the symbol error probability.
    ///
    /// The raw value lies in `[0, 2]`; use [`PskConstellation::sep_probability`] for a
    /// clipped probability.
    pub fn sep_upper_bound(&self, alpha: f64, sigma2: f64) -> Result<f64> {
        if !(sigma2 > 0.0) {
            return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
        }
        let scale = (sigma2 / 2.0).sqrt();
        Ok(2.0 * q_function(alpha * self.sin / scale))
    }

    pub fn sep_probability(&self, alpha: f64, sigma2: f64) -> Result<f64> {
        self.sep_upper_bound(alpha, sigma2).map(|p| p.min(1.0))
    }

    pub fn gray_label(&self, index: usize) -> u32 {
        let i = index as u32;
        i ^ (i >> 1)
    }

    /// Number of differing Gray bits between two symbol indices.
    pub fn bit_errors(&self, sent: usize, decided: usize) -> u32 {
        (self.gray_label(sent) ^ self.gray_label(decided)).count_ones()
    }
}

impl TryFrom<usize> for PskConstellation {
    type Error = Error;

    fn try_from(order: usize) -> Result<Self> {
        Self::new(order)
    }
}

impl From<PskConstellation> for usize {
    fn from(c: PskConstellation) -> usize {
        c.order
    }
}

/// `K x T` block of intended symbols, stored as constellation indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolFrame {
    constellation: PskConstellation,
    users: usize,
    slots: usize,
    // row-major by user
    indices: Vec<usize>,
}

impl SymbolFrame {
    /// Builds a frame from per-user index rows (`rows[k][t]`).
    pub fn from_indices(constellation: PskConstellation, rows: Vec<Vec<usize>>) -> Result<Self> {
        let users = rows.len();
        if users == 0 {
            return Err(invalid("symbols", "at least one user required"));
        }
        let slots = rows[0].len();
        if slots == 0 {
            return Err(invalid("symbols", "at least one slot required"));
        }
        let mut indices = Vec::with_capacity(users * slots);
        for row in rows {
            if row.len() != slots {
                return Err(Error::DimensionMismatch(format!(
                    "symbol row has {} slots, expected {slots}",
                    row.len()
                )));
            }
            for l in row {
                if l >= constellation.order() {
                    return Err(Error::IndexOutOfRange {
                        index: l,
                        len: constellation.order(),
                    });
                }
                indices.push(l);
            }
        }
        Ok(Self {
            constellation,
            users,
            slots,
            indices,
        })
    }

    /// Uniformly random symbols.
    pub fn random<R: Rng + ?Sized>(
        constellation: PskConstellation,
        users: usize,
        slots: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let order = constellation.order();
        let rows = (0..users)
            .map(|_| (0..slots).map(|_| rng.random_range(0..order)).collect())
            .collect();
        Self::from_indices(constellation, rows)
    }

    pub fn constellation(&self) -> &PskConstellation {
        &self.constellation
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn index(&self, k: usize, t: usize) -> usize {
        self.indices[k * self.slots + t]
    }

    pub fn symbol(&self, k: usize, t: usize) -> Complex64 {
        self.constellation.point(self.index(k, t))
    }

    /// Symbols of all users in slot `t`.
    pub fn slot(&self, t: usize) -> Vec<Complex64> {
        (0..self.users).map(|k| self.symbol(k, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) <= 1e-300);
        // mpmath ncdf(-1.6449)
        assert_relative_eq!(q_function(1.6449), 0.0499952174683463, max_relative = 1e-12);
        assert_relative_eq!(q_function(3.0), 0.0013498980316300946, max_relative = 1e-12);
        assert_relative_eq!(q_function(8.0), 6.220960574271784e-16, max_relative = 1e-12);
        assert_relative_eq!(q_function(20.0), 2.7536241186062337e-89, max_relative = 1e-12);
    }

    #[test]
    fn q_function_is_monotone() {
        let mut prev = q_function(-10.0);
        for i in -999..1000 {
            let q = q_function(i as f64 * 0.01);
            assert!(q <= prev && (0.0..=1.0).contains(&q));
            prev = q;
        }
    }

    #[test]
    fn construction_rejects_unsupported_orders() {
        for l in [0, 1, 3, 6, 32] {
            assert_eq!(PskConstellation::new(l), Err(Error::UnsupportedOrder(l)));
        }
        for l in [2, 4, 8, 16] {
            let c = PskConstellation::new(l).unwrap();
            let mut prev = -1.0;
            for p in c.points() {
                assert!((p.norm() - 1.0).abs() < 1e-12);
                let phase = p.arg().rem_euclid(2.0 * PI);
                assert!(phase > prev);
                prev = phase;
            }
        }
    }

    #[test]
    fn decide_examples() {
        let c = PskConstellation::new(4).unwrap();
        assert_eq!(c.decide_index(Complex64::new(1.0, 0.1)), 0);
        assert_eq!(c.decide_index(Complex64::new(-1.0, 0.0)), 2);
        assert!((c.decide(Complex64::new(-1.0, 0.0)) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(c.decide_index(Complex64::from_polar(1.0, PI / 4.0)), 1);
        assert_eq!(c.decide_index(Complex64::new(0.0, 0.0)), 0);
        // lower boundary of sector 0 belongs to sector 0
        assert_eq!(c.decide_index(Complex64::from_polar(1.0, -PI / 4.0)), 0);
    }

    #[test]
    fn margin_examples() {
        let qpsk = PskConstellation::new(4).unwrap();
        let bpsk = PskConstellation::new(2).unwrap();
        assert_relative_eq!(qpsk.margin(Complex64::new(2.0, 0.0)), 2.0);
        assert_relative_eq!(qpsk.margin(Complex64::new(1.0, 0.5)), 0.5, epsilon = 1e-15);
        assert_eq!(bpsk.margin(Complex64::new(1.0, 5.0)), 1.0);
    }

    #[test]
    fn sep_bound_examples() {
        let c = PskConstellation::new(4).unwrap();
        assert_relative_eq!(c.sep_upper_bound(0.0, 0.3).unwrap(), 1.0);
        assert!(c.sep_upper_bound(1e3, 1.0).unwrap() < 1e-300);
        assert_relative_eq!(
            c.sep_upper_bound(1.0, 2.0).unwrap(),
            0.4795001221869535,
            max_relative = 1e-12
        );
        assert!(c.sep_upper_bound(1.0, 0.0).is_err());
        assert!(c.sep_upper_bound(1.0, -1.0).is_err());
        assert!(c.sep_upper_bound(-3.0, 1.0).unwrap() > 1.0);
        assert_eq!(c.sep_probability(-3.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn sep_bound_monotonicity() {
        let c = PskConstellation::new(8).unwrap();
        for i in 0..50 {
            let a = i as f64 * 0.1;
            assert!(c.sep_upper_bound(a + 0.1, 1.0).unwrap() <= c.sep_upper_bound(a, 1.0).unwrap());
            assert!(c.sep_upper_bound(a, 1.0).unwrap() <= c.sep_upper_bound(a, 1.5).unwrap());
        }
    }

    #[test]
    fn gray_labels() {
        let labels: Vec<u32> = (0..4).map(|l| gray_code(l, 4).unwrap()).collect();
        assert_eq!(labels, vec![0b00, 0b01, 0b11, 0b10]);
        for order in [2usize, 4, 8, 16] {
            let c = PskConstellation::new(order).unwrap();
            for l in 0..order {
                let next = (l + 1) % order;
                assert_eq!(c.bit_errors(l, next), 1, "L={order} l={l}");
            }
        }
        assert_eq!(gray_code(1, 6), Err(Error::NotPowerOfTwo(6)));
        assert!(gray_code(4, 4).is_err());
    }

    #[test]
    fn sector_margin_consistency_on_a_grid() {
        for order in [2usize, 4, 8, 16] {
            let c = PskConstellation::new(order).unwrap();
            for i in -60..=60 {
                for j in -60..=60 {
                    let z = Complex64::new(i as f64 * 0.05, j as f64 * 0.05);
                    let alpha = c.margin(z);
                    if c.decide_index(z) != 0 {
                        assert!(alpha <= 1e-12, "L={order} z={z} alpha={alpha}");
                    }
                    if alpha > 1e-12 {
                        assert_eq!(c.decide_index(z), 0, "L={order} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn empirical_error_rate_respects_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sigma2 = 0.5;
        for (order, z) in [
            (4usize, Complex64::new(1.0, 0.2)),
            (8, Complex64::new(1.5, 0.1)),
            (2, Complex64::new(0.4, 3.0)),
        ] {
            let c = PskConstellation::new(order).unwrap();
            let s = c.point(1);
            let n_draws = 100_000;
            let sd = (sigma2 / 2.0f64).sqrt();
            let mut errors = 0usize;
            for _ in 0..n_draws {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let y = z * s + Complex64::new(re, im) * sd;
                if c.decide_index(y) != 1 {
                    errors += 1;
                }
            }
            let bound = c.sep_probability(c.margin(z), sigma2).unwrap();
            let rate = errors as f64 / n_draws as f64;
            let mc_sd = (bound * (1.0 - bound) / n_draws as f64).sqrt();
            assert!(rate <= bound + 3.0 * mc_sd, "L={order}: rate {rate} bound {bound}");
        }
    }

    proptest! {
        #[test]
        fn decision_is_rotation_covariant(re in -5.0f64..5.0, im in -5.0f64..5.0, l in 0usize..8) {
            let c = PskConstellation::new(8).unwrap();
            let y = Complex64::new(re, im);
            prop_assume!(y.norm() > 1e-6);
            // stay away from sector boundaries
            let frac = (y.arg() / (2.0 * PI / 8.0) + 0.5).rem_euclid(1.0);
            prop_assume!(frac > 1e-6 && frac < 1.0 - 1e-6);
            let rotated = y * c.point(l);
            prop_assert_eq!(c.decide_index(rotated), (c.decide_index(y) + l) % 8);
        }
    }
}
