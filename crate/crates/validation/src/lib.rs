//! Reference oracles for checking the solvers in `onebit_irs`: random
//! instance generators and an exhaustive joint search for tiny systems.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use onebit_irs::ao::worst_margin;
use onebit_irs::channel::{ChannelSet, PhaseShifts};
use onebit_irs::constellation::{PskConstellation, SymbolFrame};
use onebit_irs::precoder::{build_coefficients, one_bit_amplitude, CoefficientMatrix};
use onebit_irs::rng::{substream, StreamRng};

/// `rows x cols` matrix of i.i.d. `CN(0, 1)` entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<Complex64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
                })
                .collect()
        })
        .collect()
}

/// Coefficient matrix of one slot with i.i.d. Rayleigh effective channels and
/// uniformly drawn symbols, generated from substream `(seed, [tag])`.
pub fn random_instance(
    seed: u64,
    tag: u64,
    users: usize,
    antennas: usize,
    order: usize,
    power: f64,
) -> CoefficientMatrix {
    let mut rng: StreamRng = substream(seed, &[tag]);
    let c = PskConstellation::new(order).expect("valid PSK order");
    let h = gaussian_matrix(&mut rng, users, antennas);
    let symbols = SymbolFrame::random(c.clone(), users, 1, &mut rng).expect("valid frame");
    build_coefficients(&h, &symbols.slot(0), &c, power).expect("consistent dimensions")
}

/// Uniform point of the probability simplex.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Best worst-margin over every one-bit frame and a `points`-level phase grid
/// per IRS element. Only single-slot frames are supported, and the search
/// visits `4^M * points^N` pairs.
pub fn joint_grid_optimum(ch: &ChannelSet, symbols: &SymbolFrame, power: f64, points: usize) -> f64 {
    assert_eq!(symbols.slots(), 1, "single-slot frames only");
    let m = ch.antennas();
    let n = ch.elements();
    let s = one_bit_amplitude(power, m);
    let grid: Vec<Complex64> = (0..points)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / points as f64))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for p in 0..points.pow(n as u32) {
        let theta: Vec<Complex64> = (0..n).map(|e| grid[p / points.pow(e as u32) % points]).collect();
        let phases = PhaseShifts::new(theta).expect("unit modulus");
        for code in 0..(1usize << (2 * m)) {
            let x: Vec<Complex64> = (0..m)
                .map(|i| {
                    let re = if code >> i & 1 == 1 { s } else { -s };
                    let im = if code >> (i + m) & 1 == 1 { s } else { -s };
                    Complex64::new(re, im)
                })
                .collect();
            best = best.max(worst_margin(ch, &phases, &[x], symbols).expect("consistent dimensions"));
        }
    }
    best
}
