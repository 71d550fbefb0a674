use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channels, ChannelSet, PhaseShifts};
use crate::constellation::SymbolFrame;
use crate::error::{invalid, Error, Result};

/// Unit-variance circular Gaussian samples indexed by draw, slot and user.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    draws: usize,
    slots: usize,
    users: usize,
    samples: Vec<Complex64>,
}

impl NoiseBlock {
    /// Draws `CN(0, 1)` samples in draw, slot, user order.
    pub fn draw<R: Rng + ?Sized>(draws: usize, slots: usize, users: usize, rng: &mut R) -> Self {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let samples = (0..draws * slots * users)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * scale, im * scale)
            })
            .collect();
        Self {
            draws,
            slots,
            users,
            samples,
        }
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn get(&self, draw: usize, t: usize, k: usize) -> Complex64 {
        self.samples[(draw * self.slots + t) * self.users + k]
    }
}

/// Error counts of one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub sym_errors: u64,
    pub syms: u64,
}

impl ErrorCounts {
    pub fn add(&mut self, other: &ErrorCounts) {
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        self.sym_errors += other.sym_errors;
        self.syms += other.syms;
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }

    pub fn ser(&self) -> f64 {
        ratio(self.sym_errors, self.syms)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Noise-free receive points `h_k^H x_t`, indexed `[t][k]`.
pub fn receive_points(ch: &ChannelSet, phases: &PhaseShifts, frame: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let h = effective_channels(ch, phases)?;
    if frame.iter().any(|x| x.len() != ch.antennas()) {
        return Err(Error::DimensionMismatch("transmit vector length differs from M".into()));
    }
    Ok(frame
        .iter()
        .map(|x| h.iter().map(|hk| hk.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
        .collect())
}

/// Decodes `y = h_k^H x_t + sigma n` for every noise sample and counts errors.
pub fn count_errors(
    received: &[Vec<Complex64>],
    symbols: &SymbolFrame,
    sigma2: f64,
    noise: &NoiseBlock,
) -> Result<ErrorCounts> {
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", "must be positive"));
    }
    if received.len() != symbols.slots()
        || noise.slots != symbols.slots()
        || noise.users != symbols.users()
        || received.iter().any(|r| r.len() != symbols.users())
    {
        return Err(Error::DimensionMismatch("noise block does not match the frame".into()));
    }
    let c = symbols.constellation();
    let sigma = sigma2.sqrt();
    let bits = u64::from(c.bits_per_symbol());
    let mut counts = ErrorCounts::default();
    for draw in 0..noise.draws {
        for (t, row) in received.iter().enumerate() {
            for (k, &y0) in row.iter().enumerate() {
                let sent = symbols.index(k, t);
                let got = c.decide_index(y0 + noise.get(draw, t, k) * sigma);
                counts.syms += 1;
                counts.bits += bits;
                if got != sent {
                    counts.sym_errors += 1;
                    counts.bit_errors += u64::from(c.bit_errors(sent, got));
                }
            }
        }
    }
    Ok(counts)
}

/// Transmits `frame` through the channel `n_noise` times per `(k, t)` and
/// counts decision errors.
pub fn simulate_transmission<R: Rng + ?Sized>(
    frame: &[Vec<Complex64>],
    phases: &PhaseShifts,
    ch: &ChannelSet,
    symbols: &SymbolFrame,
    sigma2: f64,
    n_noise: usize,
    rng: &mut R,
) -> Result<ErrorCounts> {
    if n_noise == 0 {
        return Err(invalid("n_noise", "must be at least 1"));
    }
    let received = receive_points(ch, phases, frame)?;
    let noise = NoiseBlock::draw(n_noise, symbols.slots(), symbols.users(), rng);
    count_errors(&received, symbols, sigma2, &noise)
}

/// Mean of the SEP upper bound over all `(k, t)`.
pub fn mean_sep_bound(received: &[Vec<Complex64>], symbols: &SymbolFrame, sigma2: f64) -> Result<f64> {
    let c = symbols.constellation();
    let mut total = 0.0;
    let mut n = 0usize;
    for (t, row) in received.iter().enumerate() {
        for (k, y) in row.iter().enumerate() {
            total += c.sep_upper_bound(c.margin(y * symbols.symbol(k, t).conj()), sigma2)?;
            n += 1;
        }
    }
    Ok(total / n as f64)
}
