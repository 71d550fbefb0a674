//! Comparison schemes: zero-forcing with one-bit quantization, the box-relaxed
//! design used as an unquantized reference, naive quantization of it, and the
//! variants without the reflected path.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channels, ChannelSet, PhaseShifts};
use crate::constellation::SymbolFrame;
use crate::error::{invalid, Error, Result};
use crate::precoder::{
    lift, one_bit_amplitude, relax_symbol, sign_round, unlift, ComplexFrame, OneBitFrame, PrecoderOptions,
    RelaxedSolution, SolverStatus,
};

/// Relative singular-value threshold of the zero-forcing pseudoinverse.
pub const ZF_RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ZfFrame {
    pub frame: ComplexFrame,
    /// Per-slot scaling `gamma_t` with `||x_t||^2 = P`.
    pub gains: Vec<f64>,
    /// Set when `H` lost row rank and the pseudoinverse was truncated.
    pub rank_deficient: bool,
}

/// Zero-forcing precoding `x_t = gamma_t W s_t`, `W = H^+`, normalized per slot.
///
/// `h_eff` holds the effective channel rows `h_k^H`.
pub fn zf_precode(h_eff: &[Vec<Complex64>], symbols: &SymbolFrame, power: f64) -> Result<ZfFrame> {
    let users = h_eff.len();
    if users == 0 || users != symbols.users() {
        return Err(Error::DimensionMismatch(format!(
            "{users} channel rows for {} users",
            symbols.users()
        )));
    }
    let antennas = h_eff[0].len();
    if antennas == 0 || h_eff.iter().any(|h| h.len() != antennas) {
        return Err(Error::DimensionMismatch("ragged effective channels".into()));
    }
    if !(power > 0.0) {
        return Err(invalid("power", "must be positive"));
    }
    let h = DMatrix::from_fn(users, antennas, |k, m| h_eff[k][m]);
    let svd = h.svd(true, true);
    let top = svd.singular_values.max();
    let threshold = top * ZF_RANK_TOLERANCE;
    let rank = svd.singular_values.iter().filter(|&&v| v > threshold).count();
    let w = svd
        .pseudo_inverse(threshold.max(f64::MIN_POSITIVE))
        .map_err(|e| invalid("channel", e))?;

    let mut frame = Vec::with_capacity(symbols.slots());
    let mut gains = Vec::with_capacity(symbols.slots());
    for t in 0..symbols.slots() {
        let s = nalgebra::DVector::from_vec(symbols.slot(t));
        let x = &w * s;
        let norm = x.norm();
        let gamma = if norm > 0.0 { power.sqrt() / norm } else { 0.0 };
        frame.push(x.iter().map(|v| v * gamma).collect());
        gains.push(gamma);
    }
    Ok(ZfFrame {
        frame,
        gains,
        rank_deficient: rank < users,
    })
}

/// Elementwise sign quantization to `{+-s +- js}`, `s = sqrt(P / 2M)`; zero maps to `+s`.
pub fn quantize_onebit(frame: &[Vec<Complex64>], power: f64) -> Result<OneBitFrame> {
    let antennas = frame.first().map_or(0, Vec::len);
    if antennas == 0 {
        return Err(Error::DimensionMismatch("empty frame".into()));
    }
    let s = one_bit_amplitude(power, antennas);
    OneBitFrame::new(s, frame.iter().map(|x| sign_round(&lift(x), s)).collect())
}

/// Box-relaxed design of a whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedFrame {
    pub frame: ComplexFrame,
    pub slots: Vec<RelaxedSolution>,
}

impl RelaxedFrame {
    pub fn all_converged(&self) -> bool {
        self.slots.iter().all(|s| s.status.is_converged())
    }

    pub fn statuses(&self) -> Vec<SolverStatus> {
        self.slots.iter().map(|s| s.status).collect()
    }
}

/// Solves the regularized box relaxation of every slot, without rounding.
/// Slots run in parallel; results are collected in slot order.
pub fn relaxed_slp(
    ch: &ChannelSet,
    symbols: &SymbolFrame,
    phases: &PhaseShifts,
    power: f64,
    opts: &PrecoderOptions,
) -> Result<RelaxedFrame> {
    let h_eff = effective_channels(ch, phases)?;
    relaxed_frame(&h_eff, symbols, power, opts)
}

pub(crate) fn relaxed_frame(
    h_eff: &[Vec<Complex64>],
    symbols: &SymbolFrame,
    power: f64,
    opts: &PrecoderOptions,
) -> Result<RelaxedFrame> {
    let slots = (0..symbols.slots())
        .into_par_iter()
        .map(|t| relax_symbol(h_eff, &symbols.slot(t), symbols.constellation(), power, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelaxedFrame {
        frame: slots.iter().map(|s| unlift(&s.x)).collect(),
        slots,
    })
}

/// Channel with the reflected path removed.
pub fn no_irs_variant(ch: &ChannelSet) -> ChannelSet {
    ch.without_irs()
}

/// Transmit design family of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// One-bit design by mirror descent and MBI rounding.
    OneBitMd,
    /// Box relaxation without rounding (unquantized reference).
    Relaxed,
    /// Box relaxation followed by sign quantization.
    RelaxedQuant,
    /// Zero forcing followed by sign quantization.
    ZfQuant,
}

impl SchemeKind {
    fn id(self) -> &'static str {
        match self {
            SchemeKind::OneBitMd => "onebit-md",
            SchemeKind::Relaxed => "relaxed",
            SchemeKind::RelaxedQuant => "relaxed-quant",
            SchemeKind::ZfQuant => "zf-quant",
        }
    }
}

/// A scheme identifier such as `onebit-md` or `zf-quant-noirs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub irs: bool,
}

/// Identifier reserved for a one-bit design that this crate does not implement.
pub const RESERVED_GEMM: &str = "onebit-gemm";

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::new(SchemeKind::OneBitMd, true),
        Scheme::new(SchemeKind::Relaxed, true),
        Scheme::new(SchemeKind::RelaxedQuant, true),
        Scheme::new(SchemeKind::ZfQuant, true),
        Scheme::new(SchemeKind::OneBitMd, false),
        Scheme::new(SchemeKind::Relaxed, false),
        Scheme::new(SchemeKind::RelaxedQuant, false),
        Scheme::new(SchemeKind::ZfQuant, false),
    ];

    pub const fn new(kind: SchemeKind, irs: bool) -> Self {
        Self { kind, irs }
    }

    /// Parses a comma-separated list.
    pub fn parse_list(list: &str) -> Result<Vec<Scheme>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.id())?;
        if !self.irs {
            f.write_str("-noirs")?;
        }
        Ok(())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, irs) = match s.strip_suffix("-noirs") {
            Some(b) => (b, false),
            None => (s, true),
        };
        if base == RESERVED_GEMM {
            return Err(Error::UnimplementedScheme(s.to_string()));
        }
        let kind = [
            SchemeKind::OneBitMd,
            SchemeKind::Relaxed,
            SchemeKind::RelaxedQuant,
            SchemeKind::ZfQuant,
        ]
        .into_iter()
        .find(|k| k.id() == base)
        .ok_or_else(|| Error::UnknownScheme(s.to_string()))?;
        Ok(Scheme::new(kind, irs))
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the phase shifts of the comparison schemes are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaPolicy {
    /// Reuse the phases designed by `onebit-md` for the same channel.
    #[default]
    Shared,
    /// Uniformly random phases, drawn once per channel.
    Random,
    /// Alternate between the scheme's own transmit design and the phase step.
    Joint,
}
