//! IRS phase-shift design for a fixed transmit block.
//!
//! Margins are affine in the real-lifted phase vector `theta_bar = [Re theta; Im theta]`,
//! so the worst-margin objective is a pointwise maximum of `2KT` affine terms
//! `theta_bar^T eta + vbar`. It is smoothed by a log-sum-exp with temperature
//! `delta` and minimized by accelerated projected gradient over the unit-modulus
//! set.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::constellation::SymbolFrame;
use crate::error::{invalid, Error, Result};
use crate::precoder::SolverStatus;

/// Affine terms `theta_bar^T eta_{k,t} + vbar_{k,t}`, slot-major with `2K`
/// terms per slot (the `+` angular side for users `0..K`, then the `-` side).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCoefficients {
    elements: usize,
    users: usize,
    slots: usize,
    eta: Vec<Vec<f64>>,
    vbar: Vec<f64>,
}

impl PhaseCoefficients {
    pub fn from_terms(eta: Vec<Vec<f64>>, vbar: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || eta.len() != vbar.len() {
            return Err(Error::DimensionMismatch("eta and vbar lengths differ".into()));
        }
        let len = eta[0].len();
        if len == 0 || !len.is_multiple_of(2) || eta.iter().any(|e| e.len() != len) {
            return Err(Error::DimensionMismatch("eta vectors must share an even length".into()));
        }
        Ok(Self {
            elements: len / 2,
            users: eta.len(),
            slots: 1,
            eta,
            vbar,
        })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn num_terms(&self) -> usize {
        self.vbar.len()
    }

    pub fn eta(&self, i: usize) -> &[f64] {
        &self.eta[i]
    }

    pub fn vbar(&self, i: usize) -> f64 {
        self.vbar[i]
    }

    /// Index of term `(k, t)` for `k < 2K`.
    pub fn term_index(&self, k: usize, t: usize) -> usize {
        t * 2 * self.users + k
    }

    /// Values of all affine terms at `theta_bar`.
    pub fn values(&self, theta_bar: &[f64]) -> Vec<f64> {
        self.eta
            .iter()
            .zip(&self.vbar)
            .map(|(e, v)| dot(e, theta_bar) + v)
            .collect()
    }

    /// `max_{k,t} (theta_bar^T eta + vbar)`, the negated worst margin.
    pub fn true_objective(&self, theta_bar: &[f64]) -> f64 {
        self.values(theta_bar).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the affine terms from `u_{k,t} = W_{r,k}^H G x_t s*` and
/// `v_{k,t} = h_{d,k}^H x_t s*`.
pub fn build_phase_coefficients(
    ch: &ChannelSet,
    frame: &[Vec<Complex64>],
    symbols: &SymbolFrame,
) -> Result<PhaseCoefficients> {
    ch.validate()?;
    let (users, antennas, elements) = (ch.users(), ch.antennas(), ch.elements());
    if symbols.users() != users {
        return Err(Error::DimensionMismatch(format!(
            "{} symbol rows for {users} users",
            symbols.users()
        )));
    }
    if frame.len() != symbols.slots() {
        return Err(Error::DimensionMismatch(format!(
            "{} transmit slots for {} symbol slots",
            frame.len(),
            symbols.slots()
        )));
    }
    if frame.iter().any(|x| x.len() != antennas) {
        return Err(Error::DimensionMismatch("transmit vector length differs from M".into()));
    }
    let cot = symbols.constellation().cot();
    let mut eta = Vec::with_capacity(2 * users * frame.len());
    let mut vbar = Vec::with_capacity(2 * users * frame.len());
    for (t, x) in frame.iter().enumerate() {
        let gx: Vec<Complex64> = ch
            .bs_irs
            .iter()
            .map(|row| row.iter().zip(x).map(|(g, xm)| g * xm).sum())
            .collect();
        let mut minus_eta = Vec::with_capacity(users);
        let mut minus_vbar = Vec::with_capacity(users);
        for k in 0..users {
            let s_conj = symbols.symbol(k, t).conj();
            let u: Vec<Complex64> = ch.irs_user[k]
                .iter()
                .zip(&gx)
                .map(|(hr, g)| hr.conj() * g * s_conj)
                .collect();
            let v: Complex64 = ch.direct[k]
                .iter()
                .zip(x)
                .map(|(hd, xm)| hd.conj() * xm)
                .sum::<Complex64>()
                * s_conj;
            let q: Vec<f64> = u.iter().map(|z| z.re).chain(u.iter().map(|z| -z.im)).collect();
            let p: Vec<f64> = u
                .iter()
                .map(|z| cot * z.im)
                .chain(u.iter().map(|z| cot * z.re))
                .collect();
            eta.push(q.iter().zip(&p).map(|(q, p)| -q + p).collect());
            vbar.push(-v.re + v.im * cot);
            minus_eta.push(q.iter().zip(&p).map(|(q, p)| -q - p).collect());
            minus_vbar.push(-v.re - v.im * cot);
        }
        eta.extend(minus_eta);
        vbar.extend(minus_vbar);
    }
    debug_assert!(eta.iter().all(|e: &Vec<f64>| e.len() == 2 * elements));
    Ok(PhaseCoefficients {
        elements,
        users,
        slots: frame.len(),
        eta,
        vbar,
    })
}

fn lse_parts(theta_bar: &[f64], coeffs: &PhaseCoefficients, delta: f64) -> (f64, Vec<f64>) {
    let values = coeffs.values(theta_bar);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|v| ((v - max) / delta).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let value = max + delta * sum.ln();
    (value, weights.into_iter().map(|w| w / sum).collect())
}

/// `delta log sum exp((theta_bar^T eta + vbar) / delta)`.
pub fn lse_value(theta_bar: &[f64], coeffs: &PhaseCoefficients, delta: f64) -> f64 {
    lse_parts(theta_bar, coeffs, delta).0
}

/// Softmax weights of the affine terms at `theta_bar`.
pub fn lse_weights(theta_bar: &[f64], coeffs: &PhaseCoefficients, delta: f64) -> Vec<f64> {
    lse_parts(theta_bar, coeffs, delta).1
}

fn weighted_eta(coeffs: &PhaseCoefficients, weights: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; 2 * coeffs.elements];
    for (e, w) in coeffs.eta.iter().zip(weights) {
        for (g, v) in grad.iter_mut().zip(e) {
            *g += w * v;
        }
    }
    grad
}

/// `sum w_{k,t} eta_{k,t}` with softmax weights.
pub fn lse_gradient(theta_bar: &[f64], coeffs: &PhaseCoefficients, delta: f64) -> Vec<f64> {
    weighted_eta(coeffs, &lse_weights(theta_bar, coeffs, delta))
}

/// Normalizes each pair `(theta_bar_n, theta_bar_{n+N})` to unit length.
/// A zero pair maps to `(1, 0)`.
pub fn project_unit_modulus(theta_bar: &[f64]) -> Vec<f64> {
    let n = theta_bar.len() / 2;
    let mut out = theta_bar.to_vec();
    for i in 0..n {
        let (re, im) = (theta_bar[i], theta_bar[i + n]);
        let norm = re.hypot(im);
        if norm > 0.0 {
            out[i] = re / norm;
            out[i + n] = im / norm;
        } else {
            out[i] = 1.0;
            out[i + n] = 0.0;
        }
    }
    out
}

/// How the extrapolation weight is computed from the `zeta` sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumRule {
    /// `psi_r = (zeta_r - 1) / zeta_r`.
    #[default]
    Printed,
    /// `psi_r = (zeta_{r-1} - 1) / zeta_r`, clamped at zero.
    Classical,
}

/// The sequence `zeta_r = (1 + sqrt(1 + 4 zeta_{r-1}^2)) / 2` from `zeta_{-1} = 0`
/// together with the extrapolation weights `psi_r`.
#[derive(Debug, Clone, Copy)]
pub struct MomentumSchedule {
    rule: MomentumRule,
    prev: f64,
}

impl MomentumSchedule {
    pub fn new(rule: MomentumRule) -> Self {
        Self { rule, prev: 0.0 }
    }

    pub fn reset(&mut self) {
        self.prev = 0.0;
    }
}

impl Iterator for MomentumSchedule {
    /// `(zeta_r, psi_r)`.
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        let zeta = (1.0 + (1.0 + 4.0 * self.prev * self.prev).sqrt()) / 2.0;
        let psi = match self.rule {
            MomentumRule::Printed => (zeta - 1.0) / zeta,
            MomentumRule::Classical => ((self.prev - 1.0) / zeta).max(0.0),
        };
        self.prev = zeta;
        Some((zeta, psi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApgOptions {
    /// Log-sum-exp temperature.
    pub delta: f64,
    pub max_iterations: usize,
    /// Stop when `||theta^{r+1} - theta^r|| / sqrt(N)` falls below this.
    pub tolerance: f64,
    pub momentum: MomentumRule,
    /// Reset the momentum sequence after this many consecutive increases of
    /// the smoothed objective.
    pub restart_after: usize,
    pub max_backtracks: usize,
    pub record_trace: bool,
}

impl Default for ApgOptions {
    fn default() -> Self {
        Self {
            delta: 1e-2,
            max_iterations: 1000,
            tolerance: 1e-6,
            momentum: MomentumRule::Printed,
            restart_after: 5,
            max_backtracks: 100,
            record_trace: false,
        }
    }
}

impl ApgOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApgTraceRecord {
    pub iteration: usize,
    pub smoothed: f64,
    pub true_value: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgResult {
    /// Best iterate under the true (max) objective, including the start point.
    pub theta_bar: Vec<f64>,
    pub objective: f64,
    pub best_iteration: usize,
    pub iterations: usize,
    pub status: SolverStatus,
    /// Every iterate, post-projection, when tracing is enabled.
    pub iterates: Vec<Vec<f64>>,
    pub trace: Vec<ApgTraceRecord>,
}

/// Largest eigenvalue of `A^T A` (rows of `A` are the `eta` vectors) by power iteration.
fn gram_spectral_norm(coeffs: &PhaseCoefficients) -> f64 {
    let dim = 2 * coeffs.elements;
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut estimate = 0.0;
    for _ in 0..50 {
        let av: Vec<f64> = coeffs.eta.iter().map(|e| dot(e, &v)).collect();
        let w = weighted_eta(coeffs, &av);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    // a crude Frobenius cap guards against a start vector orthogonal to the top eigenvector
    let frob: f64 = coeffs.eta.iter().flatten().map(|x| x * x).sum();
    estimate.max(frob / coeffs.num_terms() as f64)
}

/// Accelerated projected gradient on the smoothed worst-margin objective.
pub fn apg_optimize(coeffs: &PhaseCoefficients, theta_init: &[f64], opts: &ApgOptions) -> Result<ApgResult> {
    opts.validate()?;
    if theta_init.len() != 2 * coeffs.elements {
        return Err(Error::DimensionMismatch(format!(
            "initial phase vector has length {}, expected {}",
            theta_init.len(),
            2 * coeffs.elements
        )));
    }
    let delta = opts.delta;
    let n = coeffs.elements as f64;
    let mut cur = project_unit_modulus(theta_init);
    let mut prev = cur.clone();
    let mut best = (cur.clone(), coeffs.true_objective(&cur), 0usize);
    let mut h_cur = lse_value(&cur, coeffs, delta);
    let mut iterates = Vec::new();
    let mut trace = Vec::new();
    if opts.record_trace {
        iterates.push(cur.clone());
        trace.push(ApgTraceRecord {
            iteration: 0,
            smoothed: h_cur,
            true_value: best.1,
            step: 0.0,
        });
    }

    let lipschitz = gram_spectral_norm(coeffs) / delta;
    if lipschitz == 0.0 {
        return Ok(ApgResult {
            objective: best.1,
            theta_bar: best.0,
            best_iteration: 0,
            iterations: 0,
            status: SolverStatus::Converged,
            iterates,
            trace,
        });
    }
    let tau_floor = lipschitz * 1e-8;
    let mut tau = lipschitz;
    let mut schedule = MomentumSchedule::new(opts.momentum);
    let mut increases = 0;
    let mut status = SolverStatus::MaxIterations;
    let mut iterations = 0;

    for r in 0..opts.max_iterations {
        let (_, psi) = schedule.next().expect("infinite schedule");
        let z: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| c + psi * (c - p)).collect();
        let (hz, weights) = lse_parts(&z, coeffs, delta);
        let grad = weighted_eta(coeffs, &weights);
        let mut trial = (tau * 0.5).max(tau_floor);
        let mut next = None;
        for _ in 0..opts.max_backtracks {
            let cand = project_unit_modulus(&z.iter().zip(&grad).map(|(zi, gi)| zi - gi / trial).collect::<Vec<_>>());
            let diff: Vec<f64> = cand.iter().zip(&z).map(|(a, b)| a - b).collect();
            let model = hz + dot(&grad, &diff) + 0.5 * trial * dot(&diff, &diff);
            let h_cand = lse_value(&cand, coeffs, delta);
            if h_cand <= model + 1e-14 * (1.0 + hz.abs()) {
                next = Some((cand, h_cand));
                break;
            }
            trial *= 2.0;
        }
        let Some((cand, h_new)) = next else {
            status = SolverStatus::Stalled;
            break;
        };
        tau = trial;
        iterations = r + 1;
        prev = std::mem::replace(&mut cur, cand);

        if h_new > h_cur {
            increases += 1;
        } else {
            increases = 0;
        }
        if increases >= opts.restart_after {
            schedule.reset();
            increases = 0;
        }
        h_cur = h_new;

        let true_value = coeffs.true_objective(&cur);
        if true_value < best.1 {
            best = (cur.clone(), true_value, iterations);
        }
        if opts.record_trace {
            iterates.push(cur.clone());
            trace.push(ApgTraceRecord {
                iteration: iterations,
                smoothed: h_new,
                true_value,
                step: 1.0 / tau,
            });
        }
        let change = cur.iter().zip(&prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if change / n.sqrt() <= opts.tolerance {
            status = SolverStatus::Converged;
            break;
        }
    }
    Ok(ApgResult {
        theta_bar: best.0,
        objective: best.1,
        best_iteration: best.2,
        iterations,
        status,
        iterates,
        trace,
    })
}
