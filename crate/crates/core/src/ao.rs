//! Alternating optimization of the transmit frame and the IRS phase shifts.

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{quantize_onebit, relaxed_frame, zf_precode};
use crate::channel::{effective_channels, ChannelSet, PhaseShifts};
use crate::constellation::SymbolFrame;
use crate::error::{invalid, Error, Result};
use crate::phase::{apg_optimize, build_phase_coefficients, ApgOptions};
use crate::precoder::{solve_symbol, unlift, ComplexFrame, OneBitFrame, PrecoderOptions, SolverStatus};
use crate::rng::{substream, TAG_MBI, TAG_THETA_INIT};

/// Transmit design used in the X-step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XStep {
    /// Relaxation, mirror descent and MBI rounding.
    #[default]
    OneBit,
    /// Box relaxation only.
    Relaxed,
    /// Zero forcing.
    ZeroForcing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AoOrder {
    #[default]
    XFirst,
    /// Starts with a phase step against the quantized matched-filter frame.
    ThetaFirst,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaInit {
    #[default]
    Random,
    AllOnes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoConfig {
    pub max_outer: usize,
    /// Threshold on `||X^i - X^{i-1}||_F^2 + ||theta^i - theta^{i-1}||^2`.
    pub stop_tol: f64,
    pub precoder: PrecoderOptions,
    pub apg: ApgOptions,
    pub order: AoOrder,
    pub theta_init: ThetaInit,
    /// Independent runs from different initial phases; the best is returned.
    /// Runs after the first always start from random phases.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            max_outer: 20,
            stop_tol: 1e-4,
            precoder: PrecoderOptions::default(),
            apg: ApgOptions::default(),
            order: AoOrder::default(),
            theta_init: ThetaInit::default(),
            restarts: 1,
            seed: 0,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(invalid("max_outer", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts", "must be at least 1"));
        }
        if !(self.stop_tol > 0.0) {
            return Err(invalid("stop_tol", "must be positive"));
        }
        self.precoder.validate()?;
        self.apg.validate()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoIterationRecord {
    pub iteration: usize,
    /// Worst margin of the pair right after the X-step.
    pub margin_after_x: f64,
    /// Worst margin of the pair right after the phase step.
    pub margin_after_theta: f64,
    /// Squared change statistic; absent in the first iteration, which has no
    /// previous frame.
    pub change: Option<f64>,
    pub x_statuses: Vec<SolverStatus>,
    /// Largest fractional set left by the relaxation (one-bit X-step only).
    pub max_fractional: usize,
    pub zf_rank_deficient: bool,
    pub theta_status: SolverStatus,
    pub theta_iterations: usize,
    /// `delta ln(2KT)`, the smoothing gap of the phase step.
    pub smoothing_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoSolution {
    /// Best frame seen, by worst margin.
    pub frame: ComplexFrame,
    pub phases: PhaseShifts,
    pub worst_margin: f64,
    pub trace: Vec<AoIterationRecord>,
    /// Whether the change statistic fell below `stop_tol`.
    pub stopped_early: bool,
    /// Run that produced the returned pair.
    pub restart: usize,
    /// Statuses of the X-step that produced the returned frame.
    pub x_statuses: Vec<SolverStatus>,
}

impl AoSolution {
    /// Inner solves behind the returned frame all converged.
    pub fn x_converged(&self) -> bool {
        self.x_statuses.iter().all(|s| s.is_converged())
    }
}

/// One-bit outcome of [`alternating_optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct AoResult {
    pub frame: OneBitFrame,
    pub phases: PhaseShifts,
    pub worst_margin: f64,
    pub trace: Vec<AoIterationRecord>,
    pub stopped_early: bool,
    pub restart: usize,
    pub x_statuses: Vec<SolverStatus>,
}

/// Smallest PSK margin over all users and slots.
pub fn worst_margin(
    ch: &ChannelSet,
    phases: &PhaseShifts,
    frame: &[Vec<Complex64>],
    symbols: &SymbolFrame,
) -> Result<f64> {
    let h = effective_channels(ch, phases)?;
    frame_margin(&h, frame, symbols)
}

pub(crate) fn frame_margin(h: &[Vec<Complex64>], frame: &[Vec<Complex64>], symbols: &SymbolFrame) -> Result<f64> {
    if frame.len() != symbols.slots() || h.len() != symbols.users() {
        return Err(Error::DimensionMismatch(
            "frame or channel does not match the symbols".into(),
        ));
    }
    let c = symbols.constellation();
    let mut worst = f64::INFINITY;
    for (t, x) in frame.iter().enumerate() {
        for (k, hk) in h.iter().enumerate() {
            let y: Complex64 = hk.iter().zip(x).map(|(a, b)| a * b).sum();
            worst = worst.min(c.margin(y * symbols.symbol(k, t).conj()));
        }
    }
    Ok(worst)
}

struct XOutcome {
    frame: ComplexFrame,
    statuses: Vec<SolverStatus>,
    max_fractional: usize,
    rank_deficient: bool,
}

#[allow(clippy::too_many_arguments)]
fn x_step(
    kind: XStep,
    ch: &ChannelSet,
    phases: &PhaseShifts,
    symbols: &SymbolFrame,
    power: f64,
    cfg: &AoConfig,
    restart: usize,
    iteration: usize,
) -> Result<XOutcome> {
    let h = effective_channels(ch, phases)?;
    match kind {
        XStep::OneBit => {
            let sols = (0..symbols.slots())
                .into_par_iter()
                .map(|t| {
                    let mut rng = substream(cfg.seed, &[TAG_MBI, restart as u64, iteration as u64, t as u64]);
                    solve_symbol(
                        &h,
                        &symbols.slot(t),
                        symbols.constellation(),
                        power,
                        &cfg.precoder,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(XOutcome {
                frame: sols.iter().map(|s| unlift(&s.x)).collect(),
                statuses: sols.iter().map(|s| s.status()).collect(),
                max_fractional: sols.iter().map(|s| s.fractional).max().unwrap_or(0),
                rank_deficient: false,
            })
        }
        XStep::Relaxed => {
            let r = relaxed_frame(&h, symbols, power, &cfg.precoder)?;
            Ok(XOutcome {
                statuses: r.statuses(),
                frame: r.frame,
                max_fractional: 0,
                rank_deficient: false,
            })
        }
        XStep::ZeroForcing => {
            let zf = zf_precode(&h, symbols, power)?;
            Ok(XOutcome {
                statuses: vec![SolverStatus::Converged; symbols.slots()],
                frame: zf.frame,
                max_fractional: 0,
                rank_deficient: zf.rank_deficient,
            })
        }
    }
}

/// Sign-quantized matched filter `x_t = sum_k h_k s_{k,t}`, the starting frame of
/// [`AoOrder::ThetaFirst`].
fn matched_filter_frame(h: &[Vec<Complex64>], symbols: &SymbolFrame, power: f64) -> Result<ComplexFrame> {
    let frame: ComplexFrame = (0..symbols.slots())
        .map(|t| {
            let mut x = vec![Complex64::new(0.0, 0.0); h[0].len()];
            for (k, hk) in h.iter().enumerate() {
                let s = symbols.symbol(k, t);
                for (xm, hm) in x.iter_mut().zip(hk) {
                    *xm += hm.conj() * s;
                }
            }
            x
        })
        .collect();
    Ok(quantize_onebit(&frame, power)?.to_complex())
}

fn squared_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum()
}

fn phase_distance(a: &PhaseShifts, b: &PhaseShifts) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum()
}

/// Alternates between the one-bit X-step and the phase step.
pub fn alternating_optimize(ch: &ChannelSet, symbols: &SymbolFrame, power: f64, cfg: &AoConfig) -> Result<AoResult> {
    let sol = alternating_optimize_with(ch, symbols, power, cfg, XStep::OneBit)?;
    let frame = quantize_onebit(&sol.frame, power)?;
    Ok(AoResult {
        frame,
        phases: sol.phases,
        worst_margin: sol.worst_margin,
        trace: sol.trace,
        stopped_early: sol.stopped_early,
        restart: sol.restart,
        x_statuses: sol.x_statuses,
    })
}

/// Alternating optimization with the given transmit design in the X-step.
///
/// The returned pair is the best one evaluated (after either step), so the
/// output never has a smaller worst margin than any intermediate pair. With
/// several restarts the trace is that of the winning run.
pub fn alternating_optimize_with(
    ch: &ChannelSet,
    symbols: &SymbolFrame,
    power: f64,
    cfg: &AoConfig,
    kind: XStep,
) -> Result<AoSolution> {
    cfg.validate()?;
    ch.validate()?;
    if symbols.users() != ch.users() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbol rows for {} users",
            symbols.users(),
            ch.users()
        )));
    }
    let mut best: Option<AoSolution> = None;
    for r in 0..cfg.restarts {
        let phases = match (r, cfg.theta_init) {
            (0, ThetaInit::AllOnes) => PhaseShifts::ones(ch.elements()),
            (0, ThetaInit::Random) => PhaseShifts::random(ch.elements(), &mut substream(cfg.seed, &[TAG_THETA_INIT])),
            _ => PhaseShifts::random(ch.elements(), &mut substream(cfg.seed, &[TAG_THETA_INIT, r as u64])),
        };
        let mut sol = single_run(ch, symbols, power, cfg, kind, phases, r)?;
        sol.restart = r;
        if best.as_ref().is_none_or(|b| sol.worst_margin > b.worst_margin) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn single_run(
    ch: &ChannelSet,
    symbols: &SymbolFrame,
    power: f64,
    cfg: &AoConfig,
    kind: XStep,
    mut phases: PhaseShifts,
    restart: usize,
) -> Result<AoSolution> {
    let slack = cfg.apg.delta * ((2 * symbols.users() * symbols.slots()) as f64).ln();

    let mut frame: Option<ComplexFrame> = match cfg.order {
        AoOrder::XFirst => None,
        AoOrder::ThetaFirst => Some(matched_filter_frame(&effective_channels(ch, &phases)?, symbols, power)?),
    };
    let mut best: Option<(ComplexFrame, PhaseShifts, f64, Vec<SolverStatus>)> = None;
    let mut x_statuses = Vec::new();
    let mut trace: Vec<AoIterationRecord> = Vec::new();
    let mut stopped_early = false;
    let mut consider = |f: &ComplexFrame, p: &PhaseShifts, m: f64, st: &[SolverStatus]| {
        if best.as_ref().is_none_or(|b| m > b.2) {
            best = Some((f.clone(), p.clone(), m, st.to_vec()));
        }
    };

    for i in 0..cfg.max_outer {
        let prev_frame = frame.clone();
        let prev_phases = phases.clone();
        let mut rank_deficient = false;
        let mut max_fractional = 0;

        let mut run_x = |phases: &PhaseShifts, x_statuses: &mut Vec<SolverStatus>| -> Result<(ComplexFrame, f64)> {
            let out = x_step(kind, ch, phases, symbols, power, cfg, restart, i)?;
            rank_deficient = out.rank_deficient;
            max_fractional = out.max_fractional;
            *x_statuses = out.statuses;
            let m = worst_margin(ch, phases, &out.frame, symbols)?;
            Ok((out.frame, m))
        };

        let (margin_after_x, margin_after_theta, theta_status, theta_iterations);
        match cfg.order {
            AoOrder::XFirst => {
                let (f, mx) = run_x(&phases, &mut x_statuses)?;
                consider(&f, &phases, mx, &x_statuses);
                let (p, status, iters) = theta_step(ch, &f, symbols, &phases, &cfg.apg)?;
                let mt = worst_margin(ch, &p, &f, symbols)?;
                consider(&f, &p, mt, &x_statuses);
                frame = Some(f);
                phases = p;
                (margin_after_x, margin_after_theta, theta_status, theta_iterations) = (mx, mt, status, iters);
            }
            AoOrder::ThetaFirst => {
                let f0 = frame.clone().expect("initial frame");
                let (p, status, iters) = theta_step(ch, &f0, symbols, &phases, &cfg.apg)?;
                let mt = worst_margin(ch, &p, &f0, symbols)?;
                if i > 0 {
                    consider(&f0, &p, mt, &x_statuses);
                }
                phases = p;
                let (f, mx) = run_x(&phases, &mut x_statuses)?;
                consider(&f, &phases, mx, &x_statuses);
                frame = Some(f);
                (margin_after_x, margin_after_theta, theta_status, theta_iterations) = (mx, mt, status, iters);
            }
        }

        let change = prev_frame
            .filter(|_| i > 0 || cfg.order == AoOrder::ThetaFirst)
            .map(|pf| {
                squared_distance(frame.as_ref().expect("frame set"), &pf) + phase_distance(&phases, &prev_phases)
            });
        if let Some(last) = trace.last() {
            let now = margin_after_x.max(margin_after_theta);
            if now < last.margin_after_x.max(last.margin_after_theta) {
                debug!("outer iteration {i}: worst margin regressed to {now:.6e}");
            }
        }
        trace.push(AoIterationRecord {
            iteration: i,
            margin_after_x,
            margin_after_theta,
            change,
            x_statuses: x_statuses.clone(),
            max_fractional,
            zf_rank_deficient: rank_deficient,
            theta_status,
            theta_iterations,
            smoothing_slack: slack,
        });
        if change.is_some_and(|c| c < cfg.stop_tol) {
            stopped_early = true;
            break;
        }
    }
    let (frame, phases, worst_margin, x_statuses) = best.expect("at least one outer iteration");
    Ok(AoSolution {
        frame,
        phases,
        worst_margin,
        trace,
        stopped_early,
        restart: 0,
        x_statuses,
    })
}

fn theta_step(
    ch: &ChannelSet,
    frame: &[Vec<Complex64>],
    symbols: &SymbolFrame,
    phases: &PhaseShifts,
    opts: &ApgOptions,
) -> Result<(PhaseShifts, SolverStatus, usize)> {
    let coeffs = build_phase_coefficients(ch, frame, symbols)?;
    let res = apg_optimize(&coeffs, &phases.lifted(), opts)?;
    Ok((PhaseShifts::from_lifted(&res.theta_bar)?, res.status, res.iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, sample_scenario, ScenarioConfig};
    use crate::constellation::PskConstellation;
    use crate::rng::substream;

    fn instance(seed: u64, m: usize, n: usize, k: usize, t: usize) -> (ChannelSet, SymbolFrame) {
        let mut rng = substream(seed, &[]);
        let sc = sample_scenario(&ScenarioConfig::default(), k, &mut rng).unwrap();
        let ch = sample_channels(&sc, m, n, &mut rng).unwrap();
        let sym = SymbolFrame::random(PskConstellation::new(4).unwrap(), k, t, &mut rng).unwrap();
        (ch, sym)
    }

    #[test]
    fn single_outer_iteration() {
        let (ch, sym) = instance(1, 4, 3, 2, 3);
        let cfg = AoConfig {
            max_outer: 1,
            ..Default::default()
        };
        let res = alternating_optimize(&ch, &sym, 100.0, &cfg).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.trace[0].change, None);
        assert_eq!(res.trace[0].x_statuses.len(), 3);
        assert!(res.trace[0].margin_after_theta >= res.trace[0].margin_after_x);
    }

    #[test]
    fn trace_is_consistent_and_pair_is_feasible() {
        let (ch, sym) = instance(2, 6, 4, 2, 4);
        let cfg = AoConfig {
            seed: 9,
            ..Default::default()
        };
        let res = alternating_optimize(&ch, &sym, 100.0, &cfg).unwrap();
        assert!(res.phases.as_slice().iter().all(|t| (t.norm() - 1.0).abs() < 1e-12));
        assert_eq!(res.frame.len(), 4);
        let m = worst_margin(&ch, &res.phases, &res.frame.to_complex(), &sym).unwrap();
        assert_eq!(m, res.worst_margin);
        for r in &res.trace {
            assert!(r.margin_after_theta >= r.margin_after_x - r.smoothing_slack);
            assert!(res.worst_margin >= r.margin_after_x.max(r.margin_after_theta));
        }
        if res.stopped_early {
            assert!(res.trace.last().unwrap().change.unwrap() < cfg.stop_tol);
        } else {
            assert_eq!(res.trace.len(), cfg.max_outer);
        }
    }

    #[test]
    fn change_statistic_matches_definition() {
        let (ch, sym) = instance(3, 4, 2, 1, 2);
        let cfg = AoConfig {
            max_outer: 2,
            stop_tol: 1e-300,
            ..Default::default()
        };
        let one = alternating_optimize_with(
            &ch,
            &sym,
            100.0,
            &AoConfig {
                max_outer: 1,
                ..cfg.clone()
            },
            XStep::OneBit,
        )
        .unwrap();
        let two = alternating_optimize_with(&ch, &sym, 100.0, &cfg, XStep::OneBit).unwrap();
        assert_eq!(two.trace[0], one.trace[0]);
        // rebuild iteration 1 from the iteration-0 pair
        let phases0 = PhaseShifts::random(ch.elements(), &mut substream(cfg.seed, &[TAG_THETA_INIT]));
        let x0 = x_step(XStep::OneBit, &ch, &phases0, &sym, 100.0, &cfg, 0, 0)
            .unwrap()
            .frame;
        let (p0, _, _) = theta_step(&ch, &x0, &sym, &phases0, &cfg.apg).unwrap();
        let x1 = x_step(XStep::OneBit, &ch, &p0, &sym, 100.0, &cfg, 0, 1).unwrap().frame;
        let (p1, _, _) = theta_step(&ch, &x1, &sym, &p0, &cfg.apg).unwrap();
        let expected = squared_distance(&x1, &x0) + phase_distance(&p1, &p0);
        assert_eq!(two.trace[1].change, Some(expected));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (ch, sym) = instance(4, 8, 4, 2, 6);
        let cfg = AoConfig {
            seed: 5,
            max_outer: 3,
            ..Default::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| alternating_optimize(&ch, &sym, 100.0, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }

    #[test]
    fn other_x_steps_and_orders_run() {
        let (ch, sym) = instance(5, 6, 3, 2, 3);
        for kind in [XStep::Relaxed, XStep::ZeroForcing] {
            for order in [AoOrder::XFirst, AoOrder::ThetaFirst] {
                let cfg = AoConfig {
                    order,
                    theta_init: ThetaInit::AllOnes,
                    max_outer: 3,
                    ..Default::default()
                };
                let sol = alternating_optimize_with(&ch, &sym, 100.0, &cfg, kind).unwrap();
                assert!(sol.worst_margin.is_finite());
                assert_eq!(sol.frame.len(), 3);
                if order == AoOrder::ThetaFirst {
                    assert!(sol.trace[0].change.is_some());
                }
            }
        }
    }

    #[test]
    fn no_irs_phase_step_is_inert() {
        let (ch, sym) = instance(6, 4, 3, 2, 2);
        let bare = ch.without_irs();
        let cfg = AoConfig {
            max_outer: 2,
            theta_init: ThetaInit::AllOnes,
            ..Default::default()
        };
        let res = alternating_optimize(&bare, &sym, 100.0, &cfg).unwrap();
        assert_eq!(res.phases, PhaseShifts::ones(3));
        for r in &res.trace {
            assert_eq!(r.margin_after_x, r.margin_after_theta);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (ch, sym) = instance(7, 2, 2, 1, 1);
        let cfg = AoConfig {
            max_outer: 0,
            ..Default::default()
        };
        assert!(alternating_optimize(&ch, &sym, 1.0, &cfg).is_err());
    }
}
