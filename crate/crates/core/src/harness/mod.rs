//! Monte-Carlo BER experiments.
//!
//! Each channel realization gets its own random substreams (drop, fading,
//! symbols, noise, solver randomness), all derived from the experiment seed and
//! the channel index. Every scheme and every noise point of a channel sees the
//! same realization and the same unit-variance noise samples, and channels are
//! aggregated in index order, so results do not depend on the worker count.

mod config;
mod report;
mod simulate;

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{alternating_optimize, alternating_optimize_with, frame_margin, AoConfig, ThetaInit, XStep};
use crate::baselines::{quantize_onebit, relaxed_slp, zf_precode, Scheme, SchemeKind, ThetaPolicy};
use crate::channel::{
    effective_channels, sample_channels, sample_scenario, ChannelDump, ChannelSet, PhaseShifts, Scenario,
};
use crate::constellation::SymbolFrame;
use crate::error::{invalid, Result};
use crate::precoder::ComplexFrame;
use crate::rng::{derive_seed, substream, TAG_AO, TAG_CHANNEL, TAG_NOISE, TAG_SCENARIO, TAG_SYMBOLS, TAG_THETA_INIT};

pub use config::{sigma2_from_db, ExperimentConfig};
pub use report::{paired_ber_difference, write_csv, PairedDifference, TimingReport, CSV_COLUMNS};
pub use simulate::{count_errors, mean_sep_bound, receive_points, simulate_transmission, ErrorCounts, NoiseBlock};

/// Channel, user drop and symbols of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub scenario: Scenario,
    pub channels: ChannelSet,
    pub symbols: SymbolFrame,
}

/// Draws realization `channel` of the experiment.
pub fn sample_realization(cfg: &ExperimentConfig, channel: usize) -> Result<Realization> {
    let c = channel as u64;
    let scenario = sample_scenario(&cfg.scenario, cfg.users, &mut substream(cfg.seed, &[TAG_SCENARIO, c]))?;
    let channels = sample_channels(
        &scenario,
        cfg.antennas,
        cfg.elements,
        &mut substream(cfg.seed, &[TAG_CHANNEL, c]),
    )?;
    let symbols = SymbolFrame::random(
        cfg.constellation.clone(),
        cfg.users,
        cfg.slots,
        &mut substream(cfg.seed, &[TAG_SYMBOLS, c]),
    )?;
    Ok(Realization {
        scenario,
        channels,
        symbols,
    })
}

/// Fixture of realization `channel` in the channel-module JSON format.
pub fn channel_dump(cfg: &ExperimentConfig, channel: usize) -> Result<ChannelDump> {
    let r = sample_realization(cfg, channel)?;
    Ok(ChannelDump {
        seed: derive_seed(cfg.seed, &[channel as u64]),
        antennas: cfg.antennas,
        elements: cfg.elements,
        users: cfg.users,
        scenario: r.scenario,
        channels: r.channels,
    })
}

/// Result of one scheme on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    /// `None` when the design succeeded and its inner solvers converged.
    pub failure: Option<String>,
    pub worst_margin: f64,
    pub runtime_s: f64,
    /// One entry per noise point.
    pub counts: Vec<ErrorCounts>,
}

impl SchemeOutcome {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub channel: usize,
    /// In the order of `ExperimentConfig::schemes`.
    pub outcomes: Vec<SchemeOutcome>,
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub inv_sigma2_db: f64,
    pub ber: f64,
    pub ser: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub sym_errors: u64,
    pub syms: u64,
    pub mean_worst_margin: f64,
    pub mean_runtime_s: f64,
    pub n_channels_ok: usize,
    pub n_channels_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Scheme-major, noise points in configuration order.
    pub records: Vec<BerRecord>,
    pub channels: Vec<ChannelRecord>,
}

impl ExperimentResult {
    pub fn record(&self, scheme: Scheme, inv_sigma2_db: f64) -> Option<&BerRecord> {
        self.records
            .iter()
            .find(|r| r.scheme == scheme && r.inv_sigma2_db == inv_sigma2_db)
    }

    pub fn timing_report(&self) -> TimingReport {
        TimingReport::from_result(self)
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Designed transmit frame and phases of one scheme.
struct Design {
    channel: ChannelSet,
    frame: ComplexFrame,
    phases: PhaseShifts,
    converged: bool,
}

struct Designer<'a> {
    cfg: &'a ExperimentConfig,
    real: &'a Realization,
    ao: AoConfig,
    index: u64,
    onebit: Option<(ComplexFrame, PhaseShifts, bool)>,
    // wall time of the shared one-bit design, charged only to `onebit-md`
    onebit_seconds: f64,
}

impl Designer<'_> {
    fn bare(&self) -> ChannelSet {
        self.real.channels.without_irs()
    }

    fn onebit_irs(&mut self) -> Result<(ComplexFrame, PhaseShifts, bool)> {
        if let Some(d) = &self.onebit {
            return Ok(d.clone());
        }
        let start = Instant::now();
        let r = alternating_optimize(&self.real.channels, &self.real.symbols, self.cfg.power(), &self.ao)?;
        self.onebit_seconds = start.elapsed().as_secs_f64();
        let converged = r.x_statuses.iter().all(|s| s.is_converged());
        let d = (r.frame.to_complex(), r.phases, converged);
        self.onebit = Some(d.clone());
        Ok(d)
    }

    /// Phases used by a comparison scheme with the reflected path.
    fn policy_phases(&mut self) -> Result<PhaseShifts> {
        match self.cfg.theta_policy {
            ThetaPolicy::Shared => Ok(self.onebit_irs()?.1),
            ThetaPolicy::Random => Ok(PhaseShifts::random(
                self.cfg.elements,
                &mut substream(self.cfg.seed, &[TAG_THETA_INIT, self.index]),
            )),
            ThetaPolicy::Joint => Err(invalid("theta_policy", "joint design has no fixed phases")),
        }
    }

    fn design(&mut self, scheme: Scheme) -> Result<Design> {
        let power = self.cfg.power();
        let symbols = &self.real.symbols;
        let ones = PhaseShifts::ones(self.cfg.elements);
        let joint = self.cfg.theta_policy == ThetaPolicy::Joint && scheme.irs;
        match scheme.kind {
            SchemeKind::OneBitMd if scheme.irs => {
                let (frame, phases, converged) = self.onebit_irs()?;
                Ok(Design {
                    channel: self.real.channels.clone(),
                    frame,
                    phases,
                    converged,
                })
            }
            SchemeKind::OneBitMd => {
                let cfg = AoConfig {
                    max_outer: 1,
                    restarts: 1,
                    theta_init: ThetaInit::AllOnes,
                    ..self.ao.clone()
                };
                let channel = self.bare();
                let r = alternating_optimize(&channel, symbols, power, &cfg)?;
                Ok(Design {
                    converged: r.x_statuses.iter().all(|s| s.is_converged()),
                    frame: r.frame.to_complex(),
                    phases: ones,
                    channel,
                })
            }
            SchemeKind::Relaxed | SchemeKind::RelaxedQuant => {
                let (channel, frame, phases, converged) = if joint {
                    let ao = AoConfig {
                        precoder: self.cfg.relaxed_precoder.clone(),
                        ..self.ao.clone()
                    };
                    let s = alternating_optimize_with(&self.real.channels, symbols, power, &ao, XStep::Relaxed)?;
                    let converged = s.x_converged();
                    (self.real.channels.clone(), s.frame, s.phases, converged)
                } else {
                    let (channel, phases) = if scheme.irs {
                        (self.real.channels.clone(), self.policy_phases()?)
                    } else {
                        (self.bare(), ones)
                    };
                    let r = relaxed_slp(&channel, symbols, &phases, power, &self.cfg.relaxed_precoder)?;
                    let converged = r.all_converged();
                    (channel, r.frame, phases, converged)
                };
                let frame = if scheme.kind == SchemeKind::RelaxedQuant {
                    quantize_onebit(&frame, power)?.to_complex()
                } else {
                    frame
                };
                Ok(Design {
                    channel,
                    frame,
                    phases,
                    converged,
                })
            }
            SchemeKind::ZfQuant => {
                let (channel, frame, phases) = if joint {
                    let s =
                        alternating_optimize_with(&self.real.channels, symbols, power, &self.ao, XStep::ZeroForcing)?;
                    (self.real.channels.clone(), s.frame, s.phases)
                } else {
                    let (channel, phases) = if scheme.irs {
                        (self.real.channels.clone(), self.policy_phases()?)
                    } else {
                        (self.bare(), ones)
                    };
                    let zf = zf_precode(&effective_channels(&channel, &phases)?, symbols, power)?;
                    if zf.rank_deficient {
                        warn!("channel {}: rank-deficient effective channel for {scheme}", self.index);
                    }
                    (channel, zf.frame, phases)
                };
                Ok(Design {
                    channel,
                    frame: quantize_onebit(&frame, power)?.to_complex(),
                    phases,
                    converged: true,
                })
            }
        }
    }
}

fn run_channel(cfg: &ExperimentConfig, index: usize, noise_grid: &[f64]) -> ChannelRecord {
    let failed = |scheme: Scheme, msg: String| SchemeOutcome {
        scheme,
        failure: Some(msg),
        worst_margin: f64::NAN,
        runtime_s: 0.0,
        counts: vec![ErrorCounts::default(); noise_grid.len()],
    };
    let real = match sample_realization(cfg, index) {
        Ok(r) => r,
        Err(e) => {
            warn!("channel {index}: {e}");
            return ChannelRecord {
                channel: index,
                outcomes: cfg.schemes.iter().map(|&s| failed(s, e.to_string())).collect(),
            };
        }
    };
    let noise = NoiseBlock::draw(
        cfg.noise_draws,
        cfg.slots,
        cfg.users,
        &mut substream(cfg.seed, &[TAG_NOISE, index as u64]),
    );
    let mut designer = Designer {
        cfg,
        real: &real,
        ao: AoConfig {
            seed: derive_seed(cfg.seed, &[TAG_AO, index as u64]),
            ..cfg.ao.clone()
        },
        index: index as u64,
        onebit: None,
        onebit_seconds: 0.0,
    };
    let outcomes = cfg
        .schemes
        .iter()
        .map(|&scheme| {
            let cached = designer.onebit.is_some();
            let start = Instant::now();
            let design = designer.design(scheme);
            let mut runtime_s = start.elapsed().as_secs_f64();
            let computed_here = !cached && designer.onebit.is_some();
            if scheme == Scheme::new(SchemeKind::OneBitMd, true) {
                runtime_s = designer.onebit_seconds;
            } else if computed_here {
                runtime_s = (runtime_s - designer.onebit_seconds).max(0.0);
            }
            let evaluated = design.and_then(|d| {
                let received = receive_points(&d.channel, &d.phases, &d.frame)?;
                let margin = frame_margin(&effective_channels(&d.channel, &d.phases)?, &d.frame, &real.symbols)?;
                let counts = noise_grid
                    .iter()
                    .map(|&db| count_errors(&received, &real.symbols, sigma2_from_db(db), &noise))
                    .collect::<Result<Vec<_>>>()?;
                Ok((d.converged, margin, counts))
            });
            match evaluated {
                Ok((converged, worst_margin, counts)) => SchemeOutcome {
                    scheme,
                    failure: (!converged).then(|| "inner solver did not converge".to_string()),
                    worst_margin,
                    runtime_s,
                    counts,
                },
                Err(e) => failed(scheme, e.to_string()),
            }
        })
        .collect::<Vec<_>>();
    for o in outcomes.iter().filter(|o| !o.is_ok()) {
        warn!(
            "channel {index}: {} excluded: {}",
            o.scheme,
            o.failure.as_deref().unwrap_or("")
        );
    }
    info!("channel {index} done");
    ChannelRecord {
        channel: index,
        outcomes,
    }
}

/// Runs every scheme on `n_channels` realizations and aggregates BER/SER per
/// scheme and noise point. Channels whose design failed for a scheme are
/// excluded from that scheme's rows and counted in `n_channels_failed`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    let grid = cfg.noise_grid_db.clone();
    let channels: Vec<ChannelRecord> = pool.install(|| {
        (0..cfg.n_channels)
            .into_par_iter()
            .map(|c| run_channel(cfg, c, &grid))
            .collect()
    });

    let mut records = Vec::with_capacity(cfg.schemes.len() * grid.len());
    for (i, &scheme) in cfg.schemes.iter().enumerate() {
        let ok: Vec<&SchemeOutcome> = channels.iter().map(|c| &c.outcomes[i]).filter(|o| o.is_ok()).collect();
        let n_ok = ok.len();
        let mut margin = CompensatedSum::default();
        let mut runtime = CompensatedSum::default();
        for o in &ok {
            margin.add(o.worst_margin);
            runtime.add(o.runtime_s);
        }
        let mean = |s: CompensatedSum| if n_ok == 0 { f64::NAN } else { s.value() / n_ok as f64 };
        for (j, &db) in grid.iter().enumerate() {
            let mut total = ErrorCounts::default();
            for o in &ok {
                total.add(&o.counts[j]);
            }
            records.push(BerRecord {
                scheme,
                inv_sigma2_db: db,
                ber: total.ber(),
                ser: total.ser(),
                bit_errors: total.bit_errors,
                bits: total.bits,
                sym_errors: total.sym_errors,
                syms: total.syms,
                mean_worst_margin: mean(margin),
                mean_runtime_s: mean(runtime),
                n_channels_ok: n_ok,
                n_channels_failed: cfg.n_channels - n_ok,
            });
        }
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        channels,
    })
}
