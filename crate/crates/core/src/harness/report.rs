use std::fmt;
use std::io::Write;

use crate::baselines::Scheme;
use crate::error::{Error, Result};

use super::{BerRecord, ExperimentResult};

/// Header of the result CSV.
pub const CSV_COLUMNS: [&str; 12] = [
    "scheme",
    "inv_sigma2_db",
    "ber",
    "ser",
    "bit_errors",
    "bits",
    "sym_errors",
    "syms",
    "mean_worst_margin",
    "mean_runtime_s",
    "n_channels_ok",
    "n_channels_failed",
];

/// Writes the records as CSV. With `deterministic` set the runtime column is
/// written as `0` so that the file only depends on the configuration.
pub fn write_csv<W: Write>(records: &[BerRecord], writer: W, deterministic: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        let runtime = if deterministic { 0.0 } else { r.mean_runtime_s };
        w.write_record([
            r.scheme.to_string(),
            r.inv_sigma2_db.to_string(),
            r.ber.to_string(),
            r.ser.to_string(),
            r.bit_errors.to_string(),
            r.bits.to_string(),
            r.sym_errors.to_string(),
            r.syms.to_string(),
            r.mean_worst_margin.to_string(),
            runtime.to_string(),
            r.n_channels_ok.to_string(),
            r.n_channels_failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean per-channel design time of every scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub entries: Vec<TimingEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingEntry {
    pub scheme: Scheme,
    pub mean_runtime_s: f64,
    pub channels: usize,
}

impl TimingReport {
    pub fn from_result(result: &ExperimentResult) -> Self {
        let entries = result
            .config
            .schemes
            .iter()
            .enumerate()
            .map(|(i, &scheme)| {
                let times: Vec<f64> = result
                    .channels
                    .iter()
                    .map(|c| &c.outcomes[i])
                    .filter(|o| o.is_ok())
                    .map(|o| o.runtime_s)
                    .collect();
                let mean = if times.is_empty() {
                    f64::NAN
                } else {
                    times.iter().sum::<f64>() / times.len() as f64
                };
                TimingEntry {
                    scheme,
                    mean_runtime_s: mean,
                    channels: times.len(),
                }
            })
            .collect();
        Self { entries }
    }

    pub fn get(&self, scheme: Scheme) -> Option<&TimingEntry> {
        self.entries.iter().find(|e| e.scheme == scheme)
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>16} {:>9}", "scheme", "mean runtime (s)", "channels")?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<22} {:>16.6} {:>9}",
                e.scheme.to_string(),
                e.mean_runtime_s,
                e.channels
            )?;
        }
        Ok(())
    }
}

/// Per-channel paired difference `BER(b) - BER(a)` at one noise point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    /// Standard error of the mean over channels.
    pub std_error: f64,
    pub channels: usize,
}

impl PairedDifference {
    /// `BER(a) <= BER(b)` with the difference at least one standard error away
    /// from zero.
    pub fn resolved(&self) -> bool {
        self.mean > 0.0 && self.mean > self.std_error
    }
}

/// Paired comparison of two schemes over the channels on which both succeeded.
pub fn paired_ber_difference(
    result: &ExperimentResult,
    a: Scheme,
    b: Scheme,
    inv_sigma2_db: f64,
) -> Result<PairedDifference> {
    let cfg = &result.config;
    let idx = |s: Scheme| {
        cfg.schemes
            .iter()
            .position(|&x| x == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    };
    let (ia, ib) = (idx(a)?, idx(b)?);
    let j = cfg
        .noise_grid_db
        .iter()
        .position(|&v| v == inv_sigma2_db)
        .ok_or_else(|| crate::error::invalid("inv_sigma2_db", "not on the noise grid"))?;
    let diffs: Vec<f64> = result
        .channels
        .iter()
        .filter(|c| c.outcomes[ia].is_ok() && c.outcomes[ib].is_ok())
        .map(|c| c.outcomes[ib].counts[j].ber() - c.outcomes[ia].counts[j].ber())
        .collect();
    let n = diffs.len();
    if n < 2 {
        return Err(crate::error::invalid("channels", "need at least two paired channels"));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(PairedDifference {
        mean,
        std_error: (var / n as f64).sqrt(),
        channels: n,
    })
}
