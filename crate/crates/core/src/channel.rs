//! Scenario geometry, large-scale path loss, Rayleigh fading and the
//! effective (direct plus reflected) channel seen by each user.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Large-scale gain `ref_gain * d^-exponent`.
pub fn path_loss(distance: f64, ref_gain: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(invalid("distance", format!("must be positive, got {distance}")));
    }
    Ok(ref_gain * distance.powf(-exponent))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Reference gain (linear, at 1 m) and distance exponent of one link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub ref_gain: f64,
    pub exponent: f64,
}

impl PathLossModel {
    pub fn gain(&self, distance: f64) -> Result<f64> {
        path_loss(distance, self.ref_gain, self.exponent)
    }
}

/// Geometry and propagation parameters from which scenarios are drawn.
///
/// The defaults place the BS at the origin, the IRS at (20, 10) and drop users
/// uniformly in a 10 m disk around (30, 0). The direct link uses -15 dB and
/// exponent 3.2; the -20 dB cascade reference gain is split evenly over the two
/// hops (-10 dB each, exponent 2.2 each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub bs_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub direct: PathLossModel,
    pub bs_irs: PathLossModel,
    pub irs_user: PathLossModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bs_pos: [0.0, 0.0],
            irs_pos: [20.0, 10.0],
            user_center: [30.0, 0.0],
            user_radius: 10.0,
            direct: PathLossModel {
                ref_gain: db_to_linear(-15.0),
                exponent: 3.2,
            },
            bs_irs: PathLossModel {
                ref_gain: db_to_linear(-10.0),
                exponent: 2.2,
            },
            irs_user: PathLossModel {
                ref_gain: db_to_linear(-10.0),
                exponent: 2.2,
            },
        }
    }
}

/// One drop of user positions together with the propagation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub user_pos: Vec<[f64; 2]>,
    pub direct: PathLossModel,
    pub bs_irs: PathLossModel,
    pub irs_user: PathLossModel,
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Drops `users` users uniformly over the configured disk.
pub fn sample_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, users: usize, rng: &mut R) -> Result<Scenario> {
    if users == 0 {
        return Err(invalid("users", "at least one user required"));
    }
    if cfg.user_radius < 0.0 {
        return Err(invalid("user_radius", "must be nonnegative"));
    }
    let user_pos = (0..users)
        .map(|_| {
            let u: f64 = rng.random();
            let phi = 2.0 * PI * rng.random::<f64>();
            let r = cfg.user_radius * u.sqrt();
            [cfg.user_center[0] + r * phi.cos(), cfg.user_center[1] + r * phi.sin()]
        })
        .collect();
    let scenario = Scenario {
        bs_pos: cfg.bs_pos,
        irs_pos: cfg.irs_pos,
        user_pos,
        direct: cfg.direct,
        bs_irs: cfg.bs_irs,
        irs_user: cfg.irs_user,
    };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn users(&self) -> usize {
        self.user_pos.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_pos.is_empty() {
            return Err(invalid("user_pos", "at least one user required"));
        }
        if !(distance(self.bs_pos, self.irs_pos) > 0.0) {
            return Err(invalid("irs_pos", "BS and IRS coincide"));
        }
        for (k, &u) in self.user_pos.iter().enumerate() {
            if !(distance(self.bs_pos, u) > 0.0) || !(distance(self.irs_pos, u) > 0.0) {
                return Err(invalid("user_pos", format!("user {k} coincides with BS or IRS")));
            }
        }
        Ok(())
    }

    pub fn direct_gain(&self, k: usize) -> Result<f64> {
        self.direct.gain(distance(self.bs_pos, self.user_pos[k]))
    }

    pub fn bs_irs_gain(&self) -> Result<f64> {
        self.bs_irs.gain(distance(self.bs_pos, self.irs_pos))
    }

    pub fn irs_user_gain(&self, k: usize) -> Result<f64> {
        self.irs_user.gain(distance(self.irs_pos, self.user_pos[k]))
    }
}

/// Baseband channels of one realization.
///
/// `direct[k]` is `h_{d,k}` (length M), `bs_irs[n]` is row `n` of `G` (length M)
/// and `irs_user[k]` is `h_{r,k}` (length N). Complex entries serialize as
/// `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub direct: Vec<Vec<Complex64>>,
    pub bs_irs: Vec<Vec<Complex64>>,
    pub irs_user: Vec<Vec<Complex64>>,
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rayleigh-faded channels with per-link path-loss variance.
pub fn sample_channels<R: Rng + ?Sized>(
    scenario: &Scenario,
    antennas: usize,
    elements: usize,
    rng: &mut R,
) -> Result<ChannelSet> {
    if antennas == 0 || elements == 0 {
        return Err(invalid("dimensions", "M and N must be positive"));
    }
    scenario.validate()?;
    let users = scenario.users();
    let mut direct = Vec::with_capacity(users);
    for k in 0..users {
        let amp = scenario.direct_gain(k)?.sqrt();
        direct.push((0..antennas).map(|_| cn01(rng) * amp).collect());
    }
    let amp = scenario.bs_irs_gain()?.sqrt();
    let bs_irs = (0..elements)
        .map(|_| (0..antennas).map(|_| cn01(rng) * amp).collect())
        .collect();
    let mut irs_user = Vec::with_capacity(users);
    for k in 0..users {
        let amp = scenario.irs_user_gain(k)?.sqrt();
        irs_user.push((0..elements).map(|_| cn01(rng) * amp).collect());
    }
    Ok(ChannelSet {
        direct,
        bs_irs,
        irs_user,
    })
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.direct.len()
    }

    pub fn antennas(&self) -> usize {
        self.direct.first().map_or(0, Vec::len)
    }

    pub fn elements(&self) -> usize {
        self.bs_irs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m, n) = (self.users(), self.antennas(), self.elements());
        if k == 0 || m == 0 || n == 0 {
            return Err(Error::DimensionMismatch("empty channel set".into()));
        }
        if self.irs_user.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} IRS-user channels for {k} users",
                self.irs_user.len()
            )));
        }
        let rows_ok = self.direct.iter().all(|h| h.len() == m)
            && self.bs_irs.iter().all(|g| g.len() == m)
            && self.irs_user.iter().all(|h| h.len() == n);
        if !rows_ok {
            return Err(Error::DimensionMismatch("ragged channel rows".into()));
        }
        let finite = self
            .direct
            .iter()
            .chain(&self.bs_irs)
            .chain(&self.irs_user)
            .flatten()
            .all(|z| z.is_finite());
        if !finite {
            return Err(invalid("channels", "non-finite entry"));
        }
        Ok(())
    }

    /// Copy with the reflected path removed (`G = 0`).
    pub fn without_irs(&self) -> ChannelSet {
        ChannelSet {
            direct: self.direct.clone(),
            bs_irs: self
                .bs_irs
                .iter()
                .map(|row| vec![Complex64::new(0.0, 0.0); row.len()])
                .collect(),
            irs_user: self.irs_user.clone(),
        }
    }
}

/// Unit-modulus IRS reflection coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShifts {
    theta: Vec<Complex64>,
}

impl PhaseShifts {
    pub fn new(theta: Vec<Complex64>) -> Result<Self> {
        if let Some(n) = theta.iter().position(|t| (t.norm() - 1.0).abs() > 1e-10) {
            return Err(invalid("theta", format!("element {n} has modulus {}", theta[n].norm())));
        }
        Ok(Self { theta })
    }

    pub fn ones(elements: usize) -> Self {
        Self {
            theta: vec![Complex64::new(1.0, 0.0); elements],
        }
    }

    pub fn random<R: Rng + ?Sized>(elements: usize, rng: &mut R) -> Self {
        Self {
            theta: (0..elements)
                .map(|_| Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()))
                .collect(),
        }
    }

    /// Inverse of [`PhaseShifts::lifted`]: `[Re theta; Im theta]`.
    pub fn from_lifted(lifted: &[f64]) -> Result<Self> {
        if !lifted.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "lifted phase vector has odd length {}",
                lifted.len()
            )));
        }
        let n = lifted.len() / 2;
        Self::new((0..n).map(|i| Complex64::new(lifted[i], lifted[i + n])).collect())
    }

    pub fn lifted(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|t| t.re)
            .chain(self.theta.iter().map(|t| t.im))
            .collect()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Row vector `h_k^H = h_{d,k}^H + theta^T W_{r,k}^H G` of user `k`.
pub fn effective_channel(ch: &ChannelSet, phases: &PhaseShifts, k: usize) -> Result<Vec<Complex64>> {
    if k >= ch.users() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: ch.users(),
        });
    }
    if phases.len() != ch.elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} phase shifts for {} IRS elements",
            phases.len(),
            ch.elements()
        )));
    }
    let mut h: Vec<Complex64> = ch.direct[k].iter().map(|z| z.conj()).collect();
    for ((theta, hr), g_row) in phases.as_slice().iter().zip(&ch.irs_user[k]).zip(&ch.bs_irs) {
        let w = theta * hr.conj();
        for (hm, g) in h.iter_mut().zip(g_row) {
            *hm += w * g;
        }
    }
    Ok(h)
}

/// Effective channel rows of all users.
pub fn effective_channels(ch: &ChannelSet, phases: &PhaseShifts) -> Result<Vec<Vec<Complex64>>> {
    (0..ch.users()).map(|k| effective_channel(ch, phases, k)).collect()
}

/// Serialized channel realization used as a cross-implementation fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub seed: u64,
    pub antennas: usize,
    pub elements: usize,
    pub users: usize,
    pub scenario: Scenario,
    pub channels: ChannelSet,
}

impl ChannelDump {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dump: ChannelDump = serde_json::from_str(s)?;
        dump.channels.validate()?;
        Ok(dump)
    }
}
