//! Monte Carlo simulation of the original delayed coupled system
//!
//! ẍ = −βẋ + δ₁x − δ₃x³ − κV + μx(t−τ₁) + νẋ(t−τ₂) + ξ(t) + εG sin Ωt,
//! V̇ = −αV + ẋ,
//!
//! with ξ an Ornstein–Uhlenbeck process stepped exactly. The mechanical
//! update is semi-implicit Euler–Maruyama: v first, then x and V from the
//! new v. Trajectory k draws from ChaCha8 stream k of the master seed, so
//! ensembles can be split across threads and merged in index order.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::averaging::{DensityField, GridSpec};
use crate::error::{Error, Result};
use crate::model::{ExcitationParams, NoiseParams, SystemParams};
use crate::spectrum::{spectral_snr, PsdSettings, SegmentPeriodogram, SegmentPower, SpectralSnr};
use crate::sum::{pairwise_sum, NeumaierSum};

/// |x| beyond which a trajectory is abandoned.
pub const DIVERGENCE_LIMIT: f64 = 1e3;
/// P_m at or below which the efficiency is reported as undefined.
pub const MIN_INPUT_POWER: f64 = 1e-8;
/// Forcing periods always discarded when ε > 0.
pub const MIN_TRANSIENT_PERIODS: f64 = 200.0;

/// Exact OU update over a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuStep {
    decay: f64,
    kick: f64,
}

impl OuStep {
    pub fn new(np: &NoiseParams, dt: f64) -> Self {
        let decay = (-dt / np.correlation_time()).exp();
        Self { decay, kick: (np.variance() * (1.0 - decay * decay)).sqrt() }
    }

    #[inline]
    pub fn step(&self, xi: f64, gaussian: f64) -> f64 {
        xi * self.decay + self.kick * gaussian
    }
}

/// ξ' = ξe^(−dt/c) + √((D/c)(1 − e^(−2dt/c)))·z.
pub fn ou_path_step(xi: f64, np: &NoiseParams, dt: f64, gaussian: f64) -> f64 {
    OuStep::new(np, dt).step(xi, gaussian)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_total: f64,
    /// `None`: 20% of `t_total`, and at least 200 forcing periods when ε > 0.
    pub t_transient: Option<f64>,
    pub n_traj: usize,
    pub seed: u64,
    /// Initial displacement of even trajectories; odd ones start at −x0.
    pub x0: f64,
    pub v0: f64,
    pub voltage0: f64,
    pub grid: GridSpec,
    pub psd: Option<PsdSettings>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_total: 1250.0,
            t_transient: None,
            n_traj: 200,
            seed: 0,
            x0: 1.0,
            v0: 0.0,
            voltage0: 0.0,
            grid: GridSpec { x_min: -2.5, x_max: 2.5, nx: 64, v_min: -3.0, v_max: 3.0, nv: 64 },
            psd: None,
        }
    }
}

impl SimConfig {
    /// Resolved discard window.
    pub fn transient(&self, ex: &ExcitationParams) -> f64 {
        match self.t_transient {
            Some(t) => t,
            None if ex.amplitude() > 0.0 => {
                (0.2 * self.t_total).max(MIN_TRANSIENT_PERIODS * 2.0 * PI / ex.omega())
            }
            None => 0.2 * self.t_total,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    pub fn transient_steps(&self, ex: &ExcitationParams) -> usize {
        (self.transient(ex) / self.dt).round() as usize
    }

    pub fn validate(&self, p: &SystemParams, np: &NoiseParams, ex: &ExcitationParams) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig { reason: "dt must be positive" });
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(Error::InvalidConfig { reason: "t_total must be positive" });
        }
        let tr = self.transient(ex);
        if !(tr >= 0.0) || self.transient_steps(ex) >= self.steps() {
            return Err(Error::InvalidConfig { reason: "transient must be shorter than t_total" });
        }
        let limit = [p.tau1(), p.tau2(), np.correlation_time()]
            .into_iter()
            .filter(|t| *t > 0.0)
            .fold(f64::INFINITY, f64::min);
        // 1e-12 slack so e.g. dt = 0.015 with c = 0.3 is accepted
        if self.dt > limit / 20.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig { reason: "dt must not exceed min(tau1, tau2, c)/20" });
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig { reason: "n_traj must be >= 1" });
        }
        if !(self.x0.is_finite() && self.v0.is_finite() && self.voltage0.is_finite()) {
            return Err(Error::InvalidConfig { reason: "initial state must be finite" });
        }
        self.grid.validate()?;
        if let Some(psd) = &self.psd {
            psd.validate()?;
            SegmentPeriodogram::new(psd, ex.omega(), self.dt)?;
        }
        Ok(())
    }
}

/// Ring buffer of past samples at spacing dt with a linearly interpolated
/// read at a fixed lag. History before t = 0 is the initial value.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: Vec<f64>,
    head: usize,
    lag: usize,
    frac: f64,
}

impl DelayLine {
    pub fn new(delay: f64, dt: f64, initial: f64) -> Self {
        let f = delay / dt;
        let mut lag = f.floor();
        let mut frac = f - lag;
        if (f - f.round()).abs() < 1e-9 {
            lag = f.round();
            frac = 0.0;
        }
        let lag = lag as usize;
        Self { buf: vec![initial; lag + 2], head: 0, lag, frac }
    }

    /// Value `delay` before the newest sample.
    #[inline]
    pub fn read(&self) -> f64 {
        let n = self.buf.len();
        let a = self.buf[(self.head + n - self.lag) % n];
        if self.frac == 0.0 {
            return a;
        }
        let b = self.buf[(self.head + n - self.lag - 1) % n];
        (1.0 - self.frac) * a + self.frac * b
    }

    #[inline]
    pub fn push(&mut self, value: f64) {
        self.head = (self.head + 1) % self.buf.len();
        self.buf[self.head] = value;
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }
}

/// State handed to a trajectory sink after every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub voltage: f64,
    pub xi: f64,
    /// Past the transient window.
    pub recorded: bool,
}

/// Running estimators of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub index: u64,
    pub samples: u64,
    /// Σ V².
    pub voltage_sq: NeumaierSum,
    /// Σ v(ξ + εG sin Ωt).
    pub input: NeumaierSum,
    pub histogram: Vec<u64>,
    pub in_range: u64,
    pub diverged: bool,
    pub segments: Vec<SegmentPower>,
}

/// Initial displacement of trajectory `index`, alternating wells.
pub fn initial_displacement(cfg: &SimConfig, index: u64) -> f64 {
    if index % 2 == 0 {
        cfg.x0
    } else {
        -cfg.x0
    }
}

/// Integrates trajectory `index`, calling `sink` after every step.
pub fn simulate_trajectory_with<S: FnMut(&Sample)>(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    cfg: &SimConfig,
    index: u64,
    mut sink: S,
) -> Result<TrajectoryStats> {
    cfg.validate(p, np, ex)?;
    let dt = cfg.dt;
    let (d1, d3, kappa, alpha, beta) = (p.delta1(), p.delta3(), p.kappa(), p.alpha(), p.beta());
    let (mu, nu) = (p.mu(), p.nu());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut x = initial_displacement(cfg, index);
    let mut v = cfg.v0;
    let mut volt = cfg.voltage0;
    let mut xi = np.variance().sqrt() * gauss();
    let ou = OuStep::new(np, dt);
    let mut xd = DelayLine::new(p.tau1(), dt, x);
    let mut vd = DelayLine::new(p.tau2(), dt, v);

    let mut periodogram = match &cfg.psd {
        Some(s) => Some((SegmentPeriodogram::new(s, ex.omega(), dt)?, s.stride)),
        None => None,
    };
    let steps = cfg.steps();
    let start = cfg.transient_steps(ex);
    let g = cfg.grid;
    let mut stats = TrajectoryStats {
        index,
        samples: 0,
        voltage_sq: NeumaierSum::new(),
        input: NeumaierSum::new(),
        histogram: vec![0; g.len()],
        in_range: 0,
        diverged: false,
        segments: Vec::new(),
    };

    for i in 0..steps {
        let t = i as f64 * dt;
        let force = ex.force(t);
        if i >= start {
            // estimators see the state at t together with ξ(t) and F(t)
            stats.samples += 1;
            stats.voltage_sq.add(volt * volt);
            stats.input.add(v * (xi + force));
            if let Some((i_, j_)) = g.cell_of(x, v) {
                stats.histogram[g.index(i_, j_)] += 1;
                stats.in_range += 1;
            }
            if let Some((pg, stride)) = periodogram.as_mut() {
                if (i - start) % *stride == 0 {
                    if let Some(seg) = pg.push(x) {
                        stats.segments.push(seg);
                    }
                }
            }
        }
        let acc = -beta * v + d1 * x - d3 * x * x * x - kappa * volt + mu * xd.read() + nu * vd.read() + xi + force;
        v += acc * dt;
        x += v * dt;
        volt += (-alpha * volt + v) * dt;
        xi = ou.step(xi, gauss());
        xd.push(x);
        vd.push(v);
        if !(x.abs() <= DIVERGENCE_LIMIT) {
            stats.diverged = true;
            return Ok(stats);
        }
        sink(&Sample { step: i + 1, t: t + dt, x, v, voltage: volt, xi, recorded: i + 1 >= start });
    }
    Ok(stats)
}

/// [`simulate_trajectory_with`] without a sink.
pub fn simulate_trajectory(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    cfg: &SimConfig,
    index: u64,
) -> Result<TrajectoryStats> {
    simulate_trajectory_with(p, np, ex, cfg, index, |_| {})
}

/// Normalised (x, v) histogram: Σ values·dx·dv = 1 over in-range samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Fraction of samples that fell inside the grid.
    pub coverage: f64,
}

impl Histogram {
    pub fn total(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.dx() * self.grid.dv()
    }

    /// Σ|p − q|·dx·dv against a density on the same grid.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        if other.grid != self.grid {
            return Err(Error::Grid { reason: "histogram and density grids differ" });
        }
        let d: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect();
        Ok(pairwise_sum(&d) * self.grid.dx() * self.grid.dv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimates {
    /// κα⟨V²⟩.
    pub mean_power: f64,
    /// Standard error of `mean_power` across trajectories.
    pub mean_power_se: f64,
    pub mean_square_voltage: f64,
    pub v_rms: f64,
    /// P_m = ⟨v(ξ + εG sin Ωt)⟩.
    pub input_power: f64,
    /// 100·P_e/P_m, `None` when P_m ≤ [`MIN_INPUT_POWER`].
    pub efficiency_pct: Option<f64>,
    pub histogram: Histogram,
    pub psd_snr: Option<SpectralSnr>,
    pub trajectories: usize,
    pub divergent: usize,
    pub samples: u64,
}

impl EnsembleEstimates {
    /// Pools per-trajectory statistics in slice order.
    pub fn from_trajectories(
        p: &SystemParams,
        ex: &ExcitationParams,
        cfg: &SimConfig,
        trajs: &[TrajectoryStats],
    ) -> Result<Self> {
        let ok: Vec<&TrajectoryStats> = trajs.iter().filter(|t| !t.diverged && t.samples > 0).collect();
        let divergent = trajs.iter().filter(|t| t.diverged).count();
        if ok.is_empty() {
            return Err(Error::Diverged { trajectories: divergent });
        }
        let ka = p.kappa() * p.alpha();
        let mut v2 = NeumaierSum::new();
        let mut input = NeumaierSum::new();
        let mut samples = 0u64;
        let mut in_range = 0u64;
        let g = cfg.grid;
        let mut counts = vec![0u64; g.len()];
        let mut segments = Vec::new();
        let mut per_traj = Vec::with_capacity(ok.len());
        for t in &ok {
            v2.merge(&t.voltage_sq);
            input.merge(&t.input);
            samples += t.samples;
            in_range += t.in_range;
            for (c, h) in counts.iter_mut().zip(&t.histogram) {
                *c += h;
            }
            segments.extend_from_slice(&t.segments);
            per_traj.push(ka * t.voltage_sq.value() / t.samples as f64);
        }
        let n = samples as f64;
        let mean_square_voltage = v2.value() / n;
        let mean_power = ka * mean_square_voltage;
        let mean_power_se = if per_traj.len() > 1 {
            let m = pairwise_sum(&per_traj) / per_traj.len() as f64;
            let dev: Vec<f64> = per_traj.iter().map(|x| (x - m) * (x - m)).collect();
            (pairwise_sum(&dev) / (per_traj.len() - 1) as f64 / per_traj.len() as f64).sqrt()
        } else {
            f64::NAN
        };
        let input_power = input.value() / n;
        let efficiency_pct = (input_power > MIN_INPUT_POWER).then(|| 100.0 * mean_power / input_power);
        let cell = g.dx() * g.dv();
        let values = if in_range > 0 {
            counts.iter().map(|c| *c as f64 / (in_range as f64 * cell)).collect()
        } else {
            vec![0.0; g.len()]
        };
        let psd_snr = match &cfg.psd {
            Some(s) => {
                let pg = SegmentPeriodogram::new(s, ex.omega(), cfg.dt)?;
                // bootstrap stream distinct from every trajectory's
                Some(spectral_snr(&segments, pg.duration(), s.bootstrap, cfg.seed ^ 0x9e37_79b9_7f4a_7c15)?)
            }
            None => None,
        };
        Ok(Self {
            mean_power,
            mean_power_se,
            mean_square_voltage,
            v_rms: mean_square_voltage.sqrt(),
            input_power,
            efficiency_pct,
            histogram: Histogram { grid: g, values, coverage: in_range as f64 / n },
            psd_snr,
            trajectories: trajs.len(),
            divergent,
            samples,
        })
    }
}

/// Runs trajectories 0..n_traj sequentially and pools them.
pub fn run_ensemble(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    cfg: &SimConfig,
) -> Result<EnsembleEstimates> {
    cfg.validate(p, np, ex)?;
    let trajs = (0..cfg.n_traj as u64)
        .map(|k| simulate_trajectory(p, np, ex, cfg, k))
        .collect::<Result<Vec<_>>>()?;
    EnsembleEstimates::from_trajectories(p, ex, cfg, &trajs)
}

/// Spectral SNR of x(t); `cfg.psd` must be set.
pub fn estimate_snr_psd(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    cfg: &SimConfig,
) -> Result<SpectralSnr> {
    if cfg.psd.is_none() {
        return Err(Error::InvalidConfig { reason: "psd settings missing" });
    }
    run_ensemble(p, np, ex, cfg)?.psd_snr.ok_or(Error::InvalidConfig { reason: "psd settings missing" })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Feedback;

    #[test]
    fn delay_line_reads_constant_history_then_lagged_values() {
        let mut d = DelayLine::new(0.025, 0.01, 7.0);
        assert_eq!(d.capacity(), 4);
        assert_eq!(d.read(), 7.0);
        for k in 1..=10 {
            d.push(k as f64);
        }
        // x(t − 2.5 dt) between samples 8 and 7
        assert!((d.read() - 7.5).abs() < 1e-12);
        let mut z = DelayLine::new(0.0, 0.01, 1.0);
        z.push(3.0);
        assert_eq!(z.read(), 3.0);
    }

    #[test]
    fn delay_snaps_to_whole_steps() {
        let d = DelayLine::new(1.3, 0.01, 0.0);
        assert_eq!(d.capacity(), 132);
        assert_eq!(d.frac, 0.0);
    }

    #[test]
    fn config_rejects_coarse_step() {
        let p = SystemParams::baseline().with_feedback(Feedback::new(0.01, 0.01, 0.1, 0.5)).unwrap();
        let cfg = SimConfig { dt: 0.01, ..SimConfig::default() };
        assert!(cfg.validate(&p, &NoiseParams::baseline(), &ExcitationParams::none()).is_err());
        let cfg = SimConfig { dt: 0.005, ..cfg };
        assert!(cfg.validate(&p, &NoiseParams::baseline(), &ExcitationParams::none()).is_ok());
    }

    #[test]
    fn forced_transient_covers_two_hundred_periods() {
        let cfg = SimConfig { t_total: 40_000.0, ..SimConfig::default() };
        let ex = ExcitationParams::baseline();
        assert!((cfg.transient(&ex) - 200.0 * 2.0 * PI / 0.05).abs() < 1e-9);
        assert_eq!(cfg.transient(&ExcitationParams::none()), 8000.0);
        let short = SimConfig { t_total: 1000.0, ..SimConfig::default() };
        assert!(short.validate(&SystemParams::baseline(), &NoiseParams::baseline(), &ex).is_err());
    }

    #[test]
    fn ou_step_preserves_stationary_variance() {
        let np = NoiseParams::baseline();
        let s = OuStep::new(&np, 0.01);
        // Var' = decay²·Var + kick² = Var
        let var = np.variance();
        assert!((s.decay * s.decay * var + s.kick * s.kick - var).abs() <= 1e-15 * var);
        assert_eq!(ou_path_step(0.0, &np, 0.01, 0.0), 0.0);
    }
}
