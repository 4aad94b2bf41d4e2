//! Stochastic averaging of the equivalent uncoupled system: orbit time
//! averages, the averaged Itô drift and diffusion of H, stationary densities
//! and the mean harvested power.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::freq::{self, FrequencyTable};
use crate::model::{MotionRegime, NoiseParams, SystemParams};
use crate::quad;
use crate::sum::pairwise_sum;

/// Averaged drift m(H) and diffusion σ²(H) of the energy process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub m: f64,
    pub sigma2: f64,
    /// ω(H) the coefficients were evaluated at.
    pub omega: f64,
}

/// Time average (ω/2π)∮ f(x, v)/|v| dx over the orbit at `energy`, with ω
/// the self-consistent ω(H).
pub fn loop_average<F: FnMut(f64, f64) -> f64>(
    f: F,
    energy: f64,
    p: &SystemParams,
    regime: MotionRegime,
) -> Result<f64> {
    let w = freq::solve_frequency(energy, p, regime)?;
    loop_average_at(f, energy, p, w, regime)
}

/// As [`loop_average`] with ω given.
pub fn loop_average_at<F: FnMut(f64, f64) -> f64>(
    f: F,
    energy: f64,
    p: &SystemParams,
    omega: f64,
    regime: MotionRegime,
) -> Result<f64> {
    Ok(omega / (2.0 * PI) * freq::orbit_integral(energy, p, omega, regime, f)?)
}

/// m = −⟨v(β̃v − δ̃X*)⟩ + D/(1+c²ω²), σ² = 2D⟨v²⟩/(1+c²ω²), coefficients at
/// ω(H).
pub fn drift_diffusion(
    energy: f64,
    p: &SystemParams,
    np: &NoiseParams,
    regime: MotionRegime,
) -> Result<DriftDiffusion> {
    let w = freq::solve_frequency(energy, p, regime)?;
    let c = p.coeffs_at(w);
    let xs = regime.equilibrium(p);
    let cross = loop_average_at(|_, v| v * (c.beta_eff * v - c.delta_eff * xs), energy, p, w, regime)?;
    let v2 = loop_average_at(|_, v| v * v, energy, p, w, regime)?;
    let att = np.attenuation(w);
    let d = np.intensity();
    Ok(DriftDiffusion { m: -cross + d / att, sigma2: 2.0 * d / att * v2, omega: w })
}

/// Stationary density of H on an ascending energy grid, normalised by the
/// trapezoid rule over the grid.
///
/// Below the saddle the two wells are lumped, so p(H) is the probability of
/// either well.
pub fn energy_spd(p: &SystemParams, np: &NoiseParams, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid { reason: "energy grid must be strictly increasing with at least 2 points" });
    }
    let mut log_s = Vec::with_capacity(grid.len());
    let mut ratio = Vec::with_capacity(grid.len());
    for &h in grid {
        let regime = if h < 0.0 { MotionRegime::RightWell } else { MotionRegime::CrossWell };
        let dd = drift_diffusion(h, p, np, regime)?;
        log_s.push(dd.sigma2.ln());
        ratio.push(2.0 * dd.m / dd.sigma2);
    }
    let mut log_p = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    log_p.push(-log_s[0]);
    for i in 1..grid.len() {
        acc += 0.5 * (ratio[i] + ratio[i - 1]) * (grid[i] - grid[i - 1]);
        log_p.push(acc - log_s[i]);
    }
    let top = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<f64> = log_p.iter().map(|l| (l - top).exp()).collect();
    let pieces: Vec<f64> =
        (1..grid.len()).map(|i| 0.5 * (q[i] + q[i - 1]) * (grid[i] - grid[i - 1])).collect();
    let z = pairwise_sum(&pieces);
    Ok(q.into_iter().map(|v| v / z).collect())
}

/// Cell-centred rectangular (x, v) lattice: node i sits at
/// x_min + (i + ½)·dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub nv: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_min: -2.5, x_max: 2.5, nx: 201, v_min: -3.0, v_max: 3.0, nv: 201 }
    }
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, nx: usize, v_min: f64, v_max: f64, nv: usize) -> Result<Self> {
        let g = Self { x_min, x_max, nx, v_min, v_max, nv };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min) || !(self.v_max > self.v_min) {
            return Err(Error::Grid { reason: "grid bounds must be increasing" });
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.v_min.is_finite() && self.v_max.is_finite()) {
            return Err(Error::Grid { reason: "grid bounds must be finite" });
        }
        if self.nx < 2 || self.nv < 2 {
            return Err(Error::Grid { reason: "grid needs at least 2 nodes per axis" });
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }
    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.nv as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }
    pub fn v(&self, j: usize) -> f64 {
        self.v_min + (j as f64 + 0.5) * self.dv()
    }
    pub fn len(&self) -> usize {
        self.nx * self.nv
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Flat index of node (i, j); x is the slow axis.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }
    /// Cell of (x, v), if inside.
    #[inline]
    pub fn cell_of(&self, x: f64, v: f64) -> Option<(usize, usize)> {
        let fx = (x - self.x_min) / (self.x_max - self.x_min);
        let fv = (v - self.v_min) / (self.v_max - self.v_min);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fv) {
            return None;
        }
        Some((((fx * self.nx as f64) as usize).min(self.nx - 1), ((fv * self.nv as f64) as usize).min(self.nv - 1)))
    }

    /// Trapezoid rule over the nodes, pairwise summed per row.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let wv = |j: usize| if j == 0 || j == self.nv - 1 { 0.5 } else { 1.0 };
        let mut rows = Vec::with_capacity(self.nx);
        let mut row = Vec::with_capacity(self.nv);
        for i in 0..self.nx {
            row.clear();
            row.extend((0..self.nv).map(|j| wv(j) * values[self.index(i, j)]));
            let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
            rows.push(wx * pairwise_sum(&row));
        }
        pairwise_sum(&rows) * self.dx() * self.dv()
    }

    /// Same spacing, extents scaled about the centre by `factor`.
    fn widened(&self, factor: f64) -> Self {
        let (cx, cv) = (0.5 * (self.x_min + self.x_max), 0.5 * (self.v_min + self.v_max));
        let (hx, hv) = (0.5 * (self.x_max - self.x_min) * factor, 0.5 * (self.v_max - self.v_min) * factor);
        let nx = (self.nx as f64 * factor).ceil() as usize;
        let nv = (self.nv as f64 * factor).ceil() as usize;
        Self { x_min: cx - hx, x_max: cx + hx, nx: nx | 1, v_min: cv - hv, v_max: cv + hv, nv: nv | 1 }
    }
}

/// Resolved state at one phase-space point of the stationary analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    /// Self-consistent H = ½v² + U(x; δ̃(ω(H))).
    pub energy: f64,
    pub omega: f64,
    pub beta_eff: f64,
    pub delta_eff: f64,
    /// ln[(1+c²ω²)/D] − β̃(1+c²ω²)H/D, the log of the unnormalised density.
    pub log_density: f64,
}

impl PointState {
    pub fn regime(&self, x: f64) -> MotionRegime {
        MotionRegime::classify(x, self.energy)
    }
}

/// Parameters plus the frequency table shared by all stationary
/// quantities.
#[derive(Debug, Clone)]
pub struct StationaryModel {
    params: SystemParams,
    noise: NoiseParams,
    table: FrequencyTable,
}

/// Frequency samples per branch used by [`StationaryModel::for_grid`].
pub const DEFAULT_TABLE_SAMPLES: usize = 64;

impl StationaryModel {
    pub fn new(params: SystemParams, noise: NoiseParams, table: FrequencyTable) -> Self {
        Self { params, noise, table }
    }

    /// Table spanning every energy reachable on `grid` (and on grids widened
    /// up to 4 times).
    pub fn for_grid(params: SystemParams, noise: NoiseParams, grid: &GridSpec) -> Result<Self> {
        let xm = grid.x_min.abs().max(grid.x_max.abs()) * 4.0;
        let vm = grid.v_min.abs().max(grid.v_max.abs()) * 4.0;
        let slack = params.kappa() + params.mu().abs() + 10.0 * params.nu().abs();
        let h_max = 0.5 * vm * vm + 0.25 * params.delta3() * xm.powi(4) + 0.5 * slack * xm * xm;
        let table = freq::build_table(&params, h_max, DEFAULT_TABLE_SAMPLES)?;
        Ok(Self { params, noise, table })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }
    pub fn noise(&self) -> &NoiseParams {
        &self.noise
    }
    pub fn table(&self) -> &FrequencyTable {
        &self.table
    }

    fn omega_of(&self, energy: f64) -> Result<f64> {
        match self.table.lookup_bridged(energy) {
            Err(Error::OutOfTable { .. }) => {
                let start = (2.0 * self.params.delta1()).sqrt();
                freq::solve_frequency_unchecked(energy, &self.params, MotionRegime::CrossWell, start)
            }
            r => r,
        }
    }

    /// Energy at (x, v) with δ̃ evaluated at ω of that same energy: plain
    /// fixed-point iteration from the well-bottom frequency, falling back to
    /// bracketing and bisection where the bridged band makes the map steep.
    pub fn energy_at(&self, x: f64, v: f64) -> Result<(f64, f64)> {
        let p = &self.params;
        let kin = 0.5 * v * v;
        let map = |w: f64| kin + p.coeffs_at(w).potential(p, x);
        let phi = |h: f64| -> Result<f64> { Ok(map(self.omega_of(h)?) - h) };
        let tol = |h: f64| 1e-13 * (1.0 + h.abs());
        let mut h = map(self.table.separatrix().omega_bottom);
        for _ in 0..12 {
            let hn = map(self.omega_of(h)?);
            if (hn - h).abs() <= tol(h) {
                return Ok((hn, self.omega_of(hn)?));
            }
            h = hn;
        }
        // bracket a sign change of φ(h) = F(h) − h around the last iterate
        let f0 = phi(h)?;
        let mut step = f0.abs().max(tol(h));
        let mut bracket = None;
        for _ in 0..200 {
            for cand in [h + step, h - step] {
                if (phi(cand)? > 0.0) != (f0 > 0.0) {
                    bracket = Some(cand);
                    break;
                }
            }
            if bracket.is_some() {
                break;
            }
            step *= 2.0;
        }
        let Some(other) = bracket else {
            return Err(Error::NoConvergence { energy: h, iterations: 12, residual: f0.abs() });
        };
        let (mut lo, mut hi) = if other < h { (other, h) } else { (h, other) };
        let mut plo = phi(lo)?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let pm = phi(mid)?;
            if pm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (pm > 0.0) == (plo > 0.0) {
                lo = mid;
                plo = pm;
            } else {
                hi = mid;
            }
        }
        let h = 0.5 * (lo + hi);
        Ok((h, self.omega_of(h)?))
    }

    /// Full state at (x, v), forcing off.
    pub fn point(&self, x: f64, v: f64) -> Result<PointState> {
        let (energy, omega) = self.energy_at(x, v)?;
        let c = self.params.coeffs_at(omega);
        let att = self.noise.attenuation(omega);
        let d = self.noise.intensity();
        let k = c.beta_eff * att;
        if !(k > 0.0) {
            return Err(Error::NonNormalizable { beta_eff: c.beta_eff });
        }
        Ok(PointState {
            energy,
            omega,
            beta_eff: c.beta_eff,
            delta_eff: c.delta_eff,
            log_density: (att / d).ln() - k * energy / d,
        })
    }

    /// Ũ = β̃(1+c²ω²)·(½v² + U(x) − x·forcing), ω and δ̃ at the point's
    /// unforced energy.
    pub fn effective_generalized_potential(&self, x: f64, v: f64, forcing: f64) -> Result<f64> {
        let s = self.point(x, v)?;
        let k = s.beta_eff * self.noise.attenuation(s.omega);
        Ok(k * (s.energy - x * forcing))
    }

    /// ∫∫ of the unnormalised density over the grid's rectangle by nested
    /// adaptive quadrature, scaled by e^(−`log_shift`).
    pub fn adaptive_normalizer(&self, grid: &GridSpec, log_shift: f64, rel_tol: f64) -> Result<quad::Estimate> {
        let mut failure = None;
        let mut inner_err = 0.0;
        let outer = quad::integrate(
            |x: f64| {
                if failure.is_some() {
                    return 0.0;
                }
                let r = quad::integrate(
                    |v: f64| match self.point(x, v) {
                        Ok(s) => (s.log_density - log_shift).exp(),
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    },
                    grid.v_min,
                    grid.v_max,
                    0.1 * rel_tol,
                    1e-300,
                    4000,
                );
                match r {
                    Ok(est) => {
                        inner_err += est.error;
                        est.value
                    }
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            grid.x_min,
            grid.x_max,
            rel_tol,
            1e-300,
            4000,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        outer
    }
}

/// Stationary joint density on a grid with the per-node energies and
/// frequencies it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: GridSpec,
    /// Normalised density at each node, x-major.
    pub values: Vec<f64>,
    /// ln N₀: density = N₀·(1+c²ω²)/D·exp(−β̃(1+c²ω²)H/D).
    pub log_norm_const: f64,
    energy: Vec<f64>,
    omega: Vec<f64>,
}

impl DensityField {
    /// Normalise resolved node states.
    pub fn assemble(grid: GridSpec, states: &[PointState]) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::Grid { reason: "state count does not match the grid" });
        }
        let top = states.iter().map(|s| s.log_density).fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = states.iter().map(|s| (s.log_density - top).exp()).collect();
        let z = grid.trapezoid(&shifted);
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Grid { reason: "density does not normalise on this grid" });
        }
        Ok(Self {
            grid,
            values: shifted.into_iter().map(|q| q / z).collect(),
            log_norm_const: -(top + z.ln()),
            energy: states.iter().map(|s| s.energy).collect(),
            omega: states.iter().map(|s| s.omega).collect(),
        })
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// ∫∫ p dx dv by the trapezoid rule.
    pub fn total(&self) -> f64 {
        self.grid.trapezoid(&self.values)
    }

    /// Largest boundary value relative to the interior maximum.
    pub fn boundary_ratio(&self) -> f64 {
        let g = &self.grid;
        let max = self.values.iter().copied().fold(0.0, f64::max);
        let mut edge: f64 = 0.0;
        for i in 0..g.nx {
            edge = edge.max(self.values[g.index(i, 0)]).max(self.values[g.index(i, g.nv - 1)]);
        }
        for j in 0..g.nv {
            edge = edge.max(self.values[g.index(0, j)]).max(self.values[g.index(g.nx - 1, j)]);
        }
        edge / max
    }

    /// E[V²] = ∫∫ (ω²/(α²+ω²)(x − X*) + α/(α²+ω²)v)² p dx dv with X* the
    /// bare equilibrium of the node's regime.
    pub fn mean_square_voltage(&self, p: &SystemParams) -> f64 {
        let g = &self.grid;
        let a = p.alpha();
        let mut integrand = Vec::with_capacity(g.len());
        for i in 0..g.nx {
            let x = g.x(i);
            for j in 0..g.nv {
                let k = g.index(i, j);
                let w = self.omega[k];
                let xs = MotionRegime::classify(x, self.energy[k]).equilibrium(p);
                let den = a * a + w * w;
                let volt = w * w / den * (x - xs) + a / den * g.v(j);
                integrand.push(volt * volt * self.values[k]);
            }
        }
        g.trapezoid(&integrand)
    }
}

/// Boundary density threshold relative to the maximum for auto-widening.
pub const BOUNDARY_TOL: f64 = 1e-12;
const MAX_WIDENINGS: usize = 8;

/// Joint stationary density on `grid` (unforced), widened by 25 % steps at
/// constant spacing until the boundary density is below
/// [`BOUNDARY_TOL`]·max.
pub fn joint_spd(model: &StationaryModel, grid: &GridSpec) -> Result<DensityField> {
    joint_spd_with(model, grid, true)
}

/// As [`joint_spd`]; `widen = false` keeps the grid as given.
pub fn joint_spd_with(model: &StationaryModel, grid: &GridSpec, widen: bool) -> Result<DensityField> {
    grid.validate()?;
    if grid.nx < 32 || grid.nv < 32 {
        return Err(Error::Grid { reason: "grid must be at least 32x32" });
    }
    let mut g = *grid;
    for _ in 0..=MAX_WIDENINGS {
        let mut states = Vec::with_capacity(g.len());
        for i in 0..g.nx {
            let x = g.x(i);
            for j in 0..g.nv {
                states.push(model.point(x, g.v(j))?);
            }
        }
        let field = DensityField::assemble(g, &states)?;
        if !widen || field.boundary_ratio() < BOUNDARY_TOL {
            return Ok(field);
        }
        g = g.widened(1.25);
    }
    Err(Error::Grid { reason: "density tails not captured after widening the grid" })
}

/// E[V²] from the joint density on `grid`.
pub fn mean_square_voltage(p: &SystemParams, np: &NoiseParams, grid: &GridSpec) -> Result<f64> {
    let model = StationaryModel::for_grid(*p, *np, grid)?;
    Ok(joint_spd(&model, grid)?.mean_square_voltage(p))
}

/// E[P] = κα·E[V²].
pub fn mean_power(p: &SystemParams, np: &NoiseParams, grid: &GridSpec) -> Result<f64> {
    if p.kappa() == 0.0 {
        return Ok(0.0);
    }
    Ok(p.kappa() * p.alpha() * mean_square_voltage(p, np, grid)?)
}

/// Ũ at (x, v), see [`StationaryModel::effective_generalized_potential`].
pub fn effective_generalized_potential(x: f64, v: f64, model: &StationaryModel, forcing: f64) -> Result<f64> {
    model.effective_generalized_potential(x, v, forcing)
}
