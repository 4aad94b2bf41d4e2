//! Energy-dependent period T(H) and frequency ω(H) = 2π/T(H) of the
//! conservative effective oscillator, per motion regime.
//!
//! All quadratures use x = x_a + (x_b − x_a) sin²θ together with the exact
//! factorisation
//!
//! ```text
//! H − U(x) = ¼δ₃ (x − x_a)(x_b − x)·Q(x),   Q(x) = x² + Sx + t
//! ```
//!
//! with S = x_a + x_b and t = S² − x_a x_b − 2(δ₁−δ̃)/δ₃, so that
//! dx/|v| = 2 dθ/√(½δ₃ Q(x)) is bounded up to the turning points.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{MotionRegime, SystemParams};
use crate::quad;

/// Half-width of the excluded band around H = 0, relative to the well depth
/// at the well-bottom frequency.
pub const RELATIVE_BAND: f64 = 1e-4;

const ROOT_SUBINTERVALS: usize = 256;
const ROOT_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_ABS_TOL: f64 = 1e-14;
const QUAD_MAX_PIECES: usize = 2000;
const DAMPING: f64 = 0.5;
const FREQ_TOL: f64 = 1e-10;
const FREQ_MAX_ITER: usize = 200;

/// Accessible displacement interval [x_a, x_b] of an orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPoints {
    pub x_a: f64,
    pub x_b: f64,
    pub regime: MotionRegime,
}

/// Excluded energy band (−w, +w) around the separatrix, and the
/// self-consistent well bottom it is measured from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separatrix {
    /// ω_b solving ω = √(2(δ₁ − δ̃(ω))).
    pub omega_bottom: f64,
    /// Bottom energy −(δ₁−δ̃(ω_b))²/(4δ₃).
    pub bottom_energy: f64,
    /// Well depth ΔU at ω_b.
    pub depth: f64,
    pub half_width: f64,
}

impl Separatrix {
    pub fn new(p: &SystemParams) -> Result<Self> {
        let omega_bottom = well_bottom_frequency(p)?;
        let c = p.coeffs_at(omega_bottom);
        let (_, bottom_energy) = c.well_bottom(p)?;
        let depth = -bottom_energy;
        Ok(Self { omega_bottom, bottom_energy, depth, half_width: RELATIVE_BAND * depth })
    }

    #[inline]
    pub fn contains(&self, energy: f64) -> bool {
        energy.abs() < self.half_width
    }

    fn check(&self, energy: f64) -> Result<()> {
        if self.contains(energy) {
            Err(Error::InSeparatrixBand { energy, half_width: self.half_width })
        } else {
            Ok(())
        }
    }
}

/// Self-consistent frequency of small oscillations at the bottom of the
/// effective well, ω_b = √(2(δ₁ − δ̃(ω_b))), by damped fixed-point
/// iteration from √(2δ₁).
pub fn well_bottom_frequency(p: &SystemParams) -> Result<f64> {
    let mut w = (2.0 * p.delta1()).sqrt();
    let mut residual = f64::INFINITY;
    for _ in 0..10_000 {
        let c = p.coeffs_at(w);
        let e = c.stiffness(p);
        if !(e > 0.0) {
            return Err(Error::BistabilityLost { delta1: p.delta1(), delta_eff: c.delta_eff });
        }
        let next = (1.0 - DAMPING) * w + DAMPING * (2.0 * e).sqrt();
        residual = (next - w).abs();
        w = next;
        if residual <= 1e-14 * w {
            return Ok(w);
        }
    }
    Err(Error::NoConvergence { energy: f64::NAN, iterations: 10_000, residual })
}

/// U(x) = −½ e x² + ¼δ₃x⁴ with e = δ₁ − δ̃.
#[inline]
fn potential(x: f64, e: f64, d3: f64) -> f64 {
    let x2 = x * x;
    x2 * (-0.5 * e + 0.25 * d3 * x2)
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First sign change of `g` over `ROOT_SUBINTERVALS` equal pieces of
/// [lo, hi], refined by bisection.
fn bracket_root<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64, energy: f64) -> Result<f64> {
    let step = (hi - lo) / ROOT_SUBINTERVALS as f64;
    let mut a = lo;
    let mut ga = g(a);
    if ga == 0.0 {
        return Ok(a);
    }
    for i in 1..=ROOT_SUBINTERVALS {
        let b = if i == ROOT_SUBINTERVALS { hi } else { lo + step * i as f64 };
        let gb = g(b);
        if gb == 0.0 {
            return Ok(b);
        }
        if (ga > 0.0) != (gb > 0.0) {
            let r = bisect(g, a, b);
            debug_assert!((b - a) < ROOT_TOL || g(r).abs() < 1e-9);
            return Ok(r);
        }
        a = b;
        ga = gb;
    }
    Err(Error::Bracketing { energy })
}

/// Turning points for stiffness e = δ₁ − δ̃.
pub(crate) fn turning_points_e(
    h: f64,
    p: &SystemParams,
    e: f64,
    regime: MotionRegime,
) -> Result<TurningPoints> {
    let d3 = p.delta3();
    if !(e > 0.0) {
        return Err(Error::BistabilityLost { delta1: p.delta1(), delta_eff: p.delta1() - e });
    }
    if !h.is_finite() {
        return Err(Error::Bracketing { energy: h });
    }
    let g = |x: f64| potential(x, e, d3) - h;
    // U vanishes again at x0 beyond the minimum
    let x0 = (2.0 * e / d3).sqrt();
    match regime {
        MotionRegime::CrossWell => {
            if h < 0.0 {
                return Err(Error::RegimeMismatch { energy: h, regime });
            }
            let mut hi = 2.0 * x0;
            while g(hi) <= 0.0 {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Bracketing { energy: h });
                }
            }
            let xb = bracket_root(&g, x0, hi, h)?;
            Ok(TurningPoints { x_a: -xb, x_b: xb, regime })
        }
        MotionRegime::RightWell | MotionRegime::LeftWell => {
            if h >= 0.0 {
                return Err(Error::RegimeMismatch { energy: h, regime });
            }
            let xm = (e / d3).sqrt();
            let bottom = -e * e / (4.0 * d3);
            if h < bottom {
                return Err(Error::BelowWellBottom { energy: h, bottom });
            }
            let (xa, xb) = if g(xm) >= 0.0 {
                (xm, xm)
            } else {
                (bracket_root(&g, 0.0, xm, h)?, bracket_root(&g, xm, x0, h)?)
            };
            Ok(match regime {
                MotionRegime::RightWell => TurningPoints { x_a: xa, x_b: xb, regime },
                _ => TurningPoints { x_a: -xb, x_b: -xa, regime },
            })
        }
    }
}

/// Roots of U(x) = H delimiting the orbit of `regime`, with δ̃ evaluated at
/// `omega` and no forcing.
pub fn turning_points(
    energy: f64,
    p: &SystemParams,
    omega: f64,
    regime: MotionRegime,
) -> Result<TurningPoints> {
    let c = crate::model::effective_coeffs(p, omega)?;
    turning_points_e(energy, p, c.stiffness(p), regime)
}

/// ∮ f(x, v)/|v| dx over the closed orbit at energy `h` in the potential
/// with stiffness e: ∫₀^{π/2} [f(x,v) + f(x,−v)]·2/√(½δ₃Q) dθ.
pub(crate) fn orbit_integral_e<F: FnMut(f64, f64) -> f64>(
    h: f64,
    p: &SystemParams,
    e: f64,
    regime: MotionRegime,
    mut f: F,
) -> Result<f64> {
    let tp = turning_points_e(h, p, e, regime)?;
    let (xa, xb) = (tp.x_a, tp.x_b);
    let len = xb - xa;
    let half_d3 = 0.5 * p.delta3();
    let s = xa + xb;
    let t = s * s - xa * xb - 2.0 * e / p.delta3();
    let mut g = |th: f64| {
        let (sn, cs) = th.sin_cos();
        let x = xa + len * sn * sn;
        let q = (x * x + s * x + t).max(0.0);
        let root = (half_d3 * q).sqrt();
        let v = len * sn * cs * root;
        (f(x, v) + f(x, -v)) * 2.0 / root
    };
    let value = match regime {
        // Q is smallest at x = 0 (θ = π/4) for orbits over the saddle
        MotionRegime::CrossWell => {
            quad::integrate(&mut g, 0.0, FRAC_PI_4, QUAD_REL_TOL, QUAD_ABS_TOL, QUAD_MAX_PIECES)?
                .value
                + quad::integrate(&mut g, FRAC_PI_4, FRAC_PI_2, QUAD_REL_TOL, QUAD_ABS_TOL, QUAD_MAX_PIECES)?
                    .value
        }
        _ => quad::integrate(&mut g, 0.0, FRAC_PI_2, QUAD_REL_TOL, QUAD_ABS_TOL, QUAD_MAX_PIECES)?.value,
    };
    Ok(value)
}

#[inline]
pub(crate) fn period_e(h: f64, p: &SystemParams, e: f64, regime: MotionRegime) -> Result<f64> {
    orbit_integral_e(h, p, e, regime, |_, _| 1.0)
}

/// ∮ f(x, v)/|v| dx over the orbit at `energy`, δ̃ frozen at `omega`. With
/// f ≡ 1 this is the period; with f = v² it is the action ∮|v| dx.
pub fn orbit_integral<F: FnMut(f64, f64) -> f64>(
    energy: f64,
    p: &SystemParams,
    omega: f64,
    regime: MotionRegime,
    f: F,
) -> Result<f64> {
    let c = crate::model::effective_coeffs(p, omega)?;
    orbit_integral_e(energy, p, c.stiffness(p), regime, f)
}

/// Closed-loop period T(H) = 2∫_{x_a}^{x_b} dx/√(2H − 2U(x)), δ̃ evaluated
/// at `omega`.
pub fn period_integral(
    energy: f64,
    p: &SystemParams,
    omega: f64,
    regime: MotionRegime,
) -> Result<f64> {
    let c = crate::model::effective_coeffs(p, omega)?;
    Separatrix::new(p)?.check(energy)?;
    period_e(energy, p, c.stiffness(p), regime)
}

fn check_regime(energy: f64, regime: MotionRegime) -> Result<()> {
    let ok = match regime {
        MotionRegime::CrossWell => energy >= 0.0,
        _ => energy < 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::RegimeMismatch { energy, regime })
    }
}

/// Fixed point of ω ↦ 2π/T(H; δ̃(ω)) without the separatrix band check.
pub(crate) fn solve_frequency_unchecked(
    energy: f64,
    p: &SystemParams,
    regime: MotionRegime,
    start: f64,
) -> Result<f64> {
    check_regime(energy, regime)?;
    let d3 = p.delta3();
    let single = regime != MotionRegime::CrossWell;
    let mut w = start;
    let mut residual = f64::INFINITY;
    for _ in 0..FREQ_MAX_ITER {
        let c = p.coeffs_at(w);
        let e = c.stiffness(p);
        if !(e > 0.0) {
            return Err(Error::BistabilityLost { delta1: p.delta1(), delta_eff: c.delta_eff });
        }
        let target = if single && energy <= -e * e / (4.0 * d3) {
            // energy under this iterate's bottom: use the harmonic limit
            (2.0 * e).sqrt()
        } else {
            2.0 * PI / period_e(energy, p, e, regime)?
        };
        let next = (1.0 - DAMPING) * w + DAMPING * target;
        residual = (next - w).abs();
        w = next;
        if residual <= FREQ_TOL {
            if single {
                let e = p.coeffs_at(w).stiffness(p);
                let bottom = -e * e / (4.0 * d3);
                if energy < bottom - 1e-12 * bottom.abs() {
                    return Err(Error::BelowWellBottom { energy, bottom });
                }
            }
            return Ok(w);
        }
    }
    Err(Error::NoConvergence { energy, iterations: FREQ_MAX_ITER, residual })
}

/// Self-consistent ω(H) by damped iteration
/// ω_{k+1} = ½ω_k + ½·2π/T(H; δ̃(ω_k)) from ω₀ = √(2δ₁).
pub fn solve_frequency(energy: f64, p: &SystemParams, regime: MotionRegime) -> Result<f64> {
    Separatrix::new(p)?.check(energy)?;
    solve_frequency_unchecked(energy, p, regime, (2.0 * p.delta1()).sqrt())
}

/// Monotone (Fritsch–Carlson) cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        debug_assert!(n >= 2 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = alloc::vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
            return Self { x, y, d };
        }
        for k in 1..n - 1 {
            if m[k - 1] * m[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
            }
        }
        let end = |h0: f64, h1: f64, m0: f64, m1: f64| {
            let mut dd = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
            if dd * m0 <= 0.0 {
                dd = 0.0;
            } else if m0 * m1 <= 0.0 && dd.abs() > 3.0 * m0.abs() {
                dd = 3.0 * m0;
            }
            dd
        };
        d[0] = end(h[0], h[1], m[0], m[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        Self { x, y, d }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => return self.y[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// Tabulated ω(H), interpolated in ln|H| by a monotone cubic.
///
/// One branch covers the single wells from the bottom up to the band (left
/// and right are identical by symmetry), the other covers the cross-well
/// energies from the band up to `h_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    separatrix: Separatrix,
    h_max: f64,
    single_h: Vec<f64>,
    single_w: Vec<f64>,
    cross_h: Vec<f64>,
    cross_w: Vec<f64>,
    single: Pchip,
    cross: Pchip,
}

/// Build a [`FrequencyTable`] with `n` log-spaced samples in |H| per branch.
pub fn build_table(p: &SystemParams, h_max: f64, n: usize) -> Result<FrequencyTable> {
    if n < 16 {
        return Err(Error::InvalidParameter { name: "n", value: n as f64, reason: "need at least 16 samples" });
    }
    let sep = Separatrix::new(p)?;
    if !(h_max > sep.half_width) || !h_max.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h_max",
            value: h_max,
            reason: "must lie above the separatrix band",
        });
    }
    let geom = |lo: f64, hi: f64, i: usize| {
        if i == n - 1 {
            hi
        } else {
            lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
        }
    };
    let start = (2.0 * p.delta1()).sqrt();

    // single well, stored with H ascending: bottom first
    let mut single_h = Vec::with_capacity(n);
    let mut single_w = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let h = -geom(sep.half_width, sep.depth, i);
        let w = if i == n - 1 {
            sep.omega_bottom
        } else {
            solve_frequency_unchecked(h, p, MotionRegime::RightWell, start)?
        };
        single_h.push(h);
        single_w.push(w);
    }
    let mut cross_h = Vec::with_capacity(n);
    let mut cross_w = Vec::with_capacity(n);
    for i in 0..n {
        let h = geom(sep.half_width, h_max, i);
        cross_h.push(h);
        cross_w.push(solve_frequency_unchecked(h, p, MotionRegime::CrossWell, start)?);
    }
    // interpolation abscissa ln|H| must ascend
    let su: Vec<f64> = single_h.iter().rev().map(|h| (-h).ln()).collect();
    let sw: Vec<f64> = single_w.iter().rev().copied().collect();
    let cu: Vec<f64> = cross_h.iter().map(|h| h.ln()).collect();
    Ok(FrequencyTable {
        separatrix: sep,
        h_max,
        single: Pchip::new(su, sw),
        cross: Pchip::new(cu, cross_w.clone()),
        single_h,
        single_w,
        cross_h,
        cross_w,
    })
}

impl FrequencyTable {
    pub fn separatrix(&self) -> &Separatrix {
        &self.separatrix
    }

    /// Valid energy range [H_bottom, H_max].
    pub fn range(&self) -> (f64, f64) {
        (self.separatrix.bottom_energy, self.h_max)
    }

    /// Stored (H, ω) samples of a regime, H ascending.
    pub fn samples(&self, regime: MotionRegime) -> (&[f64], &[f64]) {
        match regime {
            MotionRegime::CrossWell => (&self.cross_h, &self.cross_w),
            _ => (&self.single_h, &self.single_w),
        }
    }

    /// Interpolated ω(H) of `regime`; errors inside the band, outside the
    /// table, or when the energy does not belong to the regime.
    pub fn lookup(&self, energy: f64, regime: MotionRegime) -> Result<f64> {
        check_regime(energy, regime)?;
        self.separatrix.check(energy)?;
        let (lo, hi) = self.range();
        if energy < lo || energy > hi {
            return Err(Error::OutOfTable { energy, min: lo, max: hi });
        }
        Ok(self.eval(energy))
    }

    fn eval(&self, energy: f64) -> f64 {
        if energy < 0.0 {
            self.single.eval((-energy).ln())
        } else {
            self.cross.eval(energy.ln())
        }
    }

    /// ω at any energy up to H_max: linear across the separatrix band
    /// between its edges, ω_b at and below the well bottom.
    pub fn lookup_bridged(&self, energy: f64) -> Result<f64> {
        let sep = &self.separatrix;
        if energy > self.h_max || energy.is_nan() {
            return Err(Error::OutOfTable { energy, min: sep.bottom_energy, max: self.h_max });
        }
        if energy <= sep.bottom_energy {
            return Ok(sep.omega_bottom);
        }
        if sep.contains(energy) {
            let w = sep.half_width;
            let wl = self.single_w[self.single_w.len() - 1];
            let wr = self.cross_w[0];
            let s = (energy + w) / (2.0 * w);
            return Ok(wl + s * (wr - wl));
        }
        Ok(self.eval(energy))
    }
}
