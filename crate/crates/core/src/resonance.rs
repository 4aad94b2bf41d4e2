//! Two-state stochastic resonance: equilibria and linearisation of the
//! equivalent system, Kramers rates modulated by the periodic force, the
//! output spectrum and the SNR.

use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::freq::{self, Separatrix};
use crate::model::{ExcitationParams, MotionRegime, NoiseParams, SystemParams};

const EQ_TOL: f64 = 1e-10;
const EQ_MAX_ITER: usize = 200;

/// Whether R₀ is the escape rate of one well or the summed rate of both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateConvention {
    #[default]
    SingleWell,
    /// Both R₀ and R₁ doubled.
    BothWells,
}

/// Stable equilibria ±x_s, the saddle x_u = 0 and the frequency the rates
/// are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibria {
    pub x_s_plus: f64,
    pub x_s_minus: f64,
    pub x_u: f64,
    pub omega_eq: f64,
}

/// Eigenvalue magnitudes of a linearisation. A complex pair is reported as
/// its common modulus in both slots, so the product is preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalues {
    pub plus: f64,
    pub minus: f64,
    pub complex: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub r0: f64,
    pub r1: f64,
    /// Exponent of the Arrhenius factor, negative for a barrier.
    pub exponent: f64,
    /// R₀ underflowed to 0.
    pub underflow: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    /// Weight of the signal delta at Ω.
    pub s1_integral: f64,
    /// Broadband part at Ω.
    pub s2_at_omega: f64,
    /// R₁²ε²/(2(R₀²+Ω²)).
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceResult {
    pub equilibria: Equilibria,
    /// |λ⁺ₛ|, |λ⁻ₛ|, λ⁺ᵤ, |λ⁻ᵤ|.
    pub lambdas: [f64; 4],
    pub r0: f64,
    pub r1: f64,
    pub s1_integral: f64,
    pub s2_at_omega: f64,
    pub snr: f64,
}

fn stable_position(p: &SystemParams, omega: f64) -> Result<f64> {
    let e = p.delta1() - p.coupling_stiffness(omega);
    if !(e > 0.0) {
        return Err(Error::BistabilityLost { delta1: p.delta1(), delta_eff: p.coupling_stiffness(omega) });
    }
    Ok((e / p.delta3()).sqrt())
}

/// x_s = √((δ₁ − κω²/(α²+ω²))/δ₃) iterated with ω = ω(H) at the lowest
/// admissible single-well energy, U(x_s) plus the separatrix band
/// half-width.
pub fn snr_equilibria(p: &SystemParams) -> Result<Equilibria> {
    let sep = Separatrix::new(p)?;
    let offset = sep.half_width;
    let mut w = (2.0 * p.delta1()).sqrt();
    let mut xs = stable_position(p, w)?;
    for _ in 0..EQ_MAX_ITER {
        let wn = energy_frequency(p, xs, w, offset)?;
        let next = stable_position(p, wn)?;
        // x_s barely moves with ω, so ω has to settle as well
        let (dx, dw) = ((next - xs).abs(), (wn - w).abs());
        xs = next;
        w = wn;
        if dx <= EQ_TOL && dw <= EQ_TOL {
            return Ok(Equilibria { x_s_plus: xs, x_s_minus: -xs, x_u: 0.0, omega_eq: w });
        }
    }
    Err(Error::NoConvergence { energy: f64::NAN, iterations: EQ_MAX_ITER, residual: f64::NAN })
}

/// ω(H) at H = U(x_s; δ̃(ω)) + offset, clamped to the bottom of the well
/// at the solved frequency when the shift in δ̃ lifts it above H.
fn energy_frequency(p: &SystemParams, xs: f64, w: f64, offset: f64) -> Result<f64> {
    let c = p.coeffs_at(w);
    let mut h = (c.potential(p, xs) + offset).min(-offset);
    for _ in 0..4 {
        match freq::solve_frequency_unchecked(h, p, MotionRegime::RightWell, w) {
            Err(Error::BelowWellBottom { bottom, .. }) => h = (bottom + offset).min(-offset),
            r => return r,
        }
    }
    freq::solve_frequency_unchecked(h, p, MotionRegime::RightWell, w)
}

/// Roots of λ² + Γλ + (−δ₁ + κω²/(α²+ω²) + 3δ₃x_m²) = 0 with Γ = β̃(ω).
pub fn linearization_eigenvalues(p: &SystemParams, x_m: f64, omega_eq: f64) -> Eigenvalues {
    let gamma = p.coeffs_at(omega_eq).beta_eff;
    let prod = -p.delta1() + p.coupling_stiffness(omega_eq) + 3.0 * p.delta3() * x_m * x_m;
    let disc = gamma * gamma - 4.0 * prod;
    if disc >= 0.0 {
        let r = disc.sqrt();
        Eigenvalues { plus: (0.5 * (-gamma + r)).abs(), minus: (0.5 * (-gamma - r)).abs(), complex: false }
    } else {
        let m = prod.sqrt();
        Eigenvalues { plus: m, minus: m, complex: true }
    }
}

/// R₀ and R₁ of R± = R₀ ± R₁ε sin Ωt.
pub fn transition_rates(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    eq: &Equilibria,
    convention: RateConvention,
) -> Result<Rates> {
    let w = eq.omega_eq;
    let c = p.coeffs_at(w);
    let k = c.beta_eff * np.attenuation(w);
    if !(k > 0.0) {
        return Err(Error::NonNormalizable { beta_eff: c.beta_eff });
    }
    let xs = eq.x_s_plus;
    let ls = linearization_eigenvalues(p, xs, w);
    let lu = linearization_eigenvalues(p, eq.x_u, w);
    let d = np.intensity();
    let x2 = xs * xs;
    let exponent = k / d * (-0.5 * p.delta1() * x2 + 0.25 * p.delta3() * x2 * x2 + 0.5 * c.delta_eff * x2);
    let prefactor = (ls.plus * ls.minus * lu.plus / lu.minus).sqrt() / (2.0 * PI);
    let scale = match convention {
        RateConvention::SingleWell => 1.0,
        RateConvention::BothWells => 2.0,
    };
    let r0 = scale * prefactor * exponent.exp();
    let r1 = r0 * xs * ex.gravity() * k / d;
    Ok(Rates { r0, r1, exponent, underflow: r0 == 0.0 })
}

/// Signal weight S₁ and noise floor S₂(Ω) of the two-state output.
pub fn output_spectrum(rates: &Rates, x_s: f64, ex: &ExcitationParams) -> Result<Spectrum> {
    if rates.underflow {
        return Err(Error::RateUnderflow { exponent: rates.exponent });
    }
    let (r0, r1, eps, om) = (rates.r0, rates.r1, ex.eps(), ex.omega());
    let den = r0 * r0 + om * om;
    let ratio = r1 * r1 * eps * eps / (2.0 * den);
    if ratio >= 1.0 {
        return Err(Error::LinearResponseBreakdown { ratio });
    }
    let x2 = x_s * x_s;
    Ok(Spectrum {
        s1_integral: PI * x2 * r1 * r1 * eps * eps / (2.0 * den),
        s2_at_omega: (1.0 - ratio) * 2.0 * x2 * r0 / den,
        ratio,
    })
}

/// πR₁²ε²/(4R₀)·[1 − R₁²ε²/(2(R₀²+Ω²))]⁻¹.
pub fn snr_from_rates(rates: &Rates, ex: &ExcitationParams) -> Result<f64> {
    if rates.underflow {
        return Err(Error::RateUnderflow { exponent: rates.exponent });
    }
    let (r0, r1, eps, om) = (rates.r0, rates.r1, ex.eps(), ex.omega());
    let ratio = r1 * r1 * eps * eps / (2.0 * (r0 * r0 + om * om));
    if ratio >= 1.0 {
        return Err(Error::LinearResponseBreakdown { ratio });
    }
    Ok(PI * r1 * r1 * eps * eps / (4.0 * r0) / (1.0 - ratio))
}

/// Full two-state analysis.
pub fn analyze(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    convention: RateConvention,
) -> Result<ResonanceResult> {
    let eq = snr_equilibria(p)?;
    analyze_at(p, np, ex, &eq, convention)
}

/// As [`analyze`] with precomputed equilibria (they do not depend on the
/// noise or the forcing).
pub fn analyze_at(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    eq: &Equilibria,
    convention: RateConvention,
) -> Result<ResonanceResult> {
    let rates = transition_rates(p, np, ex, eq, convention)?;
    let spec = output_spectrum(&rates, eq.x_s_plus, ex)?;
    let ls = linearization_eigenvalues(p, eq.x_s_plus, eq.omega_eq);
    let lu = linearization_eigenvalues(p, eq.x_u, eq.omega_eq);
    Ok(ResonanceResult {
        equilibria: *eq,
        lambdas: [ls.plus, ls.minus, lu.plus, lu.minus],
        r0: rates.r0,
        r1: rates.r1,
        s1_integral: spec.s1_integral,
        s2_at_omega: spec.s2_at_omega,
        snr: snr_from_rates(&rates, ex)?,
    })
}

/// SNR with the single-well rate convention.
pub fn snr(p: &SystemParams, np: &NoiseParams, ex: &ExcitationParams) -> Result<f64> {
    Ok(analyze(p, np, ex, RateConvention::SingleWell)?.snr)
}

/// SNR for each noise intensity in `intensities` at fixed c.
pub fn snr_curve(
    p: &SystemParams,
    correlation_time: f64,
    ex: &ExcitationParams,
    intensities: &[f64],
    convention: RateConvention,
) -> Result<alloc::vec::Vec<Result<f64>>> {
    let eq = snr_equilibria(p)?;
    Ok(intensities
        .iter()
        .map(|&d| {
            let np = NoiseParams::new(d, correlation_time)?;
            let rates = transition_rates(p, &np, ex, &eq, convention)?;
            snr_from_rates(&rates, ex)
        })
        .collect())
}
