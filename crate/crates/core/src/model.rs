//! Model constants and closed-form quantities of the delay-controlled
//! harvester.
//!
//! The original system is
//!
//! ```text
//! ẍ + βẋ − δ₁x + δ₃x³ + κV = μ x(t−τ₁) + ν ẋ(t−τ₂) + ξ(t) + εG sin Ωt
//! V̇ + αV = ẋ
//! ```
//!
//! Replacing the delayed terms and the voltage by their harmonic
//! approximations at frequency ω yields an uncoupled oscillator with damping
//! β̃(ω) and an extra stiffness δ̃(ω); see [`effective_coeffs`].


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Dimensionless oscillator, transducer and feedback constants.
///
/// Validated on construction; every accessor is branch free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    delta1: f64,
    delta3: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
    nu: f64,
    tau1: f64,
    tau2: f64,
}

/// Delayed feedback gains and delays: μ x(t−τ₁) + ν ẋ(t−τ₂).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Feedback {
    pub mu: f64,
    pub nu: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl Feedback {
    pub const NONE: Feedback = Feedback { mu: 0.0, nu: 0.0, tau1: 0.0, tau2: 0.0 };

    pub fn new(mu: f64, nu: f64, tau1: f64, tau2: f64) -> Self {
        Self { mu, nu, tau1, tau2 }
    }
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason })
    }
}

impl SystemParams {
    /// Uncontrolled system (μ = ν = τ₁ = τ₂ = 0).
    pub fn new(delta1: f64, delta3: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self> {
        check("delta1", delta1, delta1 > 0.0, "must be > 0")?;
        check("delta3", delta3, delta3 > 0.0, "must be > 0")?;
        check("kappa", kappa, kappa >= 0.0, "must be >= 0")?;
        check("alpha", alpha, alpha > 0.0, "must be > 0")?;
        check("beta", beta, beta >= 0.0, "must be >= 0")?;
        Ok(Self { delta1, delta3, kappa, alpha, beta, mu: 0.0, nu: 0.0, tau1: 0.0, tau2: 0.0 })
    }

    /// δ₁ = δ₃ = 3, κ = 0.3, α = 0.05, β = 0.02, no feedback.
    pub fn baseline() -> Self {
        Self {
            delta1: 3.0,
            delta3: 3.0,
            kappa: 0.3,
            alpha: 0.05,
            beta: 0.02,
            mu: 0.0,
            nu: 0.0,
            tau1: 0.0,
            tau2: 0.0,
        }
    }

    pub fn with_feedback(mut self, fb: Feedback) -> Result<Self> {
        check("mu", fb.mu, true, "must be finite")?;
        check("nu", fb.nu, true, "must be finite")?;
        check("tau1", fb.tau1, fb.tau1 >= 0.0, "must be >= 0")?;
        check("tau2", fb.tau2, fb.tau2 >= 0.0, "must be >= 0")?;
        self.mu = fb.mu;
        self.nu = fb.nu;
        self.tau1 = fb.tau1;
        self.tau2 = fb.tau2;
        Ok(self)
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }
    pub fn delta3(&self) -> f64 {
        self.delta3
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn tau1(&self) -> f64 {
        self.tau1
    }
    pub fn tau2(&self) -> f64 {
        self.tau2
    }
    pub fn feedback(&self) -> Feedback {
        Feedback { mu: self.mu, nu: self.nu, tau1: self.tau1, tau2: self.tau2 }
    }

    /// β̃ and δ̃ at `omega` without the ω > 0 check.
    #[inline]
    pub(crate) fn coeffs_at(&self, omega: f64) -> EffectiveCoeffs {
        let a2w2 = self.alpha * self.alpha + omega * omega;
        let beta_eff = self.beta + self.kappa * self.alpha / a2w2
            + self.mu / omega * (omega * self.tau1).sin()
            - self.nu * (omega * self.tau2).cos();
        let delta_eff = self.kappa * omega * omega / a2w2
            - self.mu * (omega * self.tau1).cos()
            - self.nu * omega * (omega * self.tau2).sin();
        EffectiveCoeffs { beta_eff, delta_eff, omega }
    }

    /// κω²/(α²+ω²): the stiffness the transducer alone adds.
    #[inline]
    pub fn coupling_stiffness(&self, omega: f64) -> f64 {
        self.kappa * omega * omega / (self.alpha * self.alpha + omega * omega)
    }
}

/// Colored-noise statistics: ⟨ξ(t)ξ(s)⟩ = (D/c) exp(−|t−s|/c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    intensity: f64,
    correlation_time: f64,
}

impl NoiseParams {
    pub fn new(intensity: f64, correlation_time: f64) -> Result<Self> {
        check("D", intensity, intensity > 0.0, "must be > 0")?;
        check("c", correlation_time, correlation_time > 0.0, "must be > 0")?;
        Ok(Self { intensity, correlation_time })
    }

    /// D = 0.005, c = 0.3.
    pub fn baseline() -> Self {
        Self { intensity: 0.005, correlation_time: 0.3 }
    }

    /// D.
    pub fn intensity(&self) -> f64 {
        self.intensity
    }
    /// c.
    pub fn correlation_time(&self) -> f64 {
        self.correlation_time
    }
    /// Stationary variance D/c of ξ.
    pub fn variance(&self) -> f64 {
        self.intensity / self.correlation_time
    }
    /// 1 + c²ω², the colored-noise attenuation at frequency ω.
    #[inline]
    pub fn attenuation(&self, omega: f64) -> f64 {
        1.0 + self.correlation_time * self.correlation_time * omega * omega
    }
}

/// Periodic forcing εG sin Ωt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationParams {
    eps: f64,
    gravity: f64,
    omega: f64,
}

impl ExcitationParams {
    pub fn new(eps: f64, gravity: f64, omega: f64) -> Result<Self> {
        check("eps", eps, eps >= 0.0, "must be >= 0")?;
        check("G", gravity, gravity >= 0.0, "must be >= 0")?;
        check("Omega", omega, omega > 0.0, "must be > 0")?;
        Ok(Self { eps, gravity, omega })
    }

    /// ε = 0.1, G = 0.1, Ω = 0.05.
    pub fn baseline() -> Self {
        Self { eps: 0.1, gravity: 0.1, omega: 0.05 }
    }

    /// No periodic forcing (ε = 0); Ω kept at the baseline value.
    pub fn none() -> Self {
        Self { eps: 0.0, gravity: 0.1, omega: 0.05 }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn gravity(&self) -> f64 {
        self.gravity
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    /// εG.
    pub fn amplitude(&self) -> f64 {
        self.eps * self.gravity
    }
    /// Instantaneous force εG sin Ωt.
    #[inline]
    pub fn force(&self, t: f64) -> f64 {
        self.eps * self.gravity * (self.omega * t).sin()
    }
}

/// Effective damping β̃ and stiffness correction δ̃ at a frequency ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoeffs {
    pub beta_eff: f64,
    pub delta_eff: f64,
    pub omega: f64,
}

impl EffectiveCoeffs {
    /// δ₁ − δ̃, positive while the potential stays bi-stable.
    #[inline]
    pub fn stiffness(&self, p: &SystemParams) -> f64 {
        p.delta1 - self.delta_eff
    }

    /// Unforced effective potential −½(δ₁−δ̃)x² + ¼δ₃x⁴.
    #[inline]
    pub fn potential(&self, p: &SystemParams, x: f64) -> f64 {
        let x2 = x * x;
        x2 * (-0.5 * self.stiffness(p) + 0.25 * p.delta3 * x2)
    }

    /// Shifted minimum x_min = √((δ₁−δ̃)/δ₃) and the bottom energy
    /// −(δ₁−δ̃)²/(4δ₃).
    pub fn well_bottom(&self, p: &SystemParams) -> Result<(f64, f64)> {
        let e = self.stiffness(p);
        if !(e > 0.0) {
            return Err(Error::BistabilityLost { delta1: p.delta1, delta_eff: self.delta_eff });
        }
        Ok(((e / p.delta3).sqrt(), -e * e / (4.0 * p.delta3)))
    }
}

/// Which closed orbit an energy level supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionRegime {
    RightWell,
    LeftWell,
    CrossWell,
}

impl MotionRegime {
    pub const ALL: [MotionRegime; 3] =
        [MotionRegime::RightWell, MotionRegime::LeftWell, MotionRegime::CrossWell];

    /// 1, 2, 3 for right, left and cross-well motion.
    pub fn index(self) -> u8 {
        match self {
            MotionRegime::RightWell => 1,
            MotionRegime::LeftWell => 2,
            MotionRegime::CrossWell => 3,
        }
    }

    /// Regime of a phase point: the saddle energy of the unforced effective
    /// potential is exactly 0.
    #[inline]
    pub fn classify(x: f64, energy: f64) -> MotionRegime {
        if energy >= 0.0 {
            MotionRegime::CrossWell
        } else if x > 0.0 {
            MotionRegime::RightWell
        } else {
            MotionRegime::LeftWell
        }
    }

    /// Bare equilibrium X_i* the motion is centred on.
    #[inline]
    pub fn equilibrium(self, p: &SystemParams) -> f64 {
        let [right, left, saddle] = bare_equilibria(p);
        match self {
            MotionRegime::RightWell => right,
            MotionRegime::LeftWell => left,
            MotionRegime::CrossWell => saddle,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionRegime::RightWell => "right",
            MotionRegime::LeftWell => "left",
            MotionRegime::CrossWell => "cross",
        }
    }
}

/// U₀(x) = −½δ₁x² + ¼δ₃x⁴.
#[inline]
pub fn bare_potential(x: f64, p: &SystemParams) -> f64 {
    let x2 = x * x;
    x2 * (-0.5 * p.delta1 + 0.25 * p.delta3 * x2)
}

/// (+√(δ₁/δ₃), −√(δ₁/δ₃), 0).
pub fn bare_equilibria(p: &SystemParams) -> [f64; 3] {
    let x = (p.delta1 / p.delta3).sqrt();
    [x, -x, 0.0]
}

/// β̃(ω) and δ̃(ω) of the delay-equivalent uncoupled oscillator.
pub fn effective_coeffs(p: &SystemParams, omega: f64) -> Result<EffectiveCoeffs> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter {
            name: "omega",
            value: omega,
            reason: "frequency must be > 0",
        });
    }
    Ok(p.coeffs_at(omega))
}

/// U(x) = −½δ₁x² + ¼δ₃x⁴ + ½δ̃x² − x·forcing.
pub fn effective_potential(x: f64, p: &SystemParams, omega: f64, forcing: f64) -> Result<f64> {
    let c = effective_coeffs(p, omega)?;
    Ok(c.potential(p, x) - x * forcing)
}

/// H = ½v² + U(x).
pub fn total_energy(x: f64, v: f64, p: &SystemParams, omega: f64, forcing: f64) -> Result<f64> {
    Ok(0.5 * v * v + effective_potential(x, p, omega, forcing)?)
}

/// ΔU = (δ₁−δ̃)²/(4δ₃), the depth of the unforced effective wells below the
/// saddle.
pub fn well_depth(p: &SystemParams, omega: f64) -> Result<f64> {
    let c = effective_coeffs(p, omega)?;
    let (_, bottom) = c.well_bottom(p)?;
    Ok(-bottom)
}
