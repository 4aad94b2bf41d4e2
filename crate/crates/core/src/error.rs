use core::fmt;

use crate::model::MotionRegime;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures of the analytic and simulation kernels.
///
/// Variants that arise at a particular energy carry it so sweeps and tables
/// can report the offending point.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor rejected a parameter value.
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    /// δ₁ − δ̃ ≤ 0: the effective potential has a single well.
    BistabilityLost { delta1: f64, delta_eff: f64 },
    /// The energy lies below the bottom of the effective potential well.
    BelowWellBottom { energy: f64, bottom: f64 },
    /// The energy does not belong to the requested motion regime.
    RegimeMismatch { energy: f64, regime: MotionRegime },
    /// The energy falls inside the excluded band around the separatrix.
    InSeparatrixBand { energy: f64, half_width: f64 },
    /// Sign-change bracketing of a turning point failed.
    Bracketing { energy: f64 },
    /// Adaptive quadrature hit its subdivision limit before the tolerance.
    Quadrature { estimate: f64, error: f64 },
    /// A fixed-point iteration exhausted its iteration budget.
    NoConvergence { energy: f64, iterations: usize, residual: f64 },
    /// Energy outside the tabulated range of a frequency table.
    OutOfTable { energy: f64, min: f64, max: f64 },
    /// The averaged damping is not positive, so no stationary density exists.
    NonNormalizable { beta_eff: f64 },
    /// A density grid is too coarse or could not be widened enough.
    Grid { reason: &'static str },
    /// The Kramers rate underflowed to zero.
    RateUnderflow { exponent: f64 },
    /// R₁²ε²/(2(R₀²+Ω²)) ≥ 1: linear response no longer applies.
    LinearResponseBreakdown { ratio: f64 },
    /// Simulation configuration rejected.
    InvalidConfig { reason: &'static str },
    /// Every trajectory of an ensemble left the divergence guard.
    Diverged { trajectories: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value, reason } => {
                write!(f, "invalid parameter {name} = {value}: {reason}")
            }
            Error::BistabilityLost { delta1, delta_eff } => write!(
                f,
                "bi-stability lost: delta1 = {delta1} <= effective stiffness correction {delta_eff}"
            ),
            Error::BelowWellBottom { energy, bottom } => {
                write!(f, "energy {energy} is below the well bottom {bottom}")
            }
            Error::RegimeMismatch { energy, regime } => {
                write!(f, "energy {energy} is not admissible for regime {regime:?}")
            }
            Error::InSeparatrixBand { energy, half_width } => write!(
                f,
                "energy {energy} lies inside the separatrix exclusion band (+/-{half_width})"
            ),
            Error::Bracketing { energy } => {
                write!(f, "could not bracket turning point at energy {energy}")
            }
            Error::Quadrature { estimate, error } => write!(
                f,
                "quadrature did not converge (estimate {estimate}, error estimate {error})"
            ),
            Error::NoConvergence { energy, iterations, residual } => write!(
                f,
                "fixed-point iteration at energy {energy} did not converge after {iterations} iterations (residual {residual})"
            ),
            Error::OutOfTable { energy, min, max } => {
                write!(f, "energy {energy} outside tabulated range [{min}, {max}]")
            }
            Error::NonNormalizable { beta_eff } => write!(
                f,
                "effective damping {beta_eff} is not positive; stationary density does not exist"
            ),
            Error::Grid { reason } => write!(f, "density grid: {reason}"),
            Error::RateUnderflow { exponent } => {
                write!(f, "transition rate underflows (exponent {exponent})")
            }
            Error::LinearResponseBreakdown { ratio } => write!(
                f,
                "linear response breaks down: R1^2 eps^2 / (2(R0^2 + Omega^2)) = {ratio} >= 1"
            ),
            Error::InvalidConfig { reason } => write!(f, "invalid simulation config: {reason}"),
            Error::Diverged { trajectories } => {
                write!(f, "all {trajectories} trajectories diverged")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// Short machine-readable tag, used as the error code in sweep output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::BistabilityLost { .. } => "bistability_lost",
            Error::BelowWellBottom { .. } => "below_well_bottom",
            Error::RegimeMismatch { .. } => "regime_mismatch",
            Error::InSeparatrixBand { .. } => "separatrix_band",
            Error::Bracketing { .. } => "bracketing",
            Error::Quadrature { .. } => "quadrature",
            Error::NoConvergence { .. } => "no_convergence",
            Error::OutOfTable { .. } => "out_of_table",
            Error::NonNormalizable { .. } => "non_normalizable",
            Error::Grid { .. } => "grid",
            Error::RateUnderflow { .. } => "rate_underflow",
            Error::LinearResponseBreakdown { .. } => "linear_response",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Diverged { .. } => "diverged",
        }
    }
}
