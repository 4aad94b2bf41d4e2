//! Numerical kernels for a bi-stable piezoelectric vibration energy harvester
//! with time-delayed displacement and velocity feedback, driven by
//! Ornstein–Uhlenbeck colored noise and a slow periodic force.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised along the
//! analysis pipeline:
//!
//! * [`model`]: parameters, potentials and the delay-equivalent damping and
//!   stiffness corrections.
//! * [`freq`]: turning points, orbit periods and the self-consistent
//!   energy-dependent frequency ω(H), plus an interpolating table.
//! * [`averaging`]: orbit time averages, the averaged Itô drift/diffusion,
//!   stationary densities and the mean harvested power.
//! * [`resonance`]: two-state Kramers rates, output spectrum and SNR.
//! * [`mcs`]: Monte Carlo stepping of the original delayed coupled system and
//!   the ensemble estimators that check everything above.
//! * [`spectrum`]: segment periodograms and the spectral SNR estimate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod averaging;
mod error;
pub mod freq;
pub mod mcs;
pub mod model;
pub mod quad;
pub mod resonance;
pub mod spectrum;
mod sum;

pub use error::{Error, Result};
pub use model::{EffectiveCoeffs, ExcitationParams, MotionRegime, NoiseParams, SystemParams};
pub use sum::{pairwise_sum, NeumaierSum};
