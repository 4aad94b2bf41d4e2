//! Segment-averaged periodogram of x(t) at the forcing frequency and its
//! neighbouring bins, and the spectral SNR estimate built from it.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::sum::pairwise_sum;

/// Periodogram settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdSettings {
    /// Segment length in forcing periods (at least 10).
    pub segment_periods: u32,
    /// Keep every `stride`-th integration step.
    pub stride: usize,
    /// Bins on each side of Ω used for the background floor.
    pub background_bins: usize,
    /// Bootstrap replicates for the standard error.
    pub bootstrap: usize,
}

impl Default for PsdSettings {
    fn default() -> Self {
        Self { segment_periods: 10, stride: 10, background_bins: 4, bootstrap: 200 }
    }
}

impl PsdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.segment_periods < 10 {
            return Err(Error::InvalidConfig { reason: "psd segments must span at least 10 forcing periods" });
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig { reason: "psd stride must be >= 1" });
        }
        if self.background_bins == 0 || self.background_bins >= self.segment_periods as usize {
            return Err(Error::InvalidConfig { reason: "psd background bins must be in [1, segment_periods)" });
        }
        if self.bootstrap < 2 {
            return Err(Error::InvalidConfig { reason: "psd bootstrap needs at least 2 replicates" });
        }
        Ok(())
    }
}

/// Periodogram ordinates of one segment: at Ω and the mean of the
/// background bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPower {
    pub signal: f64,
    pub background: f64,
}

/// Collects decimated samples and emits one [`SegmentPower`] per full
/// segment.
#[derive(Debug, Clone)]
pub struct SegmentPeriodogram {
    h: f64,
    freqs: Vec<f64>,
    buf: Vec<f64>,
    len: usize,
}

impl SegmentPeriodogram {
    /// Samples are spaced `stride·dt`; the segment holds the whole number
    /// of samples closest to `segment_periods` forcing periods.
    pub fn new(settings: &PsdSettings, omega: f64, dt: f64) -> Result<Self> {
        settings.validate()?;
        let h = settings.stride as f64 * dt;
        let len = (settings.segment_periods as f64 * 2.0 * PI / (omega * h)).round() as usize;
        if len < 4 * settings.segment_periods as usize {
            return Err(Error::InvalidConfig { reason: "psd sampling too coarse to resolve the forcing" });
        }
        let bin = 2.0 * PI / (len as f64 * h);
        let m = settings.background_bins as i64;
        // index 0 is the signal bin, then ±1, ±2, ...
        let mut freqs = Vec::with_capacity(2 * m as usize + 1);
        freqs.push(omega);
        for k in 1..=m {
            freqs.push(omega - k as f64 * bin);
            freqs.push(omega + k as f64 * bin);
        }
        Ok(Self { h, freqs, buf: Vec::with_capacity(len), len })
    }

    /// Segment duration.
    pub fn duration(&self) -> f64 {
        self.len as f64 * self.h
    }

    pub fn samples_per_segment(&self) -> usize {
        self.len
    }

    pub fn push(&mut self, x: f64) -> Option<SegmentPower> {
        self.buf.push(x);
        if self.buf.len() < self.len {
            return None;
        }
        let out = self.evaluate();
        self.buf.clear();
        Some(out)
    }

    fn ordinate(&self, w: f64, mean: f64) -> f64 {
        let mut re = Vec::with_capacity(self.len);
        let mut im = Vec::with_capacity(self.len);
        for (n, x) in self.buf.iter().enumerate() {
            let (s, c) = (w * n as f64 * self.h).sin_cos();
            re.push((x - mean) * c);
            im.push((x - mean) * s);
        }
        let (a, b) = (pairwise_sum(&re) * self.h, pairwise_sum(&im) * self.h);
        (a * a + b * b) / self.duration()
    }

    fn evaluate(&self) -> SegmentPower {
        let mean = pairwise_sum(&self.buf) / self.len as f64;
        let signal = self.ordinate(self.freqs[0], mean);
        let bg: Vec<f64> = self.freqs[1..].iter().map(|w| self.ordinate(*w, mean)).collect();
        SegmentPower { signal, background: pairwise_sum(&bg) / bg.len() as f64 }
    }
}

/// Spectral SNR from averaged segment periodograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSnr {
    /// (I(Ω) − floor)/floor.
    pub estimate: f64,
    /// Bootstrap standard error of `estimate` over segments.
    pub std_error: f64,
    /// The same excess expressed as a spectral-line weight over the floor,
    /// `estimate · 2π/T_seg`, which is the quantity the two-state SNR
    /// predicts.
    pub line_ratio: f64,
    pub segments: usize,
}

fn ratio(segs: &[SegmentPower], pick: impl Fn(usize) -> usize) -> f64 {
    let s: Vec<f64> = (0..segs.len()).map(|i| segs[pick(i)].signal).collect();
    let b: Vec<f64> = (0..segs.len()).map(|i| segs[pick(i)].background).collect();
    let (s, b) = (pairwise_sum(&s), pairwise_sum(&b));
    (s - b) / b
}

/// Segment-averaged SNR and its bootstrap standard error; `duration` is the
/// segment length in time.
pub fn spectral_snr(segs: &[SegmentPower], duration: f64, bootstrap: usize, seed: u64) -> Result<SpectralSnr> {
    let n = segs.len();
    if n < 2 {
        return Err(Error::InvalidConfig { reason: "psd needs at least 2 full segments after the transient" });
    }
    let estimate = ratio(segs, |i| i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps: Vec<f64> = (0..bootstrap)
        .map(|_| {
            let draws: Vec<usize> =
                (0..n).map(|_| ((rng.next_u64() as u128 * n as u128) >> 64) as usize).collect();
            ratio(segs, |i| draws[i])
        })
        .collect();
    let mean = pairwise_sum(&reps) / bootstrap as f64;
    let dev: Vec<f64> = reps.iter().map(|r| (r - mean) * (r - mean)).collect();
    let std_error = (pairwise_sum(&dev) / (bootstrap - 1) as f64).sqrt();
    Ok(SpectralSnr { estimate, std_error, line_ratio: estimate * 2.0 * PI / duration, segments: n })
}
