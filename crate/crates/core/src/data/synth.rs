use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::RawSeries;
use crate::error::{Error, Result};

/// Chirp with amplitude ramp, mid-series level shift and Gaussian noise:
/// `x(t) = A(t)·sin(2π·φ(t)) + m(t) + σ·n(t)` where
/// `φ(t) = f0·t + (f1 − f0)·t² / (2L)`, `A(t) = 1 + a·t/L` and
/// `m(t)` is 0 before `L/2` and `Δ` after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Instantaneous frequency at `t = 0`, cycles per step.
    pub f0: f64,
    /// Instantaneous frequency at `t = L`.
    pub f1: f64,
    /// Relative amplitude growth over the series.
    pub amp_slope: f64,
    /// Level shift applied from `L/2` on.
    pub shift: f64,
    pub noise_std: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            f0: 0.002,
            f1: 0.02,
            amp_slope: 0.5,
            shift: 2.0,
            noise_std: 0.1,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let all = [self.f0, self.f1, self.amp_slope, self.shift, self.noise_std];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("synthetic parameters must be finite".into()));
        }
        if self.noise_std < 0.0 {
            return Err(Error::InvalidParams(format!("noise std {} is negative", self.noise_std)));
        }
        Ok(())
    }
}

/// One-channel series of length `len`, reproducible from `seed`.
pub fn synth_nonstationary(len: usize, seed: u64, params: &SynthParams) -> Result<RawSeries> {
    if len < 4 {
        return Err(Error::InvalidParams(format!("synthetic length {len} is below 4")));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = len as f64;
    let values = Array2::from_shape_fn((1, len), |(_, t)| {
        let tf = t as f64;
        let phase = params.f0 * tf + (params.f1 - params.f0) * tf * tf / (2.0 * l);
        let amp = 1.0 + params.amp_slope * tf / l;
        let level = if 2 * t < len { 0.0 } else { params.shift };
        let noise: f64 = StandardNormal.sample(&mut rng);
        amp * (2.0 * PI * phase).sin() + level + params.noise_std * noise
    });
    Ok(RawSeries {
        values,
        channel_names: vec!["signal".into()],
        timestamps: None,
    })
}
