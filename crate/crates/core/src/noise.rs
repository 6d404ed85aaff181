//! Pink and white noise synthesis.
//!
//! Pink noise is made by spectral shaping: white Gaussian noise is taken to
//! the frequency domain, every bin `k > 0` is scaled by `1/sqrt(f_k)`, the DC
//! bin is zeroed, and the inverse transform is RMS-normalized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::rms_of;
use crate::{Error, Result, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Pink,
    White,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub length: usize,
    pub sample_rate_hz: u32,
    pub target_rms: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, length: usize, sample_rate_hz: u32, seed: u64) -> Self {
        Self {
            kind,
            length,
            sample_rate_hz,
            target_rms: 0.1,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::NoiseSpec("length must be positive"));
        }
        if !(self.target_rms > 0.0 && self.target_rms.is_finite()) {
            return Err(Error::NoiseSpec("target_rms must be positive"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::ZeroSampleRate);
        }
        Ok(())
    }
}

/// Generate noise of whichever kind `spec` names.
pub fn generate(spec: &NoiseSpec) -> Result<Waveform> {
    match spec.kind {
        NoiseKind::Pink => generate_pink(spec),
        NoiseKind::White => generate_white(spec),
    }
}

fn gaussian(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn normalize_rms(mut samples: Vec<f64>, target: f64) -> Result<Vec<f64>> {
    let r = rms_of(&samples)?;
    if r == 0.0 {
        return Err(Error::DegenerateEnergy("noise"));
    }
    let g = target / r;
    samples.iter_mut().for_each(|s| *s *= g);
    Ok(samples)
}

pub fn generate_white(spec: &NoiseSpec) -> Result<Waveform> {
    spec.validate()?;
    let samples = normalize_rms(gaussian(spec.length, spec.seed), spec.target_rms)?;
    Waveform::new(samples, spec.sample_rate_hz)
}

pub fn generate_pink(spec: &NoiseSpec) -> Result<Waveform> {
    spec.validate()?;
    let n = spec.length;
    if n == 1 {
        // a single sample has only a DC bin
        return Err(Error::NoiseSpec("pink noise needs at least 2 samples"));
    }
    let mut buf: Vec<Complex<f64>> = gaussian(n, spec.seed)
        .into_iter()
        .map(|re| Complex::new(re, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let bin_hz = spec.sample_rate_hz as f64 / n as f64;
    buf[0] = Complex::new(0.0, 0.0);
    for (k, x) in buf.iter_mut().enumerate().skip(1) {
        // mirrored bins share a frequency so the output stays real
        let f = k.min(n - k) as f64 * bin_hz;
        *x *= f.sqrt().recip();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let samples = normalize_rms(buf.into_iter().map(|c| c.re).collect(), spec.target_rms)?;
    Waveform::new(samples, spec.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::rms;

    fn spec(kind: NoiseKind, len: usize) -> NoiseSpec {
        NoiseSpec {
            kind,
            length: len,
            sample_rate_hz: 16_000,
            target_rms: 1.0,
            seed: 1234,
        }
    }

    #[test]
    fn deterministic_under_seed() {
        for kind in [NoiseKind::Pink, NoiseKind::White] {
            let a = generate(&spec(kind, 4096)).unwrap();
            let b = generate(&spec(kind, 4096)).unwrap();
            assert_eq!(a.samples(), b.samples());
            let mut other = spec(kind, 4096);
            other.seed += 1;
            assert_ne!(a.samples(), generate(&other).unwrap().samples());
        }
    }

    #[test]
    fn rms_hits_target() {
        for (kind, target) in [(NoiseKind::Pink, 1.0), (NoiseKind::White, 1.0), (NoiseKind::Pink, 0.05)] {
            let mut s = spec(kind, 10_000);
            s.target_rms = target;
            let w = generate(&s).unwrap();
            assert!((rms(&w).unwrap() - target).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(generate_pink(&spec(NoiseKind::Pink, 0)).is_err());
        assert!(generate_white(&spec(NoiseKind::White, 0)).is_err());
        let mut s = spec(NoiseKind::White, 10);
        s.target_rms = 0.0;
        assert!(generate_white(&s).is_err());
    }

    #[test]
    fn mean_vanishes() {
        for kind in [NoiseKind::Pink, NoiseKind::White] {
            let n = 1 << 16;
            let w = generate(&spec(kind, n)).unwrap();
            let mean = w.samples().iter().sum::<f64>() / n as f64;
            assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "{kind:?} mean {mean}");
        }
    }

    #[test]
    fn odd_length_pink_is_real_and_finite() {
        let w = generate_pink(&spec(NoiseKind::Pink, 1001)).unwrap();
        assert_eq!(w.len(), 1001);
        assert!(w.samples().iter().all(|s| s.is_finite()));
    }
}
