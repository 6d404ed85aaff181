//! Waveforms, energy arithmetic and exact-SNR mixing.
//!
//! SNR is always measured over the full utterance: `10 log10(rms(s)^2 / rms(g n)^2)`.
//! Mixed output is never clipped or renormalized.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mono real-valued signal with its sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::ZeroSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Copy of `len` samples starting at `offset`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<Waveform> {
        if offset + len > self.samples.len() {
            return Err(Error::SegmentTooLong {
                segment: offset + len,
                pool: self.samples.len(),
            });
        }
        Ok(Waveform {
            samples: self.samples[offset..offset + len].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// A signal-to-noise ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SnrDb(pub f64);

impl SnrDb {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SnrDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A mixing condition: either untouched clean speech or a finite SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    Clean,
    Snr(SnrDb),
}

impl Condition {
    pub fn db(value: f64) -> Self {
        Condition::Snr(SnrDb(value))
    }

    pub fn snr(self) -> Option<SnrDb> {
        match self {
            Condition::Clean => None,
            Condition::Snr(s) => Some(s),
        }
    }

    /// Sort key placing clean above every finite SNR.
    pub fn sort_key(self) -> f64 {
        match self {
            Condition::Clean => f64::INFINITY,
            Condition::Snr(s) => s.0,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Clean => f.write_str("clean"),
            Condition::Snr(s) => s.fmt(f),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("clean") {
            return Ok(Condition::Clean);
        }
        let t = s
            .strip_suffix("dB")
            .or_else(|| s.strip_suffix("db"))
            .unwrap_or(s);
        match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Condition::db(v)),
            _ => Err(Error::format("condition", format!("{s:?} is neither 'clean' nor a finite dB value"))),
        }
    }
}

/// Root-mean-square amplitude.
pub fn rms(w: &Waveform) -> Result<f64> {
    rms_of(w.samples())
}

pub(crate) fn rms_of(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let energy: f64 = samples.iter().map(|s| s * s).sum();
    Ok((energy / samples.len() as f64).sqrt())
}

/// Gain that brings `noise` to `target` dB below `signal`.
pub fn mixing_gain(signal: &Waveform, noise: &Waveform, target: SnrDb) -> Result<f64> {
    let rs = rms(signal)?;
    let rn = rms(noise)?;
    if rs == 0.0 {
        return Err(Error::DegenerateEnergy("signal"));
    }
    if rn == 0.0 {
        return Err(Error::DegenerateEnergy("noise"));
    }
    Ok(rs / rn * 10f64.powf(-target.0 / 20.0))
}

fn check_compatible(signal: &Waveform, noise: &Waveform) -> Result<()> {
    if signal.len() != noise.len() {
        return Err(Error::LengthMismatch {
            signal: signal.len(),
            noise: noise.len(),
        });
    }
    if signal.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::RateMismatch {
            signal: signal.sample_rate_hz(),
            noise: noise.sample_rate_hz(),
        });
    }
    Ok(())
}

/// `signal + gain * noise`, elementwise.
pub fn mix_with_gain(signal: &Waveform, noise: &Waveform, gain: f64) -> Result<Waveform> {
    check_compatible(signal, noise)?;
    let samples = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, n)| s + gain * n)
        .collect();
    Waveform::new(samples, signal.sample_rate_hz())
}

/// Mix and also report the applied noise gain (`None` for the clean condition).
pub fn mix_at_snr_with_gain(
    signal: &Waveform,
    noise_segment: &Waveform,
    target: Condition,
) -> Result<(Waveform, Option<f64>)> {
    check_compatible(signal, noise_segment)?;
    match target {
        Condition::Clean => Ok((signal.clone(), None)),
        Condition::Snr(snr) => {
            let gain = mixing_gain(signal, noise_segment, snr)?;
            Ok((mix_with_gain(signal, noise_segment, gain)?, Some(gain)))
        }
    }
}

/// Add `noise_segment` to `signal` so that the two addends sit exactly at `target`.
pub fn mix_at_snr(signal: &Waveform, noise_segment: &Waveform, target: Condition) -> Result<Waveform> {
    mix_at_snr_with_gain(signal, noise_segment, target).map(|(w, _)| w)
}

/// SNR in dB between two additive components.
pub fn component_snr_db(signal: &Waveform, noise: &Waveform) -> Result<f64> {
    let rs = rms(signal)?;
    let rn = rms(noise)?;
    if rs == 0.0 || rn == 0.0 {
        return Err(Error::DegenerateEnergy(if rs == 0.0 { "signal" } else { "noise" }));
    }
    Ok(10.0 * (rs * rs / (rn * rn)).log10())
}

/// A long noise recording from which mixing segments are cut.
#[derive(Debug, Clone)]
pub struct NoisePool {
    pub noise: Waveform,
    /// Identifies the pool in manifests and seed derivation.
    pub stream: u64,
}

/// A segment cut from a [`NoisePool`].
#[derive(Debug, Clone)]
pub struct NoiseSegment {
    pub offset: usize,
    pub waveform: Waveform,
}

impl NoisePool {
    pub fn new(noise: Waveform, stream: u64) -> Self {
        Self { noise, stream }
    }

    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    /// Contiguous segment starting at an offset drawn uniformly from `[0, pool_len - len]`.
    pub fn sample_segment<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<NoiseSegment> {
        if len > self.len() {
            return Err(Error::SegmentTooLong {
                segment: len,
                pool: self.len(),
            });
        }
        let offset = rng.random_range(0..=self.len() - len);
        self.segment_at(offset, len)
    }

    pub fn segment_at(&self, offset: usize, len: usize) -> Result<NoiseSegment> {
        Ok(NoiseSegment {
            offset,
            waveform: self.noise.slice(offset, len)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 16_000).unwrap()
    }

    fn uniform(n: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        wave((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn rms_of_constant() {
        assert_eq!(rms(&wave(vec![0.5; 37])).unwrap(), 0.5);
    }

    #[test]
    fn rms_of_full_scale_sine() {
        // 10 periods of a 100 Hz sine at 16 kHz.
        let w = wave((0..1600).map(|i| (2.0 * std::f64::consts::PI * 100.0 * i as f64 / 16_000.0).sin()).collect());
        assert!((rms(&w).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn rms_matches_two_pass_oracle() {
        let w = uniform(1000, 11);
        // oracle: accumulate squares then divide, in a separate pass
        let squares: Vec<f64> = w.samples().iter().map(|x| x * x).collect();
        let mut acc = 0.0;
        for s in &squares {
            acc += s;
        }
        let oracle = (acc / squares.len() as f64).sqrt();
        assert!((rms(&w).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn rms_rejects_empty() {
        assert!(matches!(rms(&wave(vec![])), Err(Error::EmptySignal)));
    }

    #[test]
    fn waveform_rejects_non_finite() {
        assert!(matches!(Waveform::new(vec![0.0, f64::NAN], 8000), Err(Error::NonFiniteSample(1))));
        assert!(matches!(Waveform::new(vec![0.0], 0), Err(Error::ZeroSampleRate)));
    }

    #[test]
    fn gain_for_equal_power() {
        let s = uniform(512, 1);
        let n = s.scaled(-1.0);
        assert!((mixing_gain(&s, &n, SnrDb(0.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((mixing_gain(&s, &n, SnrDb(20.0)).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn gain_at_five_db_remeasures() {
        let s = wave(vec![0.3, -0.3, 0.3, -0.3]);
        let n = wave(vec![0.6, 0.6, -0.6, -0.6]);
        let g = mixing_gain(&s, &n, SnrDb(5.0)).unwrap();
        let oracle = 0.3 / 0.6 * 10f64.powf(-0.25);
        assert!((g - oracle).abs() < 1e-12);
        let snr = component_snr_db(&s, &n.scaled(g)).unwrap();
        assert!((snr - 5.0).abs() < 1e-6);
    }

    #[test]
    fn silent_inputs_are_degenerate() {
        let s = uniform(64, 2);
        let z = wave(vec![0.0; 64]);
        assert!(matches!(mixing_gain(&z, &s, SnrDb(0.0)), Err(Error::DegenerateEnergy("signal"))));
        assert!(matches!(mixing_gain(&s, &z, SnrDb(0.0)), Err(Error::DegenerateEnergy("noise"))));
    }

    #[test]
    fn clean_condition_is_identity() {
        let s = uniform(100, 3);
        let n = uniform(100, 4);
        assert_eq!(mix_at_snr(&s, &n, Condition::Clean).unwrap(), s);
    }

    #[test]
    fn equal_rms_at_zero_db_adds() {
        let s = wave(vec![0.5, -0.5, 0.5, -0.5]);
        let n = wave(vec![0.5, 0.5, -0.5, -0.5]);
        let m = mix_at_snr(&s, &n, Condition::db(0.0)).unwrap();
        let expect = [1.0, 0.0, 0.0, -1.0];
        for (a, b) in m.samples().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ten_db_pair_remeasures() {
        let s = uniform(4000, 5);
        let n = uniform(4000, 6);
        let (m, g) = mix_at_snr_with_gain(&s, &n, Condition::db(10.0)).unwrap();
        let g = g.unwrap();
        let noise_part: Vec<f64> = m.samples().iter().zip(s.samples()).map(|(m, s)| m - s).collect();
        let measured = component_snr_db(&s, &wave(noise_part)).unwrap();
        assert!((measured - 10.0).abs() < 1e-6);
        assert!((component_snr_db(&s, &n.scaled(g)).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_inputs_error() {
        let s = uniform(100, 1);
        let n = uniform(99, 2);
        assert!(matches!(mix_at_snr(&s, &n, Condition::db(0.0)), Err(Error::LengthMismatch { .. })));
        let n8k = Waveform::new(uniform(100, 2).into_samples(), 8000).unwrap();
        assert!(matches!(mix_at_snr(&s, &n8k, Condition::db(0.0)), Err(Error::RateMismatch { .. })));
    }

    #[test]
    fn whole_pool_segment() {
        let pool = NoisePool::new(uniform(300, 9), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seg = pool.sample_segment(300, &mut rng).unwrap();
        assert_eq!(seg.offset, 0);
        assert_eq!(seg.waveform, pool.noise);
        assert!(matches!(pool.sample_segment(301, &mut rng), Err(Error::SegmentTooLong { .. })));
    }

    #[test]
    fn segment_is_deterministic() {
        let pool = NoisePool::new(uniform(5000, 9), 0);
        let a = pool.sample_segment(100, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = pool.sample_segment(100, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a.offset, b.offset);
        assert_eq!(a.waveform, b.waveform);
        assert_eq!(a.waveform.samples(), &pool.noise.samples()[a.offset..a.offset + 100]);
    }

    #[test]
    fn condition_text_round_trip() {
        for text in ["clean", "-5", "0", "12.5", "50"] {
            let c: Condition = text.parse().unwrap();
            assert_eq!(c.to_string(), text);
        }
        assert_eq!("10dB".parse::<Condition>().unwrap(), Condition::db(10.0));
        assert!("loud".parse::<Condition>().is_err());
        assert!("inf".parse::<Condition>().is_err());
    }

    proptest! {
        #[test]
        fn component_snr_hits_target(seed in 0u64..10_000, target in -20.0f64..60.0, len in 16usize..2000) {
            let s = uniform(len, seed);
            let n = uniform(len, seed.wrapping_add(1));
            let g = mixing_gain(&s, &n, SnrDb(target)).unwrap();
            let snr = component_snr_db(&s, &n.scaled(g)).unwrap();
            prop_assert!((snr - target).abs() < 1e-6);
        }

        #[test]
        fn mixing_is_linear_in_noise(seed in 0u64..10_000, target in 0.0f64..50.0) {
            let s = uniform(256, seed);
            let n = uniform(256, seed ^ 0xff);
            let g = mixing_gain(&s, &n, SnrDb(target)).unwrap();
            let a = mix_with_gain(&s, &n.scaled(g), 1.0).unwrap();
            let b = mix_at_snr(&s, &n, Condition::db(target)).unwrap();
            for (x, y) in a.samples().iter().zip(b.samples()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn rms_of_self_concatenation(seed in 0u64..10_000, len in 1usize..500) {
            let w = uniform(len, seed);
            let mut doubled = w.samples().to_vec();
            doubled.extend_from_slice(w.samples());
            let r2 = rms(&wave(doubled)).unwrap();
            prop_assert!((r2 - rms(&w).unwrap()).abs() < 1e-12);
        }
    }
}
