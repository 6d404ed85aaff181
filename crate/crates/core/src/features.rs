//! 123-dimensional filterbank features.
//!
//! Frames are 25 ms long with a 10 ms hop and a Hamming window. Each frame
//! yields 40 log mel-filter energies over `[20 Hz, Nyquist]` plus the log
//! frame energy (41 static values), followed by regression deltas and
//! delta-deltas (window ±2, edge replication).

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Waveform};

pub const NUM_MEL: usize = 40;
pub const STATIC_DIM: usize = NUM_MEL + 1;
pub const FEATURE_DIM: usize = 3 * STATIC_DIM;
pub const FRAME_LENGTH_MS: f64 = 25.0;
pub const FRAME_SHIFT_MS: f64 = 10.0;
pub const ENERGY_FLOOR: f64 = 1e-10;
pub const STD_FLOOR: f64 = 1e-5;
pub const MEL_LOW_HZ: f64 = 20.0;
const DELTA_WINDOW: usize = 2;

/// Row-major `frames x FEATURE_DIM` feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, values: Vec<f64>) -> Result<Self> {
        if frames == 0 || values.len() != frames * FEATURE_DIM {
            let got = if frames == 0 { values.len() } else { values.len() / frames };
            return Err(Error::Dimension {
                expected: FEATURE_DIM,
                got,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("feature matrix", "non-finite value"));
        }
        Ok(Self { frames, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(FEATURE_DIM)
    }

    /// FNV-1a checksum of the values as stored on disk (`f32` little-endian).
    pub fn checksum(&self) -> u64 {
        crate::hash::checksum_f32(self.values.iter().map(|&v| v as f32))
    }

    /// Heap bytes held by the values.
    pub fn footprint_bytes(&self) -> usize {
        self.values.len() * std::mem::size_of::<f64>()
    }

    fn map(&self, f: impl Fn(usize, f64) -> f64) -> FeatureMatrix {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % FEATURE_DIM, v))
            .collect();
        FeatureMatrix {
            frames: self.frames,
            values,
        }
    }
}

/// Row-major `frames x STATIC_DIM` log energies: 40 mel bands then frame energy.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticFeatures {
    pub frames: usize,
    pub values: Vec<f64>,
}

impl StaticFeatures {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * STATIC_DIM..(t + 1) * STATIC_DIM]
    }
}

/// Windowed analysis frames, row-major `count x frame_len`.
#[derive(Debug, Clone)]
pub struct Frames {
    pub count: usize,
    pub frame_len: usize,
    pub sample_rate_hz: u32,
    pub data: Vec<f64>,
}

impl Frames {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }
}

pub fn frame_length(sample_rate_hz: u32) -> usize {
    (sample_rate_hz as f64 * FRAME_LENGTH_MS / 1000.0).round() as usize
}

pub fn frame_shift(sample_rate_hz: u32) -> usize {
    (sample_rate_hz as f64 * FRAME_SHIFT_MS / 1000.0).round() as usize
}

/// Number of frames for `n` samples, or `None` if shorter than one frame.
pub fn frame_count(n: usize, sample_rate_hz: u32) -> Option<usize> {
    let win = frame_length(sample_rate_hz);
    let hop = frame_shift(sample_rate_hz);
    (n >= win).then(|| 1 + (n - win) / hop)
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Cut `w` into Hamming-windowed 25 ms frames with a 10 ms hop.
pub fn frame_signal(w: &Waveform) -> Result<Frames> {
    let fs = w.sample_rate_hz();
    let win = frame_length(fs);
    let hop = frame_shift(fs);
    let count = frame_count(w.len(), fs).ok_or(Error::TooShort {
        samples: w.len(),
        frame: win,
    })?;
    let window = hamming(win);
    let mut data = Vec::with_capacity(count * win);
    for i in 0..count {
        let start = i * hop;
        data.extend(
            w.samples()[start..start + win]
                .iter()
                .zip(&window)
                .map(|(s, h)| s * h),
        );
    }
    Ok(Frames {
        count,
        frame_len: win,
        sample_rate_hz: fs,
        data,
    })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters evaluated on FFT bin frequencies.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `NUM_MEL + 2` edge frequencies in Hz.
    edges_hz: Vec<f64>,
    /// Per filter: first bin and weights.
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(sample_rate_hz: u32, fft_len: usize) -> Self {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let (lo, hi) = (hz_to_mel(MEL_LOW_HZ), hz_to_mel(nyquist));
        let edges_hz: Vec<f64> = (0..NUM_MEL + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (NUM_MEL + 1) as f64))
            .collect();
        let bin_hz = sample_rate_hz as f64 / fft_len as f64;
        let bins = fft_len / 2 + 1;
        let filters = (0..NUM_MEL)
            .map(|m| {
                let (l, c, r) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
                let weights: Vec<(usize, f64)> = (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > l && f <= c {
                            (f - l) / (c - l)
                        } else if f > c && f < r {
                            (r - f) / (r - c)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map_or(0, |(k, _)| *k);
                (first, weights.into_iter().map(|(_, w)| w).collect())
            })
            .collect();
        Self { edges_hz, filters }
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.edges_hz[m + 1]
    }

    /// Lower and upper edge of filter `m` in Hz.
    pub fn band_hz(&self, m: usize) -> (f64, f64) {
        (self.edges_hz[m], self.edges_hz[m + 2])
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (o, (first, w)) in out.iter_mut().zip(&self.filters) {
            *o = w.iter().zip(&power[*first..]).map(|(a, b)| a * b).sum();
        }
    }
}

/// Precomputed analysis state for one sample rate.
#[derive(Clone)]
pub struct Frontend {
    sample_rate_hz: u32,
    fft_len: usize,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl std::fmt::Debug for Frontend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frontend")
            .field("sample_rate_hz", &self.sample_rate_hz)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl Frontend {
    pub fn new(sample_rate_hz: u32) -> Self {
        let fft_len = frame_length(sample_rate_hz).next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        Self {
            sample_rate_hz,
            fft_len,
            fft,
            filterbank: MelFilterbank::new(sample_rate_hz, fft_len),
        }
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// 40 log mel energies plus log frame energy for every frame.
    pub fn log_mel_energies(&self, frames: &Frames) -> StaticFeatures {
        let bins = self.fft_len / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut power = vec![0.0; bins];
        let mut values = Vec::with_capacity(frames.count * STATIC_DIM);
        let mut mel = [0.0; NUM_MEL];
        for i in 0..frames.count {
            let frame = frames.frame(i);
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (c, &s) in buf.iter_mut().zip(frame) {
                c.re = s;
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            self.filterbank.apply(&power, &mut mel);
            values.extend(mel.iter().map(|e| e.max(ENERGY_FLOOR).ln()));
            let energy: f64 = frame.iter().map(|s| s * s).sum();
            values.push(energy.max(ENERGY_FLOOR).ln());
        }
        StaticFeatures {
            frames: frames.count,
            values,
        }
    }

    pub fn static_features(&self, w: &Waveform) -> Result<StaticFeatures> {
        if w.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::RateMismatch {
                signal: w.sample_rate_hz(),
                noise: self.sample_rate_hz,
            });
        }
        Ok(self.log_mel_energies(&frame_signal(w)?))
    }

    /// Unnormalized 123-dimensional features.
    pub fn features(&self, w: &Waveform) -> Result<FeatureMatrix> {
        Ok(append_deltas(&self.static_features(w)?))
    }
}

fn regression_deltas(values: &[f64], frames: usize, dim: usize) -> Vec<f64> {
    let denom: f64 = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    let last = frames - 1;
    let mut out = vec![0.0; frames * dim];
    for t in 0..frames {
        for n in 1..=DELTA_WINDOW {
            let ahead = &values[(t + n).min(last) * dim..][..dim];
            let behind = &values[t.saturating_sub(n) * dim..][..dim];
            let row = &mut out[t * dim..(t + 1) * dim];
            for ((o, a), b) in row.iter_mut().zip(ahead).zip(behind) {
                *o += n as f64 * (a - b);
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= denom);
    out
}

/// Append first and second regression derivatives to 41-dim static features.
pub fn append_deltas(statics: &StaticFeatures) -> FeatureMatrix {
    let frames = statics.frames;
    let d1 = regression_deltas(&statics.values, frames, STATIC_DIM);
    let d2 = regression_deltas(&d1, frames, STATIC_DIM);
    let mut values = Vec::with_capacity(frames * FEATURE_DIM);
    for t in 0..frames {
        let r = t * STATIC_DIM..(t + 1) * STATIC_DIM;
        values.extend_from_slice(&statics.values[r.clone()]);
        values.extend_from_slice(&d1[r.clone()]);
        values.extend_from_slice(&d2[r]);
    }
    FeatureMatrix { frames, values }
}

/// Per-dimension mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub sample_count: usize,
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; FEATURE_DIM],
            std: vec![1.0; FEATURE_DIM],
            sample_count: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for len in [self.mean.len(), self.std.len()] {
            if len != FEATURE_DIM {
                return Err(Error::Dimension {
                    expected: FEATURE_DIM,
                    got: len,
                });
            }
        }
        if self.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::format("normalization stats", "non-positive std"));
        }
        Ok(())
    }
}

/// Two-pass mean and standard deviation over every frame of every utterance.
pub fn fit_norm_stats<'a>(data: impl IntoIterator<Item = &'a FeatureMatrix> + Clone) -> Result<NormStats> {
    let total: usize = data.clone().into_iter().map(|f| f.frames()).sum();
    if total < 2 {
        return Err(Error::InsufficientFrames(total));
    }
    let mut mean = vec![0.0; FEATURE_DIM];
    for f in data.clone() {
        for row in f.rows() {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= total as f64);
    let mut var = vec![0.0; FEATURE_DIM];
    for f in data {
        for row in f.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / total as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats {
        mean,
        std,
        sample_count: total,
    })
}

pub fn normalize(f: &FeatureMatrix, s: &NormStats) -> FeatureMatrix {
    f.map(|d, v| (v - s.mean[d]) / s.std[d])
}

pub fn denormalize(f: &FeatureMatrix, s: &NormStats) -> FeatureMatrix {
    f.map(|d, v| v * s.std[d] + s.mean[d])
}

/// Where normalization statistics come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Frozen statistics fitted once over a corpus.
    #[default]
    Corpus,
    /// Each utterance normalized by its own statistics.
    Utterance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussInjectConfig {
    pub sigma: f64,
}

impl Default for GaussInjectConfig {
    fn default() -> Self {
        Self { sigma: 0.6 }
    }
}

/// Add independent `N(0, sigma^2)` draws to every entry.
pub fn inject_gaussian<R: Rng + ?Sized>(f: &FeatureMatrix, cfg: GaussInjectConfig, rng: &mut R) -> Result<FeatureMatrix> {
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::Config(format!("gaussian sigma must be >= 0, got {}", cfg.sigma)));
    }
    if cfg.sigma == 0.0 {
        return Ok(f.clone());
    }
    let normal = Normal::new(0.0, cfg.sigma).expect("sigma validated");
    let values = f.values.iter().map(|v| v + normal.sample(rng)).collect();
    Ok(FeatureMatrix {
        frames: f.frames,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, amp: f64, n: usize) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    fn random_matrix(frames: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::new(frames, (0..frames * FEATURE_DIM).map(|_| rng.random_range(-3.0..5.0)).collect()).unwrap()
    }

    fn statics_from(rows: &[Vec<f64>]) -> StaticFeatures {
        StaticFeatures {
            frames: rows.len(),
            values: rows.concat(),
        }
    }

    #[test]
    fn frame_boundaries() {
        let fs = 16_000;
        assert_eq!(frame_signal(&tone(100.0, 0.1, 400)).unwrap().count, 1);
        assert_eq!(frame_signal(&tone(100.0, 0.1, 560)).unwrap().count, 2);
        assert_eq!(frame_signal(&tone(100.0, 0.1, 559)).unwrap().count, 1);
        assert!(matches!(frame_signal(&tone(100.0, 0.1, 399)), Err(Error::TooShort { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(400..20_000);
            let expect = 1 + (n - 400) / 160;
            assert_eq!(frame_count(n, fs), Some(expect));
            assert_eq!(frame_signal(&tone(100.0, 0.1, n)).unwrap().count, expect);
        }
    }

    #[test]
    fn silent_frame_hits_floor() {
        let fe = Frontend::new(16_000);
        let s = fe.static_features(&Waveform::new(vec![0.0; 400], 16_000).unwrap()).unwrap();
        assert!(s.values.iter().all(|&v| v == ENERGY_FLOOR.ln()));
    }

    #[test]
    fn tone_at_center_dominates_neighbours() {
        let fe = Frontend::new(16_000);
        for m in [5, 12, 20, 30] {
            let f = fe.filterbank().center_hz(m);
            let s = fe.static_features(&tone(f, 0.5, 1600)).unwrap();
            for t in 0..s.frames {
                let row = s.row(t);
                assert!(row[m] > row[m - 1] && row[m] > row[m + 1], "filter {m} frame {t}");
                let argmax = (0..NUM_MEL).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                assert_eq!(argmax, m);
            }
        }
    }

    #[test]
    fn doubling_amplitude_adds_log4_to_energy() {
        let fe = Frontend::new(16_000);
        let a = fe.static_features(&tone(440.0, 0.1, 2000)).unwrap();
        let b = fe.static_features(&tone(440.0, 0.2, 2000)).unwrap();
        for t in 0..a.frames {
            assert!((b.row(t)[NUM_MEL] - a.row(t)[NUM_MEL] - 4f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_features_have_zero_deltas() {
        let rows = vec![(0..STATIC_DIM).map(|d| d as f64 * 0.5).collect::<Vec<_>>(); 7];
        let f = append_deltas(&statics_from(&rows));
        for row in f.rows() {
            assert!(row[STATIC_DIM..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_frame_has_zero_deltas() {
        let f = append_deltas(&statics_from(&[vec![3.0; STATIC_DIM]]));
        assert_eq!(f.frames(), 1);
        assert!(f.row(0)[STATIC_DIM..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_ramp_delta_matches_closed_form() {
        let c = 0.75;
        let frames = 12;
        let rows: Vec<Vec<f64>> = (0..frames).map(|t| vec![c * t as f64 + 1.0; STATIC_DIM]).collect();
        let f = append_deltas(&statics_from(&rows));
        // direct oracle: sum_n n (x[t+n]-x[t-n]) / (2 sum n^2) with clamped indices
        let x = |t: isize| c * t.clamp(0, frames as isize - 1) as f64 + 1.0;
        for t in 0..frames {
            let ti = t as isize;
            let oracle = (1.0 * (x(ti + 1) - x(ti - 1)) + 2.0 * (x(ti + 2) - x(ti - 2))) / 10.0;
            assert!((f.row(t)[STATIC_DIM] - oracle).abs() < 1e-12);
            if (2..frames - 2).contains(&t) {
                assert!((f.row(t)[STATIC_DIM] - c).abs() < 1e-12);
            }
        }
        // second derivative of a ramp vanishes away from the edges
        for t in 4..frames - 4 {
            assert!(f.row(t)[2 * STATIC_DIM].abs() < 1e-12);
        }
    }

    #[test]
    fn feature_dimension_is_enforced() {
        assert!(matches!(FeatureMatrix::new(2, vec![0.0; 2 * 122]), Err(Error::Dimension { .. })));
        let fe = Frontend::new(16_000);
        assert_eq!(fe.features(&tone(300.0, 0.3, 4000)).unwrap().dim(), 123);
    }

    #[test]
    fn two_single_frame_utterances() {
        let a = FeatureMatrix::new(1, vec![0.0; FEATURE_DIM]).unwrap();
        let b = FeatureMatrix::new(1, vec![2.0; FEATURE_DIM]).unwrap();
        let s = fit_norm_stats([&a, &b]).unwrap();
        assert!(s.mean.iter().all(|&m| m == 1.0));
        assert!(s.std.iter().all(|&v| v == 1.0));
        assert!(matches!(fit_norm_stats([&a]), Err(Error::InsufficientFrames(1))));
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let data: Vec<FeatureMatrix> = (0..4).map(|i| random_matrix(10 + i, i as u64)).collect();
        let s = fit_norm_stats(&data).unwrap();
        for d in [0, 40, 77, 122] {
            let col: Vec<f64> = data.iter().flat_map(|f| f.rows().map(move |r| r[d])).collect();
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!((s.mean[d] - m).abs() < 1e-9);
            assert!((s.std[d] - v.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_fitting_set_is_standard() {
        let data: Vec<FeatureMatrix> = (0..3).map(|i| random_matrix(20, 100 + i)).collect();
        let s = fit_norm_stats(&data).unwrap();
        let normed: Vec<FeatureMatrix> = data.iter().map(|f| normalize(f, &s)).collect();
        let s2 = fit_norm_stats(&normed).unwrap();
        for d in 0..FEATURE_DIM {
            assert!(s2.mean[d].abs() < 1e-9);
            assert!((s2.std[d].powi(2) - 1.0).abs() < 1e-6);
        }
        // identity stats leave features alone
        assert_eq!(normalize(&data[0], &NormStats::identity()), data[0]);
    }

    #[test]
    fn constant_dimension_std_is_floored() {
        let a = FeatureMatrix::new(3, vec![1.0; 3 * FEATURE_DIM]).unwrap();
        let s = fit_norm_stats([&a]).unwrap();
        assert!(s.std.iter().all(|&v| v == STD_FLOOR));
    }

    #[test]
    fn zero_sigma_is_identity_and_seeded_is_reproducible() {
        let f = random_matrix(5, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(inject_gaussian(&f, GaussInjectConfig { sigma: 0.0 }, &mut rng).unwrap(), f);
        let a = inject_gaussian(&f, GaussInjectConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = inject_gaussian(&f, GaussInjectConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, f);
        assert!(inject_gaussian(&f, GaussInjectConfig { sigma: -1.0 }, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn deltas_are_linear(seed in 0u64..1000, frames in 1usize..15, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gen = || StaticFeatures { frames, values: (0..frames * STATIC_DIM).map(|_| rng.random_range(-5.0..5.0)).collect() };
            let x = gen();
            let y = gen();
            let combo = StaticFeatures { frames, values: x.values.iter().zip(&y.values).map(|(p, q)| a * p + b * q).collect() };
            let (dx, dy, dc) = (append_deltas(&x), append_deltas(&y), append_deltas(&combo));
            for i in 0..dc.values().len() {
                prop_assert!((dc.values()[i] - (a * dx.values()[i] + b * dy.values()[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn normalization_round_trips(seed in 0u64..1000, frames in 2usize..10) {
            let f = random_matrix(frames, seed);
            let s = fit_norm_stats([&f]).unwrap();
            let back = denormalize(&normalize(&f, &s), &s);
            for (x, y) in back.values().iter().zip(f.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
