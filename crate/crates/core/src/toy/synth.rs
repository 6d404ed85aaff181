//! Synthetic tone-sequence task: each symbol is a sinusoid at its own frequency.

use rand::Rng;

use crate::ctc::LabelAlphabet;
use crate::features::{hz_to_mel, MEL_LOW_HZ, NUM_MEL};
use crate::hash::derive_seed;
use crate::pem::{Corpus, Utterance};
use crate::{Error, Result, Waveform};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SEGMENT_MS: (f64, f64) = (120.0, 200.0);
pub const PEAK: f64 = 0.5;
const RAMP_MS: f64 = 15.0;

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub alphabet: LabelAlphabet,
    pub tones_hz: Vec<f64>,
    /// Inclusive range of symbols per utterance.
    pub symbols: (usize, usize),
    pub sample_rate_hz: u32,
}

/// Width in mel of one triangular filter (lower edge to upper edge).
pub fn mel_filter_width(sample_rate_hz: u32) -> f64 {
    let span = hz_to_mel(sample_rate_hz as f64 / 2.0) - hz_to_mel(MEL_LOW_HZ);
    2.0 * span / (NUM_MEL + 1) as f64
}

impl SyntheticTask {
    pub fn new(alphabet: LabelAlphabet, tones_hz: Vec<f64>, symbols: (usize, usize), sample_rate_hz: u32) -> Result<Self> {
        if tones_hz.len() != alphabet.len() {
            return Err(Error::Config(format!(
                "{} tones for {} symbols",
                tones_hz.len(),
                alphabet.len()
            )));
        }
        if symbols.0 == 0 || symbols.0 > symbols.1 {
            return Err(Error::Config(format!("bad symbol range {symbols:?}")));
        }
        let min_gap = 2.0 * mel_filter_width(sample_rate_hz);
        for (i, a) in tones_hz.iter().enumerate() {
            if !(*a > MEL_LOW_HZ && *a < sample_rate_hz as f64 / 2.0) {
                return Err(Error::Config(format!("tone {a} Hz outside the filterbank")));
            }
            for b in &tones_hz[i + 1..] {
                if (hz_to_mel(*a) - hz_to_mel(*b)).abs() < min_gap {
                    return Err(Error::Config(format!("tones {a} and {b} Hz are closer than two filter widths")));
                }
            }
        }
        Ok(Self {
            alphabet,
            tones_hz,
            symbols,
            sample_rate_hz,
        })
    }

    /// Four symbols `a`..`d` at 16 kHz, two to five per utterance.
    pub fn default_task() -> Self {
        Self::new(
            LabelAlphabet::new("abcd".chars()).unwrap(),
            vec![400.0, 800.0, 1400.0, 2600.0],
            (2, 5),
            16_000,
        )
        .unwrap()
    }

    /// Random label sequence without immediate repeats.
    pub fn random_labels<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = rng.random_range(self.symbols.0..=self.symbols.1);
        let k = self.alphabet.len();
        let mut labels: Vec<usize> = Vec::with_capacity(n);
        while labels.len() < n {
            let l = rng.random_range(0..k);
            if k == 1 || labels.last() != Some(&l) {
                labels.push(l);
            }
        }
        labels
    }

    /// Render labels as concatenated ramped tones with jittered lengths, peak 0.5.
    pub fn synth_utterance<R: Rng + ?Sized>(&self, labels: &[usize], rng: &mut R) -> Result<(Waveform, String)> {
        if labels.is_empty() {
            return Err(Error::EmptySignal);
        }
        let fs = self.sample_rate_hz as f64;
        let ramp = (RAMP_MS * fs / 1000.0) as usize;
        let mut samples = Vec::new();
        for &l in labels {
            let freq = *self.tones_hz.get(l).ok_or(Error::LabelOutOfRange(l))?;
            let ms = rng.random_range(SEGMENT_MS.0..=SEGMENT_MS.1);
            let len = (ms * fs / 1000.0).round() as usize;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            for n in 0..len {
                let edge = n.min(len - 1 - n);
                let gain = if edge < ramp {
                    0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
                } else {
                    1.0
                };
                samples.push(gain * (std::f64::consts::TAU * freq * n as f64 / fs + phase).sin());
            }
        }
        let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        samples.iter_mut().for_each(|s| *s *= PEAK / peak);
        Ok((Waveform::new(samples, self.sample_rate_hz)?, self.alphabet.to_words(labels)))
    }

    /// `count` utterances named `<prefix>NNNN`, each from its own seed.
    pub fn corpus(&self, prefix: &str, count: usize, seed: u64) -> Result<Corpus> {
        let utterances = (0..count)
            .map(|i| {
                let id = format!("{prefix}{i:04}");
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed.into(), id.as_str().into()]));
                let labels = self.random_labels(&mut rng);
                let (audio, _) = self.synth_utterance(&labels, &mut rng)?;
                Ok(Utterance { id, audio, labels })
            })
            .collect::<Result<_>>()?;
        Ok(Corpus {
            id: format!("synthetic-{prefix}-{count}-{seed:x}"),
            utterances,
        })
    }
}
