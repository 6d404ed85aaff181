//! Browser bindings: pink-noise spectrum, mix + featurize heatmap, curriculum trace.

use std::fmt::Write as _;

use pemkit::curriculum::{Decision, ScheduleConfig};
use pemkit::features::NUM_MEL;
use pemkit::noise::{generate, NoiseKind, NoiseSpec};
use pemkit::pem::{draw_item, item_seed, ItemPipeline, Normalizer};
use pemkit::spectrum::{octave_band_levels, octave_centers, octave_slope};
use pemkit::toy::SyntheticTask;
use pemkit::{Condition, NoisePool};
use wasm_bindgen::prelude::*;

const RATE: u32 = 16_000;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Spectrum {
    centers: Vec<f64>,
    levels: Vec<f64>,
    slope: f64,
}

#[wasm_bindgen]
impl Spectrum {
    #[wasm_bindgen(getter)]
    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }

    /// Band power in dB, relative to the lowest band.
    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> Vec<f64> {
        self.levels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn slope(&self) -> f64 {
        self.slope
    }
}

/// Octave-band levels of generated noise, 63 Hz to 4 kHz.
#[wasm_bindgen]
pub fn noise_spectrum(kind: &str, seconds: f64, seed: u64) -> Result<Spectrum, JsError> {
    let kind = match kind {
        "pink" => NoiseKind::Pink,
        "white" => NoiseKind::White,
        other => return Err(JsError::new(&format!("unknown noise kind {other:?}"))),
    };
    let n = (seconds * RATE as f64).round() as usize;
    let w = generate(&NoiseSpec::new(kind, n, RATE, seed)).map_err(js)?;
    let centers = octave_centers(62.5, 4000.0);
    let raw = octave_band_levels(w.samples(), RATE, &centers);
    let levels = raw.iter().map(|l| l - raw[0]).collect();
    Ok(Spectrum {
        slope: octave_slope(w.samples(), RATE, 125.0, 4000.0),
        centers,
        levels,
    })
}

#[wasm_bindgen]
pub struct Heatmap {
    frames: usize,
    transcript: String,
    offset: usize,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[wasm_bindgen(getter)]
    pub fn bands(&self) -> usize {
        NUM_MEL
    }

    #[wasm_bindgen(getter)]
    pub fn transcript(&self) -> String {
        self.transcript.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Row-major `frames x bands` normalized log-mel values.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// Synthesize a tone utterance, mix it with pink noise at `condition`
/// ("clean" or a dB value) and return its normalized log-mel bands.
#[wasm_bindgen]
pub fn mix_heatmap(condition: &str, seed: u64, sigma: f64) -> Result<Heatmap, JsError> {
    let condition: Condition = condition.parse().map_err(js)?;
    let task = SyntheticTask::default_task();
    let corpus = task.corpus("demo", 1, seed).map_err(js)?;
    let utt = &corpus.utterances[0];
    let pool = NoisePool::new(generate(&NoiseSpec::new(NoiseKind::Pink, 4 * RATE as usize, RATE, seed)).map_err(js)?, 0);
    let draw = draw_item(item_seed(seed, 0, &utt.id), &[condition], utt.audio.len(), &pool).map_err(js)?;
    let pipeline = ItemPipeline::new(RATE, Normalizer::PerUtterance);
    let feats = pipeline
        .featurize(utt, &pool, draw.offset, condition, Some((sigma, draw.injection_seed)))
        .map_err(js)?;
    Ok(Heatmap {
        frames: feats.frames(),
        transcript: utt.labels.iter().map(|&l| task.alphabet.symbols()[l]).collect(),
        offset: draw.offset,
        values: feats.rows().flat_map(|r| r[..NUM_MEL].to_vec()).collect(),
    })
}

/// Feed a dev-WER trace through the stage controller described by
/// `schedule` (TOML) and return one `epoch<TAB>stage<TAB>wer<TAB>decision<TAB>conditions` line per epoch.
#[wasm_bindgen]
pub fn curriculum_trace(schedule: &str, wers: &[f64]) -> Result<String, JsError> {
    let cfg = ScheduleConfig::parse(schedule).map_err(js)?;
    let mut ctl = cfg.controller::<usize>().map_err(js)?;
    let mut out = String::new();
    for (epoch, &wer) in wers.iter().enumerate() {
        let stage = ctl.stage_index();
        let conditions: Vec<String> = ctl.current_stage().iter().map(|c| c.to_string()).collect();
        let decision = ctl.advance(wer, &epoch);
        let note = match &decision {
            Decision::SwitchStage { restore, .. } => format!("switch (restore epoch {})", restore),
            Decision::Terminate { best, reason } => match best {
                Some(b) => format!("terminate: {reason:?} (best epoch {b})"),
                None => format!("terminate: {reason:?}"),
            },
            Decision::Continue { improved } => if *improved { "improved" } else { "continue" }.to_string(),
        };
        let _ = writeln!(out, "{epoch}\t{}\t{wer}\t{note}\t{}", stage + 1, conditions.join(","));
        if matches!(decision, Decision::Terminate { .. }) {
            break;
        }
    }
    Ok(out)
}
