//! Per-epoch noise mixing: a fresh noisy, featurized training set every epoch.
//!
//! Every utterance of epoch `e` is processed from its own RNG seeded with
//! `derive_seed(master_seed, e, utterance_id)` (see [`crate::hash`]). From that
//! stream the engine draws, in order: the noise offset, the condition from the
//! stage set, and the seed of the Gaussian feature injection. The epoch is
//! therefore a pure function of its configuration, which is what lets the
//! next epoch be generated while the current one is being trained on.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{mix_at_snr, NoisePool};
use crate::curriculum::{sample_snr, Decision, StageController};
use crate::features::{fit_norm_stats, inject_gaussian, normalize, FeatureMatrix, Frontend, GaussInjectConfig, NormMode, NormStats};
use crate::hash::derive_seed;
use crate::{Condition, Error, Result, Waveform};

/// One training or evaluation utterance.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub audio: Waveform,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn longest(&self) -> usize {
        self.utterances.iter().map(|u| u.audio.len()).max().unwrap_or(0)
    }
}

/// How features are normalized after extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalizer {
    Frozen(NormStats),
    PerUtterance,
    /// Raw features; used while fitting corpus statistics.
    None,
}

impl Normalizer {
    pub fn apply(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self {
            Normalizer::Frozen(s) => Ok(normalize(raw, s)),
            Normalizer::PerUtterance => Ok(normalize(raw, &fit_norm_stats([raw])?)),
            Normalizer::None => Ok(raw.clone()),
        }
    }
}

/// Everything one item of the pipeline needs besides its own draws.
#[derive(Debug, Clone)]
pub struct ItemPipeline {
    pub frontend: Frontend,
    pub normalizer: Normalizer,
}

impl ItemPipeline {
    pub fn new(sample_rate_hz: u32, normalizer: Normalizer) -> Self {
        Self {
            frontend: Frontend::new(sample_rate_hz),
            normalizer,
        }
    }

    /// Mix at `offset`/`condition`, featurize, normalize, optionally inject.
    pub fn featurize(
        &self,
        utt: &Utterance,
        pool: &NoisePool,
        offset: usize,
        condition: Condition,
        injection: Option<(f64, u64)>,
    ) -> Result<FeatureMatrix> {
        let segment = pool.segment_at(offset, utt.audio.len())?;
        let mixed = mix_at_snr(&utt.audio, &segment.waveform, condition)?;
        let feats = self.normalizer.apply(&self.frontend.features(&mixed)?)?;
        match injection {
            Some((sigma, seed)) if sigma > 0.0 => {
                inject_gaussian(&feats, GaussInjectConfig { sigma }, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            _ => Ok(feats),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochConfig {
    pub epoch_index: usize,
    pub stage_index: usize,
    pub stage_snr_set: Vec<Condition>,
    pub master_seed: u64,
    /// 0 disables feature-level injection.
    pub gauss_sigma: f64,
}

impl EpochConfig {
    /// Hash over every input that shapes the epoch (corpus and pool included).
    pub fn config_hash(&self, corpus_id: &str, pool: &NoisePool) -> u64 {
        let stage: Vec<String> = self.stage_snr_set.iter().map(|c| c.to_string()).collect();
        let stage = stage.join(",");
        derive_seed(&[
            self.master_seed.into(),
            self.epoch_index.into(),
            self.gauss_sigma.to_bits().into(),
            pool.stream.into(),
            (pool.len() as u64).into(),
            corpus_id.into(),
            stage.as_str().into(),
        ])
    }
}

/// Per-item seed for training epochs.
pub fn item_seed(master_seed: u64, epoch_index: usize, utterance_id: &str) -> u64 {
    derive_seed(&[master_seed.into(), epoch_index.into(), utterance_id.into()])
}

/// Draws for one utterance of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemDraw {
    pub offset: usize,
    pub condition: Condition,
    pub injection_seed: u64,
}

pub fn draw_item(seed: u64, stage: &[Condition], utt_len: usize, pool: &NoisePool) -> Result<ItemDraw> {
    if utt_len > pool.len() {
        return Err(Error::SegmentTooLong {
            segment: utt_len,
            pool: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = rng.random_range(0..=pool.len() - utt_len);
    let condition = sample_snr(stage, true, &mut rng)?;
    let injection_seed = rng.random();
    Ok(ItemDraw {
        offset,
        condition,
        injection_seed,
    })
}

/// One manifest line: `id<TAB>offset<TAB>snr_db<TAB>seed<TAB>checksum`.
///
/// `seed` is the injection seed and `checksum` the FNV-1a hash of the final
/// features as `f32`; both are written as 16 hex digits.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub offset: usize,
    pub condition: Condition,
    pub seed: u64,
    pub checksum: u64,
}

impl fmt::Display for ManifestRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{:016x}\t{:016x}",
            self.id, self.offset, self.condition, self.seed, self.checksum
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochManifest {
    pub epoch_index: usize,
    pub config_hash: u64,
    pub records: Vec<ManifestRecord>,
}

impl EpochManifest {
    /// `# epoch=<n> config=<hex>` header followed by one record per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# epoch={} config={:016x}\n", self.epoch_index, self.config_hash);
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |d: String| Error::format("manifest", d);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty".into()))?;
        let mut epoch_index = None;
        let mut config_hash = None;
        for kv in header.trim_start_matches('#').split_whitespace() {
            match kv.split_once('=') {
                Some(("epoch", v)) => epoch_index = v.parse().ok(),
                Some(("config", v)) => config_hash = u64::from_str_radix(v, 16).ok(),
                _ => {}
            }
        }
        let (epoch_index, config_hash) = epoch_index
            .zip(config_hash)
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let records = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                if f.len() != 5 {
                    return Err(bad(format!("expected 5 fields: {l:?}")));
                }
                let hex = |s: &str| u64::from_str_radix(s, 16).map_err(|_| bad(format!("bad hex {s:?}")));
                Ok(ManifestRecord {
                    id: f[0].to_string(),
                    offset: f[1].parse().map_err(|_| bad(format!("bad offset {:?}", f[1])))?,
                    condition: f[2].parse()?,
                    seed: hex(f[3])?,
                    checksum: hex(f[4])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            epoch_index,
            config_hash,
            records,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::file(path, e))?)
    }
}

/// Shared count of materialized epoch datasets, with its high-water mark.
#[derive(Debug, Clone, Default)]
pub struct LiveCounter(Arc<(AtomicUsize, AtomicUsize)>);

impl LiveCounter {
    pub fn new() -> Self {
        Self::default()
    }

    fn acquire(&self) -> LiveGuard {
        let now = self.0 .0.fetch_add(1, Ordering::SeqCst) + 1;
        self.0 .1.fetch_max(now, Ordering::SeqCst);
        LiveGuard(self.clone())
    }

    pub fn current(&self) -> usize {
        self.0 .0.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.0 .1.load(Ordering::SeqCst)
    }
}

#[derive(Debug)]
struct LiveGuard(LiveCounter);

impl Drop for LiveGuard {
    fn drop(&mut self) {
        self.0 .0 .0.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Features of one training utterance for one epoch.
#[derive(Debug, Clone)]
pub struct EpochItem {
    pub utterance: usize,
    pub features: FeatureMatrix,
}

/// One generated epoch. Features can be discarded; the manifest is kept.
#[derive(Debug)]
pub struct EpochDataset {
    pub config: EpochConfig,
    pub manifest: EpochManifest,
    items: Option<Vec<EpochItem>>,
    dir: Option<PathBuf>,
    _live: Option<LiveGuard>,
}

impl EpochDataset {
    pub fn items(&self) -> &[EpochItem] {
        self.items.as_deref().unwrap_or(&[])
    }

    pub fn is_materialized(&self) -> bool {
        self.items.is_some() || self.dir.is_some()
    }

    /// Bytes held by feature storage (memory plus any files written).
    pub fn footprint_bytes(&self) -> usize {
        let mem: usize = self.items().iter().map(|i| i.features.footprint_bytes()).sum();
        let disk: usize = self
            .dir
            .as_ref()
            .and_then(|d| fs::read_dir(d).ok())
            .map(|it| it.flatten().filter_map(|e| e.metadata().ok()).map(|m| m.len() as usize).sum())
            .unwrap_or(0);
        mem + disk
    }

    /// Write one feature file per utterance into `dir` (`<id>.feat`).
    pub fn write_to(&mut self, dir: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for item in self.items() {
            let id = &corpus.utterances[item.utterance].id;
            crate::featfile::write_features(dir.join(format!("{id}.feat")), &item.features)?;
        }
        self.dir = Some(dir.to_path_buf());
        Ok(())
    }

    /// Drop all feature storage for this epoch; repeated calls are no-ops.
    pub fn discard(&mut self) -> Result<()> {
        self.items = None;
        self._live = None;
        if let Some(dir) = self.dir.take() {
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
            }
        }
        Ok(())
    }
}

/// Immutable inputs shared by every epoch.
#[derive(Debug, Clone)]
pub struct PemEngine {
    pub corpus: Arc<Corpus>,
    pub pool: Arc<NoisePool>,
    pub pipeline: ItemPipeline,
    pub workers: usize,
    pub live: LiveCounter,
}

impl PemEngine {
    pub fn new(corpus: Arc<Corpus>, pool: Arc<NoisePool>, normalizer: Normalizer) -> Result<Self> {
        let rate = corpus
            .utterances
            .first()
            .map(|u| u.audio.sample_rate_hz())
            .ok_or_else(|| Error::Config("empty corpus".into()))?;
        if pool.noise.sample_rate_hz() != rate {
            return Err(Error::RateMismatch {
                signal: rate,
                noise: pool.noise.sample_rate_hz(),
            });
        }
        if corpus.longest() > pool.len() {
            return Err(Error::SegmentTooLong {
                segment: corpus.longest(),
                pool: pool.len(),
            });
        }
        Ok(Self {
            corpus,
            pool,
            pipeline: ItemPipeline::new(rate, normalizer),
            workers: 1,
            live: LiveCounter::new(),
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Fit corpus statistics on the unnormalized, uninjected features of `cfg`'s epoch.
    pub fn fit_stats(&self, cfg: &EpochConfig) -> Result<NormStats> {
        let raw = ItemPipeline {
            frontend: self.pipeline.frontend.clone(),
            normalizer: Normalizer::None,
        };
        let feats = self.map_items(|i, u| {
            let draw = draw_item(item_seed(cfg.master_seed, cfg.epoch_index, &u.id), &cfg.stage_snr_set, u.audio.len(), &self.pool)?;
            let _ = i;
            raw.featurize(u, &self.pool, draw.offset, draw.condition, None)
        })?;
        fit_norm_stats(&feats)
    }

    /// Settle on a normalizer: corpus mode fits on `cfg`'s epoch and freezes.
    pub fn with_norm_mode(mut self, mode: NormMode, cfg: &EpochConfig) -> Result<Self> {
        self.pipeline.normalizer = match mode {
            NormMode::Utterance => Normalizer::PerUtterance,
            NormMode::Corpus => Normalizer::Frozen(self.fit_stats(cfg)?),
        };
        Ok(self)
    }

    fn map_items<T: Send>(&self, f: impl Fn(usize, &Utterance) -> Result<T> + Sync) -> Result<Vec<T>> {
        let run = |(i, u): (usize, &Utterance)| f(i, u).map_err(|e| e.in_utterance(&u.id));
        #[cfg(feature = "parallel")]
        if self.workers > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| Error::Pipeline(e.to_string()))?;
            return pool.install(|| self.corpus.utterances.par_iter().enumerate().map(run).collect());
        }
        self.corpus.utterances.iter().enumerate().map(run).collect()
    }

    /// Generate every utterance of one epoch.
    pub fn generate_epoch(&self, cfg: &EpochConfig) -> Result<EpochDataset> {
        let generated = self.map_items(|i, u| {
            let seed = item_seed(cfg.master_seed, cfg.epoch_index, &u.id);
            let draw = draw_item(seed, &cfg.stage_snr_set, u.audio.len(), &self.pool)?;
            let injection = (cfg.gauss_sigma > 0.0).then_some((cfg.gauss_sigma, draw.injection_seed));
            let features = self.pipeline.featurize(u, &self.pool, draw.offset, draw.condition, injection)?;
            let record = ManifestRecord {
                id: u.id.clone(),
                offset: draw.offset,
                condition: draw.condition,
                seed: draw.injection_seed,
                checksum: features.checksum(),
            };
            Ok((EpochItem { utterance: i, features }, record))
        })?;
        let (items, records): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
        Ok(EpochDataset {
            manifest: EpochManifest {
                epoch_index: cfg.epoch_index,
                config_hash: cfg.config_hash(&self.corpus.id, &self.pool),
                records,
            },
            config: cfg.clone(),
            items: Some(items),
            dir: None,
            _live: Some(self.live.acquire()),
        })
    }

    /// Rebuild one utterance's features from its manifest record alone.
    pub fn regenerate(&self, record: &ManifestRecord, gauss_sigma: f64) -> Result<FeatureMatrix> {
        let utt = self
            .corpus
            .utterances
            .iter()
            .find(|u| u.id == record.id)
            .ok_or_else(|| Error::format("manifest", format!("unknown utterance {}", record.id)))?;
        let injection = (gauss_sigma > 0.0).then_some((gauss_sigma, record.seed));
        self.pipeline
            .featurize(utt, &self.pool, record.offset, record.condition, injection)
            .map_err(|e| e.in_utterance(&record.id))
    }
}

/// Statistics from one training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub dev_wer: f64,
}

/// What the pipeline drives each epoch.
pub trait EpochTrainer {
    type Checkpoint: Clone;

    fn train_epoch(&mut self, data: &EpochDataset, stage_index: usize) -> Result<EpochStats>;
    fn checkpoint(&self) -> Self::Checkpoint;
    fn restore(&mut self, checkpoint: Self::Checkpoint);

    /// Called after the controller has ruled on an epoch.
    fn epoch_finished(
        &mut self,
        _record: &EpochRecord,
        _manifest: &EpochManifest,
        _controller: &StageController<Self::Checkpoint>,
    ) -> Result<()> {
        Ok(())
    }

    /// Checked after every epoch; `true` ends the run early without terminating the controller.
    fn should_stop(&self) -> bool {
        false
    }
}

/// One training-log line: `epoch<TAB>stage<TAB>train_loss<TAB>dev_wer<TAB>decision`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Zero-based; written one-based.
    pub stage: usize,
    pub train_loss: f64,
    pub dev_wer: f64,
    pub decision: &'static str,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{:.6}\t{:.4}\t{}",
            self.epoch,
            self.stage + 1,
            self.train_loss,
            self.dev_wer,
            self.decision
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduling {
    /// Generate epoch `e+1` while epoch `e` trains.
    Overlapped,
    Sequential,
}

/// Instrumentation from one [`pipeline_run`].
#[derive(Debug, Clone, Default)]
pub struct PipelineStats {
    pub epochs_generated: usize,
    /// Prefetched epochs thrown away because the stage changed.
    pub stale_prefetches: usize,
    pub peak_live: usize,
    /// Most epochs the producer ever finished ahead of the epoch in training.
    pub max_lead: usize,
    /// Time the producer spent waiting for the trainer to take an epoch.
    pub producer_blocked: Duration,
}

#[derive(Debug)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
    pub stats: PipelineStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Request {
    epoch: usize,
    stage: usize,
}

fn epoch_config<C: Clone>(
    base: &EpochConfig,
    controller: &StageController<C>,
    req: Request,
) -> EpochConfig {
    EpochConfig {
        epoch_index: req.epoch,
        stage_index: req.stage,
        stage_snr_set: controller.stages()[req.stage].clone(),
        ..base.clone()
    }
}

/// Outcome of ruling on one trained epoch.
enum Step {
    Next,
    Stop,
}

fn conclude<T: EpochTrainer>(
    trainer: &mut T,
    controller: &mut StageController<T::Checkpoint>,
    data: &EpochDataset,
    stats: EpochStats,
    records: &mut Vec<EpochRecord>,
) -> Result<Step> {
    let stage = controller.stage_index();
    let decision = controller.advance(stats.dev_wer, &trainer.checkpoint());
    let record = EpochRecord {
        epoch: data.config.epoch_index,
        stage,
        train_loss: stats.train_loss,
        dev_wer: stats.dev_wer,
        decision: decision.label(),
    };
    let step = match decision {
        Decision::Continue { .. } => Step::Next,
        Decision::SwitchStage { restore, .. } => {
            trainer.restore(restore);
            Step::Next
        }
        Decision::Terminate { best, .. } => {
            if let Some(best) = best {
                trainer.restore(best);
            }
            Step::Stop
        }
    };
    trainer.epoch_finished(&record, &data.manifest, controller)?;
    records.push(record);
    Ok(if trainer.should_stop() { Step::Stop } else { step })
}

/// Drive training epochs until the controller terminates.
///
/// `base` supplies the seed and injection settings; epoch and stage fields are
/// filled in per epoch starting from `start_epoch`. In overlapped mode one
/// producer thread generates the next epoch through a rendezvous handoff, so at
/// most two epochs are materialized at once. A prefetched epoch whose stage no
/// longer matches the controller is discarded and regenerated, which keeps the
/// result identical to sequential execution.
pub fn pipeline_run<T: EpochTrainer>(
    engine: &PemEngine,
    base: &EpochConfig,
    controller: &mut StageController<T::Checkpoint>,
    trainer: &mut T,
    scheduling: Scheduling,
    start_epoch: usize,
) -> Result<RunLog> {
    let mut records = Vec::new();
    let mut stats = PipelineStats::default();
    if controller.is_finished() {
        return Ok(RunLog { records, stats });
    }
    match scheduling {
        Scheduling::Sequential => {
            let mut epoch = start_epoch;
            loop {
                let req = Request {
                    epoch,
                    stage: controller.stage_index(),
                };
                let mut data = engine.generate_epoch(&epoch_config(base, controller, req))?;
                stats.epochs_generated += 1;
                let result = trainer.train_epoch(&data, req.stage);
                let step = result.and_then(|s| conclude(trainer, controller, &data, s, &mut records));
                data.discard()?;
                if let Step::Stop = step? {
                    break;
                }
                epoch += 1;
            }
        }
        Scheduling::Overlapped => {
            let in_training = AtomicUsize::new(usize::MAX);
            let lead = AtomicUsize::new(0);
            let blocked = std::sync::Mutex::new(Duration::ZERO);
            let generated = AtomicUsize::new(0);
            let stages = controller.stages().to_vec();
            let outcome = thread::scope(|s| -> Result<()> {
                let (req_tx, req_rx) = sync_channel::<Request>(1);
                let (res_tx, res_rx) = sync_channel::<(Request, Result<EpochDataset>)>(0);
                let producer = |req_rx: Receiver<Request>, res_tx: SyncSender<(Request, Result<EpochDataset>)>| {
                    for req in req_rx {
                        let cfg = EpochConfig {
                            epoch_index: req.epoch,
                            stage_index: req.stage,
                            stage_snr_set: stages[req.stage].clone(),
                            ..base.clone()
                        };
                        let data = engine.generate_epoch(&cfg);
                        generated.fetch_add(1, Ordering::SeqCst);
                        let training = in_training.load(Ordering::SeqCst);
                        if training != usize::MAX && req.epoch > training {
                            lead.fetch_max(req.epoch - training, Ordering::SeqCst);
                        }
                        let t0 = Instant::now();
                        if res_tx.send((req, data)).is_err() {
                            break;
                        }
                        *blocked.lock().unwrap() += t0.elapsed();
                    }
                };
                s.spawn(move || producer(req_rx, res_tx));

                let hang_up = |e: std::sync::mpsc::SendError<Request>| Error::Pipeline(format!("producer exited early ({:?})", e.0));
                req_tx
                    .send(Request {
                        epoch: start_epoch,
                        stage: controller.stage_index(),
                    })
                    .map_err(hang_up)?;
                let mut pending: bool;
                let result = loop {
                    let (req, data) = res_rx
                        .recv()
                        .map_err(|_| Error::Pipeline("producer disconnected".into()))?;
                    pending = false;
                    let mut data = match data {
                        Ok(d) => d,
                        Err(e) => break Err(e),
                    };
                    if req.stage != controller.stage_index() {
                        data.discard()?;
                        stats.stale_prefetches += 1;
                        req_tx
                            .send(Request {
                                epoch: req.epoch,
                                stage: controller.stage_index(),
                            })
                            .map_err(hang_up)?;
                        continue;
                    }
                    in_training.store(req.epoch, Ordering::SeqCst);
                    req_tx
                        .send(Request {
                            epoch: req.epoch + 1,
                            stage: controller.stage_index(),
                        })
                        .map_err(hang_up)?;
                    pending = true;
                    let step = trainer
                        .train_epoch(&data, req.stage)
                        .and_then(|st| conclude(trainer, controller, &data, st, &mut records));
                    data.discard()?;
                    match step {
                        Ok(Step::Next) => {}
                        Ok(Step::Stop) => break Ok(()),
                        Err(e) => break Err(e),
                    }
                };
                drop(req_tx);
                if pending {
                    // drain the in-flight epoch before returning
                    if let Ok((_, Ok(mut d))) = res_rx.recv() {
                        d.discard()?;
                    }
                }
                result
            });
            stats.epochs_generated = generated.load(Ordering::SeqCst);
            stats.max_lead = lead.load(Ordering::SeqCst);
            stats.producer_blocked = *blocked.lock().unwrap();
            outcome?;
        }
    }
    stats.peak_live = engine.live.peak();
    Ok(RunLog { records, stats })
}
