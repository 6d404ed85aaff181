//! A complete run described by a [`RunConfig`]: data, training, test sweep.
//!
//! Files under `output_dir`:
//!
//! ```text
//! train_log.tsv         epoch, stage, train loss, dev WER, decision (tab-separated)
//! transitions.tsv       epoch, stage, dev WER, decision
//! manifests/epoch_NNNN.tsv
//! norm.stat             frozen normalization statistics (corpus mode)
//! state.json            resume point after the last completed epoch
//! last.ckpt, model.ckpt latest and final (stage-best) parameters
//! test_ref.txt, test_hyp.txt   "<id>@<condition> <words>" per line
//! scores.txt            per-condition WER report
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::checkpoint::write_checkpoint;
use super::synth::SyntheticTask;
use super::train::{decode_all, score_labels, DevSet, EpochTrace, StageEntry, ToyTrainer, TrainerState};
use super::model::ToyModel;
use crate::audio::NoisePool;
use crate::config::{CorpusConfig, NoiseConfig, RunConfig};
use crate::ctc::LabelAlphabet;
use crate::curriculum::{StageController, TransitionRecord};
use crate::eval::{EditCounts, FullRange, Report, WerPoint};
use crate::features::NormStats;
use crate::featfile::write_stats;
use crate::hash::derive_seed;
use crate::noise::{generate, NoiseKind, NoiseSpec};
use crate::pem::{
    draw_item, pipeline_run, Corpus, EpochConfig, EpochRecord, ItemPipeline, Normalizer, PemEngine,
    PipelineStats, Scheduling, Utterance,
};
use crate::wav::read_wav;
use crate::{Condition, Error, Result};

/// Corpora and noise pools for one run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub alphabet: LabelAlphabet,
    pub train: Arc<Corpus>,
    pub dev: Arc<Corpus>,
    pub test: Arc<Corpus>,
    pub train_pool: Arc<NoisePool>,
    pub eval_pool: Arc<NoisePool>,
}

fn read_split(dir: &Path, split: &str, alphabet: &LabelAlphabet) -> Result<Corpus> {
    let list = dir.join(format!("{split}.tsv"));
    let text = fs::read_to_string(&list).map_err(|e| Error::file(&list, e))?;
    let utterances = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut f = line.splitn(3, '\t');
            let (Some(id), Some(wav), Some(words)) = (f.next(), f.next(), f.next()) else {
                return Err(Error::format("corpus list", format!("{}: {line:?}", list.display())));
            };
            let labels = words
                .split_whitespace()
                .map(|w| {
                    let mut c = w.chars();
                    match (c.next().and_then(|s| alphabet.index_of(s)), c.next()) {
                        (Some(i), None) => Ok(i),
                        _ => Err(Error::format("transcript", format!("{id}: {w:?} is not a symbol"))),
                    }
                })
                .collect::<Result<_>>()?;
            Ok(Utterance {
                id: id.to_string(),
                audio: read_wav(dir.join(wav))?,
                labels,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Corpus {
        id: format!("{}#{split}", dir.display()),
        utterances,
    })
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let seed = cfg.seed;
    let (alphabet, train, dev, test) = match &cfg.corpus {
        CorpusConfig::Synthetic {
            train,
            dev,
            test,
            min_symbols,
            max_symbols,
        } => {
            let base = SyntheticTask::default_task();
            let task = SyntheticTask::new(base.alphabet, base.tones_hz, (*min_symbols, *max_symbols), base.sample_rate_hz)?;
            let split = |name: &str, n: usize| task.corpus(name, n, derive_seed(&[seed.into(), name.into()]));
            (task.alphabet.clone(), split("train", *train)?, split("dev", *dev)?, split("test", *test)?)
        }
        CorpusConfig::Dir { path, alphabet } => {
            let alphabet = LabelAlphabet::new(alphabet.chars())?;
            (
                alphabet.clone(),
                read_split(path, "train", &alphabet)?,
                read_split(path, "dev", &alphabet)?,
                read_split(path, "test", &alphabet)?,
            )
        }
    };
    let rate = train
        .utterances
        .first()
        .ok_or_else(|| Error::Config("empty training corpus".into()))?
        .audio
        .sample_rate_hz();
    let (train_noise, eval_noise) = match &cfg.noise {
        NoiseConfig::Pink { seconds } => {
            let len = (seconds * rate as f64).round() as usize;
            let pink = |tag: &str| generate(&NoiseSpec::new(NoiseKind::Pink, len, rate, derive_seed(&[seed.into(), tag.into()])));
            (pink("noise-train")?, pink("noise-eval")?)
        }
        NoiseConfig::File { path } => {
            let w = read_wav(path)?;
            (w.clone(), w)
        }
    };
    Ok(Prepared {
        alphabet,
        train: Arc::new(train),
        dev: Arc::new(dev),
        test: Arc::new(test),
        train_pool: Arc::new(NoisePool::new(train_noise, 0)),
        eval_pool: Arc::new(NoisePool::new(eval_noise, 1)),
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write logs, manifests, checkpoints and the resume state.
    pub persist: bool,
    /// Continue from `state.json` when present.
    pub resume: bool,
    /// Stop after this many epochs in total (the run stays resumable).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResumeState {
    next_epoch: usize,
    controller: StageController<Vec<f64>>,
    trainer: TrainerState,
    /// Full-precision copy; `norm.stat` stores `f32`.
    norm: Option<NormStats>,
}

#[derive(Debug, Clone)]
pub struct ConditionScore {
    pub condition: Condition,
    pub counts: EditCounts,
    /// `(utterance id, reference words, hypothesis words)`.
    pub transcripts: Vec<(String, String, String)>,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Records of the epochs run by this invocation.
    pub records: Vec<EpochRecord>,
    pub history: Vec<EpochTrace>,
    pub stage_entries: Vec<StageEntry>,
    pub pipeline: PipelineStats,
    pub model: ToyModel,
    /// Whether the controller terminated (false after an early stop).
    pub finished: bool,
    pub test: Vec<ConditionScore>,
}

impl RunOutcome {
    pub fn wer(&self, c: Condition) -> Option<f64> {
        self.test
            .iter()
            .find(|s| s.condition == c)
            .and_then(|s| s.counts.wer_percent().ok())
    }
}

/// Decode the test corpus under each condition with held-out noise.
pub fn evaluate(
    model: &ToyModel,
    prepared: &Prepared,
    pipeline: &ItemPipeline,
    conditions: &[Condition],
    seed: u64,
) -> Result<Vec<ConditionScore>> {
    let corpus = &prepared.test;
    let pool = &prepared.eval_pool;
    conditions
        .iter()
        .map(|&c| {
            let tag = c.to_string();
            let feats = corpus
                .utterances
                .iter()
                .map(|u| {
                    let s = derive_seed(&[seed.into(), "test".into(), tag.as_str().into(), u.id.as_str().into()]);
                    let d = draw_item(s, &[c], u.audio.len(), pool)?;
                    pipeline.featurize(u, pool, d.offset, c, None)
                })
                .collect::<Result<Vec<_>>>()?;
            let hyps = decode_all(model, &feats)?;
            let refs: Vec<Vec<usize>> = corpus.utterances.iter().map(|u| u.labels.clone()).collect();
            let transcripts = corpus
                .utterances
                .iter()
                .zip(&hyps)
                .map(|(u, h)| (u.id.clone(), prepared.alphabet.to_words(&u.labels), prepared.alphabet.to_words(h)))
                .collect();
            Ok(ConditionScore {
                condition: c,
                counts: score_labels(&refs, &hyps),
                transcripts,
            })
        })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::file(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::file(path, e))
}

/// Keep only the first `n` lines of a log.
fn truncate_lines(path: &Path, n: usize) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let kept: String = text.lines().take(n).map(|l| format!("{l}\n")).collect();
    write_atomic(path, kept.as_bytes())
}

struct Paths {
    root: PathBuf,
}

impl Paths {
    fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
    fn manifest(&self, epoch: usize) -> PathBuf {
        self.root.join("manifests").join(format!("epoch_{epoch:04}.tsv"))
    }
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let prepared = prepare(cfg)?;
    let paths = Paths {
        root: cfg.output_dir.clone(),
    };
    if opts.persist {
        fs::create_dir_all(paths.root.join("manifests")).map_err(|e| Error::file(&paths.root, e))?;
    }
    let state_path = paths.file("state.json");
    let resume: Option<ResumeState> = if opts.resume && state_path.exists() {
        let text = fs::read_to_string(&state_path).map_err(|e| Error::file(&state_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::format("resume state", e.to_string()))?)
    } else {
        None
    };

    let mut controller: StageController<Vec<f64>> = match &resume {
        Some(r) => r.controller.clone(),
        None => cfg.schedule.controller()?,
    };
    let base = EpochConfig {
        epoch_index: 0,
        stage_index: 0,
        stage_snr_set: controller.stages()[0].clone(),
        master_seed: cfg.seed,
        gauss_sigma: cfg.features.sigma,
    };
    let engine = PemEngine::new(prepared.train.clone(), prepared.train_pool.clone(), Normalizer::PerUtterance)?
        .with_workers(cfg.workers);
    let stats_path = paths.file("norm.stat");
    let engine = match resume.as_ref().and_then(|r| r.norm.clone()) {
        Some(stats) => {
            let mut e = engine;
            e.pipeline.normalizer = Normalizer::Frozen(stats);
            e
        }
        None => engine.with_norm_mode(cfg.features.norm, &base)?,
    };
    let frozen = match &engine.pipeline.normalizer {
        Normalizer::Frozen(s) => Some(s.clone()),
        _ => None,
    };
    if opts.persist {
        if let Some(s) = &frozen {
            write_stats(&stats_path, s)?;
        }
    }

    let dev = DevSet::new(prepared.dev.clone(), prepared.eval_pool.clone(), cfg.seed);
    let mut trainer = ToyTrainer::new(
        cfg.trainer.clone(),
        prepared.alphabet.clone(),
        cfg.seed,
        prepared.train.clone(),
        dev,
        engine.pipeline.clone(),
    )?;
    trainer.workers = cfg.workers;
    trainer.stop_after = opts.stop_after;
    let start_epoch = match resume {
        Some(r) => {
            trainer = trainer.with_state(r.trainer);
            if opts.persist {
                truncate_lines(&paths.file("train_log.tsv"), r.next_epoch)?;
                let transitions = trainer.state.history.len();
                truncate_lines(&paths.file("transitions.tsv"), transitions)?;
            }
            r.next_epoch
        }
        None => {
            if opts.persist {
                for f in ["train_log.tsv", "transitions.tsv"] {
                    let p = paths.file(f);
                    if p.exists() {
                        fs::remove_file(&p).map_err(|e| Error::file(&p, e))?;
                    }
                }
            }
            0
        }
    };

    if opts.persist {
        let root = paths.root.clone();
        let norm = frozen.clone();
        trainer.on_epoch(Box::new(move |record, manifest, controller, state| {
            let paths = Paths { root: root.clone() };
            append_line(&paths.file("train_log.tsv"), &record.to_string())?;
            let transition = TransitionRecord {
                epoch: record.epoch,
                stage: record.stage,
                dev_wer: record.dev_wer,
                decision: record.decision,
            };
            append_line(&paths.file("transitions.tsv"), &transition.to_string())?;
            manifest.write(paths.manifest(record.epoch))?;
            write_checkpoint(paths.file("last.ckpt"), &state.model, record.epoch as u32)?;
            let snapshot = ResumeState {
                next_epoch: record.epoch + 1,
                controller: controller.clone(),
                trainer: state.clone(),
                norm: norm.clone(),
            };
            let json = serde_json::to_vec(&snapshot).map_err(|e| Error::format("resume state", e.to_string()))?;
            write_atomic(&paths.file("state.json"), &json)
        }));
    }

    let scheduling = if cfg.overlap {
        Scheduling::Overlapped
    } else {
        Scheduling::Sequential
    };
    let log = pipeline_run(&engine, &base, &mut controller, &mut trainer, scheduling, start_epoch)?;
    let finished = controller.is_finished();
    let model = trainer.state.model.clone();
    let test = if finished {
        evaluate(&model, &prepared, &engine.pipeline, &cfg.eval.conditions()?, cfg.seed)?
    } else {
        Vec::new()
    };

    if opts.persist && finished {
        let last_epoch = trainer.state.history.last().map_or(0, |h| h.epoch);
        write_checkpoint(paths.file("model.ckpt"), &model, last_epoch as u32)?;
        let mut refs = String::new();
        let mut hyps = String::new();
        for s in &test {
            for (id, r, h) in &s.transcripts {
                refs.push_str(&format!("{id}@{} {r}\n", s.condition));
                hyps.push_str(&format!("{id}@{} {h}\n", s.condition));
            }
        }
        write_atomic(&paths.file("test_ref.txt"), refs.as_bytes())?;
        write_atomic(&paths.file("test_hyp.txt"), hyps.as_bytes())?;
        let points = test
            .iter()
            .map(|s| {
                Ok(WerPoint {
                    condition: s.condition,
                    wer_percent: s.counts.wer_percent()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !points.is_empty() {
            let report = Report::new(points, FullRange::AllConditions, false)?;
            write_atomic(&paths.file("scores.txt"), report.render().as_bytes())?;
        }
    }

    Ok(RunOutcome {
        records: log.records,
        history: trainer.state.history.clone(),
        stage_entries: trainer.state.stage_entries.clone(),
        pipeline: log.stats,
        model,
        finished,
        test,
    })
}

/// Frozen statistics an experiment would use, for inspection.
pub fn corpus_stats(cfg: &RunConfig) -> Result<NormStats> {
    let prepared = prepare(cfg)?;
    let controller: StageController<()> = cfg.schedule.controller()?;
    let engine = PemEngine::new(prepared.train, prepared.train_pool, Normalizer::None)?;
    engine.fit_stats(&EpochConfig {
        epoch_index: 0,
        stage_index: 0,
        stage_snr_set: controller.stages()[0].clone(),
        master_seed: cfg.seed,
        gauss_sigma: cfg.features.sigma,
    })
}
