//! Wiring of model, CTC, Adam and the epoch pipeline.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_norm, Adam, AdamConfig};
use super::model::{Mode, ModelDims, ToyModel};
use crate::audio::NoisePool;
use crate::ctc::{best_path_decode, LabelAlphabet};
use crate::curriculum::StageController;
use crate::eval::{edit_counts, EditCounts};
use crate::features::{FeatureMatrix, FEATURE_DIM};
use crate::hash::derive_seed;
use crate::pem::{draw_item, Corpus, EpochDataset, EpochManifest, EpochRecord, EpochStats, EpochTrainer, ItemPipeline};
use crate::{Condition, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub dropout: f64,
    /// Gradient L2 norm ceiling; absent means no clipping.
    pub clip_norm: Option<f64>,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            hidden: 64,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: 8,
            dropout: 0.3,
            clip_norm: None,
            init_seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden size and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Held-out utterances mixed with conditions from the current stage.
///
/// Each utterance's offset and condition are fixed per stage, and no
/// feature-level noise is injected.
#[derive(Debug)]
pub struct DevSet {
    pub corpus: Arc<Corpus>,
    pub pool: Arc<NoisePool>,
    pub seed: u64,
    cache: HashMap<usize, Vec<FeatureMatrix>>,
}

impl DevSet {
    pub fn new(corpus: Arc<Corpus>, pool: Arc<NoisePool>, seed: u64) -> Self {
        Self {
            corpus,
            pool,
            seed,
            cache: HashMap::new(),
        }
    }

    pub fn features(&mut self, pipeline: &ItemPipeline, stage_index: usize, stage: &[Condition]) -> Result<&[FeatureMatrix]> {
        if !self.cache.contains_key(&stage_index) {
            let feats = self
                .corpus
                .utterances
                .iter()
                .map(|u| {
                    let seed = derive_seed(&[self.seed.into(), "dev".into(), stage_index.into(), u.id.as_str().into()]);
                    let d = draw_item(seed, stage, u.audio.len(), &self.pool)?;
                    pipeline.featurize(u, &self.pool, d.offset, d.condition, None)
                })
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(stage_index, feats);
        }
        Ok(&self.cache[&stage_index])
    }
}

/// Best-path decode every utterance in evaluation mode.
pub fn decode_all(model: &ToyModel, feats: &[FeatureMatrix]) -> Result<Vec<Vec<usize>>> {
    feats.iter().map(|f| Ok(best_path_decode(&model.log_probs(f)?))).collect()
}

pub fn score_labels(refs: &[Vec<usize>], hyps: &[Vec<usize>]) -> EditCounts {
    refs.iter().zip(hyps).map(|(r, h)| edit_counts(r, h)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub stage: usize,
    pub dev_wer: f64,
    /// Hash of the parameters handed to the controller for this epoch.
    pub param_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub epoch: usize,
    pub stage: usize,
    /// Parameter hash right after the restore that preceded this stage.
    pub restored_hash: Option<u64>,
}

/// Everything needed to continue a run after the last completed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub model: ToyModel,
    pub adam: Adam,
    pub history: Vec<EpochTrace>,
    pub stage_entries: Vec<StageEntry>,
    pub pending_restore: Option<u64>,
}

type EpochHook = Box<dyn FnMut(&EpochRecord, &EpochManifest, &StageController<Vec<f64>>, &TrainerState) -> Result<()> + Send + Sync>;

pub struct ToyTrainer {
    pub state: TrainerState,
    pub config: TrainConfig,
    pub alphabet: LabelAlphabet,
    pub master_seed: u64,
    pub train: Arc<Corpus>,
    pub dev: DevSet,
    pub pipeline: ItemPipeline,
    pub workers: usize,
    /// End the run after this many epochs in total, leaving the controller live.
    pub stop_after: Option<usize>,
    hook: Option<EpochHook>,
}

impl ToyTrainer {
    pub fn new(
        config: TrainConfig,
        alphabet: LabelAlphabet,
        master_seed: u64,
        train: Arc<Corpus>,
        dev: DevSet,
        pipeline: ItemPipeline,
    ) -> Result<Self> {
        config.validate()?;
        let dims = ModelDims {
            input: FEATURE_DIM,
            hidden: config.hidden,
            output: alphabet.num_classes(),
        };
        for u in train.utterances.iter().chain(&dev.corpus.utterances) {
            if let Some(&l) = u.labels.iter().find(|&&l| l >= alphabet.len()) {
                return Err(Error::LabelOutOfRange(l).in_utterance(&u.id));
            }
        }
        let model = ToyModel::new(dims, config.init_seed);
        let adam = Adam::new(config.adam(), dims.param_count());
        Ok(Self {
            state: TrainerState {
                model,
                adam,
                history: Vec::new(),
                stage_entries: Vec::new(),
                pending_restore: None,
            },
            config,
            alphabet,
            master_seed,
            train,
            dev,
            pipeline,
            workers: 1,
            stop_after: None,
            hook: None,
        })
    }

    pub fn with_state(mut self, state: TrainerState) -> Self {
        self.state = state;
        self
    }

    pub fn on_epoch(&mut self, hook: EpochHook) {
        self.hook = Some(hook);
    }

    pub fn model(&self) -> &ToyModel {
        &self.state.model
    }

    fn utterance_grad(&self, epoch: usize, item: &crate::pem::EpochItem) -> Result<(f64, Vec<f64>)> {
        let utt = &self.train.utterances[item.utterance];
        let model = &self.state.model;
        let mode = Mode::Train {
            dropout: self.config.dropout,
            seed: derive_seed(&[self.master_seed.into(), "dropout".into(), epoch.into(), utt.id.as_str().into()]),
        };
        let mut grad = vec![0.0; model.params.len()];
        let nll = model
            .loss_and_grad(&item.features, &utt.labels, mode, &mut grad)
            .map_err(|e| e.in_utterance(&utt.id))?;
        if !nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                utterance: utt.id.clone(),
            });
        }
        Ok((nll, grad))
    }

    fn batch_grads(&self, epoch: usize, batch: &[&crate::pem::EpochItem]) -> Result<Vec<(f64, Vec<f64>)>> {
        #[cfg(feature = "parallel")]
        if self.workers > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| Error::Pipeline(e.to_string()))?;
            return pool.install(|| batch.par_iter().map(|item| self.utterance_grad(epoch, item)).collect());
        }
        batch.iter().map(|item| self.utterance_grad(epoch, item)).collect()
    }

    /// Dev WER (percent) of the current model on the given stage.
    pub fn dev_wer(&mut self, stage_index: usize, stage: &[Condition]) -> Result<f64> {
        let feats = self.dev.features(&self.pipeline, stage_index, stage)?;
        let hyps = decode_all(&self.state.model, feats)?;
        let refs: Vec<Vec<usize>> = self.dev.corpus.utterances.iter().map(|u| u.labels.clone()).collect();
        score_labels(&refs, &hyps).wer_percent()
    }
}

impl EpochTrainer for ToyTrainer {
    type Checkpoint = Vec<f64>;

    fn train_epoch(&mut self, data: &EpochDataset, stage_index: usize) -> Result<EpochStats> {
        let epoch = data.config.epoch_index;
        if self.state.stage_entries.last().map(|e| e.stage) != Some(stage_index) {
            self.state.stage_entries.push(StageEntry {
                epoch,
                stage: stage_index,
                restored_hash: self.state.pending_restore.take(),
            });
        }
        let mut order: Vec<&crate::pem::EpochItem> = data.items().iter().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[
            self.master_seed.into(),
            "order".into(),
            epoch.into(),
        ])));
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let grads = self.batch_grads(epoch, batch)?;
            let mut sum = vec![0.0; self.state.model.params.len()];
            for (nll, g) in &grads {
                total += nll;
                for (s, v) in sum.iter_mut().zip(g) {
                    *s += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            sum.iter_mut().for_each(|s| *s *= scale);
            if let Some(max) = self.config.clip_norm {
                clip_norm(&mut sum, max);
            }
            self.state.adam.update(&mut self.state.model.params, &sum);
            if !self.state.model.is_finite() {
                let utterance = self.train.utterances[batch[0].utterance].id.clone();
                return Err(Error::NonFiniteLoss { epoch, utterance });
            }
        }
        let train_loss = total / order.len().max(1) as f64;
        let dev_wer = self.dev_wer(stage_index, &data.config.stage_snr_set)?;
        self.state.history.push(EpochTrace {
            epoch,
            stage: stage_index,
            dev_wer,
            param_hash: self.state.model.hash(),
        });
        Ok(EpochStats { train_loss, dev_wer })
    }

    fn checkpoint(&self) -> Vec<f64> {
        self.state.model.params.clone()
    }

    fn restore(&mut self, params: Vec<f64>) {
        self.state.model.params = params;
        self.state.pending_restore = Some(self.state.model.hash());
    }

    fn epoch_finished(
        &mut self,
        record: &EpochRecord,
        manifest: &EpochManifest,
        controller: &StageController<Vec<f64>>,
    ) -> Result<()> {
        if let Some(hook) = self.hook.as_mut() {
            hook(record, manifest, controller, &self.state)?;
        }
        Ok(())
    }

    fn should_stop(&self) -> bool {
        self.stop_after
            .is_some_and(|n| self.state.history.last().is_some_and(|h| h.epoch + 1 >= n))
    }
}
