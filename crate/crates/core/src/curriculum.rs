//! SNR schedules and the patience-driven stage controller.
//!
//! A schedule expands an [`SnrGrid`] into an ordered list of stage sets.
//! Accordion-annealed training ([`ScheduleKind::Accan`]) starts on the
//! lowest SNR and widens the set one grid step at a time; the reversed
//! variant starts at the top. Multi-condition training is a single stage
//! spanning the whole grid.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Condition, Error, Result};

/// Ordered, strictly increasing set of training conditions (clean sorts last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    values: Vec<Condition>,
}

impl SnrGrid {
    pub fn new(values: Vec<Condition>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if values.windows(2).any(|w| w[0].sort_key() >= w[1].sort_key()) {
            return Err(Error::InvalidGrid("values must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `lo, lo+step, ..., hi` in dB.
    pub fn range(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(Error::InvalidGrid(format!("range {lo}..{hi} step {step}")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| Condition::db(lo + step * i as f64)).collect())
    }

    pub fn values(&self) -> &[Condition] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for SnrGrid {
    /// 0 to 50 dB in 5 dB steps.
    fn default() -> Self {
        Self::range(0.0, 50.0, 5.0).expect("valid default grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    MultiCondition,
    Accan,
    AccanReversed,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::MultiCondition => "multi-condition",
            ScheduleKind::Accan => "accan",
            ScheduleKind::AccanReversed => "accan-reversed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub grid: SnrGrid,
}

/// Stage sets for a schedule, in training order.
pub fn build_stages(s: &Schedule) -> Result<Vec<Vec<Condition>>> {
    let grid = s.grid.values();
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(match s.kind {
        ScheduleKind::MultiCondition => vec![grid.to_vec()],
        ScheduleKind::Accan => (1..=grid.len()).map(|i| grid[..i].to_vec()).collect(),
        ScheduleKind::AccanReversed => (1..=grid.len())
            .map(|i| grid.iter().rev().take(i).copied().collect())
            .collect(),
    })
}

/// Uniform draw over a stage set; the clean sentinel is skipped unless allowed.
pub fn sample_snr<R: Rng + ?Sized>(stage: &[Condition], allow_clean: bool, rng: &mut R) -> Result<Condition> {
    let eligible: Vec<Condition> = stage
        .iter()
        .copied()
        .filter(|c| allow_clean || *c != Condition::Clean)
        .collect();
    if eligible.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(eligible[rng.random_range(0..eligible.len())])
}

/// Outcome of feeding one epoch's dev WER to the controller.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision<C> {
    Continue { improved: bool },
    /// Move to `to`; training resumes from `restore`, the best weights of the stage just left.
    SwitchStage { from: usize, to: usize, restore: C },
    /// Stop; `best` holds the best weights of the final stage.
    Terminate { best: Option<C>, reason: StopReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl<C> Decision<C> {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Continue { .. } => "continue",
            Decision::SwitchStage { .. } => "switch",
            Decision::Terminate { .. } => "terminate",
        }
    }
}

/// Patience-driven stage state machine.
///
/// `C` is whatever the caller uses as a checkpoint; the controller clones it
/// on every strict improvement and hands the stored copy back on a switch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageController<C> {
    stages: Vec<Vec<Condition>>,
    stage_index: usize,
    best_metric: f64,
    epochs_since_improvement: usize,
    patience: usize,
    best_checkpoint: Option<C>,
    epoch_counter: usize,
    max_epochs: usize,
    finished: bool,
}

impl<C: Clone> StageController<C> {
    pub fn new(stages: Vec<Vec<Condition>>, patience: usize, max_epochs: usize) -> Result<Self> {
        if stages.is_empty() || stages.iter().any(|s| s.is_empty()) {
            return Err(Error::EmptyGrid);
        }
        if patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(Self {
            stages,
            stage_index: 0,
            best_metric: f64::INFINITY,
            epochs_since_improvement: 0,
            patience,
            best_checkpoint: None,
            epoch_counter: 0,
            max_epochs,
            finished: false,
        })
    }

    pub fn stages(&self) -> &[Vec<Condition>] {
        &self.stages
    }

    pub fn stage_index(&self) -> usize {
        self.stage_index
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn current_stage(&self) -> &[Condition] {
        &self.stages[self.stage_index]
    }

    pub fn best_metric(&self) -> f64 {
        self.best_metric
    }

    pub fn best_checkpoint(&self) -> Option<&C> {
        self.best_checkpoint.as_ref()
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.epochs_since_improvement
    }

    pub fn epoch_counter(&self) -> usize {
        self.epoch_counter
    }

    pub fn patience(&self) -> usize {
        self.patience
    }

    pub fn max_epochs(&self) -> usize {
        self.max_epochs
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Record one epoch's dev WER (percent) and the weights that produced it.
    pub fn advance(&mut self, dev_wer: f64, current: &C) -> Decision<C> {
        assert!(!self.finished, "controller already terminated");
        assert!(dev_wer >= 0.0, "dev WER must be non-negative");
        self.epoch_counter += 1;
        let improved = dev_wer < self.best_metric;
        if improved {
            self.best_metric = dev_wer;
            self.best_checkpoint = Some(current.clone());
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }

        if self.epochs_since_improvement >= self.patience {
            if self.stage_index + 1 < self.stages.len() {
                let from = self.stage_index;
                let restore = self
                    .best_checkpoint
                    .take()
                    .expect("a stage always records its first epoch");
                self.stage_index += 1;
                self.best_metric = f64::INFINITY;
                self.epochs_since_improvement = 0;
                if self.epoch_counter >= self.max_epochs {
                    self.finished = true;
                    return Decision::Terminate {
                        best: Some(restore),
                        reason: StopReason::MaxEpochs,
                    };
                }
                return Decision::SwitchStage {
                    from,
                    to: self.stage_index,
                    restore,
                };
            }
            self.finished = true;
            return Decision::Terminate {
                best: self.best_checkpoint.clone(),
                reason: StopReason::Patience,
            };
        }
        if self.epoch_counter >= self.max_epochs {
            self.finished = true;
            return Decision::Terminate {
                best: self.best_checkpoint.clone(),
                reason: StopReason::MaxEpochs,
            };
        }
        Decision::Continue { improved }
    }
}

/// One line of the stage-transition log.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub epoch: usize,
    pub stage: usize,
    pub dev_wer: f64,
    pub decision: &'static str,
}

impl fmt::Display for TransitionRecord {
    /// `epoch<TAB>stage<TAB>dev_wer<TAB>decision`, stages numbered from 1.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{:.4}\t{}", self.epoch, self.stage + 1, self.dev_wer, self.decision)
    }
}

/// How the clean sentinel participates in a grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleanMode {
    #[default]
    Exclude,
    Include,
    Only,
}

/// Declarative schedule description, e.g.
///
/// ```text
/// kind = "accan"
/// grid_min = 0
/// grid_max = 50
/// grid_step = 5
/// clean = "exclude"
/// patience = 5
/// max_epochs = 300
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    #[serde(default)]
    pub grid_min: f64,
    #[serde(default = "default_grid_max")]
    pub grid_max: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default)]
    pub clean: CleanMode,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Defaults to 150 for multi-condition and 300 for curricula.
    #[serde(default)]
    pub max_epochs: Option<usize>,
}

fn default_grid_max() -> f64 {
    50.0
}
fn default_grid_step() -> f64 {
    5.0
}
fn default_patience() -> usize {
    5
}

impl ScheduleConfig {
    pub fn new(kind: ScheduleKind) -> Self {
        Self {
            kind,
            grid_min: 0.0,
            grid_max: default_grid_max(),
            grid_step: default_grid_step(),
            clean: CleanMode::Exclude,
            patience: default_patience(),
            max_epochs: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("schedule: {e}")))
    }

    pub fn grid(&self) -> Result<SnrGrid> {
        match self.clean {
            CleanMode::Only => SnrGrid::new(vec![Condition::Clean]),
            mode => {
                let mut values = SnrGrid::range(self.grid_min, self.grid_max, self.grid_step)?.values;
                if mode == CleanMode::Include {
                    values.push(Condition::Clean);
                }
                SnrGrid::new(values)
            }
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Ok(Schedule {
            kind: self.kind,
            grid: self.grid()?,
        })
    }

    pub fn max_epochs(&self) -> usize {
        self.max_epochs.unwrap_or(match self.kind {
            ScheduleKind::MultiCondition => 150,
            _ => 300,
        })
    }

    pub fn controller<C: Clone>(&self) -> Result<StageController<C>> {
        StageController::new(build_stages(&self.schedule()?)?, self.patience, self.max_epochs())
    }
}
