//! Experiment file for `pemkit train`.
//!
//! ```text
//! seed = 7
//! output_dir = "runs/accan"
//! workers = 1
//! overlap = true
//!
//! [corpus]
//! kind = "synthetic"      # or kind = "dir", path = "...", alphabet = "abcd"
//! train = 200
//! dev = 50
//! test = 50
//!
//! [noise]
//! kind = "pink"           # or kind = "file", path = "noise.wav"
//! seconds = 60
//!
//! [schedule]
//! kind = "accan"
//! patience = 5
//!
//! [features]
//! norm = "corpus"
//! sigma = 0.6
//!
//! [trainer]
//! hidden = 64
//! batch_size = 8
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curriculum::ScheduleConfig;
use crate::eval::evaluation_conditions;
use crate::features::NormMode;
use crate::toy::TrainConfig;
use crate::{Condition, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "yes")]
    pub overlap: bool,
    pub corpus: CorpusConfig,
    pub noise: NoiseConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusConfig {
    /// Generated tone sequences over the symbols `abcd`.
    Synthetic {
        train: usize,
        dev: usize,
        test: usize,
        #[serde(default = "min_symbols")]
        min_symbols: usize,
        #[serde(default = "max_symbols")]
        max_symbols: usize,
    },
    /// A directory with `train.tsv`, `dev.tsv` and `test.tsv`, each line
    /// `id<TAB>wav path<TAB>transcript`; transcripts are space-separated symbols.
    Dir { path: PathBuf, alphabet: String },
}

fn min_symbols() -> usize {
    2
}
fn max_symbols() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseConfig {
    Pink {
        #[serde(default = "pool_seconds")]
        seconds: f64,
    },
    File { path: PathBuf },
}

fn pool_seconds() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub norm: NormMode,
    /// Gaussian injection after normalization; 0 disables it.
    pub sigma: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            norm: NormMode::Corpus,
            sigma: 0.6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Test conditions such as `"clean"` or `"-5"`; defaults to clean plus 50 dB down to -20 dB.
    pub conditions: Option<Vec<String>>,
}

impl EvalConfig {
    pub fn conditions(&self) -> Result<Vec<Condition>> {
        match &self.conditions {
            None => Ok(evaluation_conditions()),
            Some(c) => c.iter().map(|s| s.parse()).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse, resolve relative paths against the file's directory and validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let CorpusConfig::Dir { path, .. } = &mut self.corpus {
            fix(path);
        }
        if let NoiseConfig::File { path } = &mut self.noise {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let must_exist = |p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{} does not exist", p.display())))
            }
        };
        match &self.corpus {
            CorpusConfig::Dir { path, alphabet } => {
                for split in ["train.tsv", "dev.tsv", "test.tsv"] {
                    must_exist(&path.join(split))?;
                }
                if alphabet.is_empty() {
                    return Err(Error::Config("empty alphabet".into()));
                }
            }
            CorpusConfig::Synthetic {
                train,
                dev,
                test,
                min_symbols,
                max_symbols,
            } => {
                if *train == 0 || *dev == 0 || *test == 0 {
                    return Err(Error::Config("every split needs at least one utterance".into()));
                }
                if *min_symbols == 0 || min_symbols > max_symbols {
                    return Err(Error::Config(format!("bad symbol range {min_symbols}..{max_symbols}")));
                }
            }
        }
        match &self.noise {
            NoiseConfig::File { path } => must_exist(path)?,
            NoiseConfig::Pink { seconds } => {
                if !(*seconds > 0.0) {
                    return Err(Error::Config("noise seconds must be positive".into()));
                }
            }
        }
        if !(self.features.sigma >= 0.0) {
            return Err(Error::Config("sigma must be non-negative".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.schedule.controller::<()>()?;
        self.trainer.validate()?;
        self.eval.conditions()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
output_dir = "out"
[corpus]
kind = "synthetic"
train = 10
dev = 4
test = 4
[noise]
kind = "pink"
[schedule]
kind = "accan"
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.workers, 1);
        assert!(c.overlap);
        assert_eq!(c.features.sigma, 0.6);
        assert_eq!(c.trainer.hidden, 64);
        assert_eq!(c.trainer.dropout, 0.3);
        assert_eq!(c.schedule.patience, 5);
        assert_eq!(c.eval.conditions().unwrap().len(), 16);
        assert_eq!(c.noise, NoiseConfig::Pink { seconds: 60.0 });
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 3\n", "");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse(&format!("{MINIMAL}\n[trainer]\nhiden = 3\n")).is_err());
    }

    #[test]
    fn missing_paths_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace("kind = \"pink\"", "kind = \"file\"\npath = \"nowhere.wav\"");
        let path = dir.path().join("run.toml");
        fs::write(&path, text).unwrap();
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("nowhere.wav"), "{err}");
    }

    #[test]
    fn relative_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, MINIMAL).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.output_dir, dir.path().join("out"));
    }

    #[test]
    fn bad_dropout_rejected() {
        let text = format!("{MINIMAL}\n[trainer]\ndropout = 1.0\n");
        assert!(RunConfig::parse(&text).unwrap().validate().is_err());
    }
}
