//! Noise-robust sequence-recognition training toolkit.
//!
//! The crate covers the whole desk-scale pipeline: exact-SNR waveform
//! mixing against a noise pool ([`audio`], [`noise`]), 123-dimensional
//! filterbank features ([`features`]), SNR curricula with a patience-driven
//! stage controller ([`curriculum`]), per-epoch regeneration of the noisy
//! training set ([`pem`]), CTC loss and best-path decoding ([`ctc`]), word
//! error rate scoring with SNR-range aggregation ([`eval`]) and a small
//! recurrent model that ties everything together ([`toy`]).

pub mod audio;
pub mod config;
pub mod ctc;
pub mod curriculum;
mod error;
pub mod eval;
pub mod featfile;
pub mod features;
pub mod hash;
pub mod noise;
pub mod pem;
pub mod spectrum;
pub mod toy;
pub mod wav;

pub use audio::{Condition, NoisePool, SnrDb, Waveform};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, NormStats, FEATURE_DIM};
