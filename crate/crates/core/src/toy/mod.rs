//! Desk-scale recurrent CTC model and a synthetic tone task to train it on.

pub mod adam;
pub mod checkpoint;
pub mod experiment;
pub mod model;
pub mod synth;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use model::{Mode, ModelDims, ToyModel};
pub use synth::SyntheticTask;
pub use train::{ToyTrainer, TrainConfig};
