//! Desk-scale sequence-to-sequence task: token sequences in, upsampled
//! frame sequences with a stop channel out.

pub mod data;
pub mod model;
pub mod train;
pub mod transcribe;

pub use data::{gen_dataset, Codebook, Example, FrameSeq, SynthDataset, TaskConfig, TokenSeq};
pub use model::{dataset_loss, gradients, loss, loss_at, Gradients, ModelDims, ToyModel};
pub use train::{train, KdTerm, LossCurve, StepState, TrainOptions};
pub use transcribe::{synthesize_labels, toy_wer, transcribe};
