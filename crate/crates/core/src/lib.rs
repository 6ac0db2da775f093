//! Magnitude pruning for sequence-to-sequence models.
//!
//! * [`param_store`]: named tensors and the `.prnt` checkpoint format.
//! * [`pruner`]: unstructured magnitude pruning over a whole store.
//! * [`schedules`]: IMP, PARP and PARP-P on top of the toy trainer.
//! * [`toy`]: a small token-to-frames model with a synthetic task.
//! * [`eval`]: WAV input, YIN pitch, prosody mismatch and WER.
//! * [`stats`]: Mann-Whitney U, pairwise z-tests and significance matrices.
//! * [`sweep`]: deterministic sparsity sweeps over the toy task.

pub mod error;
pub mod eval;
pub mod param_store;
pub mod pruner;
pub mod schedules;
pub mod stats;
pub mod sweep;
pub mod toy;

pub use error::{Error, Result};
pub use param_store::{ParamStore, Tensor};
pub use pruner::{apply_mask, mask_overlap, sparsity, ump, PruneMask};
