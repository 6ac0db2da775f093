use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{epoch_order, Example, FrameSeq, SynthDataset};
use super::model::ToyModel;
use crate::error::{Error, Result};
use crate::pruner::PruneMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            steps: 2000,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("steps and batch_size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Optimizer steps in one pass over `n` examples.
    pub fn epoch_steps(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size).max(1)
    }
}

/// `(step, minibatch loss)` where `step` counts updates applied before the loss was measured.
pub type LossCurve = Vec<(usize, f64)>;

/// Knowledge-distillation term: `weight * mse(prediction, teacher)` per example.
#[derive(Debug, Clone, Copy)]
pub struct KdTerm<'a> {
    pub weight: f64,
    /// One teacher output per training example, index-aligned.
    pub teacher: &'a [FrameSeq],
}

/// What a step hook sees after an update.
pub struct StepState<'a> {
    /// Number of updates applied so far (1-based).
    pub step: usize,
    pub loss: f64,
    /// Current weights in the store's flat layout.
    pub weights: &'a mut [f32],
}

pub(crate) type StepHook<'h> = dyn FnMut(StepState<'_>) -> Result<()> + 'h;

/// Plain minibatch SGD; see [`train`]. `keep` is a gradient mask over the
/// model's full flat layout and `hook` runs after every update.
pub(crate) fn train_loop(
    model: &ToyModel,
    examples: &[Example],
    opt: &TrainOptions,
    keep: Option<&[bool]>,
    kd: Option<KdTerm<'_>>,
    hook: &mut StepHook<'_>,
) -> Result<(ToyModel, LossCurve)> {
    opt.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let Some(kd) = kd {
        if kd.weight < 0.0 || !kd.weight.is_finite() {
            return Err(Error::Config(format!("KD weight must be >= 0, got {}", kd.weight)));
        }
        if kd.teacher.len() != examples.len() {
            return Err(Error::Config("teacher outputs not aligned with training set".into()));
        }
    }
    let mut weights = model.store().to_flat();
    if let Some(keep) = keep {
        if keep.len() != weights.len() {
            return Err(Error::MaskMismatch("gradient mask does not match layout".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut order = Vec::new();
    let mut cursor = 0;
    let mut curve = Vec::with_capacity(opt.steps);
    let mut w64 = vec![0.0f64; weights.len()];
    for step in 0..opt.steps {
        if cursor >= order.len() {
            order = epoch_order(&mut rng, examples.len());
            cursor = 0;
        }
        let end = (cursor + opt.batch_size).min(order.len());
        let idx = &order[cursor..end];
        cursor = end;

        for (d, s) in w64.iter_mut().zip(&weights) {
            *d = f64::from(*s);
        }
        let batch: Vec<&Example> = idx.iter().map(|&i| &examples[i]).collect();
        let teacher: Option<(f64, Vec<&FrameSeq>)> =
            kd.map(|kd| (kd.weight, idx.iter().map(|&i| &kd.teacher[i]).collect()));
        let net = model.net(&w64);
        let (loss, mut grad) = match net.batch_gradient(
            &batch,
            teacher.as_ref().map(|(w, t)| (*w, t.as_slice())),
        ) {
            Ok(v) => v,
            Err(Error::NonFiniteCompute(_)) => return Err(Error::Diverged { step }),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        curve.push((step, loss));

        if let Some(keep) = keep {
            for (g, k) in grad.iter_mut().zip(keep) {
                if !k {
                    *g = 0.0;
                }
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w = (f64::from(*w) - opt.learning_rate * g) as f32;
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { step: step + 1 });
        }
        hook(StepState {
            step: step + 1,
            loss,
            weights: &mut weights,
        })?;
    }

    let mut store = model.store().clone();
    store.copy_from_flat(&weights)?;
    Ok((model.with_store(store)?, curve))
}

/// Trains with fixed-rate SGD. With `grad_mask`, gradients at pruned
/// coordinates are zeroed before every update, so those weights never move.
pub fn train(
    model: &ToyModel,
    dataset: &SynthDataset,
    opt: &TrainOptions,
    grad_mask: Option<&PruneMask>,
) -> Result<(ToyModel, LossCurve)> {
    let keep = grad_mask
        .map(|m| m.keep_over_layout(model.store()))
        .transpose()?;
    train_loop(
        model,
        &dataset.examples,
        opt,
        keep.as_deref(),
        None,
        &mut |_| Ok(()),
    )
}
