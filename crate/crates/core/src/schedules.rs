//! Pruning schedules built on [`crate::pruner::ump`] and the toy trainer.
//!
//! * IMP: prune `theta_0`, then train with pruned coordinates frozen at zero.
//! * PARP: prune `theta_0` once, train with every coordinate free to regrow,
//!   re-prune every `N` updates and once more at the end.
//! * PARP-P: PARP starting from a lower sparsity and ramping linearly to the
//!   target over the first re-prune events.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_store::ParamStore;
use crate::pruner::{self, apply_mask, mask_overlap, ump, ump_within, PruneMask};
use crate::toy::data::{Example, FrameSeq, SynthDataset, TokenSeq};
use crate::toy::model::{dataset_loss, ToyModel};
use crate::toy::train::{train_loop, KdTerm, LossCurve, StepState, TrainOptions};
use crate::toy::transcribe::synthesize_labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScheduleKind {
    Imp,
    Parp,
    ParpP,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Imp => "IMP",
            ScheduleKind::Parp => "PARP",
            ScheduleKind::ParpP => "PARP_P",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "IMP" => Ok(ScheduleKind::Imp),
            "PARP" => Ok(ScheduleKind::Parp),
            "PARP_P" => Ok(ScheduleKind::ParpP),
            _ => Err(Error::Config(format!("unknown schedule `{s}`"))),
        }
    }
}

/// Where `theta_0` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitWeights {
    /// The supplied (trained) model.
    Trained,
    /// A fresh random initialization with the supplied model's shapes.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AugPolicy {
    None,
    SeqAug,
    MixAug,
}

/// When a periodic re-prune fires relative to the update that completes `N` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepruneTiming {
    AfterUpdate,
    BeforeUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub target_sparsity: f64,
    /// Updates between re-prune events; `None` means one epoch of the training set.
    pub n_updates: Option<usize>,
    pub imp_iterations: usize,
    /// Starting sparsity for PARP-P; `None` means `max(0, target - 0.2)`.
    pub parp_p_start: Option<f64>,
    pub parp_p_events: usize,
    pub init: InitWeights,
    pub kd_weight: f64,
    pub aug: AugPolicy,
    pub reprune_timing: RepruneTiming,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Parp,
            target_sparsity: 0.5,
            n_updates: None,
            imp_iterations: 1,
            parp_p_start: None,
            parp_p_events: 5,
            init: InitWeights::Trained,
            kd_weight: 0.0,
            aug: AugPolicy::None,
            reprune_timing: RepruneTiming::AfterUpdate,
            learning_rate: 1.0,
            steps: 2000,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl ScheduleConfig {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            steps: self.steps,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn start_sparsity(&self) -> f64 {
        match self.kind {
            ScheduleKind::ParpP => self
                .parp_p_start
                .unwrap_or((self.target_sparsity - 0.2).max(0.0)),
            _ => self.target_sparsity,
        }
    }

    /// Sparsity applied at re-prune event `i`, where event 0 is the initial prune.
    pub fn event_sparsity(&self, i: usize) -> f64 {
        if self.kind != ScheduleKind::ParpP {
            return self.target_sparsity;
        }
        let r = self.parp_p_events;
        if r <= 1 || i + 1 >= r {
            return self.target_sparsity;
        }
        let start = self.start_sparsity();
        start + (self.target_sparsity - start) * i as f64 / (r - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.target_sparsity) {
            return Err(Error::SparsityRange(self.target_sparsity));
        }
        if self.n_updates == Some(0) {
            return Err(Error::Config("n_updates must be at least 1".into()));
        }
        if self.imp_iterations == 0 || self.parp_p_events == 0 {
            return Err(Error::Config(
                "imp_iterations and parp_p_events must be at least 1".into(),
            ));
        }
        let start = self.start_sparsity();
        if !(0.0..=self.target_sparsity).contains(&start) {
            return Err(Error::Config(format!(
                "PARP-P start {start} must lie in [0, target {}]",
                self.target_sparsity
            )));
        }
        if self.kd_weight < 0.0 || !self.kd_weight.is_finite() {
            return Err(Error::Config(format!(
                "KD weight must be nonnegative, got {}",
                self.kd_weight
            )));
        }
        self.train_options().validate()
    }

    fn expect_kind(&self, kind: ScheduleKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "configuration is for {}, not {}",
                self.kind.name(),
                kind.name()
            )));
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepruneEvent {
    /// Global update count at which the event fired (0 = before training).
    pub step: usize,
    pub sparsity: f64,
}

#[derive(Debug, Clone)]
pub struct PrunedResult {
    pub kind: ScheduleKind,
    /// `m_0`.
    pub initial_mask: PruneMask,
    /// `m_D`.
    pub final_mask: PruneMask,
    /// Trained weights with `final_mask` applied.
    pub final_model: ToyModel,
    pub loss_curve: LossCurve,
    pub mask_overlap_m0_md: f64,
    pub events: Vec<RepruneEvent>,
    /// Mean loss of the final subnetwork on the target dataset.
    pub final_loss: f64,
}

impl PrunedResult {
    pub fn final_weights(&self) -> &ParamStore {
        self.final_model.store()
    }

    /// Writes `weights.prnt`, `mask.prnt`, `initial_mask.prnt`,
    /// `loss_curve.csv` (`step,loss`) and `summary.json`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.final_weights().save_checkpoint(dir.join("weights.prnt"))?;
        self.final_mask.save(dir.join("mask.prnt"))?;
        self.initial_mask.save(dir.join("initial_mask.prnt"))?;

        let curve_path = dir.join("loss_curve.csv");
        let mut csv = String::from("step,loss\n");
        for (step, loss) in &self.loss_curve {
            csv.push_str(&format!("{step},{loss:e}\n"));
        }
        fs::File::create(&curve_path)
            .and_then(|mut f| f.write_all(csv.as_bytes()))
            .map_err(|e| Error::io(&curve_path, e))?;

        let summary = serde_json::json!({
            "schedule": self.kind.name(),
            "final_loss": self.final_loss,
            "final_sparsity": pruner::sparsity(&self.final_mask),
            "initial_sparsity": pruner::sparsity(&self.initial_mask),
            "mask_overlap_m0_md": self.mask_overlap_m0_md,
            "events": self.events,
        });
        let summary_path = dir.join("summary.json");
        fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
            .map_err(|e| Error::io(&summary_path, e))
    }
}

/// What an observer sees after every optimizer update.
pub struct StepSnapshot<'a> {
    /// Global update count (1-based across phases and IMP iterations).
    pub step: usize,
    pub loss: f64,
    pub weights: &'a [f32],
    /// Gradient mask in force over the flat layout (IMP only).
    pub frozen_keep: Option<&'a [bool]>,
}

pub type Observer<'o> = dyn FnMut(StepSnapshot<'_>) + 'o;

/// Distillation loss against a frozen teacher: `L_data + weight * mse(pred, teacher(X))`.
#[derive(Debug, Clone)]
pub struct KdLoss {
    pub weight: f64,
    teacher: ToyModel,
}

impl KdLoss {
    pub fn teacher(&self) -> &ToyModel {
        &self.teacher
    }

    /// Teacher outputs for `examples`, computed once.
    pub fn teacher_outputs(&self, examples: &[Example]) -> Result<Vec<FrameSeq>> {
        examples.iter().map(|e| self.teacher.forward(&e.tokens)).collect()
    }
}

/// Configures the distillation term from `cfg.kd_weight`; `None` when it is 0.
pub fn attach_kd(cfg: &ScheduleConfig, teacher: &ToyModel) -> Result<Option<KdLoss>> {
    if cfg.kd_weight < 0.0 || !cfg.kd_weight.is_finite() {
        return Err(Error::Config(format!(
            "KD weight must be nonnegative, got {}",
            cfg.kd_weight
        )));
    }
    Ok((cfg.kd_weight > 0.0).then(|| KdLoss {
        weight: cfg.kd_weight,
        teacher: teacher.clone(),
    }))
}

/// Shared state of one schedule run.
struct Run<'a, 'o> {
    cfg: &'a ScheduleConfig,
    kd: Option<KdLoss>,
    observer: &'a mut Observer<'o>,
    curve: LossCurve,
    events: Vec<RepruneEvent>,
    step_offset: usize,
}

impl<'a, 'o> Run<'a, 'o> {
    fn new(
        cfg: &'a ScheduleConfig,
        teacher: &ToyModel,
        observer: &'a mut Observer<'o>,
    ) -> Result<Self> {
        Ok(Self {
            cfg,
            kd: attach_kd(cfg, teacher)?,
            observer,
            curve: Vec::new(),
            events: Vec::new(),
            step_offset: 0,
        })
    }

    fn record_curve(&mut self, curve: LossCurve) {
        let off = self.step_offset;
        self.curve.extend(curve.into_iter().map(|(s, l)| (s + off, l)));
        self.step_offset += self.cfg.steps;
    }

    fn teacher_outputs(&self, examples: &[Example]) -> Result<Option<Vec<FrameSeq>>> {
        self.kd.as_ref().map(|kd| kd.teacher_outputs(examples)).transpose()
    }

    /// IMP Step 2: train with pruned coordinates frozen.
    fn frozen_training(
        &mut self,
        model: &ToyModel,
        mask: &PruneMask,
        examples: &[Example],
    ) -> Result<ToyModel> {
        let keep = mask.keep_over_layout(model.store())?;
        let teacher = self.teacher_outputs(examples)?;
        let kd = self.kd.as_ref().zip(teacher.as_deref()).map(|(k, t)| KdTerm {
            weight: k.weight,
            teacher: t,
        });
        let offset = self.step_offset;
        let observer = &mut *self.observer;
        let (trained, curve) = train_loop(
            model,
            examples,
            &self.cfg.train_options(),
            Some(&keep),
            kd,
            &mut |s: StepState<'_>| {
                if let Some(i) = s
                    .weights
                    .iter()
                    .zip(&keep)
                    .position(|(w, k)| !k && *w != 0.0)
                {
                    return Err(Error::MaskMismatch(format!(
                        "frozen coordinate {i} moved at step {}",
                        s.step
                    )));
                }
                observer(StepSnapshot {
                    step: offset + s.step,
                    loss: s.loss,
                    weights: s.weights,
                    frozen_keep: Some(&keep),
                });
                Ok(())
            },
        )?;
        self.record_curve(curve);
        Ok(trained)
    }

    /// PARP Step 2 from already-pruned weights: free training with periodic
    /// re-prunes, then a terminal re-prune at the target sparsity.
    fn adjust_and_reprune(
        &mut self,
        model: &ToyModel,
        examples: &[Example],
    ) -> Result<(ToyModel, PruneMask)> {
        let cfg = self.cfg;
        let opt = cfg.train_options();
        let period = cfg.n_updates.unwrap_or_else(|| opt.epoch_steps(examples.len()));
        let teacher = self.teacher_outputs(examples)?;
        let kd = self.kd.as_ref().zip(teacher.as_deref()).map(|(k, t)| KdTerm {
            weight: k.weight,
            teacher: t,
        });
        let offset = self.step_offset;
        let observer = &mut *self.observer;
        let events = &mut self.events;
        let mut scratch = model.store().clone();
        let mut event_index = 1;
        let (trained, curve) = train_loop(model, examples, &opt, None, kd, &mut |s| {
            let fire = match cfg.reprune_timing {
                RepruneTiming::AfterUpdate => s.step % period == 0,
                RepruneTiming::BeforeUpdate => (s.step + 1) % period == 0,
            };
            // the terminal re-prune covers the last update
            if fire && s.step < opt.steps {
                let sparsity = cfg.event_sparsity(event_index);
                event_index += 1;
                scratch.copy_from_flat(s.weights)?;
                let m = ump(&scratch, sparsity)?;
                let keep = m.keep_over_layout(&scratch)?;
                for (w, k) in s.weights.iter_mut().zip(keep) {
                    if !k {
                        *w = 0.0;
                    }
                }
                events.push(RepruneEvent {
                    step: offset + s.step,
                    sparsity,
                });
            }
            observer(StepSnapshot {
                step: offset + s.step,
                loss: s.loss,
                weights: s.weights,
                frozen_keep: None,
            });
            Ok(())
        })?;
        self.record_curve(curve);
        let final_mask = ump(trained.store(), cfg.target_sparsity)?;
        self.events.push(RepruneEvent {
            step: self.step_offset,
            sparsity: cfg.target_sparsity,
        });
        let pruned = trained.with_store(apply_mask(trained.store(), &final_mask)?)?;
        Ok((pruned, final_mask))
    }

    fn finish(
        self,
        initial_mask: PruneMask,
        final_mask: PruneMask,
        final_model: ToyModel,
        eval: &[Example],
    ) -> Result<PrunedResult> {
        Ok(PrunedResult {
            kind: self.cfg.kind,
            mask_overlap_m0_md: mask_overlap(&initial_mask, &final_mask)?,
            final_loss: dataset_loss(&final_model, eval)?,
            initial_mask,
            final_mask,
            final_model,
            loss_curve: self.curve,
            events: self.events,
        })
    }
}

fn initial_weights(model: &ToyModel, cfg: &ScheduleConfig) -> Result<ToyModel> {
    match cfg.init {
        InitWeights::Trained => Ok(model.clone()),
        InitWeights::Random => {
            let fresh = ToyModel::init(model.dims(), cfg.seed ^ 0x005e_ed0f_4a4d, true)?;
            let mut store = fresh.into_store();
            for name in model.store().names() {
                store.set_prunable(name, model.store().is_prunable(name))?;
            }
            model.with_store(store)
        }
    }
}

fn nonempty(dataset: &SynthDataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    Ok(())
}

/// Per-iteration IMP sparsities: each round removes the same fraction of the
/// surviving weights, ending exactly at the target.
pub fn imp_iteration_sparsities(target: f64, iterations: usize) -> Vec<f64> {
    (1..=iterations)
        .map(|i| {
            if i == iterations {
                target
            } else {
                1.0 - (1.0 - target).powf(i as f64 / iterations as f64)
            }
        })
        .collect()
}

pub fn run_imp(model: &ToyModel, dataset: &SynthDataset, cfg: &ScheduleConfig) -> Result<PrunedResult> {
    run_imp_observed(model, dataset, cfg, &mut |_| {})
}

pub fn run_imp_observed(
    model: &ToyModel,
    dataset: &SynthDataset,
    cfg: &ScheduleConfig,
    observer: &mut Observer<'_>,
) -> Result<PrunedResult> {
    cfg.expect_kind(ScheduleKind::Imp)?;
    nonempty(dataset)?;
    let mut run = Run::new(cfg, model, observer)?;
    let mut current = initial_weights(model, cfg)?;
    let mut mask: Option<PruneMask> = None;
    let mut initial_mask = None;
    for (i, s) in imp_iteration_sparsities(cfg.target_sparsity, cfg.imp_iterations)
        .into_iter()
        .enumerate()
    {
        let m = match &mask {
            None => ump(current.store(), s)?,
            Some(prev) => ump_within(current.store(), prev, s)?,
        };
        run.events.push(RepruneEvent {
            step: run.step_offset,
            sparsity: s,
        });
        current = current.with_store(apply_mask(current.store(), &m)?)?;
        if i == 0 {
            initial_mask = Some(m.clone());
        }
        current = run.frozen_training(&current, &m, &dataset.examples)?;
        mask = Some(m);
    }
    let final_mask = mask.expect("at least one iteration");
    let initial_mask = initial_mask.expect("at least one iteration");
    run.finish(initial_mask, final_mask, current, &dataset.examples)
}

fn parp_like(
    model: &ToyModel,
    dataset: &SynthDataset,
    cfg: &ScheduleConfig,
    observer: &mut Observer<'_>,
) -> Result<PrunedResult> {
    nonempty(dataset)?;
    let mut run = Run::new(cfg, model, observer)?;
    let theta0 = initial_weights(model, cfg)?;
    let start = cfg.event_sparsity(0);
    let m0 = ump(theta0.store(), start)?;
    run.events.push(RepruneEvent {
        step: 0,
        sparsity: start,
    });
    let pruned0 = theta0.with_store(apply_mask(theta0.store(), &m0)?)?;
    let (final_model, final_mask) = run.adjust_and_reprune(&pruned0, &dataset.examples)?;
    run.finish(m0, final_mask, final_model, &dataset.examples)
}

pub fn run_parp(model: &ToyModel, dataset: &SynthDataset, cfg: &ScheduleConfig) -> Result<PrunedResult> {
    run_parp_observed(model, dataset, cfg, &mut |_| {})
}

pub fn run_parp_observed(
    model: &ToyModel,
    dataset: &SynthDataset,
    cfg: &ScheduleConfig,
    observer: &mut Observer<'_>,
) -> Result<PrunedResult> {
    cfg.expect_kind(ScheduleKind::Parp)?;
    parp_like(model, dataset, cfg, observer)
}

pub fn run_parp_p(model: &ToyModel, dataset: &SynthDataset, cfg: &ScheduleConfig) -> Result<PrunedResult> {
    run_parp_p_observed(model, dataset, cfg, &mut |_| {})
}

pub fn run_parp_p_observed(
    model: &ToyModel,
    dataset: &SynthDataset,
    cfg: &ScheduleConfig,
    observer: &mut Observer<'_>,
) -> Result<PrunedResult> {
    cfg.expect_kind(ScheduleKind::ParpP)?;
    parp_like(model, dataset, cfg, observer)
}

/// Dispatches on `cfg.kind` (and `cfg.aug`, when an unspoken set is given).
pub fn run_schedule(
    model: &ToyModel,
    dataset: &SynthDataset,
    unspoken: &[TokenSeq],
    cfg: &ScheduleConfig,
) -> Result<PrunedResult> {
    if cfg.aug != AugPolicy::None {
        return run_with_aug(model, dataset, unspoken, cfg);
    }
    match cfg.kind {
        ScheduleKind::Imp => run_imp(model, dataset, cfg),
        ScheduleKind::Parp => run_parp(model, dataset, cfg),
        ScheduleKind::ParpP => run_parp_p(model, dataset, cfg),
    }
}

/// PARP with self-training on teacher-labeled unspoken inputs. The supplied
/// (trained, unpruned) model labels `unspoken` and is also `theta_0`.
///
/// * `SeqAug`: PARP Step 2 on the labeled set, then PARP Step 2 on the real
///   set starting from the resulting subnetwork.
/// * `MixAug`: PARP Step 2 once on the real and labeled sets concatenated.
pub fn run_with_aug(
    model: &ToyModel,
    dataset: &SynthDataset,
    unspoken: &[TokenSeq],
    cfg: &ScheduleConfig,
) -> Result<PrunedResult> {
    cfg.expect_kind(ScheduleKind::Parp)?;
    nonempty(dataset)?;
    match cfg.aug {
        AugPolicy::None => Err(Error::Config("augmentation policy is NONE".into())),
        AugPolicy::MixAug => {
            let augmented = if unspoken.is_empty() {
                dataset.clone()
            } else {
                dataset.concat(&synthesize_labels(model, unspoken, dataset)?)?
            };
            let mut noop = |_: StepSnapshot<'_>| {};
            let mut run = Run::new(cfg, model, &mut noop)?;
            let theta0 = initial_weights(model, cfg)?;
            let m0 = ump(theta0.store(), cfg.target_sparsity)?;
            run.events.push(RepruneEvent {
                step: 0,
                sparsity: cfg.target_sparsity,
            });
            let pruned0 = theta0.with_store(apply_mask(theta0.store(), &m0)?)?;
            let (final_model, final_mask) = run.adjust_and_reprune(&pruned0, &augmented.examples)?;
            run.finish(m0, final_mask, final_model, &dataset.examples)
        }
        AugPolicy::SeqAug => {
            if unspoken.is_empty() {
                return Err(Error::Empty("unspoken input set"));
            }
            let labeled = synthesize_labels(model, unspoken, dataset)?;
            let mut noop = |_: StepSnapshot<'_>| {};
            let mut run = Run::new(cfg, model, &mut noop)?;
            let theta0 = initial_weights(model, cfg)?;
            let m0 = ump(theta0.store(), cfg.target_sparsity)?;
            run.events.push(RepruneEvent {
                step: 0,
                sparsity: cfg.target_sparsity,
            });
            let pruned0 = theta0.with_store(apply_mask(theta0.store(), &m0)?)?;
            let (sub_u, _m_u) = run.adjust_and_reprune(&pruned0, &labeled.examples)?;
            let (final_model, final_mask) = run.adjust_and_reprune(&sub_u, &dataset.examples)?;
            run.finish(m0, final_mask, final_model, &dataset.examples)
        }
    }
}

/// Dense training of `model` with the same optimizer settings as `cfg`
/// (the baseline PARP results are compared against).
pub fn train_dense(model: &ToyModel, dataset: &SynthDataset, opt: &TrainOptions) -> Result<(ToyModel, LossCurve)> {
    nonempty(dataset)?;
    train_loop(model, &dataset.examples, opt, None, None, &mut |_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pruner::{prune_count, sparsity};
    use crate::toy::data::{gen_dataset, TaskConfig};
    use crate::toy::model::ModelDims;

    fn setup() -> (ToyModel, SynthDataset) {
        let task = TaskConfig {
            vocab: 6,
            frame_dim: 3,
            min_len: 2,
            max_len: 5,
            ..TaskConfig::default()
        };
        let dims = ModelDims {
            vocab: 6,
            hidden: 8,
            frame_dim: 3,
            upsample: 2,
        };
        let ds = gen_dataset(&task, 3, 32).unwrap();
        let m = ToyModel::init(dims, 5, true).unwrap();
        let opt = TrainOptions {
            learning_rate: 0.3,
            steps: 150,
            batch_size: 8,
            seed: 2,
        };
        let (trained, _) = train_dense(&m, &ds, &opt).unwrap();
        (trained, ds)
    }

    fn cfg(kind: ScheduleKind, target: f64) -> ScheduleConfig {
        ScheduleConfig {
            kind,
            target_sparsity: target,
            learning_rate: 0.3,
            steps: 40,
            batch_size: 8,
            seed: 9,
            ..ScheduleConfig::default()
        }
    }

    fn check_terminal(res: &PrunedResult, target: f64) {
        let d = res.final_weights().prunable_len();
        assert_eq!(sparsity(&res.final_mask), prune_count(target, d) as f64 / d as f64);
        for name in res.final_mask.names() {
            let w = res.final_weights().get(name).unwrap().data();
            for (v, k) in w.iter().zip(res.final_mask.keep(name).unwrap()) {
                if !k {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn parp_p_ramp_is_linear() {
        let c = ScheduleConfig {
            kind: ScheduleKind::ParpP,
            target_sparsity: 0.9,
            parp_p_start: Some(0.7),
            parp_p_events: 5,
            ..ScheduleConfig::default()
        };
        let got: Vec<f64> = (0..7).map(|i| c.event_sparsity(i)).collect();
        let want = [0.7, 0.75, 0.8, 0.85, 0.9, 0.9, 0.9];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
        assert_eq!(c.event_sparsity(4), 0.9);
    }

    #[test]
    fn default_parp_p_start() {
        let c = ScheduleConfig {
            kind: ScheduleKind::ParpP,
            target_sparsity: 0.1,
            ..ScheduleConfig::default()
        };
        assert_eq!(c.start_sparsity(), 0.0);
        let c = ScheduleConfig {
            target_sparsity: 0.9,
            ..c
        };
        assert!((c.start_sparsity() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = ScheduleConfig {
            kind: ScheduleKind::ParpP,
            target_sparsity: 0.5,
            parp_p_start: Some(0.6),
            ..ScheduleConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ScheduleConfig {
            n_updates: Some(0),
            ..ScheduleConfig::default()
        }
        .validate()
        .is_err());
        assert!(ScheduleConfig {
            target_sparsity: 1.0,
            ..ScheduleConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn kind_mismatch_errors() {
        let (m, ds) = setup();
        assert!(run_imp(&m, &ds, &cfg(ScheduleKind::Parp, 0.5)).is_err());
        assert!(run_parp(&m, &ds, &cfg(ScheduleKind::Imp, 0.5)).is_err());
    }

    #[test]
    fn imp_terminal_and_frozen() {
        let (m, ds) = setup();
        let mut steps = 0;
        let res = run_imp_observed(&m, &ds, &cfg(ScheduleKind::Imp, 0.6), &mut |s| {
            steps += 1;
            let keep = s.frozen_keep.unwrap();
            assert!(s.weights.iter().zip(keep).all(|(w, k)| *k || *w == 0.0));
        })
        .unwrap();
        assert_eq!(steps, 40);
        check_terminal(&res, 0.6);
        assert_eq!(res.initial_mask, res.final_mask);
    }

    #[test]
    fn imp_zero_target_is_dense_training() {
        let (m, ds) = setup();
        let c = cfg(ScheduleKind::Imp, 0.0);
        let res = run_imp(&m, &ds, &c).unwrap();
        let (dense, _) = train_dense(&m, &ds, &c.train_options()).unwrap();
        assert_eq!(res.final_model, dense);
    }

    #[test]
    fn imp_iterations_nest() {
        let (m, ds) = setup();
        assert_eq!(imp_iteration_sparsities(0.75, 2), vec![0.5, 0.75]);
        let c = ScheduleConfig {
            imp_iterations: 2,
            ..cfg(ScheduleKind::Imp, 0.75)
        };
        let res = run_imp(&m, &ds, &c).unwrap();
        let first = res.initial_mask.flat_keep();
        let last = res.final_mask.flat_keep();
        assert!(first.iter().zip(&last).all(|(a, b)| *a || !*b));
        let d = m.store().prunable_len();
        assert_eq!(res.initial_mask.zero_count(), prune_count(0.5, d));
        check_terminal(&res, 0.75);
        assert_eq!(res.loss_curve.len(), 80);
    }

    #[test]
    fn parp_zero_lr_keeps_mask() {
        let (m, ds) = setup();
        let c = ScheduleConfig {
            learning_rate: 0.0,
            ..cfg(ScheduleKind::Parp, 0.5)
        };
        let res = run_parp(&m, &ds, &c).unwrap();
        assert_eq!(res.final_mask, res.initial_mask);
        assert_eq!(res.mask_overlap_m0_md, 1.0);
    }

    #[test]
    fn parp_regrows_then_reprunes() {
        let (m, ds) = setup();
        let c = ScheduleConfig {
            n_updates: Some(10),
            ..cfg(ScheduleKind::Parp, 0.7)
        };
        let res = run_parp(&m, &ds, &c).unwrap();
        check_terminal(&res, 0.7);
        // initial + events at 10, 20, 30 + terminal
        let steps: Vec<_> = res.events.iter().map(|e| e.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 30, 40]);
        assert!(res.mask_overlap_m0_md > 0.0 && res.mask_overlap_m0_md <= 1.0);
    }

    #[test]
    fn parp_long_period_has_single_terminal_prune() {
        let (m, ds) = setup();
        let c = ScheduleConfig {
            n_updates: Some(1000),
            ..cfg(ScheduleKind::Parp, 0.5)
        };
        let res = run_parp(&m, &ds, &c).unwrap();
        assert_eq!(res.events.len(), 2);
        check_terminal(&res, 0.5);
    }

    #[test]
    fn before_update_timing_shifts_events() {
        let (m, ds) = setup();
        let c = ScheduleConfig {
            n_updates: Some(10),
            reprune_timing: RepruneTiming::BeforeUpdate,
            ..cfg(ScheduleKind::Parp, 0.5)
        };
        let res = run_parp(&m, &ds, &c).unwrap();
        let steps: Vec<_> = res.events.iter().map(|e| e.step).collect();
        assert_eq!(steps, vec![0, 9, 19, 29, 39, 40]);
    }

    #[test]
    fn parp_p_with_equal_start_matches_parp() {
        let (m, ds) = setup();
        let parp = run_parp(&m, &ds, &cfg(ScheduleKind::Parp, 0.6)).unwrap();
        let c = ScheduleConfig {
            parp_p_start: Some(0.6),
            ..cfg(ScheduleKind::ParpP, 0.6)
        };
        let pp = run_parp_p(&m, &ds, &c).unwrap();
        assert_eq!(parp.final_model, pp.final_model);
        assert_eq!(parp.final_mask, pp.final_mask);
        assert_eq!(parp.loss_curve, pp.loss_curve);
    }

    #[test]
    fn parp_p_events_follow_ramp() {
        let (m, ds) = setup();
        let c = ScheduleConfig {
            n_updates: Some(5),
            parp_p_start: Some(0.4),
            ..cfg(ScheduleKind::ParpP, 0.8)
        };
        let res = run_parp_p(&m, &ds, &c).unwrap();
        let sp: Vec<f64> = res.events.iter().map(|e| e.sparsity).collect();
        assert!((sp[0] - 0.4).abs() < 1e-12);
        assert!((sp[1] - 0.5).abs() < 1e-12);
        assert!((sp[4] - 0.8).abs() < 1e-12);
        assert_eq!(*sp.last().unwrap(), 0.8);
        let d = m.store().prunable_len();
        assert_eq!(res.initial_mask.zero_count(), prune_count(0.4, d));
        check_terminal(&res, 0.8);
    }

    #[test]
    fn deterministic_runs() {
        let (m, ds) = setup();
        let c = cfg(ScheduleKind::Parp, 0.5);
        let a = run_parp(&m, &ds, &c).unwrap();
        let b = run_parp(&m, &ds, &c).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.final_mask, b.final_mask);
    }

    #[test]
    fn kd_zero_matches_plain_and_self_distill_is_zero() {
        let (m, ds) = setup();
        assert!(attach_kd(&cfg(ScheduleKind::Parp, 0.5), &m).unwrap().is_none());
        let neg = ScheduleConfig {
            kd_weight: -1.0,
            ..cfg(ScheduleKind::Parp, 0.5)
        };
        assert!(attach_kd(&neg, &m).is_err());

        let kd = attach_kd(
            &ScheduleConfig {
                kd_weight: 1.0,
                ..cfg(ScheduleKind::Parp, 0.5)
            },
            &m,
        )
        .unwrap()
        .unwrap();
        let outputs = kd.teacher_outputs(&ds.examples).unwrap();
        for (e, t) in ds.examples.iter().zip(&outputs) {
            let p = m.forward(&e.tokens).unwrap();
            assert_eq!(p.frames, t.frames);
        }
    }

    #[test]
    fn kd_changes_training() {
        let (m, ds) = setup();
        let plain = run_parp(&m, &ds, &cfg(ScheduleKind::Parp, 0.5)).unwrap();
        let with_kd = run_parp(
            &m,
            &ds,
            &ScheduleConfig {
                kd_weight: 1.0,
                ..cfg(ScheduleKind::Parp, 0.5)
            },
        )
        .unwrap();
        assert_ne!(plain.loss_curve, with_kd.loss_curve);
        check_terminal(&with_kd, 0.5);
    }

    #[test]
    fn mix_aug_with_no_unspoken_is_plain_parp() {
        let (m, ds) = setup();
        let plain = run_parp(&m, &ds, &cfg(ScheduleKind::Parp, 0.5)).unwrap();
        let mix = run_with_aug(
            &m,
            &ds,
            &[],
            &ScheduleConfig {
                aug: AugPolicy::MixAug,
                ..cfg(ScheduleKind::Parp, 0.5)
            },
        )
        .unwrap();
        assert_eq!(plain.final_model, mix.final_model);
        assert_eq!(plain.loss_curve, mix.loss_curve);
    }

    #[test]
    fn seq_aug_runs_two_phases() {
        let (m, ds) = setup();
        let unspoken = gen_dataset(&ds.task, 77, 16).unwrap().inputs();
        let c = ScheduleConfig {
            aug: AugPolicy::SeqAug,
            ..cfg(ScheduleKind::Parp, 0.5)
        };
        let res = run_with_aug(&m, &ds, &unspoken, &c).unwrap();
        assert_eq!(res.loss_curve.len(), 80);
        check_terminal(&res, 0.5);
        assert!(run_with_aug(&m, &ds, &[], &c).is_err());
    }

    #[test]
    fn random_init_keeps_prunable_flags() {
        let (m, ds) = setup();
        let mut store = m.store().clone();
        store.set_prunable("embed.weight", false).unwrap();
        let m = m.with_store(store).unwrap();
        let c = ScheduleConfig {
            init: InitWeights::Random,
            ..cfg(ScheduleKind::Parp, 0.5)
        };
        let res = run_parp(&m, &ds, &c).unwrap();
        assert!(res.final_mask.keep("embed.weight").is_none());
        check_terminal(&res, 0.5);
    }

    #[test]
    fn result_directory_layout() {
        let (m, ds) = setup();
        let res = run_parp(&m, &ds, &cfg(ScheduleKind::Parp, 0.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        res.save_dir(dir.path()).unwrap();
        let loaded = PruneMask::load(dir.path().join("mask.prnt")).unwrap();
        assert_eq!(loaded, res.final_mask);
        let w = ParamStore::load_checkpoint(dir.path().join("weights.prnt")).unwrap();
        assert_eq!(&w, res.final_weights());
        let csv = fs::read_to_string(dir.path().join("loss_curve.csv")).unwrap();
        assert!(csv.starts_with("step,loss\n0,"));
        assert_eq!(csv.lines().count(), 41);
    }
}
