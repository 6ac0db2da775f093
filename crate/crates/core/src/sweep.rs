//! Sparsity sweeps on the toy task.
//!
//! Every `(schedule, sparsity, seed)` job prunes the dense baseline for its
//! seed, then reports final loss, held-out toy WER and mask overlap. Jobs run
//! on a rayon pool; rows are keyed and sorted, so the CSV does not depend on
//! the degree of parallelism. Wall-clock durations go to a separate file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::{run_schedule, ScheduleConfig, ScheduleKind, train_dense};
use crate::toy::{dataset_loss, gen_dataset, toy_wer, ModelDims, SynthDataset, TaskConfig, ToyModel, TrainOptions};

pub const ACOUSTIC_GRID: [f64; 13] = [
    0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99,
];
pub const VOCODER_GRID: [f64; 11] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.88];

/// Held-out inputs are drawn from `seed ^ HELDOUT_SALT` so they never share a
/// generator stream with the training pairs.
const HELDOUT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    Acoustic,
    Vocoder,
}

impl GridPreset {
    pub fn values(self) -> Vec<f64> {
        match self {
            GridPreset::Acoustic => ACOUSTIC_GRID.to_vec(),
            GridPreset::Vocoder => VOCODER_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub schedules: Vec<ScheduleKind>,
    pub seeds: Vec<u64>,
    pub vocab: usize,
    pub hidden: usize,
    pub frame_dim: usize,
    pub upsample: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub codebook_seed: u64,
    pub n_pairs: usize,
    pub n_heldout: usize,
    pub prune_embedding: bool,
    pub baseline_steps: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_updates: Option<usize>,
    pub parp_p_events: usize,
    pub kd_weight: f64,
    pub parallelism: usize,
    pub save_artifacts: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let task = TaskConfig::default();
        let dims = ModelDims::default();
        let train = TrainOptions::default();
        Self {
            grid: ACOUSTIC_GRID.to_vec(),
            schedules: vec![ScheduleKind::Imp, ScheduleKind::Parp, ScheduleKind::ParpP],
            seeds: vec![0, 1, 2],
            vocab: task.vocab,
            hidden: dims.hidden,
            frame_dim: task.frame_dim,
            upsample: task.upsample,
            min_len: task.min_len,
            max_len: task.max_len,
            codebook_seed: task.codebook_seed,
            n_pairs: 512,
            n_heldout: 128,
            prune_embedding: true,
            baseline_steps: train.steps,
            steps: train.steps,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            n_updates: None,
            parp_p_events: 5,
            kd_weight: 0.0,
            parallelism: 1,
            save_artifacts: true,
            out_dir: None,
        }
    }
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn task(&self) -> TaskConfig {
        TaskConfig {
            vocab: self.vocab,
            frame_dim: self.frame_dim,
            upsample: self.upsample,
            min_len: self.min_len,
            max_len: self.max_len,
            codebook_seed: self.codebook_seed,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab: self.vocab,
            hidden: self.hidden,
            frame_dim: self.frame_dim,
            upsample: self.upsample,
        }
    }

    pub fn baseline_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            steps: self.baseline_steps,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn schedule_config(&self, kind: ScheduleKind, sparsity: f64, seed: u64) -> ScheduleConfig {
        ScheduleConfig {
            kind,
            target_sparsity: sparsity,
            n_updates: self.n_updates,
            parp_p_events: self.parp_p_events,
            kd_weight: self.kd_weight,
            learning_rate: self.learning_rate,
            steps: self.steps,
            batch_size: self.batch_size,
            seed,
            ..ScheduleConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sparsity grid is empty".into()));
        }
        if let Some(s) = self.grid.iter().find(|s| !(0.0..1.0).contains(*s)) {
            return Err(Error::SparsityRange(*s));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sparsity grid must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.schedules.is_empty() {
            return Err(Error::Config("schedule list is empty".into()));
        }
        if self.n_pairs == 0 || self.n_heldout == 0 {
            return Err(Error::Config("n_pairs and n_heldout must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        self.task().validate()?;
        self.baseline_options(0).validate()?;
        for &kind in &self.schedules {
            self.schedule_config(kind, self.grid[0], 0).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub schedule: ScheduleKind,
    pub sparsity: f64,
    pub seed: u64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
    pub final_loss: Option<f64>,
    pub toy_wer: Option<f64>,
    pub mask_overlap_m0_md: Option<f64>,
    pub duration_s: f64,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub toy_wer: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by `(schedule, sparsity, seed)`.
    pub rows: Vec<SweepRow>,
    /// Sorted by seed.
    pub baselines: Vec<BaselineRow>,
}

pub const RESULTS_HEADER: [&str; 7] = [
    "schedule",
    "sparsity",
    "seed",
    "status",
    "final_loss",
    "toy_wer",
    "mask_overlap_m0_mD",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepOutcome {
    /// Per-run results; byte-identical across reruns of the same config.
    pub fn results_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RESULTS_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.schedule.name().to_string(),
                r.sparsity.to_string(),
                r.seed.to_string(),
                r.status.clone(),
                opt(r.final_loss),
                opt(r.toy_wer),
                opt(r.mask_overlap_m0_md),
            ])
            .map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn baselines_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["seed", "initial_loss", "final_loss", "toy_wer"])
            .map_err(csv_err)?;
        for b in &self.baselines {
            w.write_record([
                b.seed.to_string(),
                b.initial_loss.to_string(),
                b.final_loss.to_string(),
                b.toy_wer.to_string(),
            ])
            .map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn timings_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["schedule", "sparsity", "seed", "duration_s"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.schedule.name().to_string(),
                r.sparsity.to_string(),
                r.seed.to_string(),
                format!("{:.3}", r.duration_s),
            ])
            .map_err(csv_err)?;
        }
        into_string(w)
    }

    /// Writes `results.csv`, `baselines.csv` and `timings.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("results.csv", self.results_csv()?),
            ("baselines.csv", self.baselines_csv()?),
            ("timings.csv", self.timings_csv()?),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn row(&self, kind: ScheduleKind, sparsity: f64, seed: u64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.schedule == kind && r.sparsity == sparsity && r.seed == seed)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("CSV: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Training data, held-out inputs and the trained dense model for one seed.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub seed: u64,
    pub train: SynthDataset,
    pub heldout: SynthDataset,
    pub dense: ToyModel,
    pub baseline: BaselineRow,
}

pub fn prepare_seed(cfg: &SweepConfig, seed: u64) -> Result<SeedContext> {
    let task = cfg.task();
    let train = gen_dataset(&task, seed, cfg.n_pairs)?;
    let heldout = gen_dataset(&task, seed ^ HELDOUT_SALT, cfg.n_heldout)?;
    let init = ToyModel::init(cfg.dims(), seed, cfg.prune_embedding)?;
    let initial_loss = dataset_loss(&init, &train.examples)?;
    let (dense, _) = train_dense(&init, &train, &cfg.baseline_options(seed))?;
    let baseline = BaselineRow {
        seed,
        initial_loss,
        final_loss: dataset_loss(&dense, &train.examples)?,
        toy_wer: toy_wer(&dense, &train.codebook, &heldout.inputs())?,
    };
    Ok(SeedContext {
        seed,
        train,
        heldout,
        dense,
        baseline,
    })
}

fn run_dir(root: &Path, kind: ScheduleKind, sparsity: f64, seed: u64) -> PathBuf {
    root.join("runs")
        .join(format!("{}_s{sparsity}_seed{seed}", kind.name()))
}

fn run_job(
    cfg: &SweepConfig,
    ctx: &SeedContext,
    kind: ScheduleKind,
    sparsity: f64,
) -> SweepRow {
    let started = Instant::now();
    let outcome = (|| -> Result<_> {
        let sc = cfg.schedule_config(kind, sparsity, ctx.seed);
        let res = run_schedule(&ctx.dense, &ctx.train, &[], &sc)?;
        let wer = toy_wer(&res.final_model, &ctx.train.codebook, &ctx.heldout.inputs())?;
        if cfg.save_artifacts {
            if let Some(root) = &cfg.out_dir {
                res.save_dir(run_dir(root, kind, sparsity, ctx.seed))?;
            }
        }
        Ok((res.final_loss, wer, res.mask_overlap_m0_md))
    })();
    let (status, loss, wer, overlap) = match outcome {
        Ok((l, w, o)) => ("ok".to_string(), Some(l), Some(w), Some(o)),
        Err(e) => (format!("failed: {e}"), None, None, None),
    };
    SweepRow {
        schedule: kind,
        sparsity,
        seed: ctx.seed,
        status,
        final_loss: loss,
        toy_wer: wer,
        mask_overlap_m0_md: overlap,
        duration_s: started.elapsed().as_secs_f64(),
    }
}

/// Runs the full cartesian product. A failing job becomes a `failed` row; a
/// failing dense baseline fails the whole sweep, since every job needs it.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;

        let mut seeds = cfg.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        let contexts: BTreeMap<u64, SeedContext> = seeds
            .par_iter()
            .map(|&s| prepare_seed(cfg, s).map(|c| (s, c)))
            .collect::<Result<_>>()?;

        let mut kinds = cfg.schedules.clone();
        kinds.sort_unstable();
        kinds.dedup();
        let jobs: Vec<(ScheduleKind, f64, u64)> = kinds
            .iter()
            .flat_map(|&k| {
                let seeds = &seeds;
                cfg.grid
                    .iter()
                    .flat_map(move |&s| seeds.iter().map(move |&seed| (k, s, seed)))
            })
            .collect();
        let rows = jobs
            .par_iter()
            .map(|&(k, s, seed)| run_job(cfg, &contexts[&seed], k, s))
            .collect();
        Ok(SweepOutcome {
            rows,
            baselines: contexts.into_values().map(|c| c.baseline).collect(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            grid: vec![0.0, 0.5],
            schedules: vec![ScheduleKind::Parp, ScheduleKind::Imp],
            seeds: vec![3],
            vocab: 5,
            hidden: 6,
            frame_dim: 3,
            min_len: 2,
            max_len: 4,
            n_pairs: 16,
            n_heldout: 8,
            baseline_steps: 30,
            steps: 20,
            learning_rate: 0.5,
            batch_size: 4,
            save_artifacts: false,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn presets() {
        assert_eq!(GridPreset::Acoustic.values().len(), 13);
        assert_eq!(*GridPreset::Vocoder.values().last().unwrap(), 0.88);
        assert!(SweepConfig::default().validate().is_ok());
    }

    #[test]
    fn grid_validation() {
        for grid in [vec![0.5, 0.5], vec![0.6, 0.5], vec![1.0], vec![]] {
            assert!(SweepConfig { grid, ..small() }.validate().is_err());
        }
        assert!(SweepConfig {
            seeds: vec![],
            ..small()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn cartesian_rows_sorted() {
        let out = run_sweep(&small()).unwrap();
        let keys: Vec<_> = out
            .rows
            .iter()
            .map(|r| (r.schedule, r.sparsity, r.seed))
            .collect();
        assert_eq!(
            keys,
            vec![
                (ScheduleKind::Imp, 0.0, 3),
                (ScheduleKind::Imp, 0.5, 3),
                (ScheduleKind::Parp, 0.0, 3),
                (ScheduleKind::Parp, 0.5, 3),
            ]
        );
        assert!(out.rows.iter().all(SweepRow::ok));
        let csv = out.results_csv().unwrap();
        assert!(csv.starts_with("schedule,sparsity,seed,status,final_loss,toy_wer,mask_overlap_m0_mD\nIMP,0,3,ok,"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = small();
        let back: SweepConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let partial: SweepConfig = serde_json::from_str(r#"{"seeds": [4]}"#).unwrap();
        assert_eq!(partial.seeds, vec![4]);
        assert_eq!(partial.grid, ACOUSTIC_GRID.to_vec());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"sedes": [4]}"#).is_err());
    }

    #[test]
    fn failed_job_recorded() {
        let ctx = prepare_seed(&small(), 1).unwrap();
        let mut cfg = small();
        cfg.parp_p_events = 0;
        let row = run_job(&cfg, &ctx, ScheduleKind::ParpP, 0.5);
        assert!(row.status.starts_with("failed: "));
        assert_eq!(row.final_loss, None);
    }
}
