use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use prunekit::schedules::ScheduleKind;
use prunekit::sweep::{run_sweep, GridPreset, SweepConfig};

use super::{out_dir, usage, CliError};

/// Every field of the JSON config can be overridden by the flag of the same name.
#[derive(Args)]
pub struct SweepArgs {
    /// Flat JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the grid with a preset.
    #[arg(long, value_enum, conflicts_with = "grid")]
    grid_preset: Option<Preset>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    schedules: Option<Vec<ScheduleKind>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    frame_dim: Option<usize>,
    #[arg(long)]
    upsample: Option<usize>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    codebook_seed: Option<u64>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    n_heldout: Option<usize>,
    #[arg(long)]
    prune_embedding: Option<bool>,
    #[arg(long)]
    baseline_steps: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    n_updates: Option<usize>,
    #[arg(long)]
    parp_p_events: Option<usize>,
    #[arg(long)]
    kd_weight: Option<f64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    save_artifacts: Option<bool>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Preset {
    Acoustic,
    Vocoder,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

fn resolve(a: SweepArgs) -> Result<SweepConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => SweepConfig::default(),
    };
    if let Some(p) = a.grid_preset {
        cfg.grid = match p {
            Preset::Acoustic => GridPreset::Acoustic,
            Preset::Vocoder => GridPreset::Vocoder,
        }
        .values();
    }
    overlay!(
        cfg, a, grid, schedules, seeds, vocab, hidden, frame_dim, upsample, min_len, max_len,
        codebook_seed, n_pairs, n_heldout, prune_embedding, baseline_steps, steps,
        learning_rate, batch_size, parp_p_events, kd_weight, parallelism, save_artifacts,
    );
    if a.n_updates.is_some() {
        cfg.n_updates = a.n_updates;
    }
    let dir = match (a.out_dir, cfg.out_dir.take()) {
        (Some(flag), _) => flag,
        (None, Some(from_config)) => from_config,
        (None, None) => out_dir(None),
    };
    cfg.out_dir = Some(dir);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

pub fn run(a: SweepArgs) -> Result<(), CliError> {
    let cfg = resolve(a)?;
    let dir = cfg.out_dir.clone().expect("resolved");
    super::create_dir(&dir)?;
    std::fs::write(dir.join("config.json"), cfg.to_json()?)
        .with_context(|| format!("writing config into {}", dir.display()))?;
    let outcome = run_sweep(&cfg)?;
    outcome.write(&dir)?;
    let failed = outcome.rows.iter().filter(|r| !r.ok()).count();
    eprintln!(
        "{} runs ({} failed); results in {}",
        outcome.rows.len(),
        failed,
        dir.join("results.csv").display()
    );
    Ok(())
}
