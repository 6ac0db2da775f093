use std::path::PathBuf;

use clap::Args;
use prunekit::schedules::train_dense;
use prunekit::toy::{dataset_loss, gen_dataset, ModelDims, TaskConfig, ToyModel, TrainOptions};

use super::{create_dir, out_dir, CliError};

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    n_pairs: usize,
    #[arg(long, default_value_t = TrainOptions::default().steps)]
    steps: usize,
    #[arg(long, default_value_t = TrainOptions::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainOptions::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = ModelDims::default().hidden)]
    hidden: usize,
    /// Keep the embedding table out of the prunable set.
    #[arg(long)]
    no_prune_embedding: bool,
    /// Directory for `model.prnt` and `dataset.json`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn run(a: TrainArgs) -> Result<(), CliError> {
    let task = TaskConfig::default();
    let dims = ModelDims {
        hidden: a.hidden,
        ..ModelDims::default()
    };
    let opt = TrainOptions {
        learning_rate: a.learning_rate,
        steps: a.steps,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    opt.validate().map_err(|e| super::usage(e.to_string()))?;
    let data = gen_dataset(&task, a.seed, a.n_pairs)?;
    let init = ToyModel::init(dims, a.seed, !a.no_prune_embedding)?;
    let initial_loss = dataset_loss(&init, &data.examples)?;
    let (model, _) = train_dense(&init, &data, &opt)?;
    let dir = out_dir(a.out_dir);
    create_dir(&dir)?;
    model.store().save_checkpoint(dir.join("model.prnt"))?;
    data.save_json(dir.join("dataset.json"))?;
    let summary = serde_json::json!({
        "initial_loss": initial_loss,
        "final_loss": dataset_loss(&model, &data.examples)?,
        "prunable_weights": model.store().prunable_len(),
    });
    super::emit(None, &format!("{summary}\n"))?;
    Ok(())
}
