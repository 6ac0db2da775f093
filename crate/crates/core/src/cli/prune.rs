use anyhow::Context;
use prunekit::{apply_mask, ump, ParamStore};

use super::{create_dir, out_dir, CliError};
use crate::PruneArgs;

pub fn run(args: PruneArgs) -> Result<(), CliError> {
    let store = ParamStore::load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let mask = ump(&store, args.sparsity)?;
    let pruned = apply_mask(&store, &mask)?;
    let dir = out_dir(args.out_dir);
    create_dir(&dir)?;
    mask.save(dir.join("mask.prnt"))?;
    pruned.save_checkpoint(dir.join("pruned.prnt"))?;
    let report = serde_json::to_string_pretty(&mask.report()).context("encoding report")?;
    super::emit(None, &format!("{report}\n"))?;
    Ok(())
}
