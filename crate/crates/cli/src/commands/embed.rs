//! `quipgen embed`: build the retrieval store for a dataset.

use quipgen_core::retrieval::{embed_and_index, store_path_for};

use super::{load_input_dataset, sibling, write_echo};
use crate::config::PipelineConfig;
use crate::exit::{Classify, CmdResult, Failure};
use crate::stack::Stack;

pub fn run(config: &PipelineConfig, command: &str) -> CmdResult {
    let dataset = load_input_dataset(&config.paths.dataset)?;
    let stack = Stack::build(config).or_config()?;
    let (store, warnings) = embed_and_index(&dataset, stack.embedder.as_ref());
    let path = store_path_for(&config.paths.dataset);
    store.save(&path).or_pipeline()?;
    write_echo(&sibling(&path, ".run.toml"), command, config)?;
    println!(
        "embedded {} of {} videos -> {}",
        store.len(),
        dataset.len(),
        path.display()
    );
    if warnings.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(warnings.join("; ")))
    }
}
