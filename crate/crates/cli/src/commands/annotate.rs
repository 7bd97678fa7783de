//! `quipgen annotate`: label every comment of a dataset.

use std::path::Path;

use quipgen_core::corpus::{save_dataset, Dataset};
use quipgen_core::labeler::{annotate_dataset, audit_to_tsv};

use super::{cascade_config, label_resources, load_seed, sibling, write_echo, write_file};
use crate::config::PipelineConfig;
use crate::exit::{Classify, CmdResult};

/// Label `dataset` and write it to `output` with an audit log beside it.
pub fn annotate_and_save(
    config: &PipelineConfig,
    dataset: &Dataset,
    output: &Path,
    command: &str,
) -> CmdResult<Dataset> {
    let seed = load_seed(config)?;
    let resources = label_resources(config)?;
    let (labeled, audit) =
        annotate_dataset(dataset, seed.as_ref(), &resources, &cascade_config(config))
            .or_pipeline()?;
    save_dataset(&labeled, output).or_pipeline()?;
    write_file(
        &sibling(output, ".audit.tsv"),
        audit_to_tsv(&audit).as_bytes(),
    )?;
    write_echo(&sibling(output, ".run.toml"), command, config)?;
    Ok(labeled)
}

pub fn run(config: &PipelineConfig, input: &Path, output: &Path, command: &str) -> CmdResult {
    let dataset = super::load_input_dataset(input)?;
    let labeled = annotate_and_save(config, &dataset, output, command)?;
    let comments: usize = labeled.records().iter().map(|r| r.comments.len()).sum();
    println!(
        "annotated {comments} comments in {} videos -> {}",
        labeled.len(),
        output.display()
    );
    Ok(())
}
