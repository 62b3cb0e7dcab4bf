pub mod audit_cmd;
pub mod gen_corpus;
pub mod report;
pub mod train_lm;
pub mod train_prompt;

use std::path::{Path, PathBuf};

use anyhow::Context;

use memprobe_core::corpus::{read_jsonl, Record, Tokenizer};
use memprobe_core::entity::{build_eval_examples, EvalExample};
use memprobe_core::rng::derive_seed;

use crate::config::RunConfig;

pub fn corpus_path(out: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join("corpus").join("corpus.jsonl"))
}

pub fn checkpoint_path(out: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join("lm").join("checkpoint"))
}

pub fn load_corpus(path: &Path) -> anyhow::Result<Vec<Record>> {
    read_jsonl(path).with_context(|| format!("cannot load corpus from {}", path.display()))
}

/// Examples for the configured target attribute, split into train pool and
/// eval set under the derived split seed.
pub fn build_split(
    config: &RunConfig,
    corpus: &[Record],
) -> anyhow::Result<(Vec<EvalExample>, Vec<EvalExample>)> {
    let report = build_eval_examples(corpus, &config.experiment.target_attr, config.ident_size())?;
    if report.examples.is_empty() {
        anyhow::bail!(
            "no usable evaluation examples (excluded: {}, without identifying sets: {})",
            report.skipped_exclusion,
            report.skipped_no_ident
        );
    }
    let (train, eval) = memprobe_core::audit::split_examples(
        &report.examples,
        config.experiment.eval_fraction,
        derive_seed(config.master_seed, "train-eval-split"),
    )?;
    Ok((train, eval))
}

pub fn write_loss_curve(path: &Path, losses: &[f64]) -> anyhow::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "step,loss")?;
    for (i, loss) in losses.iter().enumerate() {
        writeln!(f, "{i},{loss}")?;
    }
    Ok(())
}

pub fn default_tokenizer() -> Tokenizer {
    Tokenizer::default_charset()
}
