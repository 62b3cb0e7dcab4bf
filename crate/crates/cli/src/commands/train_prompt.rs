use std::path::Path;

use memprobe_core::checkpoint::{load_model, save_soft_prompt};
use memprobe_core::soft_prompt::train_soft_prompt;
use memprobe_core::SoftPrompt;

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;

use super::{build_split, checkpoint_path, corpus_path, load_corpus, write_loss_curve};

pub fn run(
    config: &RunConfig,
    out: &Path,
    checkpoint: Option<&Path>,
    corpus: Option<&Path>,
) -> anyhow::Result<()> {
    let dir = out.join("prompt");
    std::fs::create_dir_all(&dir)?;
    let (model, tok) = load_model(checkpoint_path(out, checkpoint))?;
    let records = load_corpus(&corpus_path(out, corpus))?;
    let (train_pool, _eval) = build_split(config, &records)?;

    let method = config.sp_method();
    let hp = config.sp_hyperparams();
    let init_seed = memprobe_core::rng::derive_seed(config.master_seed, "prompt-init");
    let mut manifest = ManifestBuilder::start("train-prompt", config.hash(), config.master_seed);
    manifest.seed("prompt-init", init_seed);
    manifest.seed("train-prompt", hp.seed);

    let mut sp = SoftPrompt::init(method, config.soft_prompt.length, model.config(), init_seed)?;
    let report = train_soft_prompt(&model, &mut sp, &train_pool, &tok, &hp)?;
    if report.skipped > 0 {
        eprintln!("{} training examples exceeded capacity and were skipped", report.skipped);
    }

    let artifact = dir.join(format!("{}-L{}", method.name(), config.soft_prompt.length));
    save_soft_prompt(&artifact, &sp)?;
    manifest.output(&artifact);
    let curve_file = dir.join("loss_curve.csv");
    write_loss_curve(&curve_file, &report.loss_curve)?;
    manifest.output(&curve_file);
    manifest.finish(&dir)?;

    println!(
        "trained {} ({} params) for {} steps on {} examples; final loss {:.4}",
        method.name(),
        sp.param_count(),
        hp.steps,
        train_pool.len(),
        report.loss_curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
