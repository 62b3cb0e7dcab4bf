use std::path::Path;

use memprobe_core::checkpoint::save_model;
use memprobe_core::corpus::encode_record;
use memprobe_core::model::train_lm;
use memprobe_core::CausalLM;

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;

use super::{corpus_path, default_tokenizer, load_corpus, write_loss_curve};

pub fn run(config: &RunConfig, out: &Path, corpus: Option<&Path>) -> anyhow::Result<()> {
    let dir = out.join("lm");
    std::fs::create_dir_all(&dir)?;
    let tok = default_tokenizer();
    let records = load_corpus(&corpus_path(out, corpus))?;
    let docs: Vec<Vec<u32>> = records
        .iter()
        .map(|r| encode_record(&tok, r))
        .collect::<memprobe_core::Result<_>>()?;

    let model_config = config.model_config(tok.vocab_size());
    let hp = config.lm_hyperparams();
    let mut manifest = ManifestBuilder::start("train-lm", config.hash(), config.master_seed);
    manifest.seed("model-init", model_config.seed);
    manifest.seed("train-lm", hp.seed);

    let mut model = CausalLM::new(model_config)?;
    let curve = train_lm(&mut model, &docs, tok.bos_id(), &hp)?;

    let ckpt = dir.join("checkpoint");
    save_model(&ckpt, &model, &tok)?;
    manifest.output(&ckpt);
    let curve_file = dir.join("loss_curve.csv");
    write_loss_curve(&curve_file, &curve.epoch_mean_loss)?;
    manifest.output(&curve_file);
    manifest.finish(&dir)?;

    println!(
        "trained {} epochs to mean loss {:.4}; fingerprint {:016x}",
        curve.epoch_mean_loss.len(),
        curve.final_loss().unwrap_or(f64::NAN),
        model.fingerprint()
    );
    Ok(())
}
