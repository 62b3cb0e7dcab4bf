use std::path::Path;

use memprobe_core::audit::io::{write_series_csv, write_series_json, write_summary_csv};
use memprobe_core::audit::{
    ablation_no_memorization, compare_methods, duplication_experiment, extraction_rate,
    fabricated_experiment, sweep_prefix_length, volume_sweep, ConditionRow, ExperimentContext,
    ExperimentSeries, GenerationConfig,
};
use memprobe_core::checkpoint::{load_model, load_soft_prompt};
use memprobe_core::corpus::{generate_corpus, PoolPartition};
use memprobe_core::model::train_lm;
use memprobe_core::rng::derive_seed;
use memprobe_core::soft_prompt::{EnsemblePerplexityMode, SoftPromptMethod};
use memprobe_core::{CausalLM, SoftPrompt};

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;

use super::{build_split, checkpoint_path, corpus_path, load_corpus};

pub fn run(
    config: &RunConfig,
    out: &Path,
    checkpoint: Option<&Path>,
    corpus: Option<&Path>,
    prompt: Option<&Path>,
) -> anyhow::Result<()> {
    let kind = config.experiment.kind.as_str();
    let dir = out.join("audit").join(kind);
    std::fs::create_dir_all(&dir)?;

    let (model, tok) = load_model(checkpoint_path(out, checkpoint))?;
    let records = load_corpus(&corpus_path(out, corpus))?;
    let (train_pool, eval_set) = build_split(config, &records)?;

    let ctx = ExperimentContext {
        model: &model,
        tok: &tok,
        gen: GenerationConfig {
            max_new: config.experiment.max_new,
        },
        sp_hp: config.sp_hyperparams(),
        config_fingerprint: config.hash(),
    };
    let seeds = config.audit_seeds();
    let method = config.sp_method();
    let length = config.soft_prompt.length;
    let ppl_mode = if config.experiment.ensemble_ppl == "none" {
        EnsemblePerplexityMode::NoInjection
    } else {
        EnsemblePerplexityMode::OwnInjection
    };

    let mut manifest = ManifestBuilder::start("audit", config.hash(), config.master_seed);
    for (i, &s) in seeds.iter().enumerate() {
        manifest.seed(&format!("audit-seed-{i}"), s);
    }

    let series: ExperimentSeries = match kind {
        "extraction" => {
            // One evaluation: a supplied prompt artifact, a freshly trained
            // one, or the bare textual baseline at length 0.
            let inj = match prompt {
                Some(p) => load_soft_prompt(p)?.materialize(),
                None => {
                    let mut sp = SoftPrompt::init(
                        method,
                        length,
                        model.config(),
                        derive_seed(config.master_seed, "prompt-init"),
                    )?;
                    if length > 0 {
                        memprobe_core::soft_prompt::train_soft_prompt(
                            &model,
                            &mut sp,
                            &train_pool,
                            &tok,
                            &ctx.sp_hp,
                        )?;
                    }
                    sp.materialize()
                }
            };
            let report = extraction_rate(
                &model,
                &tok,
                &inj,
                &eval_set,
                ctx.gen,
                "extraction",
                ctx.config_fingerprint,
            )?;
            let mut series = ExperimentSeries {
                experiment: "extraction".into(),
                ..Default::default()
            };
            let row = ConditionRow {
                experiment: "extraction".into(),
                condition: format!("L={length}"),
                seed: config.master_seed,
                n_examples: report.n_examples,
                hits: report.n_hits,
                rate: report.extraction_rate,
                prefix_length: Some(length),
                method: Some(method.name().to_string()),
                volume: None,
                dup_bin: None,
            };
            series.rows.push(row);
            series.reports.push(report);
            series
        }
        "prefix-sweep" => {
            let lengths: Vec<usize> = config
                .experiment
                .lengths
                .iter()
                .copied()
                .filter(|&l| l + 2 <= model.config().max_seq_len)
                .collect();
            sweep_prefix_length(&ctx, method, &lengths, &train_pool, &eval_set, &seeds)?
        }
        "methods" => compare_methods(
            &ctx,
            &SoftPromptMethod::ALL,
            length,
            &train_pool,
            &eval_set,
            &seeds,
            ppl_mode,
        )?,
        "no-memorization" => {
            let control = control_model(config, &tok)?;
            ablation_no_memorization(
                &ctx,
                &control,
                method,
                length,
                &train_pool,
                &eval_set,
                &seeds,
            )?
        }
        "fabricated" | "volume" => {
            let volumes: Vec<usize> = config
                .experiment
                .volumes
                .iter()
                .copied()
                .filter(|&v| {
                    let fits = v <= train_pool.len();
                    if !fits {
                        eprintln!(
                            "volume {v} exceeds the training pool of {}; skipped",
                            train_pool.len()
                        );
                    }
                    fits
                })
                .collect();
            if kind == "fabricated" {
                fabricated_experiment(&ctx, method, length, &train_pool, &eval_set, &volumes, &seeds)?
            } else {
                volume_sweep(&ctx, method, length, &train_pool, &eval_set, &volumes, &seeds)?
            }
        }
        "duplication" => {
            duplication_experiment(&ctx, &records, method, length, &train_pool, &eval_set, &seeds)?
                .series
        }
        other => anyhow::bail!("unknown experiment kind {other:?}"),
    };

    if !series.is_self_consistent() {
        anyhow::bail!("internal error: report aggregates disagree with per-example rows");
    }

    let json = dir.join("report.json");
    let csv = dir.join("report.csv");
    let summary = dir.join("summary.csv");
    write_series_json(&json, &series)?;
    write_series_csv(&csv, &series)?;
    write_summary_csv(&summary, &series)?;
    manifest.output(&json);
    manifest.output(&csv);
    manifest.output(&summary);
    manifest.finish(&dir)?;

    for s in &series.summaries {
        println!(
            "{}: {} mean rate {:.4} +- {:.4} over {} seeds",
            series.experiment, s.condition, s.mean_rate, s.std_rate, s.n_seeds
        );
    }
    for (k, v) in &series.metrics {
        println!("{}: {k} = {v:.4}", series.experiment);
    }
    Ok(())
}

/// Control model for the ablation: trained on a corpus drawn from the
/// opposite entity-pool half (or freshly initialized when control_epochs
/// is zero).
fn control_model(
    config: &RunConfig,
    tok: &memprobe_core::Tokenizer,
) -> anyhow::Result<CausalLM> {
    let mut spec = config.corpus_spec(tok.vocab_size());
    spec.partition = match config.corpus.partition {
        PoolPartition::FirstHalf => PoolPartition::SecondHalf,
        PoolPartition::SecondHalf => PoolPartition::FirstHalf,
        PoolPartition::Full => anyhow::bail!(
            "the no-memorization ablation needs corpus.partition = \"first-half\" so the \
             control corpus can use the disjoint half"
        ),
    };
    spec.seed = derive_seed(config.master_seed, "control-corpus");
    spec.duplication_plan.clear();
    if let Some(n) = config.experiment.control_records {
        spec.n_records = n;
    }
    let records = generate_corpus(&spec)?;
    let docs: Vec<Vec<u32>> = records
        .iter()
        .map(|r| memprobe_core::corpus::encode_record(tok, r))
        .collect::<memprobe_core::Result<_>>()?;

    let mut model_config = config.model_config(tok.vocab_size());
    model_config.seed = derive_seed(config.master_seed, "control-model");
    let mut model = CausalLM::new(model_config)?;
    let epochs = config
        .experiment
        .control_epochs
        .unwrap_or(config.train_lm.epochs);
    if epochs > 0 {
        let mut hp = config.lm_hyperparams();
        hp.epochs = epochs;
        hp.seed = derive_seed(config.master_seed, "control-train");
        train_lm(&mut model, &docs, tok.bos_id(), &hp)?;
    }
    Ok(model)
}
