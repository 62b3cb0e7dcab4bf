use memprobe_core::audit::{
    duplication_experiment, extraction_rate, fabricated_experiment, split_examples,
    sweep_prefix_length, ExperimentContext, GenerationConfig,
};
use memprobe_core::corpus::{
    encode_record, generate_corpus, CorpusSpec, DuplicationDirective, PoolPartition, PoolSizes,
};
use memprobe_core::entity::build_eval_examples;
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::soft_prompt::{SoftPromptHyperparams, SoftPromptMethod};
use memprobe_core::{CausalLM, ModelConfig, PromptInjection, Record, Tokenizer};

fn small_corpus() -> Vec<Record> {
    generate_corpus(&CorpusSpec {
        n_records: 40,
        pools: PoolSizes {
            senders: 30,
            recipients: 30,
            dates: 50,
        },
        duplication_plan: vec![
            DuplicationDirective {
                sender: "dupa@x.com".into(),
                recipient: "dupb@y.org".into(),
                count: 6,
            },
            DuplicationDirective {
                sender: "dupc@x.com".into(),
                recipient: "dupd@y.org".into(),
                count: 3,
            },
        ],
        seed: 5,
        partition: PoolPartition::Full,
    })
    .unwrap()
}

fn quick_model(corpus: &[Record], tok: &Tokenizer) -> CausalLM {
    let docs: Vec<Vec<u32>> = corpus.iter().map(|r| encode_record(tok, r).unwrap()).collect();
    let mut model = CausalLM::new(ModelConfig {
        vocab_size: tok.vocab_size(),
        d_model: 32,
        n_layers: 1,
        n_heads: 2,
        d_ff: 64,
        max_seq_len: 192,
        seed: 3,
    })
    .unwrap();
    train_lm(
        &mut model,
        &docs,
        tok.bos_id(),
        &LmHyperparams {
            epochs: 6,
            lr: 2e-3,
            window_len: 192,
            batch_size: 8,
            seed: 1,
            target_loss: None,
        },
    )
    .unwrap();
    model
}

fn ctx<'a>(model: &'a CausalLM, tok: &'a Tokenizer) -> ExperimentContext<'a> {
    ExperimentContext {
        model,
        tok,
        gen: GenerationConfig { max_new: 16 },
        sp_hp: SoftPromptHyperparams {
            lr: 1e-2,
            steps: 8,
            batch_size: 4,
            seed: 0,
        },
        config_fingerprint: 0xabc,
    }
}

#[test]
fn reports_are_deterministic_and_self_consistent() {
    let tok = Tokenizer::default_charset();
    let corpus = small_corpus();
    let model = quick_model(&corpus, &tok);
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;

    let a = extraction_rate(
        &model,
        &tok,
        &PromptInjection::None,
        &examples,
        GenerationConfig { max_new: 16 },
        "det",
        7,
    )
    .unwrap();
    let b = extraction_rate(
        &model,
        &tok,
        &PromptInjection::None,
        &examples,
        GenerationConfig { max_new: 16 },
        "det",
        7,
    )
    .unwrap();
    assert!(a.is_self_consistent());
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn split_is_deterministic_and_partitions() {
    let corpus = small_corpus();
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let (train_a, eval_a) = split_examples(&examples, 0.25, 9).unwrap();
    let (train_b, eval_b) = split_examples(&examples, 0.25, 9).unwrap();
    assert_eq!(train_a, train_b);
    assert_eq!(eval_a, eval_b);
    assert_eq!(train_a.len() + eval_a.len(), examples.len());
    // No overlap between the two sides.
    for e in &eval_a {
        assert!(!train_a.iter().any(|t| t.source_record_id == e.source_record_id));
    }
    assert!(split_examples(&examples, 0.0, 1).is_err());
    assert!(split_examples(&examples, 1.5, 1).is_err());
}

#[test]
fn zero_length_sweep_rows_equal_textual_baseline_exactly() {
    let tok = Tokenizer::default_charset();
    let corpus = small_corpus();
    let model = quick_model(&corpus, &tok);
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let (train, eval) = split_examples(&examples, 0.3, 2).unwrap();

    let c = ctx(&model, &tok);
    let series =
        sweep_prefix_length(&c, SoftPromptMethod::PrefixTuning, &[0, 1], &train, &eval, &[11, 12])
            .unwrap();
    assert!(series.is_self_consistent());

    let baseline = extraction_rate(
        &model,
        &tok,
        &PromptInjection::None,
        &eval,
        c.gen,
        "baseline",
        c.config_fingerprint,
    )
    .unwrap();
    for row in series.rows.iter().filter(|r| r.prefix_length == Some(0)) {
        assert_eq!(row.rate, baseline.extraction_rate);
        assert_eq!(row.hits, baseline.n_hits);
    }
    // Two seeds per length, summaries grouped by condition.
    assert_eq!(series.rows.len(), 4);
    assert_eq!(series.summaries.len(), 2);
}

#[test]
fn duplication_bins_recompute_from_raw_rows() {
    let tok = Tokenizer::default_charset();
    let corpus = small_corpus();
    let model = quick_model(&corpus, &tok);
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let (train, eval) = split_examples(&examples, 0.5, 3).unwrap();

    let c = ctx(&model, &tok);
    let outcome = duplication_experiment(
        &c,
        &corpus,
        SoftPromptMethod::PrefixTuning,
        1,
        &train,
        &eval,
        &[21, 22],
    )
    .unwrap();
    assert!(outcome.series.is_self_consistent());
    assert_eq!(outcome.per_seed_spearman.len(), 2);
    assert!(outcome.series.metrics.contains_key("spearman_mean"));

    // Oracle: recompute each row's per-bin rate from its stored outcomes.
    for (row, report) in outcome.series.rows.iter().zip(&outcome.series.reports) {
        let hits = report.outcomes.iter().filter(|o| o.hit).count();
        assert_eq!(row.hits, hits);
        assert_eq!(row.n_examples, report.outcomes.len());
        assert!(row.dup_bin.is_some());
    }
    // Bin mean rates recompute from rows.
    for (&bin, &mean_rate) in &outcome.bin_mean_rates {
        let rates: Vec<f64> = outcome
            .series
            .rows
            .iter()
            .filter(|r| r.dup_bin == Some(bin))
            .map(|r| r.rate)
            .collect();
        let recomputed = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!((mean_rate - recomputed).abs() < 1e-12);
    }
}

#[test]
fn fabricated_volumes_are_validated() {
    let tok = Tokenizer::default_charset();
    let corpus = small_corpus();
    let model = quick_model(&corpus, &tok);
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let (train, eval) = split_examples(&examples, 0.3, 4).unwrap();
    let c = ctx(&model, &tok);
    let err = fabricated_experiment(
        &c,
        SoftPromptMethod::PrefixTuning,
        1,
        &train,
        &eval,
        &[10_000],
        &[1],
    );
    assert!(err.is_err());
}
