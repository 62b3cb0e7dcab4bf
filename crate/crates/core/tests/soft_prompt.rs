use memprobe_core::entity::{EvalExample, Provenance};
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::soft_prompt::{
    activation_ensemble, candidate_entity, train_soft_prompt, EnsemblePerplexityMode,
    SoftPromptHyperparams,
};
use memprobe_core::{CausalLM, ModelConfig, SoftPrompt, SoftPromptMethod, Tokenizer};

fn example(prompt: &str, entity: &str) -> EvalExample {
    EvalExample {
        prompt_text: prompt.to_string(),
        expected_entity: entity.to_string(),
        train_entity: entity.to_string(),
        target_attr: "Recipient".to_string(),
        source_record_id: 0,
        provenance: Provenance::Real,
    }
}

fn small_model(seed: u64) -> CausalLM {
    CausalLM::new(ModelConfig {
        vocab_size: 99,
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        d_ff: 64,
        max_seq_len: 96,
        seed,
    })
    .unwrap()
}

/// A model that has seen mail-shaped text, so the frozen backbone is not
/// pure noise when soft prompts train against it.
fn warmed_model(seed: u64) -> CausalLM {
    let tok = Tokenizer::default_charset();
    let mut model = small_model(seed);
    let docs: Vec<Vec<u32>> = [
        "Sender: ana@coast.com\nRecipient: bo@ferry.org\n",
        "Sender: kay@coast.com\nRecipient: gus@ferry.org\n",
        "Sender: pia@coast.com\nRecipient: wes@ferry.org\n",
    ]
    .iter()
    .map(|s| {
        let mut ids = tok.encode(s).unwrap();
        ids.push(tok.eos_id());
        ids
    })
    .collect();
    train_lm(
        &mut model,
        &docs,
        tok.bos_id(),
        &LmHyperparams {
            epochs: 60,
            lr: 3e-3,
            window_len: 96,
            batch_size: 3,
            seed: 5,
            target_loss: Some(0.2),
        },
    )
    .unwrap();
    model
}

#[test]
fn training_leaves_the_model_fingerprint_untouched() {
    let tok = Tokenizer::default_charset();
    let model = small_model(3);
    let before = model.fingerprint();
    for method in SoftPromptMethod::ALL {
        let mut sp = SoftPrompt::init(method, 3, model.config(), 7).unwrap();
        train_soft_prompt(
            &model,
            &mut sp,
            &[example("Sender: a@x\nRecipient:", "b@y")],
            &tok,
            &SoftPromptHyperparams {
                lr: 5e-3,
                steps: 5,
                batch_size: 2,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(model.fingerprint(), before);
    }
}

#[test]
fn zero_steps_returns_the_initialization() {
    let tok = Tokenizer::default_charset();
    let model = small_model(4);
    let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 4, model.config(), 11).unwrap();
    let init_fp = sp.fingerprint();
    let report = train_soft_prompt(
        &model,
        &mut sp,
        &[example("Sender: a@x\nRecipient:", "b@y")],
        &tok,
        &SoftPromptHyperparams {
            steps: 0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(sp.fingerprint(), init_fp);
    assert!(report.loss_curve.is_empty());
    assert!(sp.training_meta.is_some());
}

#[test]
fn single_example_overfits_below_point_one() {
    // Run-to-convergence oracle on a small but realistic fixture: a
    // generated corpus, a model trained into memorization, and one real
    // prompt/target example.
    use memprobe_core::corpus::{encode_record, generate_corpus, CorpusSpec, PoolPartition, PoolSizes};
    use memprobe_core::entity::build_eval_examples;

    let tok = Tokenizer::default_charset();
    let corpus = generate_corpus(&CorpusSpec {
        n_records: 12,
        pools: PoolSizes {
            senders: 10,
            recipients: 10,
            dates: 12,
        },
        duplication_plan: vec![],
        seed: 41,
        partition: PoolPartition::default(),
    })
    .unwrap();
    let docs: Vec<Vec<u32>> = corpus
        .iter()
        .map(|r| encode_record(&tok, r).unwrap())
        .collect();
    let mut model = CausalLM::new(ModelConfig {
        vocab_size: tok.vocab_size(),
        d_model: 64,
        n_layers: 2,
        n_heads: 4,
        d_ff: 256,
        max_seq_len: 192,
        seed: 8,
    })
    .unwrap();
    train_lm(
        &mut model,
        &docs,
        tok.bos_id(),
        &LmHyperparams {
            epochs: 300,
            lr: 2e-3,
            window_len: 192,
            batch_size: 4,
            seed: 5,
            target_loss: Some(0.25),
        },
    )
    .unwrap();

    let ex = build_eval_examples(&corpus, "Recipient", None)
        .unwrap()
        .examples
        .into_iter()
        .next()
        .unwrap();
    let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 5, model.config(), 2).unwrap();
    let report = train_soft_prompt(
        &model,
        &mut sp,
        std::slice::from_ref(&ex),
        &tok,
        &SoftPromptHyperparams {
            lr: 3e-2,
            steps: 500,
            batch_size: 1,
            seed: 3,
        },
    )
    .unwrap();
    let last = *report.loss_curve.last().unwrap();
    assert!(last < 0.1, "target-token loss stuck at {last}");

    // The trained prompt actually drives greedy generation to the entity.
    let mut prompt_tokens = vec![tok.bos_id()];
    prompt_tokens.extend(tok.encode(&ex.prompt_text).unwrap());
    let out = model
        .generate_greedy(&prompt_tokens, &sp.materialize(), 48, tok.eos_id())
        .unwrap();
    let text = tok.decode(&out[prompt_tokens.len()..]).unwrap();
    assert!(
        text.contains(&ex.expected_entity),
        "generated {text:?} does not contain the target"
    );
}

#[test]
fn training_is_reproducible_and_improves_all_methods() {
    let tok = Tokenizer::default_charset();
    let model = warmed_model(9);
    let examples = vec![
        example("Sender: ana@coast.com\nRecipient:", "bo@ferry.org"),
        example("Sender: kay@coast.com\nRecipient:", "gus@ferry.org"),
    ];
    for method in SoftPromptMethod::ALL {
        let run = || {
            let mut sp = SoftPrompt::init(method, 4, model.config(), 21).unwrap();
            let report = train_soft_prompt(
                &model,
                &mut sp,
                &examples,
                &tok,
                &SoftPromptHyperparams {
                    lr: 5e-3,
                    steps: 60,
                    batch_size: 2,
                    seed: 13,
                },
            )
            .unwrap();
            (sp.fingerprint(), report.loss_curve)
        };
        let (fp_a, curve_a) = run();
        let (fp_b, curve_b) = run();
        assert_eq!(fp_a, fp_b, "{method:?} not reproducible");
        assert_eq!(curve_a, curve_b);
        assert!(
            curve_a.last().unwrap() < curve_a.first().unwrap(),
            "{method:?} loss did not improve: {:?} -> {:?}",
            curve_a.first(),
            curve_a.last()
        );
    }
}

#[test]
fn oversized_examples_are_skipped_and_all_skipped_is_an_error() {
    let tok = Tokenizer::default_charset();
    let model = small_model(6); // max_seq_len 96
    let long_prompt = format!("Content: {}\nRecipient:", "x".repeat(200));
    let short = example("Sender: a@x\nRecipient:", "b@y");
    let long = example(&long_prompt, "b@y");

    let mut sp = SoftPrompt::init(SoftPromptMethod::PromptTuning, 2, model.config(), 1).unwrap();
    let report = train_soft_prompt(
        &model,
        &mut sp,
        &[short, long.clone()],
        &tok,
        &SoftPromptHyperparams {
            steps: 2,
            batch_size: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(report.skipped, 1);

    let mut sp2 = SoftPrompt::init(SoftPromptMethod::PromptTuning, 2, model.config(), 1).unwrap();
    assert!(train_soft_prompt(
        &model,
        &mut sp2,
        &[long],
        &tok,
        &SoftPromptHyperparams::default()
    )
    .is_err());
}

#[test]
fn ensemble_majority_wins_without_any_scoring() {
    let tok = Tokenizer::default_charset();
    let model = small_model(10);
    // Perplexity under these would overflow capacity: the prompt is sized
    // so that prompt + entity + L no longer fits. Agreement must therefore
    // short-circuit before any model evaluation.
    let l = model.config().max_seq_len - 2;
    let sp1 = SoftPrompt::init(SoftPromptMethod::PrefixTuning, l, model.config(), 1).unwrap();
    let sp2 = SoftPrompt::init(SoftPromptMethod::PromptTuning, l, model.config(), 2).unwrap();
    let sp3 = SoftPrompt::init(SoftPromptMethod::PTuning, l, model.config(), 3).unwrap();
    let candidates = vec![
        (&sp1, "bob@y".to_string()),
        (&sp2, "bob@y".to_string()),
        (&sp3, "carol@z".to_string()),
    ];
    let chosen = activation_ensemble(
        &model,
        &tok,
        &candidates,
        "Sender: a@x\nRecipient:",
        EnsemblePerplexityMode::OwnInjection,
    )
    .unwrap();
    assert_eq!(chosen, "bob@y");
}

#[test]
fn ensemble_single_candidate_is_returned_unchanged() {
    let tok = Tokenizer::default_charset();
    let model = small_model(11);
    let sp = SoftPrompt::init(SoftPromptMethod::PTuning, 2, model.config(), 1).unwrap();
    let candidates = vec![(&sp, "dot@lake.net".to_string())];
    let chosen = activation_ensemble(
        &model,
        &tok,
        &candidates,
        "Sender: a@x\nRecipient:",
        EnsemblePerplexityMode::OwnInjection,
    )
    .unwrap();
    assert_eq!(chosen, "dot@lake.net");
}

#[test]
fn ensemble_divergent_candidates_match_exhaustive_scoring() {
    let tok = Tokenizer::default_charset();
    let model = warmed_model(12);
    let prompt = "Sender: ana@coast.com\nRecipient:";
    let sps: Vec<SoftPrompt> = SoftPromptMethod::ALL
        .iter()
        .enumerate()
        .map(|(i, &m)| SoftPrompt::init(m, 3, model.config(), 40 + i as u64).unwrap())
        .collect();
    let entities = ["bo@ferry.org", "gus@ferry.org", "wes@ferry.org"];
    let candidates: Vec<(&SoftPrompt, String)> = sps
        .iter()
        .zip(entities)
        .map(|(sp, e)| (sp, e.to_string()))
        .collect();

    // Exhaustive oracle: score all three by hand, take the argmin, ties to
    // the earliest method.
    let mut best: Option<(f64, &str)> = None;
    for (sp, entity) in &candidates {
        let mut tokens = vec![tok.bos_id()];
        tokens.extend(tok.encode(&format!("{prompt} {entity}")).unwrap());
        let ppl = model.perplexity(&tokens, &sp.materialize()).unwrap();
        if best.is_none_or(|(b, _)| ppl < b) {
            best = Some((ppl, entity));
        }
    }

    let chosen = activation_ensemble(
        &model,
        &tok,
        &candidates,
        prompt,
        EnsemblePerplexityMode::OwnInjection,
    )
    .unwrap();
    assert_eq!(chosen, best.unwrap().1);

    assert!(activation_ensemble(&model, &tok, &[], prompt, EnsemblePerplexityMode::OwnInjection).is_err());
}

#[test]
fn candidate_entity_cuts_at_newline_and_trims() {
    assert_eq!(candidate_entity(" bob@y.org\nContent: junk"), "bob@y.org");
    assert_eq!(candidate_entity(" bob@y.org"), "bob@y.org");
    assert_eq!(candidate_entity("\nxyz"), "");
    assert_eq!(candidate_entity(""), "");
}
