use memprobe_core::model::{train_lm, InferSession, LmHyperparams};
use memprobe_core::rng::seeded_rng;
use memprobe_core::{CausalLM, ModelConfig, PromptInjection, Tensor};
use rand::Rng;

fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig {
        vocab_size: 11,
        d_model: 16,
        n_layers: 2,
        n_heads: 2,
        d_ff: 32,
        max_seq_len: 32,
        seed,
    }
}

fn random_tokens(len: usize, vocab: usize, seed: u64) -> Vec<u32> {
    let mut rng = seeded_rng(seed);
    (0..len).map(|_| rng.random_range(0..vocab as u32)).collect()
}

fn random_prefix_kv(model: &CausalLM, l: usize, seed: u64) -> PromptInjection {
    let mut rng = seeded_rng(seed);
    let d = model.config().d_model;
    PromptInjection::PrefixKv(
        (0..model.config().n_layers)
            .map(|_| {
                (
                    Tensor::randn(&[l, d], 0.5, &mut rng),
                    Tensor::randn(&[l, d], 0.5, &mut rng),
                )
            })
            .collect(),
    )
}

#[test]
fn config_validation_catches_bad_dimensions() {
    let mut cfg = tiny_config(0);
    cfg.n_heads = 3; // 16 % 3 != 0
    assert!(cfg.validate().is_err());
    cfg = tiny_config(0);
    cfg.vocab_size = 1;
    assert!(cfg.validate().is_err());
}

#[test]
fn param_count_is_a_pure_function_of_config() {
    let cfg = tiny_config(5);
    let model = CausalLM::new(cfg).unwrap();
    assert_eq!(model.param_count(), cfg.param_count());

    let toy = ModelConfig::toy(99, 1);
    let model2 = CausalLM::new(toy).unwrap();
    assert_eq!(model2.param_count(), toy.param_count());
}

#[test]
fn zero_token_embedding_gives_zero_logits() {
    let mut model = CausalLM::new(tiny_config(3)).unwrap();
    // Output projection is tied to the token embedding.
    for (name, t) in model.named_params_mut() {
        if name == "tok_emb" {
            t.data_mut().fill(0.0);
        }
    }
    let logits = model.forward(&[1, 2, 3], &PromptInjection::None).unwrap();
    assert!(logits.data().iter().all(|&v| v == 0.0));
}

#[test]
fn causality_later_tokens_never_change_earlier_logits() {
    let model = CausalLM::new(tiny_config(7)).unwrap();
    let tokens = random_tokens(12, 11, 42);
    let base = model.forward(&tokens, &PromptInjection::None).unwrap();

    let mut perturbed = tokens.clone();
    for t in 6..12 {
        perturbed[t] = (perturbed[t] + 3) % 11;
    }
    let changed = model.forward(&perturbed, &PromptInjection::None).unwrap();

    let v = model.config().vocab_size;
    for t in 0..6 {
        assert_eq!(
            &base.data()[t * v..(t + 1) * v],
            &changed.data()[t * v..(t + 1) * v],
            "logits at position {t} must be bit-identical"
        );
    }
    assert_ne!(
        &base.data()[6 * v..],
        &changed.data()[6 * v..],
        "perturbation should actually change later logits"
    );
}

#[test]
fn capacity_overflow_is_an_explicit_error() {
    let model = CausalLM::new(tiny_config(1)).unwrap();
    let tokens = random_tokens(33, 11, 1);
    let err = model.forward(&tokens, &PromptInjection::None);
    assert!(matches!(err, Err(memprobe_core::Error::Capacity { .. })));

    // Injection length counts against capacity too.
    let inj = random_prefix_kv(&model, 4, 2);
    let tokens = random_tokens(30, 11, 2);
    assert!(matches!(
        model.forward(&tokens, &inj),
        Err(memprobe_core::Error::Capacity { .. })
    ));
}

#[test]
fn incremental_path_matches_graph_forward_bit_for_bit() {
    let model = CausalLM::new(tiny_config(11)).unwrap();
    let tokens = random_tokens(9, 11, 5);
    let v = model.config().vocab_size;

    for inj in [
        PromptInjection::None,
        random_prefix_kv(&model, 3, 6),
        PromptInjection::PromptEmb(Tensor::randn(
            &[4, model.config().d_model],
            0.5,
            &mut seeded_rng(8),
        )),
    ] {
        let graph_logits = model.forward(&tokens, &inj).unwrap();
        let mut session: InferSession = model.start_session(&inj).unwrap();
        for (t, &tok) in tokens.iter().enumerate() {
            let row = session.feed(tok).unwrap();
            assert_eq!(
                row.as_slice(),
                &graph_logits.data()[t * v..(t + 1) * v],
                "position {t} diverged"
            );
        }
    }
}

#[test]
fn lm_loss_rejects_empty_masks_and_short_sequences() {
    let model = CausalLM::new(tiny_config(2)).unwrap();
    assert!(model.lm_loss(&[1], &[true]).is_err());
    let err = model.lm_loss(&[1, 2, 3], &[false, false, false]);
    assert!(matches!(err, Err(memprobe_core::Error::EmptyLoss)));
    // Mask position 0 alone is vacuous: nothing predicts token 0.
    let err = model.lm_loss(&[1, 2, 3], &[true, false, false]);
    assert!(matches!(err, Err(memprobe_core::Error::EmptyLoss)));
}

#[test]
fn greedy_generation_is_deterministic_and_respects_max_new() {
    let model = CausalLM::new(tiny_config(21)).unwrap();
    let prompt = random_tokens(5, 11, 9);

    let unchanged = model
        .generate_greedy(&prompt, &PromptInjection::None, 0, 0)
        .unwrap();
    assert_eq!(unchanged, prompt);

    let a = model
        .generate_greedy(&prompt, &PromptInjection::None, 10, 0)
        .unwrap();
    let b = model
        .generate_greedy(&prompt, &PromptInjection::None, 10, 0)
        .unwrap();
    assert_eq!(a, b);
    assert!(a.len() <= prompt.len() + 10);

    assert!(model
        .generate_greedy(&[], &PromptInjection::None, 5, 0)
        .is_err());
}

#[test]
fn greedy_ties_break_toward_lowest_token_id() {
    let mut model = CausalLM::new(tiny_config(4)).unwrap();
    for (name, t) in model.named_params_mut() {
        if name == "tok_emb" {
            t.data_mut().fill(0.0);
        }
    }
    // All logits equal, so every step emits token 0; with stop=0 nothing is
    // appended at all.
    let out = model
        .generate_greedy(&[5, 6], &PromptInjection::None, 4, 0)
        .unwrap();
    assert_eq!(out, vec![5, 6]);
    // With a different stop token the argmax tie still lands on id 0.
    let out = model
        .generate_greedy(&[5, 6], &PromptInjection::None, 3, 10)
        .unwrap();
    assert_eq!(out, vec![5, 6, 0, 0, 0]);
}

#[test]
fn uniform_logits_give_vocab_sized_perplexity() {
    let mut cfg = tiny_config(13);
    cfg.vocab_size = 97;
    let mut model = CausalLM::new(cfg).unwrap();
    for (name, t) in model.named_params_mut() {
        if name == "tok_emb" {
            t.data_mut().fill(0.0);
        }
    }
    let tokens = random_tokens(10, 97, 3);
    let ppl = model.perplexity(&tokens, &PromptInjection::None).unwrap();
    assert!((ppl - 97.0).abs() < 1e-9, "ppl = {ppl}");

    // Pure function: identical on re-evaluation.
    let again = model.perplexity(&tokens, &PromptInjection::None).unwrap();
    assert_eq!(ppl, again);
}

#[test]
fn fingerprint_is_stable_across_readonly_use_and_moves_on_training() {
    let mut model = CausalLM::new(tiny_config(17)).unwrap();
    let before = model.fingerprint();

    let tokens = random_tokens(8, 11, 4);
    let _ = model.forward(&tokens, &PromptInjection::None).unwrap();
    let _ = model
        .generate_greedy(&tokens[..3], &PromptInjection::None, 5, 0)
        .unwrap();
    let _ = model.perplexity(&tokens, &PromptInjection::None).unwrap();
    assert_eq!(model.fingerprint(), before);

    let docs = vec![random_tokens(10, 11, 6)];
    train_lm(
        &mut model,
        &docs,
        1,
        &LmHyperparams {
            epochs: 2,
            lr: 1e-3,
            window_len: 16,
            batch_size: 2,
            seed: 0,
            target_loss: None,
        },
    )
    .unwrap();
    assert_ne!(model.fingerprint(), before);
}

#[test]
fn train_lm_rejects_oversized_windows() {
    let mut model = CausalLM::new(tiny_config(1)).unwrap();
    let docs = vec![vec![1u32, 2, 3]];
    let hp = LmHyperparams {
        window_len: 64, // max_seq_len is 32
        ..Default::default()
    };
    assert!(matches!(
        train_lm(&mut model, &docs, 1, &hp),
        Err(memprobe_core::Error::Config(_))
    ));
}

#[test]
fn training_is_reproducible_under_a_fixed_seed() {
    let run = || {
        let mut model = CausalLM::new(tiny_config(23)).unwrap();
        let docs = vec![
            random_tokens(14, 11, 71),
            random_tokens(11, 11, 72),
            random_tokens(9, 11, 73),
        ];
        let hp = LmHyperparams {
            epochs: 5,
            lr: 2e-3,
            window_len: 16,
            batch_size: 2,
            seed: 99,
            target_loss: None,
        };
        let curve = train_lm(&mut model, &docs, 1, &hp).unwrap();
        (model.fingerprint(), curve.epoch_mean_loss)
    };
    let (fp_a, curve_a) = run();
    let (fp_b, curve_b) = run();
    assert_eq!(fp_a, fp_b);
    assert_eq!(curve_a, curve_b);
}

#[test]
fn overfit_one_string_reproduces_it_and_drives_ppl_down() {
    // The memorization oracle: train on a single short document until the
    // loss collapses, then the model must greedily complete it verbatim.
    let tok = memprobe_core::Tokenizer::default_charset();
    let text = "Sender: ana.reyes@coastmail.com\nRecipient: bo.lindt@ferrytrade.org\n";
    let mut doc = tok.encode(text).unwrap();
    doc.push(tok.eos_id());

    let cfg = ModelConfig {
        vocab_size: tok.vocab_size(),
        d_model: 64,
        n_layers: 2,
        n_heads: 4,
        d_ff: 256,
        max_seq_len: 128,
        seed: 7,
    };
    let mut model = CausalLM::new(cfg).unwrap();
    let hp = LmHyperparams {
        epochs: 1500,
        lr: 3e-3,
        window_len: 128,
        batch_size: 1,
        seed: 1,
        target_loss: Some(0.01),
    };
    let curve = train_lm(&mut model, &[doc.clone()], tok.bos_id(), &hp).unwrap();
    assert!(
        curve.final_loss().unwrap() < 0.01,
        "loss stuck at {:?}",
        curve.final_loss()
    );

    // Prompt with the first half (BOS included as in training windows).
    let mut seq = vec![tok.bos_id()];
    seq.extend_from_slice(&doc);
    let half = seq.len() / 2;
    let out = model
        .generate_greedy(&seq[..half], &PromptInjection::None, seq.len(), tok.eos_id())
        .unwrap();
    // Generation stops right before EOS, so compare against the sequence
    // minus its separator.
    assert_eq!(out, seq[..seq.len() - 1], "verbatim completion failed");

    let ppl = model.perplexity(&seq, &PromptInjection::None).unwrap();
    assert!(ppl < 1.05, "perplexity {ppl} too high for an overfit string");
}
