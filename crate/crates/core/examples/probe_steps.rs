use std::time::Instant;

use memprobe_core::audit::{extraction_rate, GenerationConfig};
use memprobe_core::checkpoint::{load_model, save_model};
use memprobe_core::corpus::{encode_record, generate_corpus, CorpusSpec, DuplicationDirective, PoolSizes};
use memprobe_core::entity::{build_eval_examples, duplication_census};
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::rng::seeded_rng;
use memprobe_core::soft_prompt::{train_soft_prompt, SoftPromptHyperparams};
use memprobe_core::{CausalLM, ModelConfig, PromptInjection, SoftPrompt, SoftPromptMethod, Tokenizer};
use rand::seq::SliceRandom;

fn fixture_spec() -> CorpusSpec {
    let mut plan = vec![];
    let mut push = |count: usize, n: usize, plan: &mut Vec<DuplicationDirective>| {
        for k in 0..n {
            plan.push(DuplicationDirective {
                sender: format!("dup{count}k{k}@dupside.com"),
                recipient: format!("dup{count}k{k}@dupother.org"),
                count,
            });
        }
    };
    push(100, 1, &mut plan);
    push(50, 1, &mut plan);
    push(25, 2, &mut plan);
    push(10, 4, &mut plan);
    push(5, 8, &mut plan);
    CorpusSpec {
        n_records: 1000,
        pools: PoolSizes { senders: 400, recipients: 400, dates: 600 },
        duplication_plan: plan,
        seed: 11,
        partition: Default::default(),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let target_loss: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let ckpt = format!("/tmp/probe_ckpt_{}", (target_loss * 100.0) as u32);

    let tok = Tokenizer::default_charset();
    let corpus = generate_corpus(&fixture_spec()).unwrap();

    let model: CausalLM = if std::path::Path::new(&ckpt).exists() {
        println!("loading cached model from {ckpt}");
        load_model(&ckpt).unwrap().0
    } else {
        let docs: Vec<Vec<u32>> = corpus.iter().map(|r| encode_record(&tok, r).unwrap()).collect();
        let cfg = ModelConfig { vocab_size: 99, d_model: 64, n_layers: 2, n_heads: 4, d_ff: 256, max_seq_len: 256, seed: 8 };
        let mut model = CausalLM::new(cfg).unwrap();
        let t0 = Instant::now();
        let curve = train_lm(&mut model, &docs, tok.bos_id(), &LmHyperparams {
            epochs: 150, lr: 2e-3, window_len: 256, batch_size: 8, seed: 5, target_loss: Some(target_loss),
        }).unwrap();
        println!("lm: {} epochs -> loss {:.4} in {:.0}s", curve.epoch_mean_loss.len(), curve.final_loss().unwrap(), t0.elapsed().as_secs_f32());
        save_model(&ckpt, &model, &tok).unwrap();
        model
    };

    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seeded_rng(99));
    let eval_set: Vec<_> = order[..150].iter().map(|&i| examples[i].clone()).collect();
    let train_pool: Vec<_> = order[150..450].iter().map(|&i| examples[i].clone()).collect();

    let census = duplication_census(&corpus);
    let bin_of = |rid: u64| -> usize {
        let r = corpus.iter().find(|r| r.id == rid).unwrap();
        census[&(r.get("Sender").unwrap().to_string(), r.get("Recipient").unwrap().to_string())]
    };
    let gen = GenerationConfig { max_new: 48 };

    let base = extraction_rate(&model, &tok, &PromptInjection::None, &eval_set, gen, "base", 0).unwrap();
    println!("textual baseline: {:.4} ({}/{})", base.extraction_rate, base.n_hits, base.n_examples);

    // One long training, evaluating periodically.
    let lr = 2e-2;
    let batch = 4;
    let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 5, model.config(), 42).unwrap();
    let mut total_steps = 0;
    for chunk in [400usize, 400, 800, 800, 800] {
        let t0 = Instant::now();
        let r = train_soft_prompt(&model, &mut sp, &train_pool, &tok,
            &SoftPromptHyperparams { lr, steps: chunk, batch_size: batch, seed: 7 + total_steps as u64 }).unwrap();
        total_steps += chunk;
        let rep = extraction_rate(&model, &tok, &sp.materialize(), &eval_set, gen, "probe", 0).unwrap();
        let mut bins: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
        for (o, e) in rep.outcomes.iter().zip(&eval_set) {
            let b = bins.entry(bin_of(e.source_record_id)).or_default();
            b.1 += 1;
            if o.hit { b.0 += 1; }
        }
        let bins_str: Vec<String> = bins.iter().map(|(k, (h, n))| format!("{k}:{h}/{n}")).collect();
        println!("steps={total_steps}: loss {:.3} rate {:.4} ({}/{}) bins {} ({:.0}s)",
            r.loss_curve.last().unwrap(), rep.extraction_rate, rep.n_hits, rep.n_examples,
            bins_str.join(" "), t0.elapsed().as_secs_f32());
    }

    // Peek at a few generations.
    let inj = sp.materialize();
    for e in eval_set.iter().take(3) {
        let mut prompt = vec![tok.bos_id()];
        prompt.extend(tok.encode(&e.prompt_text).unwrap());
        let out = model.generate_greedy(&prompt, &inj, 48, tok.eos_id()).unwrap();
        println!("expected {:?} got {:?}", e.expected_entity, tok.decode(&out[prompt.len()..]).unwrap());
    }
}
