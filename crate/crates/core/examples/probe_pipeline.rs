use std::time::Instant;

use memprobe_core::audit::{extraction_rate, GenerationConfig};
use memprobe_core::corpus::{encode_record, generate_corpus, CorpusSpec, DuplicationDirective, PoolSizes};
use memprobe_core::entity::{build_eval_examples, duplication_census, fabricate_examples};
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::rng::seeded_rng;
use memprobe_core::soft_prompt::{train_soft_prompt, SoftPromptHyperparams};
use memprobe_core::{CausalLM, ModelConfig, PromptInjection, SoftPrompt, SoftPromptMethod, Tokenizer};
use rand::seq::SliceRandom;

fn main() {
    let tok = Tokenizer::default_charset();
    let mut plan = vec![];
    let pools = ["alice", "bruno", "carla", "dimitri", "elena", "farid", "greta", "hugo"];
    // bins: 100x1, 50x1, 25x2, 10x4, 5x8
    let mut pi = 0;
    let mut push = |count: usize, n: usize, plan: &mut Vec<DuplicationDirective>| {
        for k in 0..n {
            plan.push(DuplicationDirective {
                sender: format!("{}.dup{count}k{k}@dupside.com", pools[pi % pools.len()]),
                recipient: format!("{}.dup{count}k{k}@dupother.org", pools[(pi + 3) % pools.len()]),
                count,
            });
            pi += 1;
        }
    };
    push(100, 1, &mut plan);
    push(50, 1, &mut plan);
    push(25, 2, &mut plan);
    push(10, 4, &mut plan);
    push(5, 8, &mut plan);

    let spec = CorpusSpec {
        n_records: 1000,
        pools: PoolSizes { senders: 400, recipients: 400, dates: 600 },
        duplication_plan: plan,
        seed: 11,
        partition: Default::default(),
    };
    let corpus = generate_corpus(&spec).unwrap();
    let docs: Vec<Vec<u32>> = corpus.iter().map(|r| encode_record(&tok, r).unwrap()).collect();
    let maxdoc = docs.iter().map(|d| d.len()).max().unwrap();
    println!("corpus: {} records, max doc {maxdoc} tokens", corpus.len());

    let cfg = ModelConfig { vocab_size: 99, d_model: 64, n_layers: 2, n_heads: 4, d_ff: 256, max_seq_len: 256, seed: 8 };
    let mut model = CausalLM::new(cfg).unwrap();
    let t0 = Instant::now();
    let curve = train_lm(&mut model, &docs, tok.bos_id(), &LmHyperparams {
        epochs: 80, lr: 2e-3, window_len: 256, batch_size: 8, seed: 5, target_loss: Some(0.30),
    }).unwrap();
    println!("lm: {} epochs -> loss {:.4} in {:.0}s (first epochs: {:?})",
        curve.epoch_mean_loss.len(), curve.final_loss().unwrap(), t0.elapsed().as_secs_f32(),
        &curve.epoch_mean_loss[..4.min(curve.epoch_mean_loss.len())]);

    let report = build_eval_examples(&corpus, "Recipient", None).unwrap();
    println!("examples: {} (excl {}, no-ident {})", report.examples.len(), report.skipped_exclusion, report.skipped_no_ident);
    let mut examples = report.examples;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seeded_rng(99));
    let eval_n = 250.min(examples.len() / 3);
    let eval_set: Vec<_> = order[..eval_n].iter().map(|&i| examples[i].clone()).collect();
    let train_pool: Vec<_> = order[eval_n..].iter().map(|&i| examples[i].clone()).collect();
    println!("train pool {}, eval {}", train_pool.len(), eval_set.len());

    let gen = GenerationConfig { max_new: 64 };
    let t0 = Instant::now();
    let base = extraction_rate(&model, &tok, &PromptInjection::None, &eval_set, gen, "baseline", 0).unwrap();
    println!("textual baseline: rate {:.4} ({}/{}) in {:.0}s",
        base.extraction_rate, base.n_hits, base.n_examples, t0.elapsed().as_secs_f32());

    let census = duplication_census(&corpus);
    let bin_of = |rid: u64| -> usize {
        let r = corpus.iter().find(|r| r.id == rid).unwrap();
        census[&(r.get("Sender").unwrap().to_string(), r.get("Recipient").unwrap().to_string())]
    };

    for lr in [1e-2, 2e-2] {
        for l in [1usize, 5, 10, 20] {
            let t0 = Instant::now();
            let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, l, model.config(), 100 + l as u64).unwrap();
            let r = train_soft_prompt(&model, &mut sp, &train_pool, &tok,
                &SoftPromptHyperparams { lr, steps: 400, batch_size: 8, seed: 7 }).unwrap();
            let rep = extraction_rate(&model, &tok, &sp.materialize(), &eval_set, gen, "sweep", 0).unwrap();
            // bin rates
            let mut bins: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
            for (o, e) in rep.outcomes.iter().zip(&eval_set) {
                let b = bins.entry(bin_of(e.source_record_id)).or_default();
                b.1 += 1;
                if o.hit { b.0 += 1; }
            }
            let bins_str: Vec<String> = bins.iter().map(|(k, (h, n))| format!("{k}:{:.2}", *h as f64 / *n as f64)).collect();
            println!("lr={lr} L={l}: loss {:.3} rate {:.4} ({}/{}) bins {} ({:.0}s)",
                r.loss_curve.last().unwrap(), rep.extraction_rate, rep.n_hits, rep.n_examples,
                bins_str.join(" "), t0.elapsed().as_secs_f32());
        }
    }

    // Fabricated volume 200, lr 2e-2.
    let t0 = Instant::now();
    let fabricated = fabricate_examples(&train_pool, 31).unwrap();
    let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 5, model.config(), 200).unwrap();
    train_soft_prompt(&model, &mut sp, &fabricated[..200.min(fabricated.len())], &tok,
        &SoftPromptHyperparams { lr: 2e-2, steps: 400, batch_size: 8, seed: 7 }).unwrap();
    let rep = extraction_rate(&model, &tok, &sp.materialize(), &eval_set, gen, "fab", 0).unwrap();
    println!("fabricated-200: rate {:.4} ({}/{}) ({:.0}s)", rep.extraction_rate, rep.n_hits, rep.n_examples, t0.elapsed().as_secs_f32());

    // Control: untrained model, same sp config.
    let control = CausalLM::new(ModelConfig { seed: 909, ..cfg }).unwrap();
    let mut spc = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 5, control.config(), 300).unwrap();
    train_soft_prompt(&control, &mut spc, &train_pool, &tok,
        &SoftPromptHyperparams { lr: 2e-2, steps: 400, batch_size: 8, seed: 7 }).unwrap();
    let repc = extraction_rate(&control, &tok, &spc.materialize(), &eval_set, gen, "control", 0).unwrap();
    println!("control(untrained): rate {:.4} ({}/{})", repc.extraction_rate, repc.n_hits, repc.n_examples);
}
