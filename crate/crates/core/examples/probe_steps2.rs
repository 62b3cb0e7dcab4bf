use std::time::Instant;

use memprobe_core::audit::{extraction_rate, GenerationConfig};
use memprobe_core::checkpoint::{load_model, save_model};
use memprobe_core::corpus::{default_planted_directives, encode_record, generate_corpus, CorpusSpec, PoolPartition, PoolSizes};
use memprobe_core::entity::{build_eval_examples, duplication_census, EvalExample};
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::rng::seeded_rng;
use memprobe_core::soft_prompt::{train_soft_prompt, SoftPromptHyperparams};
use memprobe_core::{CausalLM, ModelConfig, PromptInjection, SoftPrompt, SoftPromptMethod, Tokenizer};
use rand::seq::SliceRandom;

fn main() {
    let tok = Tokenizer::default_charset();
    let spec = CorpusSpec {
        n_records: 1000,
        pools: PoolSizes { senders: 250, recipients: 250, dates: 600 },
        duplication_plan: default_planted_directives(&[(100, 1), (50, 1), (25, 2), (10, 4), (5, 8)]).unwrap(),
        seed: 11,
        partition: PoolPartition::FirstHalf,
    };
    let corpus = generate_corpus(&spec).unwrap();
    let ckpt = "/tmp/probe2_ckpt";
    let model: CausalLM = if std::path::Path::new(ckpt).exists() {
        println!("cached model");
        load_model(ckpt).unwrap().0
    } else {
        let docs: Vec<Vec<u32>> = corpus.iter().map(|r| encode_record(&tok, r).unwrap()).collect();
        let mut model = CausalLM::new(ModelConfig { vocab_size: 99, d_model: 64, n_layers: 2, n_heads: 4, d_ff: 256, max_seq_len: 256, seed: 8 }).unwrap();
        let t0 = Instant::now();
        let curve = train_lm(&mut model, &docs, tok.bos_id(), &LmHyperparams {
            epochs: 160, lr: 2e-3, window_len: 256, batch_size: 8, seed: 5, target_loss: Some(0.15),
        }).unwrap();
        println!("lm: {} epochs -> {:.4} in {:.0}s", curve.epoch_mean_loss.len(), curve.final_loss().unwrap(), t0.elapsed().as_secs_f32());
        save_model(ckpt, &model, &tok).unwrap();
        model
    };

    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let census = duplication_census(&corpus);
    let bin_of_ex = |e: &EvalExample| -> usize {
        let r = corpus.iter().find(|r| r.id == e.source_record_id).unwrap();
        census[&(r.get("Sender").unwrap().to_string(), r.get("Recipient").unwrap().to_string())]
    };

    // Stratified split: per-bin eval quotas.
    let mut by_bin: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, e) in examples.iter().enumerate() {
        by_bin.entry(bin_of_ex(e)).or_default().push(i);
    }
    let mut eval_idx = Vec::new();
    let mut train_idx = Vec::new();
    let mut rng = seeded_rng(99);
    for (&bin, idxs) in &mut by_bin {
        idxs.shuffle(&mut rng);
        let quota = match bin { 1 => 50, 5 => 10, 10 => 10, 25 => 12, 50 => 12, 100 => 25, _ => 0 };
        let q = quota.min(idxs.len() / 2);
        eval_idx.extend(idxs[..q].iter().copied());
        train_idx.extend(idxs[q..].iter().copied());
    }
    train_idx.shuffle(&mut rng);
    train_idx.truncate(350);
    let eval_set: Vec<EvalExample> = eval_idx.iter().map(|&i| examples[i].clone()).collect();
    let train_pool: Vec<EvalExample> = train_idx.iter().map(|&i| examples[i].clone()).collect();
    println!("eval {} train {}", eval_set.len(), train_pool.len());

    let gen = GenerationConfig { max_new: 48 };
    let base = extraction_rate(&model, &tok, &PromptInjection::None, &eval_set, gen, "b", 0).unwrap();
    println!("baseline {:.4} ({}/{})", base.extraction_rate, base.n_hits, base.n_examples);

    let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 10, model.config(), 42).unwrap();
    let mut total = 0usize;
    for chunk in [500usize, 500, 1000, 1000, 1000] {
        let t0 = Instant::now();
        let r = train_soft_prompt(&model, &mut sp, &train_pool, &tok,
            &SoftPromptHyperparams { lr: 1e-2, steps: chunk, batch_size: 4, seed: 7 + total as u64 }).unwrap();
        total += chunk;
        let rep = extraction_rate(&model, &tok, &sp.materialize(), &eval_set, gen, "p", 0).unwrap();
        let mut bins: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
        for (o, e) in rep.outcomes.iter().zip(&eval_set) {
            let b = bins.entry(bin_of_ex(e)).or_default();
            b.1 += 1;
            if o.hit { b.0 += 1; }
        }
        let bs: Vec<String> = bins.iter().map(|(k, (h, n))| format!("{k}:{h}/{n}")).collect();
        println!("steps={total}: loss {:.3} rate {:.4} ({}/{}) bins {} ({:.0}s)",
            r.loss_curve.last().unwrap(), rep.extraction_rate, rep.n_hits, rep.n_examples, bs.join(" "), t0.elapsed().as_secs_f32());
        // peek at two bin-100 and two bin-50 generations
        let mut shown = std::collections::HashMap::new();
        for (o, e) in rep.outcomes.iter().zip(&eval_set) {
            let b = bin_of_ex(e);
            if b >= 50 && *shown.entry(b).or_insert(0) < 2 {
                *shown.get_mut(&b).unwrap() += 1;
                println!("  bin{b} expected {:?} got {:?}", e.expected_entity, o.generated_text);
            }
        }
    }
}
