use std::time::Instant;
use memprobe_core::corpus::{encode_record, generate_corpus, CorpusSpec, PoolSizes};
use memprobe_core::entity::build_eval_examples;
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::soft_prompt::{train_soft_prompt, SoftPromptHyperparams};
use memprobe_core::{CausalLM, ModelConfig, SoftPrompt, SoftPromptMethod, Tokenizer};

fn main() {
    let tok = Tokenizer::default_charset();
    let spec = CorpusSpec {
        n_records: 100,
        pools: PoolSizes { senders: 60, recipients: 60, dates: 90 },
        duplication_plan: vec![],
        seed: 17,
        partition: Default::default(),
    };
    let corpus = generate_corpus(&spec).unwrap();
    let docs: Vec<Vec<u32>> = corpus.iter().map(|r| encode_record(&tok, r).unwrap()).collect();
    let max_len = docs.iter().map(|d| d.len()).max().unwrap();
    println!("max doc tokens = {max_len}");

    let cfg = ModelConfig { vocab_size: 99, d_model: 64, n_layers: 2, n_heads: 4, d_ff: 256, max_seq_len: 160, seed: 8 };
    let mut model = CausalLM::new(cfg).unwrap();
    let t0 = Instant::now();
    let curve = train_lm(&mut model, &docs, tok.bos_id(), &LmHyperparams {
        epochs: 150, lr: 1e-3, window_len: 160, batch_size: 8, seed: 5, target_loss: Some(0.25),
    }).unwrap();
    println!("lm train: {} epochs, final loss {:.4} ({:.0}s)",
        curve.epoch_mean_loss.len(), curve.final_loss().unwrap(), t0.elapsed().as_secs_f32());

    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    println!("examples: {}", examples.len());

    // Overfit a single real example.
    let ex = examples[0].clone();
    for (lr, l, steps) in [(1e-2, 5, 300), (3e-2, 5, 500)] {
        let t0 = Instant::now();
        let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, l, model.config(), 2).unwrap();
        let r = train_soft_prompt(&model, &mut sp, std::slice::from_ref(&ex), &tok,
            &SoftPromptHyperparams { lr, steps, batch_size: 1, seed: 3 }).unwrap();
        println!("real overfit lr={lr} L={l} steps={steps}: final={:.4} ({:.1}s)",
            r.loss_curve.last().unwrap(), t0.elapsed().as_secs_f32());
    }

    // Also: multi-example training (the real workload shape), 30 examples.
    let t0 = Instant::now();
    let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 5, model.config(), 2).unwrap();
    let r = train_soft_prompt(&model, &mut sp, &examples[..30], &tok,
        &SoftPromptHyperparams { lr: 1e-2, steps: 200, batch_size: 8, seed: 3 }).unwrap();
    println!("30-example lr=1e-2 L=5 steps=200 batch=8: final={:.4} ({:.0}s)",
        r.loss_curve.last().unwrap(), t0.elapsed().as_secs_f32());
}
