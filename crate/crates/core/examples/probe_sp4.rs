use std::time::Instant;
use memprobe_core::entity::{EvalExample, Provenance};
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::soft_prompt::{train_soft_prompt, SoftPromptHyperparams};
use memprobe_core::{CausalLM, ModelConfig, SoftPrompt, SoftPromptMethod, Tokenizer};

fn main() {
    let tok = Tokenizer::default_charset();
    let cfg = ModelConfig { vocab_size: 99, d_model: 64, n_layers: 2, n_heads: 4, d_ff: 256, max_seq_len: 128, seed: 8 };
    let ex = EvalExample {
        prompt_text: "Sender: ana@coast.com\nRecipient:".into(),
        expected_entity: "uma.zink@pine.net".into(),
        train_entity: "uma.zink@pine.net".into(),
        target_attr: "Recipient".into(),
        source_record_id: 0,
        provenance: Provenance::Real,
    };

    // Untrained model.
    let model = CausalLM::new(cfg).unwrap();
    for (lr, l, steps) in [(1e-2, 5, 500), (3e-2, 5, 500)] {
        let t0 = Instant::now();
        let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, l, model.config(), 2).unwrap();
        let r = train_soft_prompt(&model, &mut sp, std::slice::from_ref(&ex), &tok,
            &SoftPromptHyperparams { lr, steps, batch_size: 1, seed: 3 }).unwrap();
        println!("untrained d64 lr={lr} L={l}: final={:.4} ({:.1}s)", r.loss_curve.last().unwrap(), t0.elapsed().as_secs_f32());
    }

    // Warmed d64 model.
    let mut model = CausalLM::new(cfg).unwrap();
    let docs: Vec<Vec<u32>> = [
        "Sender: ana@coast.com\nRecipient: bo@ferry.org\n",
        "Sender: kay@coast.com\nRecipient: gus@ferry.org\n",
        "Sender: pia@coast.com\nRecipient: wes@ferry.org\n",
    ].iter().map(|s| { let mut ids = tok.encode(s).unwrap(); ids.push(tok.eos_id()); ids }).collect();
    train_lm(&mut model, &docs, tok.bos_id(), &LmHyperparams {
        epochs: 60, lr: 3e-3, window_len: 96, batch_size: 3, seed: 5, target_loss: Some(0.3),
    }).unwrap();
    for (lr, l, steps) in [(1e-2, 5, 500), (3e-2, 5, 500), (3e-2, 10, 800)] {
        let t0 = Instant::now();
        let mut sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, l, model.config(), 2).unwrap();
        let r = train_soft_prompt(&model, &mut sp, std::slice::from_ref(&ex), &tok,
            &SoftPromptHyperparams { lr, steps, batch_size: 1, seed: 3 }).unwrap();
        println!("warmed d64 lr={lr} L={l} steps={steps}: final={:.4} ({:.1}s)", r.loss_curve.last().unwrap(), t0.elapsed().as_secs_f32());
    }
}
