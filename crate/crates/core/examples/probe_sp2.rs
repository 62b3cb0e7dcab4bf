use std::time::Instant;
use memprobe_core::entity::{EvalExample, Provenance};
use memprobe_core::model::{train_lm, LmHyperparams};
use memprobe_core::soft_prompt::{train_soft_prompt, SoftPromptHyperparams};
use memprobe_core::{CausalLM, ModelConfig, SoftPrompt, SoftPromptMethod, Tokenizer};

fn main() {
    let tok = Tokenizer::default_charset();
    let mut model = CausalLM::new(ModelConfig {
        vocab_size: 99, d_model: 32, n_layers: 2, n_heads: 4, d_ff: 64, max_seq_len: 96, seed: 8,
    }).unwrap();
    let docs: Vec<Vec<u32>> = [
        "Sender: ana@coast.com\nRecipient: bo@ferry.org\n",
        "Sender: kay@coast.com\nRecipient: gus@ferry.org\n",
        "Sender: pia@coast.com\nRecipient: wes@ferry.org\n",
    ].iter().map(|s| { let mut ids = tok.encode(s).unwrap(); ids.push(tok.eos_id()); ids }).collect();
    train_lm(&mut model, &docs, tok.bos_id(), &LmHyperparams {
        epochs: 60, lr: 3e-3, window_len: 96, batch_size: 3, seed: 5, target_loss: Some(0.2),
    }).unwrap();

    let ex = EvalExample {
        prompt_text: "Sender: ana@coast.com\nRecipient:".into(),
        expected_entity: "uma.zink@pine.net".into(),
        train_entity: "uma.zink@pine.net".into(),
        target_attr: "Recipient".into(),
        source_record_id: 0,
        provenance: Provenance::Real,
    };
    for method in [SoftPromptMethod::PrefixTuning, SoftPromptMethod::PromptTuning, SoftPromptMethod::PTuning] {
        for lr in [1e-2, 3e-2] {
            let t0 = Instant::now();
            let mut sp = SoftPrompt::init(method, 5, model.config(), 2).unwrap();
            let report = train_soft_prompt(&model, &mut sp, std::slice::from_ref(&ex), &tok,
                &SoftPromptHyperparams { lr, steps: 500, batch_size: 1, seed: 3 }).unwrap();
            println!("{method:?} lr={lr}: loss@100={:.4} loss@250={:.4} loss@500={:.4}  ({:.1}s)",
                report.loss_curve[99], report.loss_curve[249], report.loss_curve.last().unwrap(),
                t0.elapsed().as_secs_f32());
        }
    }
}
