use memprobe_core::{CausalLM, Graph, ModelConfig, SoftPrompt, SoftPromptMethod, Tokenizer};

fn main() {
    let tok = Tokenizer::default_charset();
    let model = CausalLM::new(ModelConfig {
        vocab_size: 99, d_model: 32, n_layers: 2, n_heads: 4, d_ff: 64, max_seq_len: 96, seed: 8,
    }).unwrap();
    let sp = SoftPrompt::init(SoftPromptMethod::PromptTuning, 5, model.config(), 2).unwrap();

    let mut tokens = vec![tok.bos_id()];
    tokens.extend(tok.encode("Sender: a@x\nRecipient: b@y").unwrap());
    let mask: Vec<bool> = (0..tokens.len()).map(|t| t >= 13).collect();

    let mut g = Graph::new();
    let vars = model.register(&mut g);
    let (leaves, inj) = sp.register_trainable(&mut g);
    let loss = model.lm_loss_vars(&mut g, &vars, &inj, &tokens, &mask).unwrap();
    println!("loss = {}", g.value(loss)[0]);
    g.backward(loss).unwrap();
    let grad = g.grad(leaves[0]);
    match grad {
        None => println!("NO GRADIENT AT ALL"),
        Some(gr) => {
            let norm: f64 = gr.iter().map(|x| x * x).sum::<f64>().sqrt();
            println!("grad norm = {norm:.6e}, first = {:?}", &gr[..4.min(gr.len())]);
        }
    }

    // Finite difference on one element of the prompt embedding.
    let eval_loss = |sp: &SoftPrompt| -> f64 {
        let mut g = Graph::new();
        let vars = model.register(&mut g);
        let (_, inj) = sp.register_trainable(&mut g);
        let loss = model.lm_loss_vars(&mut g, &vars, &inj, &tokens, &mask).unwrap();
        g.value(loss)[0]
    };
    let mut sp_plus = sp.clone();
    sp_plus.named_params_mut()[0].1.data_mut()[0] += 1e-4;
    let mut sp_minus = sp.clone();
    sp_minus.named_params_mut()[0].1.data_mut()[0] -= 1e-4;
    println!("fd grad[0] = {:.6e}", (eval_loss(&sp_plus) - eval_loss(&sp_minus)) / 2e-4);
}
