//! Soft-prompt optimization against a frozen model.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::Tokenizer;
use crate::entity::EvalExample;
use crate::error::{Error, Result};
use crate::model::CausalLM;
use crate::numerics::{adam_step, AdamState, Graph, Tensor};
use crate::rng::{seeded_rng, Fingerprint};

use super::{SoftPrompt, TrainingMeta};

#[derive(Clone, Debug)]
pub struct SoftPromptHyperparams {
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SoftPromptHyperparams {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            steps: 2000,
            batch_size: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SoftPromptTrainReport {
    /// Mean batch loss at every step.
    pub loss_curve: Vec<f64>,
    /// Examples dropped because injection + sequence exceeded capacity.
    pub skipped: usize,
}

struct EncodedExample {
    tokens: Vec<u32>,
    mask: Vec<bool>,
}

/// Token sequence and loss mask for one example: the prompt followed by the
/// rendered continuation (space, entity, separator). Only continuation
/// positions contribute to the loss.
fn encode_example(tok: &Tokenizer, ex: &EvalExample) -> Result<EncodedExample> {
    let mut tokens = vec![tok.bos_id()];
    tokens.extend(tok.encode(&ex.prompt_text)?);
    let prompt_len = tokens.len();
    tokens.extend(tok.encode(&format!(" {}", ex.train_entity))?);
    tokens.push(tok.eos_id());
    let mask = (0..tokens.len()).map(|t| t >= prompt_len).collect();
    Ok(EncodedExample { tokens, mask })
}

/// Train `sp` in place. The model must be frozen; its parameter fingerprint
/// is verified unchanged and the run is reproducible from `hp.seed`.
pub fn train_soft_prompt(
    model: &CausalLM,
    sp: &mut SoftPrompt,
    train_set: &[EvalExample],
    tok: &Tokenizer,
    hp: &SoftPromptHyperparams,
) -> Result<SoftPromptTrainReport> {
    if train_set.is_empty() {
        return Err(Error::Contract("train_soft_prompt: empty training set".into()));
    }
    if hp.batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let fp_before = model.fingerprint();

    let capacity = model.config().max_seq_len;
    let l = sp.materialize().len();
    let mut encoded = Vec::with_capacity(train_set.len());
    let mut skipped = 0usize;
    for ex in train_set {
        let enc = encode_example(tok, ex)?;
        // lm_loss feeds tokens[..len-1], so that is what must fit.
        if l + enc.tokens.len() - 1 > capacity {
            skipped += 1;
            continue;
        }
        encoded.push(enc);
    }
    if encoded.is_empty() {
        return Err(Error::Capacity {
            needed: l + 2,
            max: capacity,
        });
    }

    let mut report = SoftPromptTrainReport {
        skipped,
        ..Default::default()
    };

    let mut rng = seeded_rng(hp.seed);
    let mut adam = AdamState::new(hp.lr);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut cursor = order.len(); // force an initial shuffle

    for _step in 0..hp.steps {
        let mut batch = Vec::with_capacity(hp.batch_size);
        while batch.len() < hp.batch_size.min(encoded.len()) {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }

        let frozen_sp: &SoftPrompt = sp;
        let results: Vec<Result<(f64, Vec<Option<Vec<f64>>>)>> = batch
            .par_iter()
            .map(|&ei| {
                let item = &encoded[ei];
                let mut g = Graph::new();
                let model_vars = model.register(&mut g);
                let (leaves, inj) = frozen_sp.register_trainable(&mut g);
                let loss = model.lm_loss_vars(&mut g, &model_vars, &inj, &item.tokens, &item.mask)?;
                let loss_val = g.value(loss)[0];
                g.backward(loss)?;
                let grads = leaves.iter().map(|&v| g.grad(v).map(<[f64]>::to_vec)).collect();
                Ok((loss_val, grads))
            })
            .collect();

        let mut params = sp.named_params_mut();
        if params.is_empty() {
            // L = 0: nothing to optimize, but the loss curve is still real.
            let mut step_loss = 0.0;
            let mut n = 0usize;
            for r in results {
                step_loss += r?.0;
                n += 1;
            }
            report.loss_curve.push(step_loss / n as f64);
            continue;
        }
        for (_, p) in params.iter_mut() {
            p.clear_grad();
        }
        let mut step_loss = 0.0;
        let batch_len = batch.len() as f64;
        for r in results {
            let (loss_val, grads) = r?;
            step_loss += loss_val;
            for ((_, p), grad) in params.iter_mut().zip(grads) {
                if let Some(grad) = grad {
                    p.accumulate_grad(&grad)?;
                }
            }
        }
        for (_, p) in params.iter_mut() {
            if p.grad().is_none() {
                p.accumulate_grad(&vec![0.0; p.numel()])?;
            }
            p.scale_grad(1.0 / batch_len);
        }
        let mut plist: Vec<&mut Tensor> = params.into_iter().map(|(_, p)| p).collect();
        adam_step(&mut plist, &mut adam)?;
        report.loss_curve.push(step_loss / batch_len);
    }

    let fp_after = model.fingerprint();
    if fp_after != fp_before {
        return Err(Error::ModelNotFrozen {
            before: fp_before,
            after: fp_after,
        });
    }

    let mut ds_fp = Fingerprint::new();
    for ex in train_set {
        ds_fp.update_bytes(ex.prompt_text.as_bytes());
        ds_fp.update_bytes(ex.train_entity.as_bytes());
    }
    sp.training_meta = Some(TrainingMeta {
        seed: hp.seed,
        steps: hp.steps,
        lr: hp.lr,
        dataset_fingerprint: ds_fp.finish(),
    });
    Ok(report)
}
