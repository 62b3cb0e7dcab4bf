//! Training the toy LM to memorization.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamState, Graph};
use crate::rng::seeded_rng;

use super::{CausalLM, InjectionVars};

#[derive(Clone, Debug)]
pub struct LmHyperparams {
    pub epochs: usize,
    pub lr: f64,
    pub window_len: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop early once the epoch mean loss drops below this.
    pub target_loss: Option<f64>,
}

impl Default for LmHyperparams {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            window_len: 128,
            batch_size: 8,
            seed: 0,
            target_loss: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainingCurve {
    pub epoch_mean_loss: Vec<f64>,
}

impl TrainingCurve {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_mean_loss.last().copied()
    }
}

/// Adam over shuffled fixed-length windows of the documents.
///
/// Each document becomes `[BOS] ++ tokens` and is chunked to at most
/// `window_len`; windows start at position 0 of their own sequence, matching
/// how prompts are positioned at evaluation time. Runs are a pure function
/// of the hyperparameter seed. The model is left frozen when training ends.
pub fn train_lm(
    model: &mut CausalLM,
    documents: &[Vec<u32>],
    bos: u32,
    hp: &LmHyperparams,
) -> Result<TrainingCurve> {
    if documents.is_empty() {
        return Err(Error::Contract("train_lm: empty corpus".into()));
    }
    if hp.window_len > model.config().max_seq_len {
        return Err(Error::Config(format!(
            "window length {} exceeds max_seq_len {}",
            hp.window_len,
            model.config().max_seq_len
        )));
    }
    if hp.window_len < 2 || hp.batch_size == 0 {
        return Err(Error::Config(
            "window_len must be >= 2 and batch_size >= 1".into(),
        ));
    }

    let mut windows: Vec<Vec<u32>> = Vec::new();
    for doc in documents {
        let mut seq = Vec::with_capacity(doc.len() + 1);
        seq.push(bos);
        seq.extend_from_slice(doc);
        for chunk in seq.chunks(hp.window_len) {
            if chunk.len() >= 2 {
                windows.push(chunk.to_vec());
            }
        }
    }
    if windows.is_empty() {
        return Err(Error::Contract(
            "train_lm: no window holds at least 2 tokens".into(),
        ));
    }

    model.set_trainable(true);
    let mut rng = seeded_rng(hp.seed);
    let mut adam = AdamState::new(hp.lr);
    let mut curve = TrainingCurve::default();
    let mut order: Vec<usize> = (0..windows.len()).collect();

    for _epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(hp.batch_size) {
            // Each window builds its own graph; grads are merged in batch
            // order so results do not depend on scheduling.
            let frozen: &CausalLM = model;
            let results: Vec<Result<(f64, Vec<Option<Vec<f64>>>)>> = batch
                .par_iter()
                .map(|&wi| {
                    let tokens = &windows[wi];
                    let mut g = Graph::new();
                    let vars = frozen.register(&mut g);
                    let mask = vec![true; tokens.len()];
                    let loss =
                        frozen.lm_loss_vars(&mut g, &vars, &InjectionVars::None, tokens, &mask)?;
                    let loss_val = g.value(loss)[0];
                    g.backward(loss)?;
                    let grads = vars
                        .ordered()
                        .iter()
                        .map(|&v| g.grad(v).map(<[f64]>::to_vec))
                        .collect();
                    Ok((loss_val, grads))
                })
                .collect();

            let mut params = model.named_params_mut();
            for (_, p) in params.iter_mut() {
                p.clear_grad();
            }
            let batch_len = batch.len() as f64;
            for result in results {
                let (loss_val, grads) = result?;
                epoch_loss += loss_val;
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
            let mut plist: Vec<&mut crate::numerics::Tensor> =
                params.into_iter().map(|(_, p)| p).collect();
            adam_step(&mut plist, &mut adam)?;
        }

        let mean = epoch_loss / windows.len() as f64;
        curve.epoch_mean_loss.push(mean);
        if hp.target_loss.is_some_and(|t| mean < t) {
            break;
        }
    }

    model.set_trainable(false);
    Ok(curve)
}
