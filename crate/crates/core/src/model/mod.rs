//! Decoder-only causal transformer with continuous-prompt injection hooks.
//!
//! Pre-norm blocks, GELU feed-forward, learned positional embeddings, and
//! an output projection tied to the token embedding. Two forward paths
//! exist: the autodiff graph (training, gradient checks) and a KV-cache
//! incremental path (generation, perplexity). They share the same kernels
//! and agree bit-for-bit; `infer` tests assert that.

mod forward;
mod infer;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::{seeded_rng, Fingerprint};

pub use forward::{InjectionVars, ModelVars};
pub use infer::InferSession;
pub use train::{train_lm, LmHyperparams, TrainingCurve};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Toy default: trains to memorization on one CPU core in minutes.
    pub fn toy(vocab_size: usize, seed: u64) -> Self {
        Self {
            vocab_size,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            max_seq_len: 256,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.vocab_size < 2 {
            problems.push(format!("vocab_size must be >= 2, got {}", self.vocab_size));
        }
        if self.max_seq_len < 2 {
            problems.push(format!("max_seq_len must be >= 2, got {}", self.max_seq_len));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 || self.d_ff == 0 {
            problems.push("d_model, n_heads, n_layers, d_ff must all be positive".into());
        } else if self.d_model % self.n_heads != 0 {
            problems.push(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Total parameter count, a pure function of the config.
    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let per_layer = 2 * d            // ln1
            + 4 * d * d + 4 * d          // attention projections + biases
            + 2 * d                      // ln2
            + d * self.d_ff + self.d_ff  // ff in
            + self.d_ff * d + d; // ff out
        self.vocab_size * d              // token embedding (tied output)
            + self.max_seq_len * d       // positions
            + self.n_layers * per_layer
            + 2 * d // final ln
    }
}

#[derive(Clone, Debug)]
pub struct LayerWeights {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

#[derive(Clone, Debug)]
pub struct CausalLM {
    config: ModelConfig,
    pub(crate) tok_emb: Tensor,
    pub(crate) pos_emb: Tensor,
    pub(crate) layers: Vec<LayerWeights>,
    pub(crate) lnf_gain: Tensor,
    pub(crate) lnf_bias: Tensor,
}

/// Continuous prompt state injected into a forward pass.
///
/// A zero-length injection is represented as `None`; the empty-injection
/// identity is then structural rather than numerical.
#[derive(Clone, Debug)]
pub enum PromptInjection {
    None,
    /// Per-layer (keys, values), each L x d_model.
    PrefixKv(Vec<(Tensor, Tensor)>),
    /// L x d_model rows prepended to the embedded input before layer 0.
    PromptEmb(Tensor),
}

impl PromptInjection {
    pub fn len(&self) -> usize {
        match self {
            PromptInjection::None => 0,
            PromptInjection::PrefixKv(layers) => layers.first().map_or(0, |(k, _)| k.rows()),
            PromptInjection::PromptEmb(e) => e.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        match self {
            PromptInjection::None => Ok(()),
            PromptInjection::PrefixKv(layers) => {
                if layers.len() != config.n_layers {
                    return Err(Error::Contract(format!(
                        "prefix injection supplies {} layers, model has {}",
                        layers.len(),
                        config.n_layers
                    )));
                }
                let l = self.len();
                for (k, v) in layers {
                    if k.shape() != [l, config.d_model] || v.shape() != [l, config.d_model] {
                        return Err(Error::ShapeMismatch {
                            op: "prefix_kv",
                            lhs: k.shape().to_vec(),
                            rhs: vec![l, config.d_model],
                        });
                    }
                }
                Ok(())
            }
            PromptInjection::PromptEmb(e) => {
                if e.cols() != config.d_model {
                    return Err(Error::ShapeMismatch {
                        op: "prompt_emb",
                        lhs: e.shape().to_vec(),
                        rhs: vec![e.rows(), config.d_model],
                    });
                }
                Ok(())
            }
        }
    }
}

impl CausalLM {
    /// Fresh model with Normal(0, 0.02) weights from the config seed.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let d = config.d_model;
        let std = 0.02;
        let mut w = |rows: usize, cols: usize| Tensor::randn(&[rows, cols], std, &mut rng);

        let tok_emb = w(config.vocab_size, d);
        let pos_emb = w(config.max_seq_len, d);
        let mut layers = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            layers.push(LayerWeights {
                ln1_gain: Tensor::filled(&[d], 1.0),
                ln1_bias: Tensor::zeros(&[d]),
                wq: w(d, d),
                bq: Tensor::zeros(&[d]),
                wk: w(d, d),
                bk: Tensor::zeros(&[d]),
                wv: w(d, d),
                bv: Tensor::zeros(&[d]),
                wo: w(d, d),
                bo: Tensor::zeros(&[d]),
                ln2_gain: Tensor::filled(&[d], 1.0),
                ln2_bias: Tensor::zeros(&[d]),
                w1: w(d, config.d_ff),
                b1: Tensor::zeros(&[config.d_ff]),
                w2: w(config.d_ff, d),
                b2: Tensor::zeros(&[d]),
            });
        }
        Ok(Self {
            config,
            tok_emb,
            pos_emb,
            layers,
            lnf_gain: Tensor::filled(&[d], 1.0),
            lnf_bias: Tensor::zeros(&[d]),
        })
    }

    /// Rebuild a model from a complete named parameter set (checkpoint
    /// loading). Every expected tensor must be present with its exact
    /// shape; extras are rejected.
    pub fn from_named_params(config: ModelConfig, params: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(config)?;
        let mut map: std::collections::HashMap<String, Tensor> = params.into_iter().collect();
        for (name, slot) in model.named_params_mut() {
            let t = map
                .remove(&name)
                .ok_or_else(|| Error::Contract(format!("missing tensor {name:?}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::ShapeMismatch {
                    op: "from_named_params",
                    lhs: t.shape().to_vec(),
                    rhs: slot.shape().to_vec(),
                });
            }
            *slot = t;
        }
        if !map.is_empty() {
            let mut extra: Vec<&String> = map.keys().collect();
            extra.sort();
            return Err(Error::Contract(format!("unexpected tensors: {extra:?}")));
        }
        model.set_trainable(false);
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Stable (name, tensor) traversal; checkpoint and optimizer order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("tok_emb".into(), &self.tok_emb),
            ("pos_emb".into(), &self.pos_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (suffix, t) in [
                ("ln1_gain", &l.ln1_gain),
                ("ln1_bias", &l.ln1_bias),
                ("wq", &l.wq),
                ("bq", &l.bq),
                ("wk", &l.wk),
                ("bk", &l.bk),
                ("wv", &l.wv),
                ("bv", &l.bv),
                ("wo", &l.wo),
                ("bo", &l.bo),
                ("ln2_gain", &l.ln2_gain),
                ("ln2_bias", &l.ln2_bias),
                ("w1", &l.w1),
                ("b1", &l.b1),
                ("w2", &l.w2),
                ("b2", &l.b2),
            ] {
                out.push((format!("layer{i}.{suffix}"), t));
            }
        }
        out.push(("final_ln_gain".into(), &self.lnf_gain));
        out.push(("final_ln_bias".into(), &self.lnf_bias));
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("tok_emb".into(), &mut self.tok_emb),
            ("pos_emb".into(), &mut self.pos_emb),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (suffix, t) in [
                ("ln1_gain", &mut l.ln1_gain),
                ("ln1_bias", &mut l.ln1_bias),
                ("wq", &mut l.wq),
                ("bq", &mut l.bq),
                ("wk", &mut l.wk),
                ("bk", &mut l.bk),
                ("wv", &mut l.wv),
                ("bv", &mut l.bv),
                ("wo", &mut l.wo),
                ("bo", &mut l.bo),
                ("ln2_gain", &mut l.ln2_gain),
                ("ln2_bias", &mut l.ln2_bias),
                ("w1", &mut l.w1),
                ("b1", &mut l.b1),
                ("w2", &mut l.w2),
                ("b2", &mut l.b2),
            ] {
                out.push((format!("layer{i}.{suffix}"), t));
            }
        }
        out.push(("final_ln_gain".into(), &mut self.lnf_gain));
        out.push(("final_ln_bias".into(), &mut self.lnf_bias));
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// 64-bit hash over every parameter byte, in traversal order. Frozen
    /// models keep this invariant across generation, scoring, and
    /// soft-prompt training.
    pub fn fingerprint(&self) -> u64 {
        let mut fp = Fingerprint::new();
        for (name, t) in self.named_params() {
            fp.update_bytes(name.as_bytes());
            t.fingerprint_into(&mut fp);
        }
        fp.finish()
    }

    /// Toggle whether parameters participate in gradient computation.
    pub fn set_trainable(&mut self, trainable: bool) {
        for (_, t) in self.named_params_mut() {
            t.set_requires_grad(trainable);
        }
    }
}
