//! Continuous-prompt methods trained against a frozen model.
//!
//! Three parameterizations of the injected prompt state:
//!
//! - prefix tuning: trainable key/value slots for every attention layer;
//! - prompt tuning: trainable embedding rows prepended to the input;
//! - p-tuning: embedding rows produced by a small feed-forward
//!   reparameterizer (two layers, tanh, hidden width 2 * d_model) from a
//!   free seed matrix.
//!
//! Zero-length prompts materialize to no injection at all, so the L = 0
//! baseline is the plain textual prompt by construction.

mod ensemble;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InjectionVars, ModelConfig, PromptInjection};
use crate::numerics::{kernels, Graph, Tensor, Var};
use crate::rng::{seeded_rng, Fingerprint};

pub use ensemble::{activation_ensemble, candidate_entity, EnsemblePerplexityMode};
pub use train::{train_soft_prompt, SoftPromptHyperparams, SoftPromptTrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SoftPromptMethod {
    PrefixTuning,
    PromptTuning,
    PTuning,
}

impl SoftPromptMethod {
    pub const ALL: [SoftPromptMethod; 3] = [
        SoftPromptMethod::PrefixTuning,
        SoftPromptMethod::PromptTuning,
        SoftPromptMethod::PTuning,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SoftPromptMethod::PrefixTuning => "prefix-tuning",
            SoftPromptMethod::PromptTuning => "prompt-tuning",
            SoftPromptMethod::PTuning => "p-tuning",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prefix-tuning" => Ok(SoftPromptMethod::PrefixTuning),
            "prompt-tuning" => Ok(SoftPromptMethod::PromptTuning),
            "p-tuning" => Ok(SoftPromptMethod::PTuning),
            other => Err(Error::Config(format!(
                "unknown soft-prompt method {other:?} (expected prefix-tuning, prompt-tuning, or p-tuning)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub steps: usize,
    pub lr: f64,
    pub dataset_fingerprint: u64,
}

#[derive(Clone, Debug)]
enum Params {
    /// L = 0: nothing to train, injection is the identity.
    Empty,
    PrefixKv(Vec<(Tensor, Tensor)>),
    PromptEmb(Tensor),
    Reparam {
        seed_matrix: Tensor,
        w1: Tensor,
        b1: Tensor,
        w2: Tensor,
        b2: Tensor,
    },
}

#[derive(Clone, Debug)]
pub struct SoftPrompt {
    method: SoftPromptMethod,
    length: usize,
    params: Params,
    pub training_meta: Option<TrainingMeta>,
}

impl SoftPrompt {
    /// Initialize with Normal(0, 0.02) parameters from the seed.
    pub fn init(method: SoftPromptMethod, length: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if length + 2 > config.max_seq_len {
            return Err(Error::Capacity {
                needed: length + 2,
                max: config.max_seq_len,
            });
        }
        if length == 0 {
            return Ok(Self {
                method,
                length,
                params: Params::Empty,
                training_meta: None,
            });
        }
        let mut rng = seeded_rng(seed);
        let d = config.d_model;
        let std = 0.02;
        let params = match method {
            SoftPromptMethod::PrefixTuning => Params::PrefixKv(
                (0..config.n_layers)
                    .map(|_| {
                        (
                            Tensor::randn(&[length, d], std, &mut rng).with_requires_grad(),
                            Tensor::randn(&[length, d], std, &mut rng).with_requires_grad(),
                        )
                    })
                    .collect(),
            ),
            SoftPromptMethod::PromptTuning => {
                Params::PromptEmb(Tensor::randn(&[length, d], std, &mut rng).with_requires_grad())
            }
            SoftPromptMethod::PTuning => Params::Reparam {
                seed_matrix: Tensor::randn(&[length, d], std, &mut rng).with_requires_grad(),
                w1: Tensor::randn(&[d, 2 * d], std, &mut rng).with_requires_grad(),
                b1: Tensor::randn(&[2 * d], std, &mut rng).with_requires_grad(),
                w2: Tensor::randn(&[2 * d, d], std, &mut rng).with_requires_grad(),
                b2: Tensor::randn(&[d], std, &mut rng).with_requires_grad(),
            },
        };
        Ok(Self {
            method,
            length,
            params,
            training_meta: None,
        })
    }

    /// Rebuild from a named parameter set (checkpoint loading). Shapes are
    /// cross-checked against the method's layout for the stated length.
    pub fn from_named_params(
        method: SoftPromptMethod,
        length: usize,
        params: Vec<(String, Tensor)>,
    ) -> Result<Self> {
        let mut map: std::collections::HashMap<String, Tensor> = params.into_iter().collect();
        let n_names = map.len();
        let mut take = |name: &str| -> Result<Tensor> {
            map.remove(name)
                .map(Tensor::with_requires_grad)
                .ok_or_else(|| Error::Contract(format!("missing tensor {name:?}")))
        };
        let params = if length == 0 {
            Params::Empty
        } else {
            match method {
                SoftPromptMethod::PrefixTuning => {
                    let n_layers = n_names / 2;
                    let mut layers = Vec::with_capacity(n_layers);
                    for i in 0..n_layers {
                        let k = take(&format!("layer{i}.prefix_k"))?;
                        let v = take(&format!("layer{i}.prefix_v"))?;
                        if k.rows() != length || v.rows() != length || k.shape() != v.shape() {
                            return Err(Error::ShapeMismatch {
                                op: "soft_prompt_load",
                                lhs: k.shape().to_vec(),
                                rhs: v.shape().to_vec(),
                            });
                        }
                        layers.push((k, v));
                    }
                    if layers.is_empty() {
                        return Err(Error::Contract("prefix checkpoint holds no layers".into()));
                    }
                    Params::PrefixKv(layers)
                }
                SoftPromptMethod::PromptTuning => {
                    let e = take("prompt_emb")?;
                    if e.rows() != length {
                        return Err(Error::Contract(format!(
                            "prompt_emb has {} rows, manifest says {length}",
                            e.rows()
                        )));
                    }
                    Params::PromptEmb(e)
                }
                SoftPromptMethod::PTuning => Params::Reparam {
                    seed_matrix: take("seed_matrix")?,
                    w1: take("reparam_w1")?,
                    b1: take("reparam_b1")?,
                    w2: take("reparam_w2")?,
                    b2: take("reparam_b2")?,
                },
            }
        };
        if !map.is_empty() {
            let mut extra: Vec<&String> = map.keys().collect();
            extra.sort();
            return Err(Error::Contract(format!("unexpected tensors: {extra:?}")));
        }
        Ok(Self {
            method,
            length,
            params,
            training_meta: None,
        })
    }

    pub fn method(&self) -> SoftPromptMethod {
        self.method
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        match &self.params {
            Params::Empty => Vec::new(),
            Params::PrefixKv(layers) => layers
                .iter()
                .enumerate()
                .flat_map(|(i, (k, v))| {
                    [(format!("layer{i}.prefix_k"), k), (format!("layer{i}.prefix_v"), v)]
                })
                .collect(),
            Params::PromptEmb(e) => vec![("prompt_emb".into(), e)],
            Params::Reparam {
                seed_matrix,
                w1,
                b1,
                w2,
                b2,
            } => vec![
                ("seed_matrix".into(), seed_matrix),
                ("reparam_w1".into(), w1),
                ("reparam_b1".into(), b1),
                ("reparam_w2".into(), w2),
                ("reparam_b2".into(), b2),
            ],
        }
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        match &mut self.params {
            Params::Empty => Vec::new(),
            Params::PrefixKv(layers) => layers
                .iter_mut()
                .enumerate()
                .flat_map(|(i, (k, v))| {
                    [(format!("layer{i}.prefix_k"), k), (format!("layer{i}.prefix_v"), v)]
                })
                .collect(),
            Params::PromptEmb(e) => vec![("prompt_emb".into(), e)],
            Params::Reparam {
                seed_matrix,
                w1,
                b1,
                w2,
                b2,
            } => vec![
                ("seed_matrix".into(), seed_matrix),
                ("reparam_w1".into(), w1),
                ("reparam_b1".into(), b1),
                ("reparam_w2".into(), w2),
                ("reparam_b2".into(), b2),
            ],
        }
    }

    pub fn fingerprint(&self) -> u64 {
        let mut fp = Fingerprint::new();
        fp.update_bytes(self.method.name().as_bytes());
        for (name, t) in self.named_params() {
            fp.update_bytes(name.as_bytes());
            t.fingerprint_into(&mut fp);
        }
        fp.finish()
    }

    /// Produce the concrete injection. P-tuning runs its reparameterizer
    /// forward; the arithmetic matches the on-graph training path exactly.
    pub fn materialize(&self) -> PromptInjection {
        match &self.params {
            Params::Empty => PromptInjection::None,
            Params::PrefixKv(layers) => PromptInjection::PrefixKv(
                layers.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            ),
            Params::PromptEmb(e) => PromptInjection::PromptEmb(e.clone()),
            Params::Reparam {
                seed_matrix,
                w1,
                b1,
                w2,
                b2,
            } => {
                let l = seed_matrix.rows();
                let d = seed_matrix.cols();
                let hidden_w = w1.cols();
                let mut hidden = vec![0.0; l * hidden_w];
                kernels::matmul(&mut hidden, seed_matrix.data(), w1.data(), l, d, hidden_w);
                for row in 0..l {
                    for j in 0..hidden_w {
                        let cell = &mut hidden[row * hidden_w + j];
                        *cell = (*cell + b1.data()[j]).tanh();
                    }
                }
                let mut out = vec![0.0; l * d];
                kernels::matmul(&mut out, &hidden, w2.data(), l, hidden_w, d);
                for row in 0..l {
                    for j in 0..d {
                        out[row * d + j] += b2.data()[j];
                    }
                }
                PromptInjection::PromptEmb(
                    Tensor::from_vec(&[l, d], out).expect("reparam output shape"),
                )
            }
        }
    }

    /// Register trainable parameters on a graph and build the injection
    /// vars from them (p-tuning's reparameterizer runs on-graph so its
    /// weights receive gradients).
    pub fn register_trainable(&self, g: &mut Graph) -> (Vec<Var>, InjectionVars) {
        match &self.params {
            Params::Empty => (Vec::new(), InjectionVars::None),
            Params::PrefixKv(layers) => {
                let mut leaves = Vec::with_capacity(layers.len() * 2);
                let mut inj = Vec::with_capacity(layers.len());
                for (k, v) in layers {
                    let kv = g.leaf(k);
                    let vv = g.leaf(v);
                    leaves.push(kv);
                    leaves.push(vv);
                    inj.push((kv, vv));
                }
                (leaves, InjectionVars::PrefixKv(inj))
            }
            Params::PromptEmb(e) => {
                let ev = g.leaf(e);
                (vec![ev], InjectionVars::PromptEmb(ev))
            }
            Params::Reparam {
                seed_matrix,
                w1,
                b1,
                w2,
                b2,
            } => {
                let sv = g.leaf(seed_matrix);
                let w1v = g.leaf(w1);
                let b1v = g.leaf(b1);
                let w2v = g.leaf(w2);
                let b2v = g.leaf(b2);
                let h0 = g.matmul(sv, w1v).expect("reparam shapes");
                let h1 = g.add_row(h0, b1v).expect("reparam shapes");
                let h2 = g.tanh(h1);
                let e0 = g.matmul(h2, w2v).expect("reparam shapes");
                let e = g.add_row(e0, b2v).expect("reparam shapes");
                (vec![sv, w1v, b1v, w2v, b2v], InjectionVars::PromptEmb(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ModelConfig {
        ModelConfig {
            vocab_size: 99,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            max_seq_len: 256,
            seed: 0,
        }
    }

    #[test]
    fn prefix_tuning_param_count_is_exact() {
        let sp = SoftPrompt::init(SoftPromptMethod::PrefixTuning, 5, &config(), 1).unwrap();
        assert_eq!(sp.param_count(), 2 * 2 * 5 * 64);
    }

    #[test]
    fn zero_length_has_no_params_and_identity_injection() {
        for method in SoftPromptMethod::ALL {
            let sp = SoftPrompt::init(method, 0, &config(), 1).unwrap();
            assert_eq!(sp.param_count(), 0);
            assert!(matches!(sp.materialize(), PromptInjection::None));
        }
    }

    #[test]
    fn init_is_deterministic_in_the_seed() {
        for method in SoftPromptMethod::ALL {
            let a = SoftPrompt::init(method, 4, &config(), 9).unwrap();
            let b = SoftPrompt::init(method, 4, &config(), 9).unwrap();
            let c = SoftPrompt::init(method, 4, &config(), 10).unwrap();
            assert_eq!(a.fingerprint(), b.fingerprint());
            assert_ne!(a.fingerprint(), c.fingerprint());
        }
    }

    #[test]
    fn oversized_length_is_rejected() {
        assert!(SoftPrompt::init(SoftPromptMethod::PromptTuning, 256, &config(), 0).is_err());
    }

    #[test]
    fn materialized_shapes_satisfy_injection_invariants() {
        let cfg = config();
        for method in SoftPromptMethod::ALL {
            let sp = SoftPrompt::init(method, 7, &cfg, 3).unwrap();
            let inj = sp.materialize();
            inj.validate(&cfg).unwrap();
            assert_eq!(inj.len(), 7);
        }
    }

    #[test]
    fn ptuning_materialize_matches_graph_reparam() {
        let cfg = config();
        let sp = SoftPrompt::init(SoftPromptMethod::PTuning, 3, &cfg, 5).unwrap();
        let PromptInjection::PromptEmb(direct) = sp.materialize() else {
            panic!("expected prompt embedding")
        };
        let mut g = Graph::new();
        let (_, inj) = sp.register_trainable(&mut g);
        let InjectionVars::PromptEmb(var) = inj else {
            panic!("expected prompt embedding vars")
        };
        assert_eq!(g.value(var), direct.data());
    }
}
