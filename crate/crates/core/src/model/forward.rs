//! Graph (autodiff) forward pass.

use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor, Var, LAYER_NORM_EPS};

use super::{CausalLM, PromptInjection};

/// Additive score for masked attention slots. Finite so that max-subtracted
/// softmax stays NaN-free; exp(-1e30 - max) underflows to exactly 0.
const MASK_OFF: f64 = -1e30;

/// Graph handles for every model parameter, in `named_params` order.
pub struct ModelVars {
    pub tok_emb: Var,
    pub pos_emb: Var,
    pub layers: Vec<LayerVars>,
    pub lnf_gain: Var,
    pub lnf_bias: Var,
}

pub struct LayerVars {
    pub ln1_gain: Var,
    pub ln1_bias: Var,
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
    pub ln2_gain: Var,
    pub ln2_bias: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl ModelVars {
    /// Flat view matching `CausalLM::named_params` order.
    pub fn ordered(&self) -> Vec<Var> {
        let mut out = vec![self.tok_emb, self.pos_emb];
        for l in &self.layers {
            out.extend([
                l.ln1_gain, l.ln1_bias, l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo,
                l.ln2_gain, l.ln2_bias, l.w1, l.b1, l.w2, l.b2,
            ]);
        }
        out.push(self.lnf_gain);
        out.push(self.lnf_bias);
        out
    }
}

/// On-graph injection. Built from constants for evaluation or from soft
/// prompt leaves during training.
pub enum InjectionVars {
    None,
    PrefixKv(Vec<(Var, Var)>),
    PromptEmb(Var),
}

impl InjectionVars {
    fn len(&self, g: &Graph) -> usize {
        match self {
            InjectionVars::None => 0,
            InjectionVars::PrefixKv(layers) => layers.first().map_or(0, |(k, _)| g.shape(*k)[0]),
            InjectionVars::PromptEmb(e) => g.shape(*e)[0],
        }
    }
}

impl CausalLM {
    /// Register every parameter on the graph as a leaf. Whether gradients
    /// flow follows each tensor's `requires_grad` flag.
    pub fn register(&self, g: &mut Graph) -> ModelVars {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerVars {
                ln1_gain: g.leaf(&l.ln1_gain),
                ln1_bias: g.leaf(&l.ln1_bias),
                wq: g.leaf(&l.wq),
                bq: g.leaf(&l.bq),
                wk: g.leaf(&l.wk),
                bk: g.leaf(&l.bk),
                wv: g.leaf(&l.wv),
                bv: g.leaf(&l.bv),
                wo: g.leaf(&l.wo),
                bo: g.leaf(&l.bo),
                ln2_gain: g.leaf(&l.ln2_gain),
                ln2_bias: g.leaf(&l.ln2_bias),
                w1: g.leaf(&l.w1),
                b1: g.leaf(&l.b1),
                w2: g.leaf(&l.w2),
                b2: g.leaf(&l.b2),
            })
            .collect();
        ModelVars {
            tok_emb: g.leaf(&self.tok_emb),
            pos_emb: g.leaf(&self.pos_emb),
            layers,
            lnf_gain: g.leaf(&self.lnf_gain),
            lnf_bias: g.leaf(&self.lnf_bias),
        }
    }

    /// Lift a materialized injection onto the graph as constants. Empty
    /// injections normalize to `InjectionVars::None`.
    pub fn register_injection(&self, g: &mut Graph, inj: &PromptInjection) -> Result<InjectionVars> {
        inj.validate(&self.config)?;
        if inj.is_empty() {
            return Ok(InjectionVars::None);
        }
        Ok(match inj {
            PromptInjection::None => InjectionVars::None,
            PromptInjection::PrefixKv(layers) => InjectionVars::PrefixKv(
                layers
                    .iter()
                    .map(|(k, v)| (g.constant(k), g.constant(v)))
                    .collect(),
            ),
            PromptInjection::PromptEmb(e) => InjectionVars::PromptEmb(g.constant(e)),
        })
    }

    /// Full forward on the graph: logits for each of the T token positions.
    ///
    /// Position t attends to positions <= t plus any injected prefix slots.
    /// Injected rows carry no positional embedding and token positions stay
    /// 0..T regardless of injection, so a trained injection steers the
    /// model without displacing the positional patterns it memorized. With
    /// `PromptEmb` the injected rows run through the stack ahead of the
    /// tokens and their logit rows are dropped.
    pub fn forward_vars(
        &self,
        g: &mut Graph,
        vars: &ModelVars,
        inj: &InjectionVars,
        tokens: &[u32],
    ) -> Result<Var> {
        let t_len = tokens.len();
        if t_len == 0 {
            return Err(Error::Contract("forward: empty token sequence".into()));
        }
        let l = inj.len(g);
        if t_len + l > self.config.max_seq_len {
            return Err(Error::Capacity {
                needed: t_len + l,
                max: self.config.max_seq_len,
            });
        }

        let positions: Vec<u32> = (0..t_len as u32).collect();
        let tok_rows = g.embedding(vars.tok_emb, tokens)?;
        let pos_rows = g.embedding(vars.pos_emb, &positions)?;
        let mut x = g.add(tok_rows, pos_rows)?;
        if let InjectionVars::PromptEmb(e) = inj {
            x = g.concat_rows(*e, x)?;
        }

        let rows = g.shape(x)[0];
        let prefix = match inj {
            InjectionVars::PrefixKv(_) => l,
            _ => 0,
        };
        // Causal mask: query row i may see the prefix slots plus keys up to
        // its own position.
        let mask = {
            let width = prefix + rows;
            let mut m = vec![MASK_OFF; rows * width];
            for i in 0..rows {
                for j in 0..=(prefix + i) {
                    m[i * width + j] = 0.0;
                }
            }
            g.constant_vec(&[rows, width], m)
        };

        let scale = 1.0 / (self.config.head_dim() as f64).sqrt();
        let heads = self.config.n_heads;
        let dh = self.config.head_dim();

        for (li, lv) in vars.layers.iter().enumerate() {
            let h = g.layer_norm(x, lv.ln1_gain, lv.ln1_bias, LAYER_NORM_EPS)?;
            let q0 = g.matmul(h, lv.wq)?;
            let q = g.add_row(q0, lv.bq)?;
            let k0 = g.matmul(h, lv.wk)?;
            let mut k = g.add_row(k0, lv.bk)?;
            let v0 = g.matmul(h, lv.wv)?;
            let mut v = g.add_row(v0, lv.bv)?;
            if let InjectionVars::PrefixKv(prefixes) = inj {
                let (pk, pv) = prefixes[li];
                k = g.concat_rows(pk, k)?;
                v = g.concat_rows(pv, v)?;
            }

            let mut head_outputs = Vec::with_capacity(heads);
            for hd in 0..heads {
                let qh = g.slice_cols(q, hd * dh, (hd + 1) * dh)?;
                let kh = g.slice_cols(k, hd * dh, (hd + 1) * dh)?;
                let vh = g.slice_cols(v, hd * dh, (hd + 1) * dh)?;
                let scores = g.matmul_nt(qh, kh)?;
                let scaled = g.scale(scores, scale);
                let masked = g.add(scaled, mask)?;
                let attn = g.softmax_rows(masked);
                head_outputs.push(g.matmul(attn, vh)?);
            }
            let ctx = g.concat_cols(&head_outputs)?;
            let proj0 = g.matmul(ctx, lv.wo)?;
            let proj = g.add_row(proj0, lv.bo)?;
            x = g.add(x, proj)?;

            let h2 = g.layer_norm(x, lv.ln2_gain, lv.ln2_bias, LAYER_NORM_EPS)?;
            let ff0 = g.matmul(h2, lv.w1)?;
            let ff1 = g.add_row(ff0, lv.b1)?;
            let ff2 = g.gelu(ff1);
            let ff3 = g.matmul(ff2, lv.w2)?;
            let ff = g.add_row(ff3, lv.b2)?;
            x = g.add(x, ff)?;
        }

        let mut hidden = g.layer_norm(x, vars.lnf_gain, vars.lnf_bias, LAYER_NORM_EPS)?;
        if matches!(inj, InjectionVars::PromptEmb(_)) {
            hidden = g.slice_rows(hidden, l, l + t_len)?;
        }
        // Tied output projection.
        g.matmul_nt(hidden, vars.tok_emb)
    }

    /// Convenience forward with frozen parameters: returns the T x V logits
    /// as a plain tensor.
    pub fn forward(&self, tokens: &[u32], inj: &PromptInjection) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.register(&mut g);
        let iv = self.register_injection(&mut g, inj)?;
        let logits = self.forward_vars(&mut g, &vars, &iv, tokens)?;
        Tensor::from_vec(g.shape(logits), g.value(logits).to_vec())
    }

    /// Next-token cross-entropy over masked-in target positions, on-graph.
    ///
    /// `target_mask[t]` marks token position `t` (for `t >= 1`) as a
    /// prediction target; the loss reads the logit row at `t - 1`.
    pub fn lm_loss_vars(
        &self,
        g: &mut Graph,
        vars: &ModelVars,
        inj: &InjectionVars,
        tokens: &[u32],
        target_mask: &[bool],
    ) -> Result<Var> {
        if tokens.len() < 2 {
            return Err(Error::Contract(format!(
                "lm_loss needs at least 2 tokens, got {}",
                tokens.len()
            )));
        }
        if target_mask.len() != tokens.len() {
            return Err(Error::Contract(format!(
                "lm_loss: {} tokens vs {} mask flags",
                tokens.len(),
                target_mask.len()
            )));
        }
        let logits = self.forward_vars(g, vars, inj, &tokens[..tokens.len() - 1])?;
        let targets = &tokens[1..];
        let mask = &target_mask[1..];
        g.cross_entropy(logits, targets, mask)
    }

    /// Scalar LM loss with frozen parameters.
    pub fn lm_loss(&self, tokens: &[u32], target_mask: &[bool]) -> Result<f64> {
        let mut g = Graph::new();
        let vars = self.register(&mut g);
        let loss = self.lm_loss_vars(&mut g, &vars, &InjectionVars::None, tokens, target_mask)?;
        Ok(g.value(loss)[0])
    }
}
