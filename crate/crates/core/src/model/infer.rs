//! Incremental (KV-cache) forward path: greedy decoding and perplexity.
//!
//! Every per-row computation mirrors the graph forward through the shared
//! kernels, so logits from the two paths are bit-identical. Attention here
//! simply never scores masked positions; in the graph they contribute an
//! exact 0.0 after softmax, which the matmul kernels skip, so the sums the
//! two paths perform are the same sums in the same order.

use crate::error::{Error, Result};
use crate::numerics::{kernels, LAYER_NORM_EPS};

use super::{CausalLM, PromptInjection};

pub struct InferSession<'m> {
    model: &'m CausalLM,
    /// Per layer, rows of keys/values, d_model wide, appended as fed.
    k_cache: Vec<Vec<f64>>,
    v_cache: Vec<Vec<f64>>,
    cache_rows: usize,
    /// Rows the injection occupies: attention slots for PrefixKv, sequence
    /// slots for PromptEmb.
    injected: usize,
    /// Next sequence position (PromptEmb shifts token positions up).
    next_pos: usize,
    tokens_fed: usize,
}

impl CausalLM {
    /// Open an incremental session with the given injection applied.
    pub fn start_session(&self, inj: &PromptInjection) -> Result<InferSession<'_>> {
        inj.validate(self.config())?;
        let n_layers = self.config().n_layers;
        let mut session = InferSession {
            model: self,
            k_cache: vec![Vec::new(); n_layers],
            v_cache: vec![Vec::new(); n_layers],
            cache_rows: 0,
            injected: inj.len(),
            next_pos: 0,
            tokens_fed: 0,
        };
        match inj {
            PromptInjection::None => {}
            PromptInjection::PrefixKv(layers) => {
                for (li, (k, v)) in layers.iter().enumerate() {
                    session.k_cache[li].extend_from_slice(k.data());
                    session.v_cache[li].extend_from_slice(v.data());
                }
                session.cache_rows = inj.len();
            }
            PromptInjection::PromptEmb(rows) => {
                // Injected rows are position-free; the tokens that follow
                // still start at position 0.
                let d = self.config().d_model;
                for r in 0..rows.rows() {
                    let x = rows.data()[r * d..(r + 1) * d].to_vec();
                    session.advance_row(x, false);
                }
            }
        }
        Ok(session)
    }
}

impl InferSession<'_> {
    /// Total sequence slots consumed (injection + fed tokens).
    pub fn occupied(&self) -> usize {
        self.injected + self.tokens_fed
    }

    pub fn remaining_capacity(&self) -> usize {
        self.model.config().max_seq_len - self.occupied()
    }

    /// Feed one token; returns the logits row for its position.
    pub fn feed(&mut self, token: u32) -> Result<Vec<f64>> {
        let cfg = self.model.config();
        if token as usize >= cfg.vocab_size {
            return Err(Error::OutOfVocab {
                id: token,
                vocab: cfg.vocab_size,
            });
        }
        if self.occupied() + 1 > cfg.max_seq_len {
            return Err(Error::Capacity {
                needed: self.occupied() + 1,
                max: cfg.max_seq_len,
            });
        }
        let d = cfg.d_model;
        let te = &self.model.tok_emb.data()[token as usize * d..(token as usize + 1) * d];
        let pe = &self.model.pos_emb.data()[self.next_pos * d..(self.next_pos + 1) * d];
        let x: Vec<f64> = te.iter().zip(pe).map(|(a, b)| a + b).collect();
        self.next_pos += 1;
        self.tokens_fed += 1;
        Ok(self.advance_row(x, true).expect("logits requested"))
    }

    fn advance_row(&mut self, mut x: Vec<f64>, want_logits: bool) -> Option<Vec<f64>> {
        let cfg = self.model.config();
        let d = cfg.d_model;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        for (li, lw) in self.model.layers.iter().enumerate() {
            let mut h = vec![0.0; d];
            kernels::layer_norm_row(&mut h, &x, lw.ln1_gain.data(), lw.ln1_bias.data(), LAYER_NORM_EPS);

            let mut q = vec![0.0; d];
            kernels::matvec_row(&mut q, &h, lw.wq.data(), d, d);
            for (qi, bi) in q.iter_mut().zip(lw.bq.data()) {
                *qi += bi;
            }
            let mut k = vec![0.0; d];
            kernels::matvec_row(&mut k, &h, lw.wk.data(), d, d);
            for (ki, bi) in k.iter_mut().zip(lw.bk.data()) {
                *ki += bi;
            }
            let mut v = vec![0.0; d];
            kernels::matvec_row(&mut v, &h, lw.wv.data(), d, d);
            for (vi, bi) in v.iter_mut().zip(lw.bv.data()) {
                *vi += bi;
            }

            self.k_cache[li].extend_from_slice(&k);
            self.v_cache[li].extend_from_slice(&v);
            let visible = self.cache_rows + 1;

            let mut ctx = vec![0.0; d];
            for hd in 0..cfg.n_heads {
                let qh = &q[hd * dh..(hd + 1) * dh];
                let mut scores = Vec::with_capacity(visible);
                for j in 0..visible {
                    let kr = &self.k_cache[li][j * d + hd * dh..j * d + (hd + 1) * dh];
                    scores.push(kernels::dot(qh, kr) * scale);
                }
                kernels::softmax_row(&mut scores);
                let ctx_h = &mut ctx[hd * dh..(hd + 1) * dh];
                for (j, &w) in scores.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let vr = &self.v_cache[li][j * d + hd * dh..j * d + (hd + 1) * dh];
                    for (c, &vv) in ctx_h.iter_mut().zip(vr) {
                        *c += w * vv;
                    }
                }
            }

            let mut proj = vec![0.0; d];
            kernels::matvec_row(&mut proj, &ctx, lw.wo.data(), d, d);
            for ((xi, pi), bi) in x.iter_mut().zip(&proj).zip(lw.bo.data()) {
                *xi += pi + bi;
            }

            let mut h2 = vec![0.0; d];
            kernels::layer_norm_row(&mut h2, &x, lw.ln2_gain.data(), lw.ln2_bias.data(), LAYER_NORM_EPS);
            let mut ff = vec![0.0; cfg.d_ff];
            kernels::matvec_row(&mut ff, &h2, lw.w1.data(), d, cfg.d_ff);
            for (fi, bi) in ff.iter_mut().zip(lw.b1.data()) {
                *fi = kernels::gelu(*fi + bi);
            }
            let mut ff2 = vec![0.0; d];
            kernels::matvec_row(&mut ff2, &ff, lw.w2.data(), cfg.d_ff, d);
            for ((xi, fi), bi) in x.iter_mut().zip(&ff2).zip(lw.b2.data()) {
                *xi += fi + bi;
            }
        }
        self.cache_rows += 1;

        if !want_logits {
            return None;
        }
        let mut hidden = vec![0.0; d];
        kernels::layer_norm_row(
            &mut hidden,
            &x,
            self.model.lnf_gain.data(),
            self.model.lnf_bias.data(),
            LAYER_NORM_EPS,
        );
        let v_size = cfg.vocab_size;
        let emb = self.model.tok_emb.data();
        let mut logits = Vec::with_capacity(v_size);
        for t in 0..v_size {
            logits.push(kernels::dot(&hidden, &emb[t * d..(t + 1) * d]));
        }
        Some(logits)
    }
}

impl CausalLM {
    /// Deterministic greedy decoding. Appends argmax tokens (ties break
    /// toward the lowest token id) until the stop token would be emitted,
    /// `max_new` tokens have been added, or capacity runs out. Returns
    /// prompt plus generation; the stop token itself is not appended.
    pub fn generate_greedy(
        &self,
        prompt_tokens: &[u32],
        inj: &PromptInjection,
        max_new: usize,
        stop: u32,
    ) -> Result<Vec<u32>> {
        if prompt_tokens.is_empty() {
            return Err(Error::Contract("generate_greedy: empty prompt".into()));
        }
        let mut session = self.start_session(inj)?;
        let mut logits = Vec::new();
        for &t in prompt_tokens {
            logits = session.feed(t)?;
        }
        let mut out = prompt_tokens.to_vec();
        for _ in 0..max_new {
            let next = argmax(&logits);
            if next == stop {
                break;
            }
            out.push(next);
            if session.remaining_capacity() == 0 {
                break;
            }
            logits = session.feed(next)?;
        }
        Ok(out)
    }

    /// exp(mean next-token negative log-likelihood) over positions 1..T-1.
    pub fn perplexity(&self, tokens: &[u32], inj: &PromptInjection) -> Result<f64> {
        if tokens.len() < 2 {
            return Err(Error::Contract(format!(
                "perplexity needs at least 2 tokens, got {}",
                tokens.len()
            )));
        }
        let mut session = self.start_session(inj)?;
        let mut total_nll = 0.0;
        let mut logits = session.feed(tokens[0])?;
        for &next in &tokens[1..] {
            if next as usize >= self.config().vocab_size {
                return Err(Error::OutOfVocab {
                    id: next,
                    vocab: self.config().vocab_size,
                });
            }
            total_nll += kernels::log_sum_exp(&logits) - logits[next as usize];
            logits = session.feed(next)?;
        }
        Ok((total_nll / (tokens.len() - 1) as f64).exp())
    }
}

fn argmax(row: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}
