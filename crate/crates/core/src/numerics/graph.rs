//! Reverse-mode automatic differentiation on a dynamic tape.
//!
//! A [`Graph`] is rebuilt for every forward pass. Recording an operation
//! appends a node holding the computed value plus a local-gradient closure;
//! [`Graph::backward`] walks the nodes in reverse creation order (which is a
//! reverse topological order, since an operation can only reference earlier
//! nodes) and accumulates gradients into every leaf that requires them.

use crate::error::{Error, Result};

use super::kernels;
use super::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Local-gradient closure: receives all node values, the output gradient,
/// and an `emit(parent, grad)` sink for the input gradients it produces.
type BackFn = Box<dyn Fn(&NodeValues, &[f64], &mut dyn FnMut(usize, Vec<f64>))>;

struct NodeValues {
    shapes: Vec<Vec<usize>>,
    datas: Vec<Vec<f64>>,
}

impl NodeValues {
    fn data(&self, id: usize) -> &[f64] {
        &self.datas[id]
    }
    fn shape(&self, id: usize) -> &[usize] {
        &self.shapes[id]
    }
}

pub struct Graph {
    values: NodeValues,
    grads: Vec<Option<Vec<f64>>>,
    needs_grad: Vec<bool>,
    backs: Vec<Option<BackFn>>,
    backward_done: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            values: NodeValues {
                shapes: Vec::new(),
                datas: Vec::new(),
            },
            grads: Vec::new(),
            needs_grad: Vec::new(),
            backs: Vec::new(),
            backward_done: false,
        }
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, needs: bool, back: Option<BackFn>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.values.shapes.push(shape);
        self.values.datas.push(data);
        self.grads.push(None);
        self.needs_grad.push(needs);
        self.backs.push(if needs { back } else { None });
        Var(self.values.datas.len() - 1)
    }

    /// Register a leaf. Its gradient is retrievable after `backward` when the
    /// tensor requires grad.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), t.requires_grad(), None)
    }

    /// Register a value that never receives a gradient.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), false, None)
    }

    pub fn constant_vec(&mut self, shape: &[usize], data: Vec<f64>) -> Var {
        self.push(shape.to_vec(), data, false, None)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.values.shape(v.0)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.values.data(v.0)
    }

    /// Gradient accumulated for `v` by the last `backward` call.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::Contract(format!("{op}: expected a 2-D tensor, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    // ── linear algebra ──────────────────────────────────────────────────

    /// C = A · B.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.dims2(a, "matmul")?;
        let (kb, n) = self.dims2(b, "matmul")?;
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let k = ka;
        let mut out = vec![0.0; m * n];
        kernels::matmul(&mut out, self.value(a), self.value(b), m, k, n);
        let needs = self.needs_grad[a.0] || self.needs_grad[b.0];
        let (na, nb) = (self.needs_grad[a.0], self.needs_grad[b.0]);
        let back: BackFn = Box::new(move |vals, g, emit| {
            if na {
                // dA = dC · B^T
                let mut da = vec![0.0; m * k];
                kernels::matmul_nt(&mut da, g, vals.data(b.0), m, n, k);
                emit(a.0, da);
            }
            if nb {
                // dB = A^T · dC
                let mut db = vec![0.0; k * n];
                kernels::matmul_tn(&mut db, vals.data(a.0), g, m, k, n);
                emit(b.0, db);
            }
        });
        Ok(self.push(vec![m, n], out, needs, Some(back)))
    }

    /// C = A · B^T with `b` stored row-major as \[n x k\].
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.dims2(a, "matmul_nt")?;
        let (n, kb) = self.dims2(b, "matmul_nt")?;
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let k = ka;
        let mut out = vec![0.0; m * n];
        kernels::matmul_nt(&mut out, self.value(a), self.value(b), m, k, n);
        let needs = self.needs_grad[a.0] || self.needs_grad[b.0];
        let (na, nb) = (self.needs_grad[a.0], self.needs_grad[b.0]);
        let back: BackFn = Box::new(move |vals, g, emit| {
            if na {
                // dA = dC · B
                let mut da = vec![0.0; m * k];
                kernels::matmul(&mut da, g, vals.data(b.0), m, n, k);
                emit(a.0, da);
            }
            if nb {
                // dB = dC^T · A
                let mut db = vec![0.0; n * k];
                kernels::matmul_tn(&mut db, g, vals.data(a.0), m, n, k);
                emit(b.0, db);
            }
        });
        Ok(self.push(vec![m, n], out, needs, Some(back)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims2(a, "transpose")?;
        let src = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |_vals, g, emit| {
            let mut da = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    da[i * c + j] = g[j * r + i];
                }
            }
            emit(a.0, da);
        });
        Ok(self.push(vec![c, r], out, needs, Some(back)))
    }

    // ── elementwise ─────────────────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let needs = self.needs_grad[a.0] || self.needs_grad[b.0];
        let (na, nb) = (self.needs_grad[a.0], self.needs_grad[b.0]);
        let back: BackFn = Box::new(move |_vals, g, emit| {
            if na {
                emit(a.0, g.to_vec());
            }
            if nb {
                emit(b.0, g.to_vec());
            }
        });
        Ok(self.push(self.shape(a).to_vec(), out, needs, Some(back)))
    }

    /// Broadcast-add a length-C bias over every row of an R x C tensor.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.dims2(a, "add_row")?;
        if self.shape(bias) != [c] {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let bv = self.value(bias);
        let mut out = self.value(a).to_vec();
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] += bv[j];
            }
        }
        let needs = self.needs_grad[a.0] || self.needs_grad[bias.0];
        let (na, nb) = (self.needs_grad[a.0], self.needs_grad[bias.0]);
        let back: BackFn = Box::new(move |_vals, g, emit| {
            if na {
                emit(a.0, g.to_vec());
            }
            if nb {
                let mut db = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        db[j] += g[i * c + j];
                    }
                }
                emit(bias.0, db);
            }
        });
        Ok(self.push(vec![r, c], out, needs, Some(back)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out: Vec<f64> = self.value(a).iter().map(|x| x * factor).collect();
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |_vals, g, emit| {
            emit(a.0, g.iter().map(|x| x * factor).collect());
        });
        self.push(self.shape(a).to_vec(), out, needs, Some(back))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out: Vec<f64> = self.value(a).iter().map(|x| x.tanh()).collect();
        let id = self.push(self.shape(a).to_vec(), out, self.needs_grad[a.0], None);
        let back: BackFn = Box::new(move |vals, g, emit| {
            let y = vals.data(id.0);
            emit(a.0, g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect());
        });
        self.backs[id.0] = if self.needs_grad[id.0] { Some(back) } else { None };
        id
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out: Vec<f64> = self.value(a).iter().map(|&x| kernels::gelu(x)).collect();
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |vals, g, emit| {
            let x = vals.data(a.0);
            emit(
                a.0,
                g.iter()
                    .zip(x)
                    .map(|(gi, &xi)| gi * kernels::gelu_grad(xi))
                    .collect(),
            );
        });
        self.push(self.shape(a).to_vec(), out, needs, Some(back))
    }

    // ── rows / columns ──────────────────────────────────────────────────

    /// Gather rows of `table` by token id.
    pub fn embedding(&mut self, table: Var, ids: &[u32]) -> Result<Var> {
        let (v, d) = self.dims2(table, "embedding")?;
        for &id in ids {
            if id as usize >= v {
                return Err(Error::OutOfVocab { id, vocab: v });
            }
        }
        let src = self.value(table);
        let mut out = vec![0.0; ids.len() * d];
        for (t, &id) in ids.iter().enumerate() {
            out[t * d..(t + 1) * d].copy_from_slice(&src[id as usize * d..(id as usize + 1) * d]);
        }
        let needs = self.needs_grad[table.0];
        let ids_owned: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let back: BackFn = Box::new(move |_vals, g, emit| {
            let mut dt = vec![0.0; v * d];
            for (t, &id) in ids_owned.iter().enumerate() {
                for j in 0..d {
                    dt[id * d + j] += g[t * d + j];
                }
            }
            emit(table.0, dt);
        });
        Ok(self.push(vec![ids.len(), d], out, needs, Some(back)))
    }

    /// Stack `a` on top of `b` (both R_i x C).
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.dims2(a, "concat_rows")?;
        let (rb, cb) = self.dims2(b, "concat_rows")?;
        if ca != cb {
            return Err(Error::ShapeMismatch {
                op: "concat_rows",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut out = Vec::with_capacity((ra + rb) * ca);
        out.extend_from_slice(self.value(a));
        out.extend_from_slice(self.value(b));
        let needs = self.needs_grad[a.0] || self.needs_grad[b.0];
        let (na, nb) = (self.needs_grad[a.0], self.needs_grad[b.0]);
        let back: BackFn = Box::new(move |_vals, g, emit| {
            if na {
                emit(a.0, g[..ra * ca].to_vec());
            }
            if nb {
                emit(b.0, g[ra * ca..].to_vec());
            }
        });
        Ok(self.push(vec![ra + rb, ca], out, needs, Some(back)))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims2(a, "slice_rows")?;
        if start >= end || end > r {
            return Err(Error::Contract(format!(
                "slice_rows: range {start}..{end} invalid for {r} rows"
            )));
        }
        let out = self.value(a)[start * c..end * c].to_vec();
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |_vals, g, emit| {
            let mut da = vec![0.0; r * c];
            da[start * c..end * c].copy_from_slice(g);
            emit(a.0, da);
        });
        Ok(self.push(vec![end - start, c], out, needs, Some(back)))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims2(a, "slice_cols")?;
        if start >= end || end > c {
            return Err(Error::Contract(format!(
                "slice_cols: range {start}..{end} invalid for {c} columns"
            )));
        }
        let w = end - start;
        let src = self.value(a);
        let mut out = vec![0.0; r * w];
        for i in 0..r {
            out[i * w..(i + 1) * w].copy_from_slice(&src[i * c + start..i * c + end]);
        }
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |_vals, g, emit| {
            let mut da = vec![0.0; r * c];
            for i in 0..r {
                da[i * c + start..i * c + end].copy_from_slice(&g[i * w..(i + 1) * w]);
            }
            emit(a.0, da);
        });
        Ok(self.push(vec![r, w], out, needs, Some(back)))
    }

    /// Concatenate equal-height blocks side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_cols: empty part list".into()));
        }
        let (r, _) = self.dims2(parts[0], "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0usize;
        for &p in parts {
            let (rp, cp) = self.dims2(p, "concat_cols")?;
            if rp != r {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            widths.push(cp);
            total += cp;
        }
        let mut out = vec![0.0; r * total];
        let mut offset = 0usize;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p);
            for i in 0..r {
                out[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        let needs = parts.iter().any(|p| self.needs_grad[p.0]);
        let parts_meta: Vec<(usize, usize, bool)> = parts
            .iter()
            .zip(&widths)
            .map(|(p, &w)| (p.0, w, self.needs_grad[p.0]))
            .collect();
        let back: BackFn = Box::new(move |_vals, g, emit| {
            let mut offset = 0usize;
            for &(pid, w, pn) in &parts_meta {
                if pn {
                    let mut dp = vec![0.0; r * w];
                    for i in 0..r {
                        dp[i * w..(i + 1) * w]
                            .copy_from_slice(&g[i * total + offset..i * total + offset + w]);
                    }
                    emit(pid, dp);
                }
                offset += w;
            }
        });
        Ok(self.push(vec![r, total], out, needs, Some(back)))
    }

    // ── nonlinear blocks ────────────────────────────────────────────────

    /// Stable softmax over the last dimension.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let n = *shape.last().expect("softmax_rows: scalar input");
        let rows = self.value(a).len() / n;
        let mut out = self.value(a).to_vec();
        for i in 0..rows {
            kernels::softmax_row(&mut out[i * n..(i + 1) * n]);
        }
        let id = self.push(shape, out, self.needs_grad[a.0], None);
        let back: BackFn = Box::new(move |vals, g, emit| {
            let y = vals.data(id.0);
            let mut da = vec![0.0; y.len()];
            for i in 0..rows {
                let ys = &y[i * n..(i + 1) * n];
                let gs = &g[i * n..(i + 1) * n];
                let dot: f64 = ys.iter().zip(gs).map(|(yv, gv)| yv * gv).sum();
                for j in 0..n {
                    da[i * n + j] = ys[j] * (gs[j] - dot);
                }
            }
            emit(a.0, da);
        });
        self.backs[id.0] = if self.needs_grad[id.0] { Some(back) } else { None };
        id
    }

    /// Per-row layer norm with affine gain/bias over the last dimension.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().ok_or_else(|| Error::Contract("layer_norm: scalar input".into()))?;
        if d < 2 {
            return Err(Error::Contract(format!(
                "layer_norm: final extent must be at least 2, got {d}"
            )));
        }
        if self.shape(gain) != [d] || self.shape(bias) != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: shape,
                rhs: self.shape(gain).to_vec(),
            });
        }
        let rows = self.value(x).len() / d;
        let mut out = vec![0.0; rows * d];
        {
            let xv = self.value(x);
            let gv = self.value(gain);
            let bv = self.value(bias);
            for i in 0..rows {
                kernels::layer_norm_row(&mut out[i * d..(i + 1) * d], &xv[i * d..(i + 1) * d], gv, bv, eps);
            }
        }
        let needs = self.needs_grad[x.0] || self.needs_grad[gain.0] || self.needs_grad[bias.0];
        let (nx, ng, nb) = (self.needs_grad[x.0], self.needs_grad[gain.0], self.needs_grad[bias.0]);
        let back: BackFn = Box::new(move |vals, g, emit| {
            let xv = vals.data(x.0);
            let gv = vals.data(gain.0);
            let mut dx = vec![0.0; rows * d];
            let mut dgain = vec![0.0; d];
            let mut dbias = vec![0.0; d];
            let df = d as f64;
            for i in 0..rows {
                let xs = &xv[i * d..(i + 1) * d];
                let gs = &g[i * d..(i + 1) * d];
                let mean = xs.iter().sum::<f64>() / df;
                let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / df;
                let inv_std = 1.0 / (var + eps).sqrt();
                let xhat: Vec<f64> = xs.iter().map(|&v| (v - mean) * inv_std).collect();
                for j in 0..d {
                    dgain[j] += gs[j] * xhat[j];
                    dbias[j] += gs[j];
                }
                if nx {
                    let dxhat: Vec<f64> = (0..d).map(|j| gs[j] * gv[j]).collect();
                    let sum_dxhat: f64 = dxhat.iter().sum();
                    let sum_dxhat_xhat: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        dx[i * d + j] =
                            inv_std / df * (df * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat);
                    }
                }
            }
            if nx {
                emit(x.0, dx);
            }
            if ng {
                emit(gain.0, dgain);
            }
            if nb {
                emit(bias.0, dbias);
            }
        });
        Ok(self.push(self.shape(x).to_vec(), out, needs, Some(back)))
    }

    /// Mean negative log-likelihood over masked-in positions.
    ///
    /// `logits` is T x V; `targets[t]` is the class index for position `t`;
    /// positions with `mask[t] == false` contribute nothing (and their
    /// targets are ignored entirely).
    pub fn cross_entropy(&mut self, logits: Var, targets: &[u32], mask: &[bool]) -> Result<Var> {
        let (t_len, v) = self.dims2(logits, "cross_entropy")?;
        if targets.len() != t_len || mask.len() != t_len {
            return Err(Error::Contract(format!(
                "cross_entropy: {t_len} logit rows vs {} targets / {} mask flags",
                targets.len(),
                mask.len()
            )));
        }
        let n_active = mask.iter().filter(|&&m| m).count();
        if n_active == 0 {
            return Err(Error::EmptyLoss);
        }
        for (t, (&tgt, &m)) in targets.iter().zip(mask).enumerate() {
            if m && tgt as usize >= v {
                return Err(Error::Contract(format!(
                    "cross_entropy: target {tgt} at position {t} outside vocab {v}"
                )));
            }
        }
        let lv = self.value(logits);
        let mut total = 0.0;
        for t in 0..t_len {
            if !mask[t] {
                continue;
            }
            let row = &lv[t * v..(t + 1) * v];
            total += kernels::log_sum_exp(row) - row[targets[t] as usize];
        }
        let loss = total / n_active as f64;
        let needs = self.needs_grad[logits.0];
        let targets_owned: Vec<usize> = targets.iter().map(|&x| x as usize).collect();
        let mask_owned = mask.to_vec();
        let back: BackFn = Box::new(move |vals, g, emit| {
            let lv = vals.data(logits.0);
            let scale = g[0] / n_active as f64;
            let mut dl = vec![0.0; t_len * v];
            for t in 0..t_len {
                if !mask_owned[t] {
                    continue;
                }
                let row = &lv[t * v..(t + 1) * v];
                let mut sm = row.to_vec();
                kernels::softmax_row(&mut sm);
                for j in 0..v {
                    dl[t * v + j] = scale * sm[j];
                }
                dl[t * v + targets_owned[t]] -= scale;
            }
            emit(logits.0, dl);
        });
        Ok(self.push(vec![1], vec![loss], needs, Some(back)))
    }

    /// Sum of all entries (test helper for building scalar losses).
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).iter().sum();
        let n = self.value(a).len();
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |_vals, g, emit| {
            emit(a.0, vec![g[0]; n]);
        });
        self.push(vec![1], vec![s], needs, Some(back))
    }

    /// Mean of all entries.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s: f64 = self.value(a).iter().sum::<f64>() / n as f64;
        let needs = self.needs_grad[a.0];
        let back: BackFn = Box::new(move |_vals, g, emit| {
            emit(a.0, vec![g[0] / n as f64; n]);
        });
        self.push(vec![1], vec![s], needs, Some(back))
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root. Callable once per graph.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Contract(
                "backward already ran on this graph; rebuild the graph to differentiate again".into(),
            ));
        }
        if self.value(root).len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar root, got shape {:?}",
                self.shape(root)
            )));
        }
        self.backward_done = true;
        self.grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            if self.grads[i].is_none() {
                continue;
            }
            let Some(back) = self.backs[i].take() else {
                continue;
            };
            let g = self.grads[i].take().expect("checked above");
            {
                let values = &self.values;
                let grads = &mut self.grads;
                let needs = &self.needs_grad;
                let mut emit = |parent: usize, delta: Vec<f64>| {
                    if !needs[parent] {
                        return;
                    }
                    debug_assert!(parent < i, "gradient emitted to a later node");
                    match &mut grads[parent] {
                        Some(acc) => {
                            debug_assert_eq!(acc.len(), delta.len());
                            for (av, dv) in acc.iter_mut().zip(&delta) {
                                *av += dv;
                            }
                        }
                        slot @ None => *slot = Some(delta),
                    }
                };
                back(values, &g, &mut emit);
            }
            self.grads[i] = Some(g);
        }
        Ok(())
    }
}
