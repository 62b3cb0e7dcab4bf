//! Plain-slice math kernels.
//!
//! Both the autodiff graph and the KV-cache inference path call into these
//! functions, keeping the accumulation order of every dot product identical
//! across the two. That makes the graph forward and the incremental forward
//! agree bit-for-bit, which the model tests assert.

/// C\[m x n\] = A\[m x k\] * B\[k x n\], row-major, accumulating over k in
/// ascending order for every output element.
pub fn matmul(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    out.fill(0.0);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
}

/// C\[m x n\] = A\[m x k\] * B^T where B is \[n x k\] row-major.
///
/// Each output element is a straight dot product over k, so this matches a
/// per-row `dot` in the incremental path exactly.
pub fn matmul_nt(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] = dot(a_row, &b[j * k..(j + 1) * k]);
        }
    }
}

/// C\[m x n\] = A^T * B where A is \[k x m\] and B is \[k x n\], row-major.
pub fn matmul_tn(out: &mut [f64], a: &[f64], b: &[f64], k: usize, m: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    out.fill(0.0);
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a_row[i];
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// y\[n\] = x\[k\] * W\[k x n\], accumulating over k in ascending order
/// (same order as [`matmul`] produces for a single row).
pub fn matvec_row(out: &mut [f64], x: &[f64], w: &[f64], k: usize, n: usize) {
    debug_assert_eq!(out.len(), n);
    debug_assert_eq!(x.len(), k);
    debug_assert_eq!(w.len(), k * n);
    out.fill(0.0);
    for p in 0..k {
        let xv = x[p];
        if xv == 0.0 {
            continue;
        }
        let w_row = &w[p * n..(p + 1) * n];
        for (o, &wv) in out.iter_mut().zip(w_row) {
            *o += xv * wv;
        }
    }
}

/// In-place stable softmax over one row.
pub fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// log(sum_j exp(row_j)), computed with max subtraction.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &v in row {
        sum += (v - max).exp();
    }
    max + sum.ln()
}

/// Per-row layer norm: out = (x - mean) / sqrt(var + eps) * gain + bias.
pub fn layer_norm_row(out: &mut [f64], x: &[f64], gain: &[f64], bias: &[f64], eps: f64) {
    let d = x.len();
    let mean = x.iter().sum::<f64>() / d as f64;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
    let inv_std = 1.0 / (var + eps).sqrt();
    for i in 0..d {
        out[i] = (x[i] - mean) * inv_std * gain[i] + bias[i];
    }
}

/// tanh-approximation GELU.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Derivative of [`gelu`].
pub fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654;
    let inner = C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    let sech2 = 1.0 - t * t;
    let d_inner = C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * sech2 * d_inner
}
