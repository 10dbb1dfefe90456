//! Forward pass, joint loss, and exact analytic gradient.
//!
//! The model is the smallest differentiable scorer with the right output
//! structure: token + position embeddings, one single-head self-attention
//! block with a residual connection, then three linear heads — start and end
//! scores per position, and a 5-way answer-type score read at position 0
//! (`[CLS]`). The training loss is the sum of three negative log softmax
//! terms, one per head.
//!
//! All math is plain `f64` with max-subtracted softmaxes. The gradient is
//! hand-derived backpropagation through the same graph; tests hold it to
//! central finite differences.

use crate::error::{Error, Result};
use crate::instance::AnswerType;
use crate::scorer::params::ModelParams;

/// Per-instance head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    /// Start score per position; length = instance length.
    pub start: Vec<f64>,
    /// End score per position; same length.
    pub end: Vec<f64>,
    /// Answer-type scores in wire order.
    pub type_logits: [f64; AnswerType::COUNT],
}

/// Numerically stable log(Σ exp(x)).
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Intermediate activations kept for the backward pass. All row-major
/// `n × d` except `alpha`, which is `n × n`.
struct Cache {
    n: usize,
    h: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    alpha: Vec<f64>,
    ctx: Vec<f64>,
    z: Vec<f64>,
}

/// `out[r] = Σ_c mat[r*d + c] · x[c]` for a row-major `d × d` block of
/// `params` starting at `base`.
fn matvec(data: &[f64], base: usize, d: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..d {
        let row = &data[base + r * d..base + (r + 1) * d];
        out[r] = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_ids(params: &ModelParams, input_ids: &[u32]) -> Result<()> {
    if input_ids.is_empty() {
        return Err(Error::Input("cannot score an empty instance".to_string()));
    }
    if input_ids.len() > params.max_positions {
        return Err(Error::Input(format!(
            "instance length {} exceeds the {} positions the model embeds",
            input_ids.len(),
            params.max_positions
        )));
    }
    if let Some(&id) = input_ids.iter().find(|&&id| id as usize >= params.vocab_size) {
        return Err(Error::Input(format!(
            "token id {id} outside vocabulary of size {}",
            params.vocab_size
        )));
    }
    Ok(())
}

fn forward_cached(params: &ModelParams, input_ids: &[u32]) -> Result<(Logits, Cache)> {
    check_ids(params, input_ids)?;
    let n = input_ids.len();
    let d = params.embed_dim;
    let data = &params.data;
    let scale = 1.0 / (d as f64).sqrt();

    let mut h = vec![0.0; n * d];
    for (i, &id) in input_ids.iter().enumerate() {
        let te = params.tok_emb(id as usize);
        let pe = params.pos_emb(i);
        for r in 0..d {
            h[i * d + r] = data[te + r] + data[pe + r];
        }
    }

    let (mut q, mut k, mut v) = (vec![0.0; n * d], vec![0.0; n * d], vec![0.0; n * d]);
    for i in 0..n {
        let hi = &h[i * d..(i + 1) * d];
        matvec(data, params.w_query(), d, hi, &mut q[i * d..(i + 1) * d]);
        matvec(data, params.w_key(), d, hi, &mut k[i * d..(i + 1) * d]);
        matvec(data, params.w_value(), d, hi, &mut v[i * d..(i + 1) * d]);
    }

    let mut alpha = vec![0.0; n * n];
    for i in 0..n {
        let qi = &q[i * d..(i + 1) * d];
        let mut row: Vec<f64> = (0..n)
            .map(|j| scale * dot(qi, &k[j * d..(j + 1) * d]))
            .collect();
        row = softmax(&row);
        alpha[i * n..(i + 1) * n].copy_from_slice(&row);
    }

    let mut ctx = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            let a = alpha[i * n + j];
            for r in 0..d {
                ctx[i * d + r] += a * v[j * d + r];
            }
        }
    }

    let mut z = vec![0.0; n * d];
    let mut wo_ctx = vec![0.0; d];
    for i in 0..n {
        matvec(data, params.w_output(), d, &ctx[i * d..(i + 1) * d], &mut wo_ctx);
        for r in 0..d {
            z[i * d + r] = h[i * d + r] + wo_ctx[r];
        }
    }

    let w_start = &data[params.w_start()..params.w_start() + d];
    let w_end = &data[params.w_end()..params.w_end() + d];
    let start: Vec<f64> = (0..n).map(|i| dot(w_start, &z[i * d..(i + 1) * d])).collect();
    let end: Vec<f64> = (0..n).map(|i| dot(w_end, &z[i * d..(i + 1) * d])).collect();
    let z0 = &z[0..d];
    let mut type_logits = [0.0; AnswerType::COUNT];
    for (c, t) in type_logits.iter_mut().enumerate() {
        *t = dot(&data[params.w_type(c)..params.w_type(c) + d], z0);
    }

    Ok((
        Logits {
            start,
            end,
            type_logits,
        },
        Cache {
            n,
            h,
            q,
            k,
            v,
            alpha,
            ctx,
            z,
        },
    ))
}

/// Score one instance: start/end logits per position, type logits at
/// position 0. Non-finite logits (overflowing parameters) are a numeric
/// error, so downstream files never carry NaN or infinity.
pub fn forward(params: &ModelParams, input_ids: &[u32]) -> Result<Logits> {
    let (logits, _) = forward_cached(params, input_ids)?;
    check_finite(&logits.start, "start")?;
    check_finite(&logits.end, "end")?;
    check_finite(&logits.type_logits, "type")?;
    Ok(logits)
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite {what} logits")));
    }
    Ok(())
}

fn check_target(logits: &Logits, target: (usize, usize, AnswerType)) -> Result<()> {
    let n = logits.start.len();
    if logits.end.len() != n {
        return Err(Error::Input("start/end logit lengths differ".to_string()));
    }
    if target.0 >= n || target.1 >= n {
        return Err(Error::Input(format!(
            "target span ({}, {}) outside instance of length {n}",
            target.0, target.1
        )));
    }
    Ok(())
}

/// Joint training loss for one instance:
/// `−log p_start(s) − log p_end(e) − log p_type(t)`, each term a stable
/// log-softmax over its head's logits.
pub fn loss(logits: &Logits, target: (usize, usize, AnswerType)) -> Result<f64> {
    check_target(logits, target)?;
    check_finite(&logits.start, "start")?;
    check_finite(&logits.end, "end")?;
    check_finite(&logits.type_logits, "type")?;
    let (s, e, t) = target;
    let term = |xs: &[f64], idx: usize| log_sum_exp(xs) - xs[idx];
    Ok(term(&logits.start, s)
        + term(&logits.end, e)
        + term(&logits.type_logits, t.index() as usize))
}

/// Loss value with the per-head logit-space gradients (start, end, type).
type HeadGrads = (f64, Vec<f64>, Vec<f64>, [f64; AnswerType::COUNT]);

/// Loss and its gradient in logit space: `p − onehot(target)` per head.
fn loss_backward(logits: &Logits, target: (usize, usize, AnswerType)) -> Result<HeadGrads> {
    let value = loss(logits, target)?;
    let (s, e, t) = target;
    let mut dstart = softmax(&logits.start);
    dstart[s] -= 1.0;
    let mut dend = softmax(&logits.end);
    dend[e] -= 1.0;
    let ptype = softmax(&logits.type_logits);
    let mut dtype = [0.0; AnswerType::COUNT];
    for (c, dt) in dtype.iter_mut().enumerate() {
        *dt = ptype[c] - if c == t.index() as usize { 1.0 } else { 0.0 };
    }
    Ok((value, dstart, dend, dtype))
}

/// Loss and the exact gradient of the composed forward + loss with respect
/// to every parameter, in [`ModelParams`] layout.
pub fn grad(
    params: &ModelParams,
    input_ids: &[u32],
    target: (usize, usize, AnswerType),
) -> Result<(f64, Vec<f64>)> {
    let (logits, cache) = forward_cached(params, input_ids)?;
    let (value, dstart, dend, dtype) = loss_backward(&logits, target)?;

    let n = cache.n;
    let d = params.embed_dim;
    let data = &params.data;
    let scale = 1.0 / (d as f64).sqrt();
    let mut g = vec![0.0; params.len()];

    // Heads: f_start[i] = w_start · z_i, f_end[i] = w_end · z_i,
    // f_type[c] = w_type[c] · z_0.
    let mut dz = vec![0.0; n * d];
    let w_start = &data[params.w_start()..params.w_start() + d];
    let w_end = &data[params.w_end()..params.w_end() + d];
    for i in 0..n {
        let zi = &cache.z[i * d..(i + 1) * d];
        for r in 0..d {
            dz[i * d + r] = dstart[i] * w_start[r] + dend[i] * w_end[r];
            g[params.w_start() + r] += dstart[i] * zi[r];
            g[params.w_end() + r] += dend[i] * zi[r];
        }
    }
    let z0 = &cache.z[0..d];
    for (c, &dt) in dtype.iter().enumerate() {
        let wt = params.w_type(c);
        for r in 0..d {
            dz[r] += dt * data[wt + r];
            g[wt + r] += dt * z0[r];
        }
    }

    // z_i = h_i + W_o · ctx_i (residual).
    let mut dh = dz.clone();
    let mut dctx = vec![0.0; n * d];
    for i in 0..n {
        let dzi = &dz[i * d..(i + 1) * d];
        let ctxi = &cache.ctx[i * d..(i + 1) * d];
        for r in 0..d {
            for c in 0..d {
                g[params.w_output() + r * d + c] += dzi[r] * ctxi[c];
                dctx[i * d + c] += data[params.w_output() + r * d + c] * dzi[r];
            }
        }
    }

    // ctx_i = Σ_j α_ij v_j, α_i = softmax(a_i), a_ij = q_i · k_j / √d.
    let mut dv = vec![0.0; n * d];
    let mut dq = vec![0.0; n * d];
    let mut dk = vec![0.0; n * d];
    for i in 0..n {
        let dctxi = &dctx[i * d..(i + 1) * d];
        let alphai = &cache.alpha[i * n..(i + 1) * n];
        let dalpha: Vec<f64> = (0..n)
            .map(|j| dot(dctxi, &cache.v[j * d..(j + 1) * d]))
            .collect();
        for j in 0..n {
            let a = alphai[j];
            for r in 0..d {
                dv[j * d + r] += a * dctxi[r];
            }
        }
        let inner: f64 = alphai.iter().zip(&dalpha).map(|(a, da)| a * da).sum();
        for j in 0..n {
            let da = alphai[j] * (dalpha[j] - inner);
            let kj = &cache.k[j * d..(j + 1) * d];
            let qi = &cache.q[i * d..(i + 1) * d];
            for r in 0..d {
                dq[i * d + r] += scale * da * kj[r];
                dk[j * d + r] += scale * da * qi[r];
            }
        }
    }

    // q_i = W_q h_i etc.: accumulate weight gradients and fold the linear
    // maps' input gradients back into dh.
    for (base, dout) in [
        (params.w_query(), &dq),
        (params.w_key(), &dk),
        (params.w_value(), &dv),
    ] {
        for i in 0..n {
            let hi = &cache.h[i * d..(i + 1) * d];
            let douti = &dout[i * d..(i + 1) * d];
            for r in 0..d {
                for c in 0..d {
                    g[base + r * d + c] += douti[r] * hi[c];
                    dh[i * d + c] += data[base + r * d + c] * douti[r];
                }
            }
        }
    }

    // h_i = tok_emb[x_i] + pos_emb[i].
    for (i, &id) in input_ids.iter().enumerate() {
        let te = params.tok_emb(id as usize);
        let pe = params.pos_emb(i);
        for r in 0..d {
            g[te + r] += dh[i * d + r];
            g[pe + r] += dh[i * d + r];
        }
    }

    Ok((value, g))
}
