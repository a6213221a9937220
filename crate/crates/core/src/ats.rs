//! Attention-based token selection.
//!
//! The [CLS] attention map of each frame is adaptively average-pooled down to
//! the token grid, and the highest scoring tokens of each frame are kept.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::kernels::{cosine_from_parts, dot, sq_norm};
use crate::types::{AttentionSource, TokenDump};

/// Per-frame saliency at token resolution, `F×N` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledAttention {
    frames: usize,
    tokens_per_frame: usize,
    scores: Vec<f64>,
}

impl PooledAttention {
    pub fn new(frames: usize, tokens_per_frame: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != frames * tokens_per_frame {
            return Err(Error::DimensionMismatch {
                field: "pooled scores",
                expected: frames * tokens_per_frame,
                actual: scores.len(),
            });
        }
        Ok(Self {
            frames,
            tokens_per_frame,
            scores,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        let n = self.tokens_per_frame;
        &self.scores[frame * n..(frame + 1) * n]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Adaptive average pooling of a single `h×w` map to `out_h×out_w`.
///
/// Output cell `(i, j)` averages rows `[⌊i·h/out_h⌋, ⌈(i+1)·h/out_h⌉)` and
/// columns `[⌊j·w/out_w⌋, ⌈(j+1)·w/out_w⌉)`.
pub fn adaptive_avg_pool(
    map: &[f32],
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<f64>> {
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::UnsupportedPooling {
            in_h: h,
            in_w: w,
            out_h,
            out_w,
        });
    }
    let start = |i: usize, inp: usize, out: usize| i * inp / out;
    let end = |i: usize, inp: usize, out: usize| ((i + 1) * inp).div_ceil(out);
    let mut pooled = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (r0, r1) = (start(i, h, out_h), end(i, h, out_h));
        for j in 0..out_w {
            let (c0, c1) = (start(j, w, out_w), end(j, w, out_w));
            let mut sum = 0f64;
            for r in r0..r1 {
                for &v in &map[r * w + c0..r * w + c1] {
                    sum += v as f64;
                }
            }
            pooled.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    Ok(pooled)
}

pub fn pool_attention(dump: &TokenDump) -> Result<PooledAttention> {
    let d = dump.dims();
    if dump.attention().is_none() {
        return Err(Error::MissingAttention);
    }
    let mut scores = Vec::with_capacity(d.frames * d.tokens_per_frame);
    for f in 0..d.frames {
        let map = dump.attention_frame(f).expect("checked above");
        scores.extend(adaptive_avg_pool(
            map,
            d.attn_height,
            d.attn_width,
            d.pool_out_h,
            d.pool_out_w,
        )?);
    }
    PooledAttention::new(d.frames, d.tokens_per_frame, scores)
}

/// Pseudo-[CLS] saliency: cosine similarity of each token to its frame's mean token.
pub fn mean_token_scores(dump: &TokenDump) -> Result<PooledAttention> {
    let (f, n, dim) = (dump.frames(), dump.tokens_per_frame(), dump.token_dim());
    let mut scores = Vec::with_capacity(f * n);
    for frame in 0..f {
        let toks = dump.frame_tokens(frame);
        let mut mean = vec![0f64; dim];
        for tok in toks.chunks_exact(dim) {
            for (m, &v) in mean.iter_mut().zip(tok) {
                *m += v as f64;
            }
        }
        let mean: Vec<f32> = mean.iter().map(|&m| (m / n as f64) as f32).collect();
        let mean_norm = sq_norm(&mean);
        if mean_norm == 0.0 {
            return Err(Error::DegenerateFeature {
                what: "frame mean token",
                index: frame,
            });
        }
        for (s, tok) in toks.chunks_exact(dim).enumerate() {
            let tn = sq_norm(tok);
            if tn == 0.0 {
                return Err(Error::DegenerateFeature {
                    what: "token",
                    index: frame * n + s,
                });
            }
            scores.push(cosine_from_parts(dot(tok, &mean), tn, mean_norm));
        }
    }
    PooledAttention::new(f, n, scores)
}

/// Saliency scores for `dump` according to `source`.
pub fn saliency(dump: &TokenDump, source: AttentionSource) -> Result<PooledAttention> {
    match (source, dump.attention().is_some()) {
        (AttentionSource::Cls, _) | (AttentionSource::Auto, true) => pool_attention(dump),
        (AttentionSource::MeanToken, _) | (AttentionSource::Auto, false) => {
            mean_token_scores(dump)
        }
    }
}

/// Rank order: higher score first, lower index on ties.
fn rank(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Indices of the `budget` highest scores, skipping `excluded`, sorted ascending.
pub fn top_k(scores: &[f64], budget: usize, excluded: &[usize]) -> Result<Vec<usize>> {
    let mut skip = vec![false; scores.len()];
    for &e in excluded {
        if let Some(s) = skip.get_mut(e) {
            *s = true;
        }
    }
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&i| !skip[i]).collect();
    if budget > candidates.len() {
        return Err(Error::BudgetOverflow {
            requested: budget,
            available: candidates.len(),
        });
    }
    if budget == 0 {
        return Ok(Vec::new());
    }
    if budget < candidates.len() {
        candidates.select_nth_unstable_by(budget - 1, |&a, &b| rank(scores, a, b));
        candidates.truncate(budget);
    }
    candidates.sort_unstable();
    Ok(candidates)
}

/// Keep the `budget` most salient tokens of `frame`, skipping `excluded` spatial indices.
pub fn select_salient(
    pooled: &PooledAttention,
    frame: usize,
    budget: usize,
    excluded: &[usize],
) -> Result<Vec<usize>> {
    top_k(pooled.frame(frame), budget, excluded)
}
