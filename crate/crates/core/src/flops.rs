//! Prefill FLOPs of a decoder-only LLM as a function of visual token count.
//!
//! Per layer: `2nD·(h_kv·d_head) + 2nD² + 2n²D + 3nDD′`, covering the
//! grouped-query K/V projections, the Q/O projections, attention scores and
//! the gated three-matrix FFN.

use crate::error::{Error, Result};
use crate::types::ModelShape;

pub fn layer_flops(n: usize, shape: &ModelShape) -> f64 {
    let n = n as f64;
    let d = shape.hidden_size as f64;
    let d_ffn = shape.ffn_intermediate as f64;
    let kv = (shape.kv_heads * shape.head_dim) as f64;
    2.0 * n * d * kv + 2.0 * n * d * d + 2.0 * n * n * d + 3.0 * n * d * d_ffn
}

pub fn total_flops(n: usize, shape: &ModelShape) -> f64 {
    shape.num_layers as f64 * layer_flops(n, shape)
}

pub fn tflops(flops: f64) -> f64 {
    flops / 1e12
}

/// Qwen2-7B, the language model behind LLaVA-OneVision-7B.
pub const QWEN2_7B: ModelShape = ModelShape {
    hidden_size: 3584,
    ffn_intermediate: 18944,
    kv_heads: 4,
    head_dim: 128,
    num_layers: 28,
};

pub const PRESETS: &[(&str, ModelShape)] = &[("qwen2-7b", QWEN2_7B)];

pub fn preset(name: &str) -> Result<ModelShape> {
    PRESETS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, s)| s)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            Error::InvalidConfig(format!("unknown preset `{name}` (known: {})", known.join(", ")))
        })
}

/// Per-term breakdown, in the order of the formula.
pub fn layer_terms(n: usize, shape: &ModelShape) -> [f64; 4] {
    let n = n as f64;
    let d = shape.hidden_size as f64;
    [
        2.0 * n * d * (shape.kv_heads * shape.head_dim) as f64,
        2.0 * n * d * d,
        2.0 * n * n * d,
        3.0 * n * d * shape.ffn_intermediate as f64,
    ]
}
