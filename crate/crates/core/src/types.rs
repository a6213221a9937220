//! Domain types shared by every pipeline stage.
//!
//! All arrays are stored flat and row-major in `f32`. Reductions over them
//! (norms, distances, means) accumulate in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header dimensions of a [`TokenDump`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpDims {
    pub frames: usize,
    pub tokens_per_frame: usize,
    pub token_dim: usize,
    pub frame_feature_dim: usize,
    pub attn_height: usize,
    pub attn_width: usize,
    pub pool_out_h: usize,
    pub pool_out_w: usize,
}

impl DumpDims {
    pub fn frame_features_len(&self) -> Option<usize> {
        self.frames.checked_mul(self.frame_feature_dim)
    }

    pub fn tokens_len(&self) -> Option<usize> {
        self.frames
            .checked_mul(self.tokens_per_frame)?
            .checked_mul(self.token_dim)
    }

    pub fn attention_len(&self) -> Option<usize> {
        self.frames
            .checked_mul(self.attn_height)?
            .checked_mul(self.attn_width)
    }

    pub fn total_tokens(&self) -> usize {
        self.frames * self.tokens_per_frame
    }
}

/// One video's frame features, patch tokens and (optionally) attention maps.
///
/// Layouts: `frame_features` is `F×Df`, `tokens` is `F×N×D`, `attention` is
/// `F×H×W`. Construct with [`TokenDump::new`], which validates every
/// invariant; the value is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDump {
    dims: DumpDims,
    frame_features: Vec<f32>,
    tokens: Vec<f32>,
    attention: Option<Vec<f32>>,
}

impl TokenDump {
    pub fn new(
        dims: DumpDims,
        frame_features: Vec<f32>,
        tokens: Vec<f32>,
        attention: Option<Vec<f32>>,
    ) -> Result<Self> {
        validate_dump(TokenDump {
            dims,
            frame_features,
            tokens,
            attention,
        })
    }

    pub fn dims(&self) -> &DumpDims {
        &self.dims
    }

    pub fn frames(&self) -> usize {
        self.dims.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.dims.tokens_per_frame
    }

    pub fn token_dim(&self) -> usize {
        self.dims.token_dim
    }

    pub fn frame_features(&self) -> &[f32] {
        &self.frame_features
    }

    pub fn frame_feature(&self, frame: usize) -> &[f32] {
        let df = self.dims.frame_feature_dim;
        &self.frame_features[frame * df..(frame + 1) * df]
    }

    pub fn tokens(&self) -> &[f32] {
        &self.tokens
    }

    /// All `N×D` tokens of one frame.
    pub fn frame_tokens(&self, frame: usize) -> &[f32] {
        let stride = self.dims.tokens_per_frame * self.dims.token_dim;
        &self.tokens[frame * stride..(frame + 1) * stride]
    }

    pub fn token(&self, pos: TokenPos) -> &[f32] {
        let d = self.dims.token_dim;
        let flat = pos.frame as usize * self.dims.tokens_per_frame + pos.spatial as usize;
        &self.tokens[flat * d..(flat + 1) * d]
    }

    pub fn attention(&self) -> Option<&[f32]> {
        self.attention.as_deref()
    }

    pub fn attention_frame(&self, frame: usize) -> Option<&[f32]> {
        let hw = self.dims.attn_height * self.dims.attn_width;
        self.attention
            .as_deref()
            .map(|a| &a[frame * hw..(frame + 1) * hw])
    }

    /// Replace frame features with the per-frame mean of patch tokens.
    pub fn with_mean_token_features(self) -> Self {
        let (f, n, d) = (
            self.dims.frames,
            self.dims.tokens_per_frame,
            self.dims.token_dim,
        );
        let mut features = Vec::with_capacity(f * d);
        for frame in 0..f {
            let toks = self.frame_tokens(frame);
            let mut acc = vec![0f64; d];
            for tok in toks.chunks_exact(d) {
                for (a, &v) in acc.iter_mut().zip(tok) {
                    *a += v as f64;
                }
            }
            features.extend(acc.iter().map(|&a| (a / n as f64) as f32));
        }
        let dims = DumpDims {
            frame_feature_dim: d,
            ..self.dims
        };
        TokenDump {
            dims,
            frame_features: features,
            tokens: self.tokens,
            attention: self.attention,
        }
    }
}

/// Return the dump iff every structural and numeric invariant holds.
pub fn validate_dump(dump: TokenDump) -> Result<TokenDump> {
    let d = &dump.dims;
    let positive = [
        ("frame_count", d.frames),
        ("tokens_per_frame", d.tokens_per_frame),
        ("token_dim", d.token_dim),
        ("frame_feature_dim", d.frame_feature_dim),
        ("attn_height", d.attn_height),
        ("attn_width", d.attn_width),
        ("pool_out_h", d.pool_out_h),
        ("pool_out_w", d.pool_out_w),
    ];
    for (field, value) in positive {
        if value == 0 {
            return Err(Error::DimensionMismatch {
                field,
                expected: 1,
                actual: 0,
            });
        }
    }
    let pooled = d
        .pool_out_h
        .checked_mul(d.pool_out_w)
        .ok_or(Error::DimensionOverflow)?;
    if pooled != d.tokens_per_frame {
        return Err(Error::DimensionMismatch {
            field: "pool_out_h*pool_out_w",
            expected: d.tokens_per_frame,
            actual: pooled,
        });
    }
    let ff_len = d.frame_features_len().ok_or(Error::DimensionOverflow)?;
    check_len("frame_features", ff_len, dump.frame_features.len())?;
    let tok_len = d.tokens_len().ok_or(Error::DimensionOverflow)?;
    check_len("tokens", tok_len, dump.tokens.len())?;
    if let Some(attn) = &dump.attention {
        let attn_len = d.attention_len().ok_or(Error::DimensionOverflow)?;
        check_len("attention", attn_len, attn.len())?;
    }

    check_finite("frame_features", &dump.frame_features)?;
    check_finite("tokens", &dump.tokens)?;
    if let Some(attn) = &dump.attention {
        check_finite("attention", attn)?;
    }
    Ok(dump)
}

fn check_len(field: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            field,
            expected,
            actual,
        });
    }
    Ok(())
}

fn check_finite(array: &'static str, values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { array, index }),
        None => Ok(()),
    }
}

/// How fractional budgets are resolved into whole tokens.
///
/// Both variants floor every fractional share first and then hand out the
/// remainder one token at a time in ascending frame (or segment) order until
/// the global target `round(r·F·N)` is met; they differ in which module
/// receives the remainder first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingPolicy {
    #[default]
    RemainderToAts,
    RemainderToDtm,
}

/// Every score tie (density, attention, transition similarity, assignment)
/// resolves toward the lower index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakPolicy {
    #[default]
    LowerIndex,
}

/// Where per-token saliency comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionSource {
    /// Pooled [CLS] attention when present, mean-token similarity otherwise.
    #[default]
    Auto,
    /// Pooled [CLS] attention; fails when the dump carries none.
    Cls,
    /// Cosine similarity of each token to its frame's mean token.
    MeanToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Minimum number of segments (`c`).
    pub min_segments: usize,
    /// Transition similarity threshold (`τ`).
    pub transition_threshold: f64,
    /// Fraction of tokens kept (`r`).
    pub retention_ratio: f64,
    /// Share of the budget given to density-based merging (`d`).
    pub dtm_fraction: f64,
    /// Anchor frame interval (`p`).
    pub anchor_interval: usize,
    /// Anchor weight in anchor-centric aggregation (`β`).
    pub merge_weight: f64,
    /// Neighbour count for local density; `None` means `⌈√n⌉` clamped to `[1, n-1]`.
    pub knn_k: Option<usize>,
    pub rounding_policy: RoundingPolicy,
    pub tie_break_policy: TieBreakPolicy,
    pub attention_source: AttentionSource,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            min_segments: 8,
            transition_threshold: 0.9,
            retention_ratio: 0.1,
            dtm_fraction: 0.4,
            anchor_interval: 4,
            merge_weight: 0.6,
            knn_k: None,
            rounding_policy: RoundingPolicy::default(),
            tie_break_policy: TieBreakPolicy::default(),
            attention_source: AttentionSource::default(),
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.min_segments == 0 {
            return bad("min_segments must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.transition_threshold) {
            return bad(format!(
                "transition_threshold {} outside [-1, 1]",
                self.transition_threshold
            ));
        }
        if !(self.retention_ratio > 0.0 && self.retention_ratio <= 1.0) {
            return bad(format!(
                "retention_ratio {} outside (0, 1]",
                self.retention_ratio
            ));
        }
        if !(0.0..=1.0).contains(&self.dtm_fraction) {
            return bad(format!("dtm_fraction {} outside [0, 1]", self.dtm_fraction));
        }
        if self.anchor_interval == 0 {
            return bad("anchor_interval must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.merge_weight) {
            return bad(format!("merge_weight {} outside [0, 1]", self.merge_weight));
        }
        if self.knn_k == Some(0) {
            return bad("knn_k must be positive".into());
        }
        Ok(())
    }

    /// Neighbour count used for a density computed over `n` tokens.
    pub fn knn_for(&self, n: usize) -> usize {
        default_knn(n, self.knn_k)
    }
}

pub(crate) fn default_knn(n: usize, explicit: Option<usize>) -> usize {
    let upper = n.saturating_sub(1).max(1);
    let k = explicit.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
    k.clamp(1, upper)
}

/// Ordered, contiguous, covering list of inclusive frame ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    segments: Vec<(usize, usize)>,
}

impl Segmentation {
    pub fn new(segments: Vec<(usize, usize)>, frames: usize) -> Result<Self> {
        if frames == 0 || segments.is_empty() {
            return Err(Error::EmptyInput("segmentation"));
        }
        let mut next = 0;
        for &(start, end) in &segments {
            if start != next || end < start {
                return Err(Error::Malformed(format!(
                    "segment ({start}, {end}) breaks contiguity at frame {next}"
                )));
            }
            next = end + 1;
        }
        if next != frames {
            return Err(Error::Malformed(format!(
                "segments cover {next} frames, expected {frames}"
            )));
        }
        Ok(Self { segments })
    }

    /// Build from boundary transitions: boundary `i` separates frames `i` and `i+1`.
    /// Boundaries must be sorted ascending, unique and `< frames - 1`.
    pub fn from_boundaries(boundaries: &[usize], frames: usize) -> Result<Self> {
        let mut segments = Vec::with_capacity(boundaries.len() + 1);
        let mut start = 0;
        for &b in boundaries {
            segments.push((start, b));
            start = b + 1;
        }
        segments.push((start, frames.saturating_sub(1)));
        Self::new(segments, frames)
    }

    pub fn segments(&self) -> &[(usize, usize)] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.1 + 1)
    }

    /// Transition indices `i` where frames `i` and `i+1` fall in different segments.
    pub fn boundaries(&self) -> Vec<usize> {
        self.segments[..self.segments.len() - 1]
            .iter()
            .map(|s| s.1)
            .collect()
    }

    /// Segment index for every frame.
    pub fn frame_labels(&self) -> Vec<usize> {
        self.segments
            .iter()
            .enumerate()
            .flat_map(|(i, &(s, e))| std::iter::repeat_n(i, e - s + 1))
            .collect()
    }
}

/// Original `(frame, spatial)` position of a token. Orders frame-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenPos {
    pub frame: u32,
    pub spatial: u32,
}

impl TokenPos {
    pub fn new(frame: usize, spatial: usize) -> Self {
        Self {
            frame: frame as u32,
            spatial: spatial as u32,
        }
    }

    pub fn flat(&self, tokens_per_frame: usize) -> usize {
        self.frame as usize * tokens_per_frame + self.spatial as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    DtmAnchor,
    Ats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetainedToken {
    pub pos: TokenPos,
    pub embedding: Vec<f32>,
    pub origin: Origin,
    /// Tokens aggregated into this one; always 0 for ATS picks.
    pub merged_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorFrame {
    pub frame: usize,
    pub budget: usize,
}

/// Token allocation for one segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentBudget {
    pub start: usize,
    pub end: usize,
    pub dtm_budget: usize,
    pub ats_budget: usize,
    /// ATS picks per frame, `end - start + 1` entries.
    pub ats_per_frame: Vec<usize>,
    /// Anchor frames and their anchor counts; empty when `dtm_budget == 0`.
    pub anchor_frames: Vec<AnchorFrame>,
}

impl SegmentBudget {
    pub fn total(&self) -> usize {
        self.dtm_budget + self.ats_budget
    }

    pub fn frames(&self) -> usize {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStats {
    pub total_tokens: usize,
    pub retained: usize,
    pub retention_ratio: f64,
    pub dtm_count: usize,
    pub ats_count: usize,
    pub merged_tokens: usize,
    pub dropped_tokens: usize,
    pub segments: usize,
}

impl PruneStats {
    pub fn tally(
        total_tokens: usize,
        retained: &[RetainedToken],
        merged_into: &[Option<u32>],
        segments: usize,
    ) -> Self {
        let dtm_count = retained
            .iter()
            .filter(|t| t.origin == Origin::DtmAnchor)
            .count();
        let merged_tokens = merged_into.iter().filter(|m| m.is_some()).count();
        let retention_ratio = if total_tokens == 0 {
            0.0
        } else {
            retained.len() as f64 / total_tokens as f64
        };
        Self {
            total_tokens,
            retained: retained.len(),
            retention_ratio,
            dtm_count,
            ats_count: retained.len() - dtm_count,
            merged_tokens,
            dropped_tokens: total_tokens - retained.len() - merged_tokens,
            segments,
        }
    }
}

/// Output of the pruning pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub frames: usize,
    pub tokens_per_frame: usize,
    pub token_dim: usize,
    /// Token grid `(pool_out_h, pool_out_w)`; `N = h·w`.
    pub grid: (usize, usize),
    /// Strictly increasing in `(frame, spatial)`.
    pub retained: Vec<RetainedToken>,
    pub segmentation: Segmentation,
    pub budgets: Vec<SegmentBudget>,
    /// For every original token (flat `frame*N + spatial`), the index into
    /// `retained` of the anchor it was merged into.
    pub merged_into: Vec<Option<u32>>,
    pub stats: PruneStats,
}

/// Transformer dimensions for the FLOPs model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub hidden_size: usize,
    pub ffn_intermediate: usize,
    pub kv_heads: usize,
    pub head_dim: usize,
    pub num_layers: usize,
}

impl ModelShape {
    pub fn new(
        hidden_size: usize,
        ffn_intermediate: usize,
        kv_heads: usize,
        head_dim: usize,
        num_layers: usize,
    ) -> Result<Self> {
        let shape = Self {
            hidden_size,
            ffn_intermediate,
            kv_heads,
            head_dim,
            num_layers,
        };
        if [hidden_size, ffn_intermediate, kv_heads, head_dim, num_layers].contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "model shape dimensions must be positive: {shape:?}"
            )));
        }
        Ok(shape)
    }
}
