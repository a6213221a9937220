//! Serialization of [`PruneResult`]: a versioned binary form and a JSON stats summary.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic "FVPR", version u32 = 1
//! F N D grid_h grid_w segment_count retained_count        u32 each
//! per segment:  start end dtm_budget ats_budget           u32 each
//!               ats_per_frame                              u32[end-start+1]
//!               anchor_frame_count, (frame, budget)*       u32
//! per retained: frame spatial u32, origin u8 (0 DTM, 1 ATS),
//!               merged_count u32, embedding f32[D]
//! merged_into   u32[F*N]   (u32::MAX = not merged)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dump::{put_f32s, put_u32, Cursor};
use crate::error::{Error, Result};
use crate::types::{
    AnchorFrame, Origin, PruneResult, PruneStats, RetainedToken, SegmentBudget, Segmentation,
    TokenPos,
};

pub const RESULT_MAGIC: [u8; 4] = *b"FVPR";
pub const RESULT_VERSION: u32 = 1;
pub const STATS_SCHEMA_VERSION: u32 = 1;
const NOT_MERGED: u32 = u32::MAX;

pub fn encode_result(result: &PruneResult) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&RESULT_MAGIC);
    out.extend_from_slice(&RESULT_VERSION.to_le_bytes());
    for v in [
        result.frames,
        result.tokens_per_frame,
        result.token_dim,
        result.grid.0,
        result.grid.1,
        result.budgets.len(),
        result.retained.len(),
    ] {
        put_u32(&mut out, v)?;
    }
    for b in &result.budgets {
        for v in [b.start, b.end, b.dtm_budget, b.ats_budget] {
            put_u32(&mut out, v)?;
        }
        for &a in &b.ats_per_frame {
            put_u32(&mut out, a)?;
        }
        put_u32(&mut out, b.anchor_frames.len())?;
        for af in &b.anchor_frames {
            put_u32(&mut out, af.frame)?;
            put_u32(&mut out, af.budget)?;
        }
    }
    for t in &result.retained {
        if t.embedding.len() != result.token_dim {
            return Err(Error::DimensionMismatch {
                field: "retained embedding",
                expected: result.token_dim,
                actual: t.embedding.len(),
            });
        }
        put_u32(&mut out, t.pos.frame as usize)?;
        put_u32(&mut out, t.pos.spatial as usize)?;
        out.push(match t.origin {
            Origin::DtmAnchor => 0,
            Origin::Ats => 1,
        });
        put_u32(&mut out, t.merged_count)?;
        put_f32s(&mut out, &t.embedding);
    }
    for m in &result.merged_into {
        out.extend_from_slice(&m.unwrap_or(NOT_MERGED).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_result(bytes: &[u8]) -> Result<PruneResult> {
    let mut cur = Cursor::new(bytes);
    cur.magic(RESULT_MAGIC)?;
    let version = cur.u32()?;
    if version != RESULT_VERSION {
        return Err(Error::VersionMismatch {
            expected: RESULT_VERSION,
            found: version,
        });
    }
    let mut h = [0usize; 7];
    for v in &mut h {
        *v = cur.u32()? as usize;
    }
    let [frames, n, dim, grid_h, grid_w, segment_count, retained_count] = h;
    let total = frames.checked_mul(n).ok_or(Error::DimensionOverflow)?;

    let mut budgets = Vec::new();
    for _ in 0..segment_count {
        let (start, end) = (cur.u32()? as usize, cur.u32()? as usize);
        let (dtm_budget, ats_budget) = (cur.u32()? as usize, cur.u32()? as usize);
        if end < start || end >= frames {
            return Err(Error::Malformed(format!("segment ({start}, {end}) out of range")));
        }
        let ats_per_frame = (start..=end)
            .map(|_| cur.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let anchors = cur.u32()? as usize;
        let mut anchor_frames = Vec::new();
        for _ in 0..anchors {
            anchor_frames.push(AnchorFrame {
                frame: cur.u32()? as usize,
                budget: cur.u32()? as usize,
            });
        }
        budgets.push(SegmentBudget {
            start,
            end,
            dtm_budget,
            ats_budget,
            ats_per_frame,
            anchor_frames,
        });
    }
    let segmentation = Segmentation::new(budgets.iter().map(|b| (b.start, b.end)).collect(), frames)?;

    let mut retained = Vec::new();
    for _ in 0..retained_count {
        let pos = TokenPos {
            frame: cur.u32()?,
            spatial: cur.u32()?,
        };
        let origin = match cur.u8()? {
            0 => Origin::DtmAnchor,
            1 => Origin::Ats,
            other => return Err(Error::Malformed(format!("unknown origin tag {other}"))),
        };
        let merged_count = cur.u32()? as usize;
        let embedding = cur.f32s(dim)?;
        retained.push(RetainedToken {
            pos,
            embedding,
            origin,
            merged_count,
        });
    }
    let mut merged_into = Vec::new();
    for _ in 0..total {
        let v = cur.u32()?;
        merged_into.push((v != NOT_MERGED).then_some(v));
    }
    cur.finish()?;
    let stats = PruneStats::tally(total, &retained, &merged_into, segmentation.len());
    Ok(PruneResult {
        frames,
        tokens_per_frame: n,
        token_dim: dim,
        grid: (grid_h, grid_w),
        retained,
        segmentation,
        budgets,
        merged_into,
        stats,
    })
}

pub fn write_result_binary(result: &PruneResult, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_result(result)?)?;
    Ok(())
}

pub fn read_result_binary(path: impl AsRef<Path>) -> Result<PruneResult> {
    decode_result(&fs::read(path)?)
}

/// Human-facing summary of a run. Field order and names are part of the
/// versioned schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub frames: usize,
    pub tokens_per_frame: usize,
    pub token_dim: usize,
    pub total_tokens: usize,
    pub retained: usize,
    pub retention_ratio: f64,
    pub dtm_count: usize,
    pub ats_count: usize,
    pub merged_tokens: usize,
    pub dropped_tokens: usize,
    pub segment_count: usize,
    pub segments: Vec<SegmentBudget>,
}

impl StatsReport {
    pub fn from_result(result: &PruneResult) -> Self {
        let s = &result.stats;
        Self {
            schema_version: STATS_SCHEMA_VERSION,
            frames: result.frames,
            tokens_per_frame: result.tokens_per_frame,
            token_dim: result.token_dim,
            total_tokens: s.total_tokens,
            retained: s.retained,
            retention_ratio: s.retention_ratio,
            dtm_count: s.dtm_count,
            ats_count: s.ats_count,
            merged_tokens: s.merged_tokens,
            dropped_tokens: s.dropped_tokens,
            segment_count: s.segments,
            segments: result.budgets.clone(),
        }
    }
}

pub fn stats_json(result: &PruneResult) -> Result<String> {
    serde_json::to_string_pretty(&StatsReport::from_result(result))
        .map_err(|e| Error::Malformed(e.to_string()))
}
