//! Cross-check of fast paths against the oracles on one dump.

use serde::Serialize;

use crate::ats::{adaptive_avg_pool, saliency, select_salient};
use crate::dtm::{density_scores, DensityScores};
use crate::dyseg::{dyseg, transition_profile};
use crate::error::Result;
use crate::oracle::{oracle_density, oracle_pool, oracle_segment_check, oracle_topk};
use crate::types::{PruneConfig, TokenDump};

/// Relative tolerance for real-valued outputs.
pub const REL_TOLERANCE: f64 = 1e-6;

/// Deliberate corruption of a fast-path output, for exercising the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Scale the fast local densities by `1 + 1e-3`.
    DensityDrift,
    /// Drop the last pick of every top-k selection and take the next candidate.
    TopKShift,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompareReport {
    pub frames_checked: usize,
    pub density_max_rel: f64,
    pub ranking_mismatches: usize,
    pub topk_checks: usize,
    pub topk_mismatches: usize,
    pub pool_max_rel: f64,
    pub segmentation_ok: bool,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.density_max_rel <= REL_TOLERANCE
            && self.ranking_mismatches == 0
            && self.topk_mismatches == 0
            && self.pool_max_rel <= REL_TOLERANCE
            && self.segmentation_ok
    }

    pub fn merge(&mut self, other: &CompareReport) {
        self.frames_checked += other.frames_checked;
        self.density_max_rel = self.density_max_rel.max(other.density_max_rel);
        self.ranking_mismatches += other.ranking_mismatches;
        self.topk_checks += other.topk_checks;
        self.topk_mismatches += other.topk_mismatches;
        self.pool_max_rel = self.pool_max_rel.max(other.pool_max_rel);
        self.segmentation_ok &= other.segmentation_ok;
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Indices ordered by descending score, lower index first on ties.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

fn density_deviation(fast: &DensityScores, slow: &DensityScores) -> f64 {
    fast.rho
        .iter()
        .zip(&slow.rho)
        .chain(fast.delta.iter().zip(&slow.delta))
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max)
}

pub fn compare_dump(
    dump: &TokenDump,
    config: &PruneConfig,
    fault: Option<Fault>,
) -> Result<CompareReport> {
    let (f, n, dim) = (dump.frames(), dump.tokens_per_frame(), dump.token_dim());
    let k = config.knn_for(n);
    let mut report = CompareReport {
        frames_checked: f,
        segmentation_ok: true,
        ..Default::default()
    };

    for frame in 0..f {
        let toks = dump.frame_tokens(frame);
        let mut fast = density_scores(toks, dim, k)?;
        if fault == Some(Fault::DensityDrift) {
            for (r, s) in fast.rho.iter_mut().zip(fast.score.iter_mut()) {
                *r *= 1.0 + 1e-3;
                *s *= 1.0 + 1e-3;
            }
        }
        let slow = oracle_density(toks, dim, k)?;
        report.density_max_rel = report.density_max_rel.max(density_deviation(&fast, &slow));
        if ranking(&fast.score) != ranking(&slow.score) {
            report.ranking_mismatches += 1;
        }
    }

    let pooled = saliency(dump, config.attention_source)?;
    let budgets = [0, 1, n / 10, n / 2, n];
    for frame in 0..f {
        for &budget in &budgets {
            let excluded: Vec<usize> = Vec::new();
            let mut fast = select_salient(&pooled, frame, budget, &excluded)?;
            if fault == Some(Fault::TopKShift) && budget > 0 && budget < n {
                let original = fast.clone();
                fast.remove(0);
                fast.extend((0..n).find(|i| !original.contains(i)));
                fast.sort_unstable();
            }
            let slow = oracle_topk(pooled.frame(frame), budget, &excluded)?;
            report.topk_checks += 1;
            if fast != slow {
                report.topk_mismatches += 1;
            }
        }
    }

    if dump.attention().is_some() {
        let d = dump.dims();
        for frame in 0..f {
            let map = dump.attention_frame(frame).expect("attention present");
            let fast = adaptive_avg_pool(map, d.attn_height, d.attn_width, d.pool_out_h, d.pool_out_w)?;
            let slow = oracle_pool(map, d.attn_height, d.attn_width, d.pool_out_h, d.pool_out_w);
            for (a, b) in fast.iter().zip(&slow) {
                report.pool_max_rel = report.pool_max_rel.max(rel_err(*a, *b));
            }
        }
    }

    let profile = transition_profile(dump)?;
    let seg = dyseg(&profile, config.min_segments, config.transition_threshold);
    report.segmentation_ok =
        oracle_segment_check(&profile, &seg, config.min_segments, config.transition_threshold);
    Ok(report)
}
