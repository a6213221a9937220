//! Slow, obvious reference implementations.
//!
//! Nothing here calls into the fast paths; only the core types are shared.
//! Everything runs in `f64`.

use crate::dtm::DensityScores;
use crate::dyseg::TransitionProfile;
use crate::error::{Error, Result};
use crate::types::Segmentation;

/// Density-peak scores from a full distance matrix, exhaustive kNN by full
/// sort and an exhaustive peak-distance scan.
pub fn oracle_density(tokens: &[f32], dim: usize, k: usize) -> Result<DensityScores> {
    if dim == 0 || tokens.is_empty() {
        return Err(Error::EmptyInput("density tokens"));
    }
    let n = tokens.len() / dim;
    let points: Vec<Vec<f64>> = tokens
        .chunks_exact(dim)
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    if n == 1 {
        return Ok(DensityScores {
            rho: vec![1.0],
            delta: vec![0.0],
            score: vec![0.0],
        });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("knn k={k} must be in [1, {}]", n - 1)));
    }

    let mut squared = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            squared[i][j] = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
    }

    let rho: Vec<f64> = (0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| squared[i][j]).collect();
            others.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sum: f64 = others[..k].iter().sum();
            (-sum / k as f64).exp()
        })
        .collect();

    let delta: Vec<f64> = (0..n)
        .map(|i| {
            let higher: Vec<f64> = (0..n)
                .filter(|&j| rho[j] > rho[i])
                .map(|j| squared[i][j].sqrt())
                .collect();
            if higher.is_empty() {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| squared[i][j].sqrt())
                    .fold(0.0, f64::max)
            } else {
                higher.into_iter().fold(f64::INFINITY, f64::min)
            }
        })
        .collect();

    let score = rho.iter().zip(&delta).map(|(r, d)| r * d).collect();
    Ok(DensityScores { rho, delta, score })
}

/// Top-`budget` by full stable sort (descending score, so ties keep the lower
/// index first), then filtering and re-sorting ascending.
pub fn oracle_topk(scores: &[f64], budget: usize, excluded: &[usize]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let available: Vec<usize> = order.into_iter().filter(|i| !excluded.contains(i)).collect();
    if budget > available.len() {
        return Err(Error::BudgetOverflow {
            requested: budget,
            available: available.len(),
        });
    }
    let mut picked = available[..budget].to_vec();
    picked.sort();
    Ok(picked)
}

/// Whether `segmentation` is exactly the boundary set `S1 ∪ S2` for `profile`.
pub fn oracle_segment_check(
    profile: &TransitionProfile,
    segmentation: &Segmentation,
    min_segments: usize,
    tau: f64,
) -> bool {
    let t = profile.similarities();
    let frames = t.len() + 1;
    if segmentation.frames() != frames {
        return false;
    }
    let mut ranked: Vec<(f64, usize)> = t.iter().copied().zip(0..).collect();
    ranked.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let take = min_segments.saturating_sub(1).min(t.len());
    let mut expected: Vec<usize> = ranked[..take].iter().map(|&(_, i)| i).collect();
    for (i, &s) in t.iter().enumerate() {
        if s < tau && !expected.contains(&i) {
            expected.push(i);
        }
    }
    expected.sort();

    let mut actual = Vec::new();
    let segs = segmentation.segments();
    for w in segs.windows(2) {
        actual.push(w[0].1);
    }
    actual == expected
}

/// Adaptive average pooling with the window bounds computed in floating point.
pub fn oracle_pool(map: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..out_h {
        let r0 = (i as f64 * h as f64 / out_h as f64).floor() as usize;
        let r1 = ((i + 1) as f64 * h as f64 / out_h as f64).ceil() as usize;
        for j in 0..out_w {
            let c0 = (j as f64 * w as f64 / out_w as f64).floor() as usize;
            let c1 = ((j + 1) as f64 * w as f64 / out_w as f64).ceil() as usize;
            let mut cells = Vec::new();
            for r in r0..r1 {
                for c in c0..c1 {
                    cells.push(map[r * w + c] as f64);
                }
            }
            out.push(cells.iter().sum::<f64>() / cells.len() as f64);
        }
    }
    out
}
