//! Density-based token merging.
//!
//! Anchor tokens are density peaks (high `ρ·δ`) on anchor frames sampled at a
//! fixed interval inside a segment. Every other token in the segment that ATS
//! did not keep is assigned to its most cosine-similar anchor, and each anchor
//! absorbs its assignees as `a* = β·a + (1-β)/n · Σ b_i` while keeping its
//! original position.
//!
//! [`uniform_anchors`] and [`cluster_merge`] are the ablation baselines.

use rayon::prelude::*;

use crate::ats::top_k;
use crate::error::{Error, Result};
use crate::kernels::{cosine_from_parts, dot_many_wide, sq_dist_many_wide};
use crate::kmeans::kmeans;
use crate::types::{default_knn, AnchorFrame, Origin, RetainedToken, TokenDump, TokenPos};

/// Local density `rho`, peak distance `delta` and their product.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityScores {
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub score: Vec<f64>,
}

impl DensityScores {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// Density-peak scores of `n×dim` tokens.
///
/// `rho_i = exp(-(1/k)·Σ_{j∈kNN(i)} d(i,j)²)` with Euclidean `d` and the
/// neighbourhood excluding `i` itself. `delta_i` is the distance to the
/// nearest token with strictly higher `rho`, or the distance to the farthest
/// token when none exists. A single token gets `rho = 1, delta = 0`.
pub fn density_scores(tokens: &[f32], dim: usize, k: usize) -> Result<DensityScores> {
    if dim == 0 || tokens.is_empty() {
        return Err(Error::EmptyInput("density tokens"));
    }
    let n = tokens.len() / dim;
    if n == 1 {
        return Ok(DensityScores {
            rho: vec![1.0],
            delta: vec![0.0],
            score: vec![0.0],
        });
    }
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidConfig(format!(
            "knn k={k} must be in [1, {}]",
            n - 1
        )));
    }
    let wide: Vec<f64> = tokens.iter().map(|&v| v as f64).collect();

    let mut dist2 = vec![0f64; n * n];
    for i in 0..n {
        let (row, later) = wide[i * dim..].split_at(dim);
        sq_dist_many_wide(row, later, &mut dist2[i * n + i + 1..(i + 1) * n]);
        for j in i + 1..n {
            dist2[j * n + i] = dist2[i * n + j];
        }
    }

    let mut rho = Vec::with_capacity(n);
    let mut neighbours = Vec::with_capacity(n - 1);
    for i in 0..n {
        neighbours.clear();
        neighbours.extend(
            dist2[i * n..(i + 1) * n]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d),
        );
        if k < neighbours.len() {
            neighbours.select_nth_unstable_by(k - 1, f64::total_cmp);
        }
        let nearest = &mut neighbours[..k];
        nearest.sort_unstable_by(f64::total_cmp);
        let sum: f64 = nearest.iter().sum();
        rho.push((-sum / k as f64).exp());
    }

    let mut delta = Vec::with_capacity(n);
    for i in 0..n {
        let dists = &dist2[i * n..(i + 1) * n];
        let mut nearest_higher = f64::INFINITY;
        let mut farthest = 0f64;
        for j in 0..n {
            if j == i {
                continue;
            }
            if rho[j] > rho[i] && dists[j] < nearest_higher {
                nearest_higher = dists[j];
            }
            if dists[j] > farthest {
                farthest = dists[j];
            }
        }
        let chosen = if nearest_higher.is_finite() {
            nearest_higher
        } else {
            farthest
        };
        delta.push(chosen.sqrt());
    }

    let score = rho.iter().zip(&delta).map(|(r, d)| r * d).collect();
    Ok(DensityScores { rho, delta, score })
}

/// Frames `start, start+p, start+2p, …` up to `end`; `⌈P/p⌉` of them.
pub fn select_anchor_frames(segment: (usize, usize), interval: usize) -> Vec<usize> {
    let (start, end) = segment;
    (start..=end).step_by(interval.max(1)).collect()
}

/// Top-`budget` density peaks of one frame, skipping `excluded` spatial indices.
pub fn frame_density_anchors(
    dump: &TokenDump,
    frame: usize,
    budget: usize,
    k: usize,
    excluded: &[usize],
) -> Result<Vec<usize>> {
    if budget == 0 {
        return Ok(Vec::new());
    }
    let scores = density_scores(dump.frame_tokens(frame), dump.token_dim(), k)?;
    top_k(&scores.score, budget, excluded)
}

/// Density anchors on every anchor frame with the same per-frame budget.
pub fn select_anchors(
    dump: &TokenDump,
    anchor_frames: &[usize],
    per_frame_budget: usize,
    k: usize,
) -> Result<Vec<TokenPos>> {
    let plan: Vec<AnchorFrame> = anchor_frames
        .iter()
        .map(|&frame| AnchorFrame {
            frame,
            budget: per_frame_budget,
        })
        .collect();
    density_anchors(dump, &plan, Some(k), &|_| &[], false)
}

/// Density anchors for a set of anchor frames with individual budgets.
///
/// `excluded(frame)` returns spatial indices that may not become anchors.
/// With `parallel` the per-frame density computations run on the rayon pool;
/// the output is identical either way.
pub fn density_anchors<'a>(
    dump: &TokenDump,
    anchor_frames: &[AnchorFrame],
    knn_k: Option<usize>,
    excluded: &(dyn Fn(usize) -> &'a [usize] + Sync),
    parallel: bool,
) -> Result<Vec<TokenPos>> {
    let k = default_knn(dump.tokens_per_frame(), knn_k);
    let one = |af: &AnchorFrame| -> Result<Vec<TokenPos>> {
        Ok(
            frame_density_anchors(dump, af.frame, af.budget, k, excluded(af.frame))?
                .into_iter()
                .map(|s| TokenPos::new(af.frame, s))
                .collect(),
        )
    };
    let per_frame: Vec<Vec<TokenPos>> = if parallel {
        anchor_frames.par_iter().map(one).collect::<Result<_>>()?
    } else {
        anchor_frames.iter().map(one).collect::<Result<_>>()?
    };
    Ok(per_frame.concat())
}

/// Uniformly strided anchors: of the `m` non-excluded spatial indices, keep
/// candidate `⌊i·m/budget⌋` for `i in 0..budget`.
pub fn uniform_frame_anchors(
    tokens_per_frame: usize,
    budget: usize,
    excluded: &[usize],
) -> Result<Vec<usize>> {
    let mut skip = vec![false; tokens_per_frame];
    for &e in excluded {
        if let Some(s) = skip.get_mut(e) {
            *s = true;
        }
    }
    let candidates: Vec<usize> = (0..tokens_per_frame).filter(|&i| !skip[i]).collect();
    let m = candidates.len();
    if budget > m {
        return Err(Error::BudgetOverflow {
            requested: budget,
            available: m,
        });
    }
    Ok((0..budget).map(|i| candidates[i * m / budget]).collect())
}

pub fn uniform_anchors<'a>(
    dump: &TokenDump,
    anchor_frames: &[AnchorFrame],
    excluded: &(dyn Fn(usize) -> &'a [usize] + Sync),
) -> Result<Vec<TokenPos>> {
    let mut anchors = Vec::new();
    for af in anchor_frames {
        for s in uniform_frame_anchors(dump.tokens_per_frame(), af.budget, excluded(af.frame))? {
            anchors.push(TokenPos::new(af.frame, s));
        }
    }
    Ok(anchors)
}

/// Anchors and the assignment of every merged token to one of them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergePlan {
    /// Sorted ascending.
    pub anchors: Vec<TokenPos>,
    /// `(token, index into anchors)`, sorted by token.
    pub assignment: Vec<(TokenPos, usize)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeOutcome {
    /// One token per anchor, in anchor order.
    pub tokens: Vec<RetainedToken>,
    pub plan: MergePlan,
}

/// Segment tokens that are neither in `anchors` nor in `excluded` (both sorted).
fn merge_pool(
    segment: (usize, usize),
    tokens_per_frame: usize,
    anchors: &[TokenPos],
    excluded: &[TokenPos],
) -> Vec<TokenPos> {
    let mut pool = Vec::new();
    for frame in segment.0..=segment.1 {
        for spatial in 0..tokens_per_frame {
            let pos = TokenPos::new(frame, spatial);
            if anchors.binary_search(&pos).is_err() && excluded.binary_search(&pos).is_err() {
                pool.push(pos);
            }
        }
    }
    pool
}

fn sorted_unique(mut v: Vec<TokenPos>, what: &str) -> Result<Vec<TokenPos>> {
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Malformed(format!("duplicate {what} position")));
    }
    Ok(v)
}

fn check_in_segment(positions: &[TokenPos], segment: (usize, usize), n: usize) -> Result<()> {
    for p in positions {
        let f = p.frame as usize;
        if f < segment.0 || f > segment.1 || p.spatial as usize >= n {
            return Err(Error::Malformed(format!(
                "token ({}, {}) lies outside segment {segment:?}",
                p.frame, p.spatial
            )));
        }
    }
    Ok(())
}

/// Assign each to-be-merged token of `segment` to its most cosine-similar
/// anchor (lower anchor on ties) and aggregate.
///
/// `excluded` holds tokens retained verbatim elsewhere (ATS picks); they are
/// neither anchors nor merged.
pub fn assign_and_merge(
    dump: &TokenDump,
    segment: (usize, usize),
    anchors: &[TokenPos],
    excluded: &[TokenPos],
    beta: f64,
) -> Result<MergeOutcome> {
    let n = dump.tokens_per_frame();
    let anchors = sorted_unique(anchors.to_vec(), "anchor")?;
    let excluded = sorted_unique(excluded.to_vec(), "excluded")?;
    check_in_segment(&anchors, segment, n)?;
    check_in_segment(&excluded, segment, n)?;
    if let Some(a) = anchors.iter().find(|a| excluded.binary_search(a).is_ok()) {
        return Err(Error::Malformed(format!(
            "token ({}, {}) is both anchor and excluded",
            a.frame, a.spatial
        )));
    }
    let pool = merge_pool(segment, n, &anchors, &excluded);
    if anchors.is_empty() {
        if !pool.is_empty() {
            return Err(Error::EmptyInput("anchors for a non-empty merge pool"));
        }
        return Ok(MergeOutcome::default());
    }

    let dim = dump.token_dim();
    let anchor_rows: Vec<f64> = anchors
        .iter()
        .flat_map(|&a| dump.token(a).iter().map(|&v| v as f64))
        .collect();
    let anchor_norms: Vec<f64> = anchor_rows
        .chunks_exact(dim)
        .map(|row| {
            let mut norm = [0f64];
            dot_many_wide(row, row, &mut norm);
            norm[0]
        })
        .collect();
    if let Some(i) = anchor_norms.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateFeature {
            what: "anchor token",
            index: anchors[i].flat(n),
        });
    }

    let mut assignment = Vec::with_capacity(pool.len());
    let mut tok = vec![0f64; dim];
    let mut dots = vec![0f64; anchors.len()];
    for &pos in &pool {
        for (t, &v) in tok.iter_mut().zip(dump.token(pos)) {
            *t = v as f64;
        }
        let mut tn = [0f64];
        dot_many_wide(&tok, &tok, &mut tn);
        let tn = tn[0];
        if tn == 0.0 {
            return Err(Error::DegenerateFeature {
                what: "token",
                index: pos.flat(n),
            });
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        dot_many_wide(&tok, &anchor_rows, &mut dots);
        for (ai, (&d, &an)) in dots.iter().zip(&anchor_norms).enumerate() {
            let cos = cosine_from_parts(d, tn, an);
            if cos > best.1 {
                best = (ai, cos);
            }
        }
        assignment.push((pos, best.0));
    }

    let tokens = aggregate(dump, &anchors, &assignment, beta);
    Ok(MergeOutcome {
        tokens,
        plan: MergePlan {
            anchors,
            assignment,
        },
    })
}

/// Anchor-centric aggregation over a fixed assignment.
pub fn aggregate(
    dump: &TokenDump,
    anchors: &[TokenPos],
    assignment: &[(TokenPos, usize)],
    beta: f64,
) -> Vec<RetainedToken> {
    let dim = dump.token_dim();
    let mut sums = vec![0f64; anchors.len() * dim];
    let mut counts = vec![0usize; anchors.len()];
    for &(pos, ai) in assignment {
        counts[ai] += 1;
        for (s, &v) in sums[ai * dim..(ai + 1) * dim].iter_mut().zip(dump.token(pos)) {
            *s += v as f64;
        }
    }
    anchors
        .iter()
        .enumerate()
        .map(|(ai, &pos)| {
            let anchor = dump.token(pos);
            let embedding = if counts[ai] == 0 {
                anchor.to_vec()
            } else {
                let w = (1.0 - beta) / counts[ai] as f64;
                anchor
                    .iter()
                    .zip(&sums[ai * dim..(ai + 1) * dim])
                    .map(|(&a, &s)| (beta * a as f64 + w * s) as f32)
                    .collect()
            };
            RetainedToken {
                pos,
                embedding,
                origin: Origin::DtmAnchor,
                merged_count: counts[ai],
            }
        })
        .collect()
}

/// Cluster-based merging baseline: k-means with `budget` clusters over the
/// segment's non-excluded tokens. Each cluster becomes its mean, placed at
/// the position of its first member.
pub fn cluster_merge(
    dump: &TokenDump,
    segment: (usize, usize),
    budget: usize,
    excluded: &[TokenPos],
) -> Result<MergeOutcome> {
    let n = dump.tokens_per_frame();
    let dim = dump.token_dim();
    let excluded = sorted_unique(excluded.to_vec(), "excluded")?;
    check_in_segment(&excluded, segment, n)?;
    let pool = merge_pool(segment, n, &[], &excluded);
    if budget > pool.len() {
        return Err(Error::BudgetOverflow {
            requested: budget,
            available: pool.len(),
        });
    }
    if budget == 0 {
        if !pool.is_empty() {
            return Err(Error::EmptyInput("clusters for a non-empty merge pool"));
        }
        return Ok(MergeOutcome::default());
    }
    let mut points = Vec::with_capacity(pool.len() * dim);
    for &pos in &pool {
        points.extend_from_slice(dump.token(pos));
    }
    let km = kmeans(&points, dim, budget);

    // Pool is sorted, so the first member seen is the lowest position.
    let mut first = vec![usize::MAX; budget];
    for (i, &l) in km.labels.iter().enumerate() {
        if first[l] == usize::MAX {
            first[l] = i;
        }
    }
    let mut clusters: Vec<usize> = (0..budget).collect();
    clusters.sort_by_key(|&c| first[c]);
    let mut slot = vec![0usize; budget];
    for (rank, &c) in clusters.iter().enumerate() {
        slot[c] = rank;
    }
    let anchors: Vec<TokenPos> = clusters.iter().map(|&c| pool[first[c]]).collect();
    let mut counts = vec![0usize; budget];
    let mut assignment = Vec::with_capacity(pool.len() - budget);
    for (i, &l) in km.labels.iter().enumerate() {
        if i != first[l] {
            counts[slot[l]] += 1;
            assignment.push((pool[i], slot[l]));
        }
    }
    let tokens = clusters
        .iter()
        .enumerate()
        .map(|(rank, &c)| RetainedToken {
            pos: anchors[rank],
            embedding: km.centers[c * dim..(c + 1) * dim]
                .iter()
                .map(|&v| v as f32)
                .collect(),
            origin: Origin::DtmAnchor,
            merged_count: counts[rank],
        })
        .collect();
    Ok(MergeOutcome {
        tokens,
        plan: MergePlan {
            anchors,
            assignment,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DumpDims;

    fn dump(frames: usize, n: usize, dim: usize, tokens: Vec<f32>) -> TokenDump {
        let dims = DumpDims {
            frames,
            tokens_per_frame: n,
            token_dim: dim,
            frame_feature_dim: 1,
            attn_height: 1,
            attn_width: n,
            pool_out_h: 1,
            pool_out_w: n,
        };
        TokenDump::new(dims, vec![1.0; frames], tokens, None).unwrap()
    }

    #[test]
    fn identical_tokens_have_unit_density_and_zero_score() {
        let s = density_scores(&[2.0; 12], 3, 2).unwrap();
        assert_eq!(s.rho, vec![1.0; 4]);
        assert_eq!(s.delta, vec![0.0; 4]);
        assert_eq!(s.score, vec![0.0; 4]);
    }

    #[test]
    fn three_points_in_one_dimension() {
        let s = density_scores(&[0.0, 0.1, 5.0], 1, 1).unwrap();
        let d01 = 0.1f32 as f64;
        let d12 = 5.0 - 0.1f32 as f64;
        let expect_rho = [(-d01 * d01).exp(), (-d01 * d01).exp(), (-d12 * d12).exp()];
        let expect_delta = [5.0, d12, d12];
        for i in 0..3 {
            assert!((s.rho[i] - expect_rho[i]).abs() < 1e-12, "rho {i}");
            assert!((s.delta[i] - expect_delta[i]).abs() < 1e-12, "delta {i}");
        }
        assert_eq!(s.rho[0], s.rho[1]);
    }

    #[test]
    fn single_token_convention() {
        let s = density_scores(&[1.0, 2.0], 2, 1).unwrap();
        assert_eq!((s.rho, s.delta), (vec![1.0], vec![0.0]));
    }

    #[test]
    fn empty_and_bad_k() {
        assert!(matches!(density_scores(&[], 2, 1), Err(Error::EmptyInput(_))));
        assert!(density_scores(&[0.0, 1.0, 2.0], 1, 3).is_err());
        assert!(density_scores(&[0.0, 1.0, 2.0], 1, 0).is_err());
    }

    #[test]
    fn anchor_frames() {
        assert_eq!(select_anchor_frames((0, 7), 4), vec![0, 4]);
        assert_eq!(select_anchor_frames((3, 3), 4), vec![3]);
        assert_eq!(select_anchor_frames((0, 5), 2), vec![0, 2, 4]);
        assert_eq!(select_anchor_frames((10, 14), 3), vec![10, 13]);
    }

    #[test]
    fn anchors_full_budget() {
        let d = dump(2, 3, 1, vec![0.0, 1.0, 3.0, 0.5, 0.7, 9.0]);
        let a = select_anchors(&d, &[0, 1], 3, 1).unwrap();
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn identical_frame_anchors_follow_tie_policy() {
        let d = dump(1, 4, 2, vec![1.0; 8]);
        let a = select_anchors(&d, &[0], 2, 1).unwrap();
        assert_eq!(a, vec![TokenPos::new(0, 0), TokenPos::new(0, 1)]);
    }

    #[test]
    fn density_peak_anchor() {
        let d = dump(1, 3, 1, vec![0.0, 0.1, 5.0]);
        assert_eq!(select_anchors(&d, &[0], 1, 1).unwrap(), vec![TokenPos::new(0, 0)]);
    }

    #[test]
    fn excluded_tokens_never_anchor() {
        let d = dump(1, 3, 1, vec![0.0, 0.1, 5.0]);
        let excl = [0usize];
        let plan = [AnchorFrame { frame: 0, budget: 1 }];
        let a = density_anchors(&d, &plan, Some(1), &|_| &excl[..], false).unwrap();
        assert_eq!(a, vec![TokenPos::new(0, 1)]);
    }

    #[test]
    fn beta_one_keeps_anchor() {
        let d = dump(1, 3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let out = assign_and_merge(&d, (0, 0), &[TokenPos::new(0, 0)], &[], 1.0).unwrap();
        assert_eq!(out.tokens[0].embedding, vec![1.0, 0.0]);
        assert_eq!(out.tokens[0].merged_count, 2);
    }

    #[test]
    fn beta_zero_single_assignee() {
        let d = dump(1, 2, 2, vec![1.0, 0.0, 0.3, 0.7]);
        let out = assign_and_merge(&d, (0, 0), &[TokenPos::new(0, 0)], &[], 0.0).unwrap();
        assert_eq!(out.tokens[0].embedding, vec![0.3, 0.7]);
    }

    #[test]
    fn anchor_centric_average() {
        let d = dump(1, 3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let out = assign_and_merge(&d, (0, 0), &[TokenPos::new(0, 0)], &[], 0.6).unwrap();
        let e = &out.tokens[0].embedding;
        assert!((e[0] - 0.6).abs() < 1e-6 && e[1].abs() < 1e-6, "{e:?}");
    }

    #[test]
    fn assignment_picks_most_similar_anchor() {
        // anchors (1,0) and (0,1); token (0.9, 0.1) -> first, (0.2, 0.8) -> second.
        let d = dump(1, 4, 2, vec![1.0, 0.0, 0.0, 1.0, 0.9, 0.1, 0.2, 0.8]);
        let anchors = [TokenPos::new(0, 0), TokenPos::new(0, 1)];
        let out = assign_and_merge(&d, (0, 0), &anchors, &[], 0.5).unwrap();
        assert_eq!(
            out.plan.assignment,
            vec![(TokenPos::new(0, 2), 0), (TokenPos::new(0, 3), 1)]
        );
    }

    #[test]
    fn excluded_tokens_are_not_merged() {
        let d = dump(1, 3, 1, vec![1.0, 2.0, 3.0]);
        let out = assign_and_merge(&d, (0, 0), &[TokenPos::new(0, 0)], &[TokenPos::new(0, 2)], 0.5)
            .unwrap();
        assert_eq!(out.tokens[0].merged_count, 1);
        assert_eq!(out.tokens[0].embedding, vec![1.5]);
    }

    #[test]
    fn zero_norm_token_is_degenerate() {
        let d = dump(1, 2, 2, vec![1.0, 0.0, 0.0, 0.0]);
        let err = assign_and_merge(&d, (0, 0), &[TokenPos::new(0, 0)], &[], 0.5).unwrap_err();
        assert!(matches!(err, Error::DegenerateFeature { index: 1, .. }));
    }

    #[test]
    fn missing_anchors_for_pool() {
        let d = dump(1, 2, 1, vec![1.0, 2.0]);
        assert!(assign_and_merge(&d, (0, 0), &[], &[], 0.5).is_err());
        let all = [TokenPos::new(0, 0), TokenPos::new(0, 1)];
        assert!(assign_and_merge(&d, (0, 0), &[], &all, 0.5).unwrap().tokens.is_empty());
    }

    #[test]
    fn uniform_stride() {
        assert_eq!(uniform_frame_anchors(4, 2, &[]).unwrap(), vec![0, 2]);
        assert_eq!(uniform_frame_anchors(4, 4, &[]).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(uniform_frame_anchors(5, 2, &[0]).unwrap(), vec![1, 3]);
        assert!(uniform_frame_anchors(4, 4, &[1]).is_err());
    }

    #[test]
    fn uniform_matches_density_on_identical_frame() {
        let d = dump(1, 4, 2, vec![1.0; 8]);
        let plan = [AnchorFrame { frame: 0, budget: 1 }];
        let u = uniform_anchors(&d, &plan, &|_| &[]).unwrap();
        let den = density_anchors(&d, &plan, None, &|_| &[], false).unwrap();
        assert_eq!(u, den);
    }

    #[test]
    fn cluster_merge_full_budget_is_identity() {
        let toks = vec![0.5, 3.0, -1.0, 2.0];
        let d = dump(2, 2, 1, toks.clone());
        let out = cluster_merge(&d, (0, 1), 4, &[]).unwrap();
        let embs: Vec<f32> = out.tokens.iter().map(|t| t.embedding[0]).collect();
        assert_eq!(embs, toks);
        assert!(out.tokens.iter().all(|t| t.merged_count == 0));
    }

    #[test]
    fn cluster_merge_two_blobs() {
        let d = dump(1, 6, 1, vec![0.0, 10.0, 0.2, 10.4, 0.4, 10.2]);
        let out = cluster_merge(&d, (0, 0), 2, &[]).unwrap();
        assert_eq!(out.tokens.len(), 2);
        assert_eq!(out.tokens[0].pos, TokenPos::new(0, 0));
        assert_eq!(out.tokens[1].pos, TokenPos::new(0, 1));
        assert!((out.tokens[0].embedding[0] - 0.2).abs() < 1e-6);
        assert!((out.tokens[1].embedding[0] - 10.2).abs() < 1e-5);
        assert_eq!(out.tokens[0].merged_count + out.tokens[1].merged_count, 4);
    }

    #[test]
    fn cluster_merge_identical_tokens() {
        let d = dump(1, 5, 2, vec![0.25; 10]);
        let out = cluster_merge(&d, (0, 0), 1, &[]).unwrap();
        assert_eq!(out.tokens.len(), 1);
        assert_eq!(out.tokens[0].embedding, vec![0.25, 0.25]);
    }
}
