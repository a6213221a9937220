//! Temporal segmentation of a sampled frame sequence.
//!
//! [`dyseg`] cuts at the `c-1` least similar transitions plus every transition
//! below the threshold. [`fixed_interval_segment`] and [`cluster_segment`] are
//! the static baselines used for ablations.

use crate::error::{Error, Result};
use crate::kernels::{cosine_from_parts, dot, sq_norm};
use crate::kmeans::kmeans;
use crate::types::{Segmentation, TokenDump};

/// Cosine similarity between each pair of adjacent frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProfile {
    similarities: Vec<f64>,
}

impl TransitionProfile {
    pub fn new(similarities: Vec<f64>) -> Result<Self> {
        if let Some(index) = similarities
            .iter()
            .position(|s| !s.is_finite() || !(-1.0..=1.0).contains(s))
        {
            return Err(Error::Malformed(format!(
                "transition similarity #{index} outside [-1, 1]"
            )));
        }
        Ok(Self { similarities })
    }

    pub fn similarities(&self) -> &[f64] {
        &self.similarities
    }

    pub fn frames(&self) -> usize {
        self.similarities.len() + 1
    }
}

pub fn transition_profile(dump: &TokenDump) -> Result<TransitionProfile> {
    let f = dump.frames();
    let norms: Vec<f64> = (0..f).map(|i| sq_norm(dump.frame_feature(i))).collect();
    if let Some(index) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateFeature {
            what: "frame feature",
            index,
        });
    }
    let similarities = (0..f.saturating_sub(1))
        .map(|i| {
            let d = dot(dump.frame_feature(i), dump.frame_feature(i + 1));
            cosine_from_parts(d, norms[i], norms[i + 1])
        })
        .collect();
    Ok(TransitionProfile { similarities })
}

/// Boundary set `S1 ∪ S2`, sorted ascending.
///
/// `S1` holds the `min(c-1, F-1)` smallest similarities (lower index wins
/// ties), `S2` every transition strictly below `tau`.
pub fn boundary_set(profile: &TransitionProfile, min_segments: usize, tau: f64) -> Vec<usize> {
    let t = profile.similarities();
    let take = min_segments.saturating_sub(1).min(t.len());
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
    let mut is_boundary = vec![false; t.len()];
    for &i in &order[..take] {
        is_boundary[i] = true;
    }
    for (i, &s) in t.iter().enumerate() {
        if s < tau {
            is_boundary[i] = true;
        }
    }
    is_boundary
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

pub fn dyseg(profile: &TransitionProfile, min_segments: usize, tau: f64) -> Segmentation {
    let boundaries = boundary_set(profile, min_segments, tau);
    Segmentation::from_boundaries(&boundaries, profile.frames())
        .expect("sorted in-range boundaries always form a valid segmentation")
}

pub fn fixed_interval_segment(frames: usize, interval: usize) -> Result<Segmentation> {
    if interval == 0 {
        return Err(Error::InvalidConfig("segment interval must be positive".into()));
    }
    let segments = (0..frames)
        .step_by(interval)
        .map(|start| (start, (start + interval).min(frames) - 1))
        .collect();
    Segmentation::new(segments, frames)
}

/// Raw k-means labels of each frame's feature vector.
pub fn cluster_frame_labels(dump: &TokenDump, num_clusters: usize) -> Result<Vec<usize>> {
    let f = dump.frames();
    if num_clusters == 0 || num_clusters > f {
        return Err(Error::InvalidConfig(format!(
            "num_clusters {num_clusters} must be in [1, {f}]"
        )));
    }
    Ok(kmeans(dump.frame_features(), dump.dims().frame_feature_dim, num_clusters).labels)
}

/// Cluster frames, then cut wherever a frame's label differs from its predecessor's.
pub fn cluster_segment(dump: &TokenDump, num_clusters: usize) -> Result<Segmentation> {
    let labels = cluster_frame_labels(dump, num_clusters)?;
    let boundaries: Vec<usize> = labels
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| (w[0] != w[1]).then_some(i))
        .collect();
    Segmentation::from_boundaries(&boundaries, dump.frames())
}
