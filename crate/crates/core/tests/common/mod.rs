#![allow(dead_code)]

use fastvid::io::{synth_video, Scene, SynthDims};
use fastvid::{PruneConfig, Segmentation, TokenDump};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Small scene-structured dump with random shape.
pub fn random_dump(rng: &mut ChaCha8Rng) -> TokenDump {
    let scene_count = rng.gen_range(1..=4);
    let scenes: Vec<Scene> = (0..scene_count)
        .map(|i| {
            Scene::new(
                rng.gen_range(1..=6),
                format!("s{}", rng.gen_range(0..=i)),
                rng.gen_range(0.0..0.4),
            )
        })
        .collect();
    let dims = SynthDims {
        grid_h: rng.gen_range(2..=7),
        grid_w: rng.gen_range(2..=7),
        token_dim: rng.gen_range(2..=12),
        feature_dim: rng.gen_range(4..=12),
        attn_scale: rng.gen_range(1..=2),
        objects: rng.gen_range(0..=2),
    };
    synth_video(&scenes, rng.gen(), dims).expect("valid synthetic dims")
}

pub fn random_config(rng: &mut ChaCha8Rng, retention: f64) -> PruneConfig {
    PruneConfig {
        min_segments: rng.gen_range(1..=8),
        transition_threshold: rng.gen_range(0.5..1.0),
        retention_ratio: retention,
        dtm_fraction: [0.0, 0.25, 0.4, 0.6, 1.0][rng.gen_range(0..5)],
        anchor_interval: rng.gen_range(1..=5),
        merge_weight: rng.gen_range(0.0..=1.0),
        ..PruneConfig::default()
    }
}

/// Mean adjacent transition similarity over pairs that stay inside a segment.
/// Returns 1 when every segment is a single frame.
pub fn intra_segment_similarity(similarities: &[f64], seg: &Segmentation) -> f64 {
    let labels = seg.frame_labels();
    let inside: Vec<f64> = similarities
        .iter()
        .enumerate()
        .filter(|&(i, _)| labels[i] == labels[i + 1])
        .map(|(_, &t)| t)
        .collect();
    if inside.is_empty() {
        1.0
    } else {
        inside.iter().sum::<f64>() / inside.len() as f64
    }
}

pub fn scene_video(seed: u64, token_dim: usize) -> TokenDump {
    let scenes = [
        Scene::new(5, "a", 0.1),
        Scene::new(3, "b", 0.15),
        Scene::new(6, "c", 0.1),
        Scene::new(4, "a", 0.2),
        Scene::new(5, "d", 0.1),
        Scene::new(4, "e", 0.05),
        Scene::new(5, "b", 0.1),
    ];
    let dims = SynthDims {
        token_dim,
        ..SynthDims::default()
    };
    synth_video(&scenes, seed, dims).expect("valid synthetic dims")
}
