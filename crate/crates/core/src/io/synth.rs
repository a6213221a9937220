//! Synthetic, scene-structured token dumps.
//!
//! Each scene label owns a frame-feature center, a background embedding and a
//! few planted objects (embedding + rectangular patch region). Frames of a
//! scene scatter their features around the center by `spread`, tokens are the
//! background or object embedding plus noise, and the attention map is high
//! on object patches. Scenes sharing a label revisit the same content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{DumpDims, TokenDump};

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub length: usize,
    pub label: String,
    pub spread: f64,
}

impl Scene {
    pub fn new(length: usize, label: impl Into<String>, spread: f64) -> Self {
        Self {
            length,
            label: label.into(),
            spread,
        }
    }
}

pub const DEFAULT_SPREAD: f64 = 0.1;

/// Parse `"8:a,8:b:0.2"` into scenes; the spread is optional.
pub fn parse_scenes(spec: &str) -> Result<Vec<Scene>> {
    let mut scenes = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        let bad = || Error::Malformed(format!("scene `{part}` is not LEN:LABEL[:SPREAD]"));
        if fields.len() < 2 || fields.len() > 3 || fields[1].is_empty() {
            return Err(bad());
        }
        let length = fields[0].parse().map_err(|_| bad())?;
        let spread = match fields.get(2) {
            Some(s) => s.parse().map_err(|_| bad())?,
            None => DEFAULT_SPREAD,
        };
        scenes.push(Scene::new(length, fields[1], spread));
    }
    if scenes.is_empty() {
        return Err(Error::EmptyInput("scene list"));
    }
    Ok(scenes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthDims {
    pub grid_h: usize,
    pub grid_w: usize,
    pub token_dim: usize,
    pub feature_dim: usize,
    /// Attention map is `grid_h·attn_scale × grid_w·attn_scale`.
    pub attn_scale: usize,
    pub objects: usize,
}

impl Default for SynthDims {
    fn default() -> Self {
        Self {
            grid_h: 14,
            grid_w: 14,
            token_dim: 64,
            feature_dim: 64,
            attn_scale: 2,
            objects: 3,
        }
    }
}

const TOKEN_NOISE: f64 = 0.1;

struct SceneContent {
    center: Vec<f64>,
    background: Vec<f64>,
    objects: Vec<(Vec<f64>, usize, usize)>,
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn synth_video(scenes: &[Scene], seed: u64, dims: SynthDims) -> Result<TokenDump> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput("scene list"));
    }
    if let Some(s) = scenes.iter().find(|s| s.length == 0 || s.spread.is_nan() || s.spread < 0.0) {
        return Err(Error::Malformed(format!(
            "scene `{}` needs a positive length and non-negative spread",
            s.label
        )));
    }
    let SynthDims {
        grid_h: gh,
        grid_w: gw,
        token_dim: d,
        feature_dim: df,
        attn_scale,
        objects,
    } = dims;
    if [gh, gw, d, df, attn_scale].contains(&0) {
        return Err(Error::InvalidConfig("synthetic dimensions must be positive".into()));
    }
    let n = gh * gw;
    let frames: usize = scenes.iter().map(|s| s.length).sum();
    let (bh, bw) = ((gh / 4).max(1), (gw / 4).max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut labels: Vec<&str> = Vec::new();
    let mut content: Vec<SceneContent> = Vec::new();
    for s in scenes {
        if labels.contains(&s.label.as_str()) {
            continue;
        }
        let idx = labels.len();
        labels.push(&s.label);
        let center = if idx < df {
            let mut c = vec![0.0; df];
            c[idx] = 1.0;
            c
        } else {
            gaussian(&mut rng, df, 1.0 / (df as f64).sqrt())
        };
        let background = gaussian(&mut rng, d, 1.0);
        let objects = (0..objects)
            .map(|_| {
                let emb = gaussian(&mut rng, d, 1.0);
                let r = rng.gen_range(0..=gh - bh);
                let c = rng.gen_range(0..=gw - bw);
                (emb, r, c)
            })
            .collect();
        content.push(SceneContent {
            center,
            background,
            objects,
        });
    }

    let (ah, aw) = (gh * attn_scale, gw * attn_scale);
    let mut frame_features = Vec::with_capacity(frames * df);
    let mut tokens = Vec::with_capacity(frames * n * d);
    let mut attention = Vec::with_capacity(frames * ah * aw);
    let feature_noise = 1.0 / (df as f64).sqrt();
    for s in scenes {
        let c = &content[labels.iter().position(|l| *l == s.label).expect("registered")];
        let object_at = |r: usize, col: usize| {
            c.objects
                .iter()
                .position(|&(_, or, oc)| r >= or && r < or + bh && col >= oc && col < oc + bw)
        };
        for _ in 0..s.length {
            for &v in &c.center {
                let noise: f64 = rng.sample(StandardNormal);
                frame_features.push((v + s.spread * feature_noise * noise) as f32);
            }
            let token_noise = TOKEN_NOISE + s.spread;
            for spatial in 0..n {
                let base = match object_at(spatial / gw, spatial % gw) {
                    Some(o) => &c.objects[o].0,
                    None => &c.background,
                };
                for &v in base {
                    let noise: f64 = rng.sample(StandardNormal);
                    tokens.push((v + token_noise * noise) as f32);
                }
            }
            for r in 0..ah {
                for col in 0..aw {
                    let u: f64 = rng.gen();
                    let value = if object_at(r / attn_scale, col / attn_scale).is_some() {
                        0.5 + 0.5 * u
                    } else {
                        0.02 * u
                    };
                    attention.push(value as f32);
                }
            }
        }
    }

    TokenDump::new(
        DumpDims {
            frames,
            tokens_per_frame: n,
            token_dim: d,
            frame_feature_dim: df,
            attn_height: ah,
            attn_width: aw,
            pool_out_h: gh,
            pool_out_w: gw,
        },
        frame_features,
        tokens,
        Some(attention),
    )
}
