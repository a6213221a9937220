mod common;

use common::random_dump;
use fastvid::ats::{adaptive_avg_pool, select_salient, top_k, PooledAttention};
use fastvid::compare::{rel_err, ranking};
use fastvid::dtm::{aggregate, assign_and_merge, density_scores, select_anchor_frames};
use fastvid::dyseg::{dyseg, TransitionProfile};
use fastvid::oracle::{oracle_density, oracle_pool, oracle_segment_check, oracle_topk};
use fastvid::TokenPos;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn profile_strategy() -> impl Strategy<Value = Vec<f64>> {
    // Coarse values force ties, which exercise the tie-break rules.
    vec(prop_oneof![-1.0f64..=1.0, (0..=10u8).prop_map(|v| v as f64 / 10.0)], 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dyseg_matches_oracle(t in profile_strategy(), c in 1usize..12, tau in -1.0f64..=1.0) {
        let profile = TransitionProfile::new(t.clone()).unwrap();
        let seg = dyseg(&profile, c, tau);
        prop_assert!(oracle_segment_check(&profile, &seg, c, tau));
        prop_assert!(seg.len() >= c.min(t.len() + 1));
        let labels = seg.frame_labels();
        for (i, &s) in t.iter().enumerate() {
            if labels[i] == labels[i + 1] {
                prop_assert!(s >= tau);
            }
        }
    }

    #[test]
    fn raising_tau_only_adds_boundaries(t in profile_strategy(), c in 1usize..8, lo in -1.0f64..1.0, step in 0.0f64..1.0) {
        let profile = TransitionProfile::new(t).unwrap();
        let hi = (lo + step).min(1.0);
        let a = dyseg(&profile, c, lo).boundaries();
        let b = dyseg(&profile, c, hi).boundaries();
        prop_assert!(a.iter().all(|x| b.contains(x)));
    }

    #[test]
    fn density_matches_oracle(
        n in 2usize..40,
        dim in 1usize..10,
        kf in 0.0f64..1.0,
        seed in any::<u64>(),
        quantize in any::<bool>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<f32> = (0..n * dim)
            .map(|_| {
                let v: f32 = rng.gen_range(-1.0..1.0);
                if quantize { (v * 2.0).round() / 2.0 } else { v }
            })
            .collect();
        let k = 1 + ((n - 2) as f64 * kf) as usize;
        let fast = density_scores(&tokens, dim, k).unwrap();
        let slow = oracle_density(&tokens, dim, k).unwrap();
        for i in 0..n {
            prop_assert!(rel_err(fast.rho[i], slow.rho[i]) <= 1e-6);
            prop_assert!(rel_err(fast.delta[i], slow.delta[i]) <= 1e-6);
        }
        prop_assert_eq!(ranking(&fast.score), ranking(&slow.score));
    }

    #[test]
    fn topk_matches_oracle(
        scores in vec((0..6u8).prop_map(|v| v as f64), 0..50),
        budget_frac in 0.0f64..=1.0,
        excluded_mask in vec(any::<bool>(), 50),
    ) {
        let excluded: Vec<usize> = (0..scores.len()).filter(|&i| excluded_mask[i]).collect();
        let available = scores.len() - excluded.len();
        let budget = (available as f64 * budget_frac) as usize;
        let fast = top_k(&scores, budget, &excluded).unwrap();
        prop_assert_eq!(&fast, &oracle_topk(&scores, budget, &excluded).unwrap());
        prop_assert!(fast.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(top_k(&scores, available + 1, &excluded).is_err());
    }

    #[test]
    fn topk_is_monotone_in_budget(scores in vec(-5.0f64..5.0, 1..40), a in 0usize..40, b in 0usize..40) {
        let n = scores.len();
        let (small, large) = (a.min(b).min(n), a.max(b).min(n));
        let pooled = PooledAttention::new(1, n, scores).unwrap();
        let s = select_salient(&pooled, 0, small, &[]).unwrap();
        let l = select_salient(&pooled, 0, large, &[]).unwrap();
        prop_assert!(s.iter().all(|x| l.contains(x)));
    }

    #[test]
    fn pooling_matches_oracle(h in 1usize..20, w in 1usize..20, oh in 1usize..20, ow in 1usize..20, seed in any::<u64>()) {
        use rand::Rng;
        prop_assume!(oh <= h && ow <= w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map: Vec<f32> = (0..h * w).map(|_| rng.gen()).collect();
        let fast = adaptive_avg_pool(&map, h, w, oh, ow).unwrap();
        let slow = oracle_pool(&map, h, w, oh, ow);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!(rel_err(*a, *b) <= 1e-9);
        }
    }

    #[test]
    fn merged_tokens_are_convex_combinations(seed in any::<u64>(), beta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dump = random_dump(&mut rng);
        let n = dump.tokens_per_frame();
        let seg = (0, dump.frames() - 1);
        let anchors: Vec<TokenPos> = (0..n).step_by(3).map(|s| TokenPos::new(0, s)).collect();
        let out = assign_and_merge(&dump, seg, &anchors, &[], beta).unwrap();
        prop_assert_eq!(out.plan.assignment.len(), dump.frames() * n - anchors.len());
        for (ai, tok) in out.tokens.iter().enumerate() {
            let members: Vec<&[f32]> = out
                .plan
                .assignment
                .iter()
                .filter(|&&(_, a)| a == ai)
                .map(|&(p, _)| dump.token(p))
                .collect();
            prop_assert_eq!(tok.merged_count, members.len());
            let anchor = dump.token(tok.pos);
            for (j, &v) in tok.embedding.iter().enumerate() {
                let expected = if members.is_empty() {
                    anchor[j] as f64
                } else {
                    let mean = members.iter().map(|m| m[j] as f64).sum::<f64>() / members.len() as f64;
                    beta * anchor[j] as f64 + (1.0 - beta) * mean
                };
                prop_assert!((v as f64 - expected).abs() <= 1e-5 * (1.0 + expected.abs()));
            }
        }
    }
}

#[test]
fn aggregate_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dump = random_dump(&mut rng);
    let a = TokenPos::new(0, 0);
    let b = TokenPos::new(0, 1);
    let kept = aggregate(&dump, &[a], &[(b, 0)], 1.0);
    assert_eq!(kept[0].embedding, dump.token(a));
    let replaced = aggregate(&dump, &[a], &[(b, 0)], 0.0);
    assert_eq!(replaced[0].embedding, dump.token(b));
}

#[test]
fn anchor_frames_cover_segment() {
    assert_eq!(select_anchor_frames((3, 12), 4), vec![3, 7, 11]);
    assert_eq!(select_anchor_frames((5, 5), 4), vec![5]);
    assert_eq!(select_anchor_frames((0, 7), 1).len(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flops_grow_with_tokens(n in 1usize..20_000, d in 1usize..4096, ffn in 1usize..20_000, kv in 1usize..16, hd in 1usize..256) {
        let shape = fastvid::ModelShape::new(d, ffn, kv, hd, 1).unwrap();
        prop_assert!(fastvid::flops::layer_flops(n + 1, &shape) > fastvid::flops::layer_flops(n, &shape));
    }

    #[test]
    fn flops_ratio_ignores_layer_count(n in 1usize..10_000, m in 1usize..10_000, layers in 1usize..80) {
        use fastvid::flops::{total_flops, QWEN2_7B};
        let deep = fastvid::ModelShape { num_layers: layers, ..QWEN2_7B };
        let a = total_flops(n, &QWEN2_7B) / total_flops(m, &QWEN2_7B);
        let b = total_flops(n, &deep) / total_flops(m, &deep);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn ffn_dominates_below_full_length(n in 1usize..=6272) {
        let [kv, proj, attn, ffn] = fastvid::flops::layer_terms(n, &fastvid::flops::QWEN2_7B);
        prop_assert!(ffn > kv && ffn > proj && ffn > attn);
    }

    #[test]
    fn pooling_keeps_mean_on_even_windows(oh in 1usize..6, ow in 1usize..6, fh in 1usize..4, fw in 1usize..4, seed in any::<u64>()) {
        use rand::Rng;
        let (h, w) = (oh * fh, ow * fw);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map: Vec<f32> = (0..h * w).map(|_| rng.gen()).collect();
        let pooled = adaptive_avg_pool(&map, h, w, oh, ow).unwrap();
        let a = map.iter().map(|&v| v as f64).sum::<f64>() / map.len() as f64;
        let b = pooled.iter().sum::<f64>() / pooled.len() as f64;
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn selection_ignores_monotone_transforms(scores in vec(-3.0f64..3.0, 1..40), budget in 0usize..40) {
        let budget = budget.min(scores.len());
        let squashed: Vec<f64> = scores.iter().map(|&s| s.exp() * 2.0 + 1.0).collect();
        prop_assert_eq!(top_k(&scores, budget, &[]).unwrap(), top_k(&squashed, budget, &[]).unwrap());
    }

    #[test]
    fn assignment_ignores_token_scale(seed in any::<u64>(), exp in -4i32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dump = random_dump(&mut rng);
        let s = 2f32.powi(exp);
        let scaled = fastvid::TokenDump::new(
            *dump.dims(),
            dump.frame_features().to_vec(),
            dump.tokens().iter().map(|v| v * s).collect(),
            dump.attention().map(<[f32]>::to_vec),
        )
        .unwrap();
        let anchors: Vec<TokenPos> = (0..dump.tokens_per_frame()).step_by(4).map(|i| TokenPos::new(0, i)).collect();
        let seg = (0, dump.frames() - 1);
        let a = assign_and_merge(&dump, seg, &anchors, &[], 0.5).unwrap();
        let b = assign_and_merge(&scaled, seg, &anchors, &[], 0.5).unwrap();
        prop_assert_eq!(a.plan, b.plan);
    }
}
