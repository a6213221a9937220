mod common;

use common::random_dump;
use fastvid::io::{
    decode_dump, decode_result, encode_dump, encode_result, render_svg, stats_json, HEADER_LEN,
};
use fastvid::{prune, Error, PruneConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dump_round_trip(seed in any::<u64>()) {
        let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(seed));
        let bytes = encode_dump(&dump).unwrap();
        prop_assert_eq!(decode_dump(&bytes).unwrap(), dump);
    }

    #[test]
    fn result_round_trip(seed in any::<u64>()) {
        let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(seed));
        let config = PruneConfig { retention_ratio: 0.4, min_segments: 2, ..Default::default() };
        let result = prune(&dump, &config).unwrap();
        let bytes = encode_result(&result).unwrap();
        let back = decode_result(&bytes).unwrap();
        prop_assert_eq!(&back, &result);
        prop_assert_eq!(encode_result(&back).unwrap(), bytes);
    }

    #[test]
    fn truncated_dumps_are_rejected(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(seed));
        let bytes = encode_dump(&dump).unwrap();
        let len = (bytes.len() as f64 * cut) as usize;
        prop_assert!(decode_dump(&bytes[..len]).is_err());
    }
}

#[test]
fn header_errors() {
    let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(4));
    let bytes = encode_dump(&dump).unwrap();

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_dump(&bad), Err(Error::BadMagic { .. })));

    let mut bad = bytes.clone();
    bad[4] = 2;
    assert!(matches!(decode_dump(&bad), Err(Error::VersionMismatch { found: 2, .. })));

    let mut bad = bytes.clone();
    bad.push(0);
    assert!(decode_dump(&bad).is_err());

    // A NaN in the first token value.
    let mut bad = bytes.clone();
    let features = dump.frame_features().len() * 4;
    bad[HEADER_LEN + features..HEADER_LEN + features + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(decode_dump(&bad), Err(Error::NonFinite { .. })));
}

#[test]
fn svg_has_one_rect_per_token() {
    let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(8));
    let result = prune(&dump, &PruneConfig { retention_ratio: 0.3, ..Default::default() }).unwrap();
    let svg = render_svg(&result);
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<rect").count(), dump.frames() * dump.tokens_per_frame());
}

#[test]
fn stats_json_schema() {
    let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(12));
    let result = prune(&dump, &PruneConfig { retention_ratio: 0.3, ..Default::default() }).unwrap();
    let value: serde_json::Value = serde_json::from_str(&stats_json(&result).unwrap()).unwrap();
    assert_eq!(value["schema_version"], 1);
    assert_eq!(value["retained"], result.retained.len());
    assert_eq!(value["segment_count"], result.segmentation.len());
    let segments = value["segments"].as_array().unwrap();
    assert_eq!(segments.len(), result.budgets.len());
    for key in ["start", "end", "dtm_budget", "ats_budget", "ats_per_frame", "anchor_frames"] {
        assert!(segments[0].get(key).is_some(), "{key}");
    }
}

#[test]
fn empty_result_artifacts_are_valid() {
    use fastvid::io::{write_result, ResultFormat};
    let dump = random_dump(&mut ChaCha8Rng::seed_from_u64(3));
    let mut result = prune(&dump, &PruneConfig { retention_ratio: 0.3, ..Default::default() }).unwrap();
    result.retained.clear();
    result.merged_into.iter_mut().for_each(|m| *m = None);
    result.stats = fastvid::PruneStats::tally(result.stats.total_tokens, &[], &result.merged_into, result.segmentation.len());
    let dir = tempfile::tempdir().unwrap();
    for (name, format) in [("r.fvpr", ResultFormat::Binary), ("r.json", ResultFormat::JsonStats), ("r.svg", ResultFormat::Svg)] {
        write_result(&result, dir.path().join(name), format).unwrap();
    }
    assert_eq!(fastvid::io::read_result_binary(dir.path().join("r.fvpr")).unwrap(), result);
    let svg = std::fs::read_to_string(dir.path().join("r.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), dump.frames() * dump.tokens_per_frame());
}
