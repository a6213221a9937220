//! SVG rendering of a pruning result: one patch grid per frame.
//!
//! ATS picks are blue, DTM anchors carry a red border over their merge-group
//! color, and merged tokens take the fill and border color of the group they
//! were merged into. Dropped tokens are light grey. Segment boundaries are
//! brown vertical lines; anchor frames get a red outline.

use std::fmt::Write as _;

use crate::types::{Origin, PruneResult};

const CELL: usize = 10;
const GAP: usize = 12;
const FRAMES_PER_ROW: usize = 8;
const ATS_FILL: &str = "#1f77b4";
const ANCHOR_STROKE: &str = "#d62728";
const DROPPED_FILL: &str = "#eeeeee";
const BOUNDARY: &str = "#8b4513";

fn group_color(group: u32) -> String {
    let hue = (group as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},65%,62%)")
}

pub fn render_svg(result: &PruneResult) -> String {
    let (gh, gw) = result.grid;
    let n = result.tokens_per_frame;
    let f = result.frames;
    let cols = f.clamp(1, FRAMES_PER_ROW);
    let rows = f.div_ceil(FRAMES_PER_ROW).max(1);
    let frame_w = gw * CELL;
    let frame_h = gh * CELL;
    let width = cols * (frame_w + GAP) + GAP;
    let height = rows * (frame_h + GAP) + GAP;
    let origin_of = |frame: usize| {
        let (r, c) = (frame / FRAMES_PER_ROW, frame % FRAMES_PER_ROW);
        (GAP + c * (frame_w + GAP), GAP + r * (frame_h + GAP))
    };

    let mut retained_at = vec![None; f * n];
    for (i, t) in result.retained.iter().enumerate() {
        retained_at[t.pos.flat(n)] = Some(i as u32);
    }
    let anchor_frames: Vec<usize> = result
        .budgets
        .iter()
        .flat_map(|b| b.anchor_frames.iter().map(|a| a.frame))
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for frame in 0..f {
        let (x0, y0) = origin_of(frame);
        let _ = writeln!(svg, r#"<g class="frame" data-frame="{frame}">"#);
        for spatial in 0..n {
            let flat = frame * n + spatial;
            let (x, y) = (x0 + (spatial % gw) * CELL, y0 + (spatial / gw) * CELL);
            let (fill, stroke, class) = match (retained_at[flat], result.merged_into[flat]) {
                (Some(i), _) => match result.retained[i as usize].origin {
                    Origin::Ats => (ATS_FILL.to_string(), ATS_FILL.to_string(), "ats"),
                    Origin::DtmAnchor => (group_color(i), ANCHOR_STROKE.to_string(), "anchor"),
                },
                (None, Some(g)) => (group_color(g), group_color(g), "merged"),
                (None, None) => (DROPPED_FILL.to_string(), "#cccccc".to_string(), "dropped"),
            };
            let _ = writeln!(
                svg,
                r#"<rect class="patch {class}" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#
            );
        }
        if anchor_frames.contains(&frame) {
            let _ = writeln!(
                svg,
                r#"<path class="anchor-frame" d="M{} {}h{}v{}h-{}Z" fill="none" stroke="{ANCHOR_STROKE}" stroke-width="2"/>"#,
                x0 - 2,
                y0 - 2,
                frame_w + 4,
                frame_h + 4,
                frame_w + 4
            );
        }
        svg.push_str("</g>\n");
    }
    for boundary in result.segmentation.boundaries() {
        let (x0, y0) = origin_of(boundary + 1);
        let x = x0 - GAP / 2;
        let _ = writeln!(
            svg,
            r#"<line class="segment-boundary" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{BOUNDARY}" stroke-width="2"/>"#,
            y0 - GAP / 2,
            y0 + frame_h + GAP / 2
        );
    }
    svg.push_str("</svg>\n");
    svg
}
