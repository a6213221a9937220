//! Full pruning pipeline: segmentation, per-segment budget split, attention
//! selection and density merging, then order-preserving reassembly.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ats::{saliency, select_salient};
use crate::dtm::{
    assign_and_merge, cluster_merge, density_anchors, select_anchor_frames, uniform_anchors,
    MergeOutcome,
};
use crate::dyseg::{cluster_segment, dyseg, fixed_interval_segment, transition_profile};
use crate::error::{Error, Result, Stage};
use crate::types::{
    AnchorFrame, Origin, PruneConfig, PruneResult, PruneStats, RetainedToken, RoundingPolicy,
    SegmentBudget, Segmentation, TokenDump, TokenPos,
};

const EPS: f64 = 1e-9;

fn floor_tol(x: f64) -> usize {
    (x + EPS).floor().max(0.0) as usize
}

/// `round(r·F·N)` with halves rounded up.
pub fn retention_target(retention_ratio: f64, total_tokens: usize) -> usize {
    floor_tol(retention_ratio * total_tokens as f64 + 0.5)
}

struct SegmentPlan {
    start: usize,
    ats: Vec<usize>,
    /// `(frame, anchors)` for every anchor frame, including zero-budget ones.
    anchors: Vec<(usize, usize)>,
}

impl SegmentPlan {
    fn anchors_on(&self, frame: usize) -> usize {
        self.anchors
            .iter()
            .find(|a| a.0 == frame)
            .map_or(0, |a| a.1)
    }

    fn room(&self, frame: usize, n: usize) -> usize {
        n - self.ats[frame - self.start] - self.anchors_on(frame)
    }

    fn total(&self) -> usize {
        self.ats.iter().sum::<usize>() + self.anchors.iter().map(|a| a.1).sum::<usize>()
    }

    /// Give one ATS token to `frame` if it has room.
    fn bump_ats(&mut self, frame: usize, n: usize) -> bool {
        if self.room(frame, n) > 0 {
            self.ats[frame - self.start] += 1;
            true
        } else {
            false
        }
    }

    /// Give one anchor to the least-loaded anchor frame with room (earliest on ties).
    fn bump_dtm(&mut self, n: usize) -> bool {
        let mut best: Option<usize> = None;
        for (i, &(frame, b)) in self.anchors.iter().enumerate() {
            if self.room(frame, n) == 0 {
                continue;
            }
            if best.is_none_or(|j| b < self.anchors[j].1) {
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                self.anchors[i].1 += 1;
                true
            }
            None => false,
        }
    }
}

/// Split the global budget `round(r·F·N)` across segments.
///
/// Per segment of `P` frames, `d·r·P·N` tokens go to density merging spread
/// over `⌈P/p⌉` anchor frames (remainder to earlier frames) and
/// `(1-d)·r·N` per frame go to attention selection. Fractions are floored and
/// the remainder is handed out one token at a time in ascending frame (ATS)
/// or segment (DTM) order according to `policy`. An anchor frame never holds
/// more than `N` retained tokens; overflowing anchors spill to other anchor
/// frames of the segment, then to ATS on the segment's frames.
pub fn budget_plan(
    segmentation: &Segmentation,
    tokens_per_frame: usize,
    retention_ratio: f64,
    dtm_fraction: f64,
    anchor_interval: usize,
    policy: RoundingPolicy,
) -> Result<Vec<SegmentBudget>> {
    let n = tokens_per_frame;
    if !(retention_ratio > 0.0 && retention_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "retention_ratio {retention_ratio} outside (0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&dtm_fraction) {
        return Err(Error::InvalidConfig(format!(
            "dtm_fraction {dtm_fraction} outside [0, 1]"
        )));
    }
    if anchor_interval == 0 || n == 0 {
        return Err(Error::InvalidConfig(
            "anchor_interval and tokens_per_frame must be positive".into(),
        ));
    }
    let frames = segmentation.frames();
    let target = retention_target(retention_ratio, frames * n);
    let ats_each = floor_tol((1.0 - dtm_fraction) * retention_ratio * n as f64);

    let mut plans = Vec::with_capacity(segmentation.len());
    for &(start, end) in segmentation.segments() {
        let p = end - start + 1;
        let dtm = floor_tol(dtm_fraction * retention_ratio * (p * n) as f64);
        let anchor_frames = select_anchor_frames((start, end), anchor_interval);
        let a = anchor_frames.len();
        let mut plan = SegmentPlan {
            start,
            ats: vec![ats_each.min(n); p],
            anchors: anchor_frames
                .iter()
                .enumerate()
                .map(|(i, &f)| (f, dtm / a + usize::from(i < dtm % a)))
                .collect(),
        };
        // Spill anchors that do not fit next to the frame's ATS picks.
        let mut spill = 0;
        for i in 0..plan.anchors.len() {
            let cap = n - plan.ats[plan.anchors[i].0 - start];
            if plan.anchors[i].1 > cap {
                spill += plan.anchors[i].1 - cap;
                plan.anchors[i].1 = cap;
            }
        }
        while spill > 0 && plan.bump_dtm(n) {
            spill -= 1;
        }
        for frame in start..=end {
            while spill > 0 && plan.bump_ats(frame, n) {
                spill -= 1;
            }
        }
        if spill > 0 {
            return Err(Error::BudgetOverflow {
                requested: plan.total() + spill,
                available: p * n,
            });
        }
        plans.push(plan);
    }

    let assigned: usize = plans.iter().map(SegmentPlan::total).sum();
    if assigned > target {
        return Err(Error::BudgetOverflow {
            requested: assigned,
            available: target,
        });
    }
    let mut remainder = target - assigned;
    let ats_first = match policy {
        RoundingPolicy::RemainderToAts => dtm_fraction < 1.0,
        RoundingPolicy::RemainderToDtm => dtm_fraction == 0.0,
    };
    let mut modes = if ats_first { [true, false] } else { [false, true] }.into_iter();
    let mut ats_mode = modes.next().unwrap();
    while remainder > 0 {
        let before = remainder;
        if ats_mode {
            'pass: for plan in plans.iter_mut() {
                for frame in plan.start..plan.start + plan.ats.len() {
                    if remainder == 0 {
                        break 'pass;
                    }
                    if plan.bump_ats(frame, n) {
                        remainder -= 1;
                    }
                }
            }
        } else {
            for plan in plans.iter_mut() {
                if remainder == 0 {
                    break;
                }
                if plan.bump_dtm(n) {
                    remainder -= 1;
                }
            }
        }
        if remainder == before {
            match modes.next() {
                Some(m) => ats_mode = m,
                None => {
                    return Err(Error::BudgetOverflow {
                        requested: target,
                        available: target - remainder,
                    })
                }
            }
        }
    }

    plans
        .into_iter()
        .enumerate()
        .map(|(i, plan)| {
            let budget = SegmentBudget {
                start: plan.start,
                end: plan.start + plan.ats.len() - 1,
                dtm_budget: plan.anchors.iter().map(|a| a.1).sum(),
                ats_budget: plan.ats.iter().sum(),
                ats_per_frame: plan.ats,
                anchor_frames: plan
                    .anchors
                    .into_iter()
                    .filter(|a| a.1 > 0)
                    .map(|(frame, budget)| AnchorFrame { frame, budget })
                    .collect(),
            };
            if budget.total() == 0 {
                Err(Error::BudgetUnderflow { segment: i })
            } else {
                Ok(budget)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmenter {
    #[default]
    DySeg,
    FixedInterval(usize),
    /// k-means over frame features with this many clusters (clamped to `F`).
    Cluster(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Merger {
    #[default]
    Density,
    Uniform,
    Cluster,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub segmentation: Duration,
    pub compression: Duration,
}

/// A configured pruning run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pipeline {
    pub config: PruneConfig,
    pub segmenter: Segmenter,
    pub merger: Merger,
    /// Run independent per-segment and per-anchor-frame work on the rayon pool.
    pub parallel: bool,
}

impl Pipeline {
    pub fn new(config: PruneConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }

    pub fn with_strategy(mut self, segmenter: Segmenter, merger: Merger) -> Self {
        self.segmenter = segmenter;
        self.merger = merger;
        self
    }

    pub fn parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn run(&self, dump: &TokenDump) -> Result<PruneResult> {
        self.run_timed(dump).map(|(r, _)| r)
    }

    pub fn segment(&self, dump: &TokenDump) -> Result<Segmentation> {
        let cfg = &self.config;
        match self.segmenter {
            Segmenter::DySeg => {
                let profile = transition_profile(dump)?;
                Ok(dyseg(&profile, cfg.min_segments, cfg.transition_threshold))
            }
            Segmenter::FixedInterval(interval) => fixed_interval_segment(dump.frames(), interval),
            Segmenter::Cluster(k) => cluster_segment(dump, k.clamp(1, dump.frames())),
        }
    }

    pub fn run_timed(&self, dump: &TokenDump) -> Result<(PruneResult, StageTimings)> {
        let cfg = &self.config;
        cfg.validate().map_err(|e| e.at(Stage::Validation))?;
        let (f, n) = (dump.frames(), dump.tokens_per_frame());

        let t0 = Instant::now();
        let segmentation = self.segment(dump).map_err(|e| e.at(Stage::Segmentation))?;
        let t1 = Instant::now();

        let budgets = budget_plan(
            &segmentation,
            n,
            cfg.retention_ratio,
            cfg.dtm_fraction,
            cfg.anchor_interval,
            cfg.rounding_policy,
        )
        .map_err(|e| e.at(Stage::Budget))?;

        let picks = self
            .select_ats(dump, &budgets)
            .map_err(|e| e.at(Stage::Selection))?;

        let merge_one = |b: &SegmentBudget| self.merge_segment(dump, b, &picks);
        let outcomes: Vec<MergeOutcome> = if self.parallel {
            budgets.par_iter().map(merge_one).collect::<Result<_>>()
        } else {
            budgets.iter().map(merge_one).collect::<Result<_>>()
        }
        .map_err(|e| e.at(Stage::Merging))?;

        let result = assemble(dump, segmentation, budgets, &picks, outcomes);
        let t2 = Instant::now();
        debug_assert_eq!(f * n, result.merged_into.len());
        Ok((
            result,
            StageTimings {
                segmentation: t1 - t0,
                compression: t2 - t1,
            },
        ))
    }

    /// ATS picks for every frame, indexed by frame.
    fn select_ats(&self, dump: &TokenDump, budgets: &[SegmentBudget]) -> Result<Vec<Vec<usize>>> {
        let mut picks = vec![Vec::new(); dump.frames()];
        if budgets.iter().all(|b| b.ats_budget == 0) {
            return Ok(picks);
        }
        let pooled = saliency(dump, self.config.attention_source)?;
        for b in budgets {
            for (offset, &budget) in b.ats_per_frame.iter().enumerate() {
                let frame = b.start + offset;
                picks[frame] = select_salient(&pooled, frame, budget, &[])?;
            }
        }
        Ok(picks)
    }

    fn merge_segment(
        &self,
        dump: &TokenDump,
        budget: &SegmentBudget,
        picks: &[Vec<usize>],
    ) -> Result<MergeOutcome> {
        if budget.dtm_budget == 0 {
            return Ok(MergeOutcome::default());
        }
        let segment = (budget.start, budget.end);
        let excluded: Vec<TokenPos> = (budget.start..=budget.end)
            .flat_map(|f| picks[f].iter().map(move |&s| TokenPos::new(f, s)))
            .collect();
        let excluded_in = |frame: usize| picks[frame].as_slice();
        let beta = self.config.merge_weight;
        match self.merger {
            Merger::Density => {
                let anchors = density_anchors(
                    dump,
                    &budget.anchor_frames,
                    self.config.knn_k,
                    &excluded_in,
                    self.parallel,
                )?;
                assign_and_merge(dump, segment, &anchors, &excluded, beta)
            }
            Merger::Uniform => {
                let anchors = uniform_anchors(dump, &budget.anchor_frames, &excluded_in)?;
                assign_and_merge(dump, segment, &anchors, &excluded, beta)
            }
            Merger::Cluster => cluster_merge(dump, segment, budget.dtm_budget, &excluded),
        }
    }
}

fn assemble(
    dump: &TokenDump,
    segmentation: Segmentation,
    budgets: Vec<SegmentBudget>,
    picks: &[Vec<usize>],
    outcomes: Vec<MergeOutcome>,
) -> PruneResult {
    let (f, n) = (dump.frames(), dump.tokens_per_frame());
    let mut retained: Vec<RetainedToken> = Vec::new();
    for (frame, spatial) in picks.iter().enumerate() {
        for &s in spatial {
            let pos = TokenPos::new(frame, s);
            retained.push(RetainedToken {
                pos,
                embedding: dump.token(pos).to_vec(),
                origin: Origin::Ats,
                merged_count: 0,
            });
        }
    }
    let mut assignments = Vec::new();
    for outcome in outcomes {
        for (pos, ai) in outcome.plan.assignment {
            assignments.push((pos, outcome.plan.anchors[ai]));
        }
        retained.extend(outcome.tokens);
    }
    retained.sort_unstable_by_key(|t| t.pos);

    let mut index_of = vec![u32::MAX; f * n];
    for (i, t) in retained.iter().enumerate() {
        index_of[t.pos.flat(n)] = i as u32;
    }
    let mut merged_into = vec![None; f * n];
    for (pos, anchor) in assignments {
        merged_into[pos.flat(n)] = Some(index_of[anchor.flat(n)]);
    }
    let stats = PruneStats::tally(f * n, &retained, &merged_into, segmentation.len());
    PruneResult {
        frames: f,
        tokens_per_frame: n,
        token_dim: dump.token_dim(),
        grid: (dump.dims().pool_out_h, dump.dims().pool_out_w),
        retained,
        segmentation,
        budgets,
        merged_into,
        stats,
    }
}

/// Check the structural invariants of a pipeline result against the config
/// that produced it. Returns one message per violation.
pub fn verify_result(result: &PruneResult, config: &PruneConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let (f, n) = (result.frames, result.tokens_per_frame);
    let target = retention_target(config.retention_ratio, f * n);
    if result.retained.len() != target {
        problems.push(format!(
            "retained {} tokens, expected round(r·F·N) = {target}",
            result.retained.len()
        ));
    }
    if let Some(w) = result.retained.windows(2).find(|w| w[0].pos >= w[1].pos) {
        problems.push(format!(
            "retained order broken at ({}, {})",
            w[1].pos.frame, w[1].pos.spatial
        ));
    }
    if result
        .retained
        .iter()
        .any(|t| t.origin == Origin::Ats && t.merged_count != 0)
    {
        problems.push("ATS token with non-zero merged_count".into());
    }
    if result.merged_into.len() != f * n {
        problems.push("merged_into does not cover every token".into());
        return problems;
    }

    let labels = result.segmentation.frame_labels();
    let mut merged_counts = vec![0usize; result.retained.len()];
    for (flat, m) in result.merged_into.iter().enumerate() {
        let Some(i) = m else { continue };
        let Some(anchor) = result.retained.get(*i as usize) else {
            problems.push(format!("token {flat} merged into missing index {i}"));
            continue;
        };
        merged_counts[*i as usize] += 1;
        if anchor.origin != Origin::DtmAnchor {
            problems.push(format!("token {flat} merged into a non-anchor"));
        }
        if labels[flat / n] != labels[anchor.pos.frame as usize] {
            problems.push(format!("token {flat} merged across segments"));
        }
    }
    for (t, &count) in result.retained.iter().zip(&merged_counts) {
        if t.merged_count != count {
            problems.push(format!(
                "token ({}, {}) reports {} merged, assignment has {count}",
                t.pos.frame, t.pos.spatial, t.merged_count
            ));
        }
    }

    for (si, b) in result.budgets.iter().enumerate() {
        let in_seg = |t: &&RetainedToken| (b.start..=b.end).contains(&(t.pos.frame as usize));
        let dtm = result
            .retained
            .iter()
            .filter(in_seg)
            .filter(|t| t.origin == Origin::DtmAnchor)
            .count();
        let ats = result
            .retained
            .iter()
            .filter(in_seg)
            .filter(|t| t.origin == Origin::Ats)
            .count();
        if dtm != b.dtm_budget || ats != b.ats_budget {
            problems.push(format!(
                "segment {si}: {dtm} DTM / {ats} ATS tokens, planned {} / {}",
                b.dtm_budget, b.ats_budget
            ));
        }
        if b.ats_per_frame.iter().sum::<usize>() != b.ats_budget
            || b.anchor_frames.iter().map(|a| a.budget).sum::<usize>() != b.dtm_budget
        {
            problems.push(format!("segment {si}: budget report does not add up"));
        }
    }
    let tally = PruneStats::tally(f * n, &result.retained, &result.merged_into, result.segmentation.len());
    if tally != result.stats {
        problems.push("stats do not match retained tallies".into());
    }
    problems
}

/// Run the canonical pipeline (dynamic segmentation, density merging).
pub fn prune(dump: &TokenDump, config: &PruneConfig) -> Result<PruneResult> {
    Pipeline::new(config.clone()).run(dump)
}

/// Run the pipeline with an alternative segmenter and/or merger.
pub fn compare_strategies(
    dump: &TokenDump,
    config: &PruneConfig,
    segmenter: Segmenter,
    merger: Merger,
) -> Result<PruneResult> {
    Pipeline::new(config.clone())
        .with_strategy(segmenter, merger)
        .run(dump)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_segment(frames: usize) -> Segmentation {
        Segmentation::new(vec![(0, frames - 1)], frames).unwrap()
    }

    #[test]
    fn worked_example_eight_frames() {
        let plan = budget_plan(&one_segment(8), 196, 0.1, 0.4, 4, RoundingPolicy::default())
            .unwrap();
        let b = &plan[0];
        assert_eq!(b.total(), 157);
        assert_eq!(b.dtm_budget, 62);
        assert_eq!(b.ats_budget, 95);
        assert_eq!(b.ats_per_frame, vec![12, 12, 12, 12, 12, 12, 12, 11]);
        assert_eq!(
            b.anchor_frames,
            vec![
                AnchorFrame { frame: 0, budget: 31 },
                AnchorFrame { frame: 4, budget: 31 }
            ]
        );
    }

    #[test]
    fn all_to_ats() {
        let plan = budget_plan(&one_segment(8), 196, 0.1, 0.0, 4, RoundingPolicy::default())
            .unwrap();
        assert_eq!(plan[0].dtm_budget, 0);
        assert!(plan[0].anchor_frames.is_empty());
        assert_eq!(plan[0].ats_budget, 157);
    }

    #[test]
    fn all_to_dtm() {
        let plan = budget_plan(&one_segment(8), 196, 0.1, 1.0, 4, RoundingPolicy::default())
            .unwrap();
        assert_eq!(plan[0].ats_budget, 0);
        assert!(plan[0].ats_per_frame.iter().all(|&a| a == 0));
        assert_eq!(plan[0].dtm_budget, 157);
        assert_eq!(plan[0].anchor_frames[0].budget, 79);
        assert_eq!(plan[0].anchor_frames[1].budget, 78);
    }

    #[test]
    fn single_frame_half_retention() {
        let plan = budget_plan(&one_segment(1), 196, 0.5, 0.4, 1, RoundingPolicy::default())
            .unwrap();
        assert_eq!(plan[0].dtm_budget, 39);
        assert_eq!(plan[0].ats_budget, 59);
    }

    #[test]
    fn remainder_to_dtm_policy() {
        let plan = budget_plan(&one_segment(1), 196, 0.5, 0.4, 1, RoundingPolicy::RemainderToDtm)
            .unwrap();
        assert_eq!((plan[0].dtm_budget, plan[0].ats_budget), (40, 58));
    }

    #[test]
    fn global_total_is_exact_across_segments() {
        let seg = Segmentation::new(vec![(0, 2), (3, 3), (4, 9), (10, 31)], 32).unwrap();
        for r in [0.05, 0.097, 0.1, 0.15, 0.25, 0.6, 1.0] {
            for d in [0.0, 0.3, 0.4, 1.0] {
                let plan = budget_plan(&seg, 196, r, d, 4, RoundingPolicy::default()).unwrap();
                let total: usize = plan.iter().map(SegmentBudget::total).sum();
                assert_eq!(total, retention_target(r, 32 * 196), "r={r} d={d}");
            }
        }
    }

    #[test]
    fn anchors_spill_when_frame_is_full() {
        // r=0.8, d=0.4, p=4 puts 2.56 frames' worth of anchors on 2 anchor frames.
        let plan = budget_plan(&one_segment(8), 10, 0.8, 0.4, 4, RoundingPolicy::default())
            .unwrap();
        let b = &plan[0];
        assert_eq!(b.total(), 64);
        for af in &b.anchor_frames {
            assert!(af.budget + b.ats_per_frame[af.frame] <= 10);
        }
    }

    #[test]
    fn excess_dtm_share_spills_to_ats() {
        let plan = budget_plan(&one_segment(8), 10, 1.0, 1.0, 4, RoundingPolicy::default())
            .unwrap();
        assert_eq!(plan[0].dtm_budget, 20);
        assert_eq!(plan[0].ats_budget, 60);
    }

    #[test]
    fn zero_budget_segment_underflows() {
        let seg = Segmentation::new(vec![(0, 0), (1, 1)], 2).unwrap();
        let err = budget_plan(&seg, 4, 0.1, 0.4, 1, RoundingPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::BudgetUnderflow { .. }));
    }

    #[test]
    fn retention_target_rounds_half_up() {
        assert_eq!(retention_target(0.097, 6272), 608);
        assert_eq!(retention_target(0.1, 6272), 627);
        assert_eq!(retention_target(0.5, 3), 2);
        assert_eq!(retention_target(0.25, 2), 1);
    }
}
