//! Tracking evaluation.
//!
//! Ground truth and predictions are matched per `(view, frame)` by maximum
//! cardinality, then maximum total IoU, among pairs with IoU at or above the
//! threshold. The per-frame correspondences feed:
//!
//! * CVMA: `1 − Σ(m + fp + 2·mme) / Σ gt`, with all views pooled per frame.
//!   A mismatched pair is a matched `(gt, pred)` observation whose predicted
//!   global ID differs from the one the ground-truth identity carried at its
//!   previous matched frame (taken from the lowest-indexed view it was
//!   matched in).
//! * CVIDF1: identity precision/recall under the single best one-to-one
//!   mapping between ground-truth and predicted global IDs, pooled over all
//!   views and frames.
//! * CLEAR single-view metrics per view (MOTA, MOTP as mean IoU, IDSw, FM,
//!   MT/ML at 80%/20% coverage) and per-view IDF1, pooled over views by
//!   summing counts.

pub mod reference;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::assign::{gate, hungarian, CostMatrix};
use crate::error::{Error, Result};
use crate::model::{iou_unchecked, BBox};
use crate::pipeline::TrackingOutput;
use crate::simulate::SceneTruth;

/// One labelled box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub id: u64,
    pub bbox: BBox,
}

/// Ground truth and predictions of one view.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewSequence {
    pub gt: Vec<Observation>,
    pub pred: Vec<Observation>,
}

/// Pairs simulated ground truth with tracker output. With `global`, the
/// predictions carry global IDs, otherwise per-view local IDs.
pub fn scene_sequences(truth: &SceneTruth, output: &TrackingOutput, global: bool) -> Vec<ViewSequence> {
    truth
        .boxes
        .iter()
        .enumerate()
        .map(|(v, boxes)| {
            let gt = boxes.iter().map(|b| Observation { frame: b.frame, id: b.global_id, bbox: b.bbox }).collect();
            let pred = if global {
                output.cross.get(v).map_or_else(Vec::new, |rows| {
                    rows.iter().map(|r| Observation { frame: r.frame, id: r.global_id, bbox: r.bbox }).collect()
                })
            } else {
                output.single.get(v).map_or_else(Vec::new, |rows| {
                    rows.iter().map(|r| Observation { frame: r.frame, id: r.local_id as u64, bbox: r.bbox }).collect()
                })
            };
            ViewSequence { gt, pred }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt_id: u64,
    pub pred_id: u64,
    pub iou: f64,
}

/// Matching result for one `(view, frame)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameCorrespondence {
    pub matches: Vec<MatchedPair>,
    pub unmatched_gt: Vec<u64>,
    pub unmatched_pred: Vec<u64>,
}

/// One-to-one matching of one frame's boxes; pairs below `iou_threshold`
/// are never matched.
pub fn match_frame(gt: &[(u64, BBox)], pred: &[(u64, BBox)], iou_threshold: f64) -> FrameCorrespondence {
    let cost = CostMatrix::from_fn(gt.len(), pred.len(), |r, c| 1.0 - iou_unchecked(&gt[r].1, &pred[c].1));
    // Entries above 1 − threshold are exactly the pairs with IoU < threshold.
    let assignment = hungarian(&gate(&cost, 1.0 - iou_threshold));
    FrameCorrespondence {
        matches: assignment
            .pairs
            .iter()
            .map(|&(r, c)| MatchedPair { gt_id: gt[r].0, pred_id: pred[c].0, iou: 1.0 - cost.get(r, c) })
            .collect(),
        unmatched_gt: assignment.unmatched_rows.iter().map(|&r| gt[r].0).collect(),
        unmatched_pred: assignment.unmatched_cols.iter().map(|&c| pred[c].0).collect(),
    }
}

/// `per_view[v][frame]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correspondences {
    pub per_view: Vec<BTreeMap<u32, FrameCorrespondence>>,
}

fn by_frame(obs: &[Observation]) -> BTreeMap<u32, Vec<(u64, BBox)>> {
    let mut m: BTreeMap<u32, Vec<(u64, BBox)>> = BTreeMap::new();
    for o in obs {
        m.entry(o.frame).or_default().push((o.id, o.bbox));
    }
    m
}

pub fn correspond(views: &[ViewSequence], iou_threshold: f64) -> Correspondences {
    let per_view = views
        .iter()
        .map(|v| {
            let gt = by_frame(&v.gt);
            let pred = by_frame(&v.pred);
            let frames: BTreeSet<u32> = gt.keys().chain(pred.keys()).copied().collect();
            let empty = Vec::new();
            frames
                .into_iter()
                .map(|f| {
                    let g = gt.get(&f).unwrap_or(&empty);
                    let p = pred.get(&f).unwrap_or(&empty);
                    (f, match_frame(g, p, iou_threshold))
                })
                .collect()
        })
        .collect();
    Correspondences { per_view }
}

impl Correspondences {
    fn total_gt(&self) -> usize {
        self.per_view.iter().flat_map(|m| m.values()).map(|c| c.matches.len() + c.unmatched_gt.len()).sum()
    }

    fn total_pred(&self) -> usize {
        self.per_view.iter().flat_map(|m| m.values()).map(|c| c.matches.len() + c.unmatched_pred.len()).sum()
    }

    fn frames(&self) -> BTreeSet<u32> {
        self.per_view.iter().flat_map(|m| m.keys().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvmaScore {
    pub value: f64,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub gt: usize,
}

/// Cross-view matching accuracy; may be negative.
pub fn cvma(c: &Correspondences) -> Result<CvmaScore> {
    let gt = c.total_gt();
    if gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut misses = 0;
    let mut false_positives = 0;
    let mut mismatches = 0;
    let mut carried: BTreeMap<u64, u64> = BTreeMap::new();
    for t in c.frames() {
        let mut now: BTreeMap<u64, u64> = BTreeMap::new();
        for view in &c.per_view {
            let Some(fc) = view.get(&t) else { continue };
            misses += fc.unmatched_gt.len();
            false_positives += fc.unmatched_pred.len();
            for m in &fc.matches {
                if carried.get(&m.gt_id).is_some_and(|&prev| prev != m.pred_id) {
                    mismatches += 1;
                }
                now.entry(m.gt_id).or_insert(m.pred_id);
            }
        }
        carried.extend(now);
    }
    let value = 1.0 - (misses + false_positives + 2 * mismatches) as f64 / gt as f64;
    Ok(CvmaScore { value, misses, false_positives, mismatches, gt })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdScores {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

impl IdScores {
    fn from_counts(idtp: usize, n_gt: usize, n_pred: usize) -> Self {
        let precision = if n_pred == 0 { 0.0 } else { idtp as f64 / n_pred as f64 };
        let recall = if n_gt == 0 { 0.0 } else { idtp as f64 / n_gt as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        IdScores { f1, precision, recall, idtp, idfp: n_pred - idtp, idfn: n_gt - idtp }
    }
}

/// Largest total co-occurrence count under a one-to-one id mapping.
fn best_identity_overlap<'a>(frames: impl Iterator<Item = &'a FrameCorrespondence>) -> usize {
    let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for fc in frames {
        for m in &fc.matches {
            *counts.entry((m.gt_id, m.pred_id)).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return 0;
    }
    let gt_ids: Vec<u64> = counts.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let pred_ids: Vec<u64> = counts.keys().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
    let cost = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), |r, c| {
        -(counts.get(&(gt_ids[r], pred_ids[c])).copied().unwrap_or(0) as f64)
    });
    hungarian(&cost).pairs.iter().map(|&(r, c)| counts.get(&(gt_ids[r], pred_ids[c])).copied().unwrap_or(0)).sum()
}

/// Cross-view identity F1 with one global mapping over all views.
pub fn cvidf1(c: &Correspondences) -> Result<IdScores> {
    let gt = c.total_gt();
    if gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let idtp = best_identity_overlap(c.per_view.iter().flat_map(|m| m.values()));
    Ok(IdScores::from_counts(idtp, gt, c.total_pred()))
}

/// CLEAR and identity counts of one view (or several, summed).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClearCounts {
    pub gt: usize,
    pub pred: usize,
    pub matches: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub idsw: usize,
    pub fm: usize,
    pub mt: usize,
    pub ml: usize,
    pub trajectories: usize,
    pub iou_sum: f64,
    pub idtp: usize,
}

impl ClearCounts {
    pub fn mota(&self) -> Option<f64> {
        (self.gt > 0).then(|| 1.0 - (self.misses + self.false_positives + self.idsw) as f64 / self.gt as f64)
    }

    /// Mean IoU of matched pairs.
    pub fn motp(&self) -> Option<f64> {
        (self.matches > 0).then(|| self.iou_sum / self.matches as f64)
    }

    pub fn id_scores(&self) -> IdScores {
        IdScores::from_counts(self.idtp, self.gt, self.pred)
    }

    fn add(&mut self, o: &ClearCounts) {
        self.gt += o.gt;
        self.pred += o.pred;
        self.matches += o.matches;
        self.misses += o.misses;
        self.false_positives += o.false_positives;
        self.idsw += o.idsw;
        self.fm += o.fm;
        self.mt += o.mt;
        self.ml += o.ml;
        self.trajectories += o.trajectories;
        self.iou_sum += o.iou_sum;
        self.idtp += o.idtp;
    }
}

#[derive(Default)]
struct Coverage {
    present: usize,
    tracked: usize,
    was_tracked: bool,
    interrupted: bool,
}

/// CLEAR counts for a single view, ids interpreted view-locally.
pub fn clear_view(frames: &BTreeMap<u32, FrameCorrespondence>) -> ClearCounts {
    let mut out = ClearCounts::default();
    let mut last_pred: BTreeMap<u64, u64> = BTreeMap::new();
    let mut coverage: BTreeMap<u64, Coverage> = BTreeMap::new();
    for fc in frames.values() {
        out.gt += fc.matches.len() + fc.unmatched_gt.len();
        out.pred += fc.matches.len() + fc.unmatched_pred.len();
        out.matches += fc.matches.len();
        out.misses += fc.unmatched_gt.len();
        out.false_positives += fc.unmatched_pred.len();
        for m in &fc.matches {
            out.iou_sum += m.iou;
            if let Some(prev) = last_pred.insert(m.gt_id, m.pred_id) {
                if prev != m.pred_id {
                    out.idsw += 1;
                }
            }
            let cov = coverage.entry(m.gt_id).or_default();
            cov.present += 1;
            cov.tracked += 1;
            if cov.interrupted {
                out.fm += 1;
                cov.interrupted = false;
            }
            cov.was_tracked = true;
        }
        for g in &fc.unmatched_gt {
            let cov = coverage.entry(*g).or_default();
            cov.present += 1;
            if cov.was_tracked {
                cov.interrupted = true;
            }
        }
    }
    for cov in coverage.values() {
        out.trajectories += 1;
        let ratio = cov.tracked as f64 / cov.present as f64;
        if ratio >= 0.8 {
            out.mt += 1;
        } else if ratio < 0.2 {
            out.ml += 1;
        }
    }
    out.idtp = best_identity_overlap(frames.values());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearReport {
    pub per_view: Vec<ClearCounts>,
    pub total: ClearCounts,
}

pub fn clear_metrics(c: &Correspondences) -> Result<ClearReport> {
    let per_view: Vec<ClearCounts> = c.per_view.iter().map(clear_view).collect();
    let mut total = ClearCounts::default();
    for v in &per_view {
        total.add(v);
    }
    if total.gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(ClearReport { per_view, total })
}

/// Every score for one scene group.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Present when evaluated with global IDs.
    pub cross: Option<CrossViewScores>,
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idsw: usize,
    pub fm: usize,
    pub mt: usize,
    pub ml: usize,
    pub per_view: Vec<ClearCounts>,
    pub total: ClearCounts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossViewScores {
    pub cvma: CvmaScore,
    pub cvid: IdScores,
}

impl MetricsReport {
    pub fn cvma(&self) -> Option<f64> {
        self.cross.map(|c| c.cvma.value)
    }

    pub fn cvidf1(&self) -> Option<f64> {
        self.cross.map(|c| c.cvid.f1)
    }
}

/// Full evaluation. With `cross_view`, prediction ids are treated as global
/// IDs shared by all views.
pub fn evaluate(views: &[ViewSequence], iou_threshold: f64, cross_view: bool) -> Result<MetricsReport> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidParameter("iou threshold must lie in [0, 1]"));
    }
    let c = correspond(views, iou_threshold);
    let clear = clear_metrics(&c)?;
    let cross = if cross_view { Some(CrossViewScores { cvma: cvma(&c)?, cvid: cvidf1(&c)? }) } else { None };
    let ids = clear.total.id_scores();
    let t = clear.total;
    Ok(MetricsReport {
        cross,
        mota: t.mota().expect("non-empty ground truth"),
        motp: t.motp().unwrap_or(0.0),
        idf1: ids.f1,
        idp: ids.precision,
        idr: ids.recall,
        idsw: t.idsw,
        fm: t.fm,
        mt: t.mt,
        ml: t.ml,
        per_view: clear.per_view,
        total: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn b(l: f64) -> BBox {
        BBox { left: l, top: 0.0, width: 10.0, height: 10.0 }
    }

    fn obs(frame: u32, id: u64, l: f64) -> Observation {
        Observation { frame, id, bbox: b(l) }
    }

    #[test]
    fn frame_matching_cases() {
        let gt = [(1, b(0.0)), (2, b(100.0))];
        let fc = match_frame(&gt, &gt, 0.5);
        assert_eq!(fc.matches.len(), 2);
        assert!(fc.unmatched_gt.is_empty() && fc.unmatched_pred.is_empty());

        let far = [(7, b(500.0))];
        let fc = match_frame(&gt, &far, 0.5);
        assert!(fc.matches.is_empty());
        assert_eq!(fc.unmatched_gt, vec![1, 2]);

        // g1 = [0,10], g2 = [6,16]; p1 = [5,15], p2 = [1,11]
        // straight: IoU(g1,p1)=5/15, IoU(g2,p2)=5/15 -> 0.667
        // cross:    IoU(g1,p2)=9/11, IoU(g2,p1)=9/11 -> 1.636
        let gt = [(1, b(0.0)), (2, b(6.0))];
        let pred = [(10, b(5.0)), (20, b(1.0))];
        let fc = match_frame(&gt, &pred, 0.0);
        let pairs: Vec<(u64, u64)> = fc.matches.iter().map(|m| (m.gt_id, m.pred_id)).collect();
        assert_eq!(pairs, vec![(1, 20), (2, 10)]);
    }

    fn perfect_two_views() -> Vec<ViewSequence> {
        (0..2)
            .map(|v| {
                let gt: Vec<Observation> = (1..=5).flat_map(|f| [obs(f, 0, 0.0 + v as f64), obs(f, 1, 50.0)]).collect();
                ViewSequence { pred: gt.clone(), gt }
            })
            .collect()
    }

    #[test]
    fn perfect_tracking() {
        let r = evaluate(&perfect_two_views(), 0.5, true).unwrap();
        assert_eq!(r.cvma(), Some(1.0));
        let cv = r.cross.unwrap().cvid;
        assert_eq!((cv.f1, cv.precision, cv.recall), (1.0, 1.0, 1.0));
        assert_eq!((r.mota, r.idsw, r.fm, r.ml), (1.0, 0, 0, 0));
        assert_eq!(r.mt, r.total.trajectories);
        assert_eq!(r.motp, 1.0);
    }

    #[test]
    fn one_view_predicted() {
        let mut views = perfect_two_views();
        views[1].pred.clear();
        let c = correspond(&views, 0.5);
        let s = cvidf1(&c).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cvma_hand_count() {
        // 10 gt objects over 3 frames in 2 views; one miss, one false
        // positive, one identity mismatch.
        let gt_v0 = vec![obs(1, 0, 0.0), obs(1, 1, 50.0), obs(2, 0, 0.0), obs(2, 1, 50.0), obs(3, 0, 0.0)];
        let gt_v1 = vec![obs(1, 0, 0.0), obs(1, 1, 50.0), obs(2, 0, 0.0), obs(2, 1, 50.0), obs(3, 0, 0.0)];
        let pred_v0 =
            vec![obs(1, 5, 0.0), obs(1, 6, 50.0), obs(2, 5, 0.0), obs(2, 6, 50.0), obs(3, 5, 0.0), obs(3, 9, 300.0)];
        // view 1 misses gt 1 at frame 2 and labels gt 0 with 7 at frame 3
        let pred_v1 = vec![obs(1, 5, 0.0), obs(1, 6, 50.0), obs(2, 5, 0.0), obs(3, 7, 0.0)];
        let views = vec![ViewSequence { gt: gt_v0, pred: pred_v0 }, ViewSequence { gt: gt_v1, pred: pred_v1 }];
        let s = cvma(&correspond(&views, 0.5)).unwrap();
        assert_eq!((s.gt, s.misses, s.false_positives, s.mismatches), (10, 1, 1, 1));
        assert!((s.value - 0.6).abs() < 1e-15);
    }

    #[test]
    fn no_predictions_and_empty_truth() {
        let mut views = perfect_two_views();
        for v in &mut views {
            v.pred.clear();
        }
        let c = correspond(&views, 0.5);
        assert_eq!(cvma(&c).unwrap().value, 0.0);
        let empty = vec![ViewSequence::default()];
        let c = correspond(&empty, 0.5);
        assert_eq!(cvma(&c), Err(Error::EmptyGroundTruth));
        assert_eq!(cvidf1(&c), Err(Error::EmptyGroundTruth));
        assert!(clear_metrics(&c).is_err());
    }

    #[test]
    fn heavy_false_positives_make_cvma_negative() {
        let mut views = perfect_two_views();
        for f in 1..=5 {
            for k in 0..5 {
                views[0].pred.push(obs(f, 100 + k, 1000.0 + 40.0 * k as f64));
            }
        }
        assert!(cvma(&correspond(&views, 0.5)).unwrap().value < 0.0);
    }

    #[test]
    fn id_swap_counts_two_switches() {
        // Two agents, 6 frames; predicted ids swap from frame 4 on.
        let gt: Vec<Observation> = (1..=6).flat_map(|f| [obs(f, 0, 0.0), obs(f, 1, 50.0)]).collect();
        let pred: Vec<Observation> = (1..=6)
            .flat_map(|f| if f < 4 { [obs(f, 10, 0.0), obs(f, 11, 50.0)] } else { [obs(f, 11, 0.0), obs(f, 10, 50.0)] })
            .collect();
        let r = evaluate(&[ViewSequence { gt, pred }], 0.5, false).unwrap();
        assert_eq!(r.idsw, 2);
        // Best mapping keeps 3 of 6 frames per identity: IDTP = 6 of 12.
        assert_eq!(r.total.idtp, 6);
        assert!((r.idf1 - 0.5).abs() < 1e-15);
        assert!((r.mota - (1.0 - 2.0 / 12.0)).abs() < 1e-15);
    }

    #[test]
    fn odd_frames_missed() {
        let gt: Vec<Observation> = (1..=10).map(|f| obs(f, 0, 0.0)).collect();
        let pred: Vec<Observation> = gt.iter().filter(|o| o.frame % 2 == 0).copied().collect();
        let r = evaluate(&[ViewSequence { gt, pred }], 0.5, false).unwrap();
        assert_eq!(r.mota, 0.5);
        // tracked at 2,4,6,8,10 after gaps at 3,5,7,9
        assert_eq!(r.fm, 4);
        assert_eq!((r.mt, r.ml), (0, 0));
    }

    #[test]
    fn reference_agrees_on_perfect_scene() {
        let slow = reference::reference_scores(&perfect_two_views(), 0.5).unwrap();
        assert_eq!((slow.cvma, slow.cvidf1, slow.mota, slow.idf1, slow.idsw), (1.0, 1.0, 1.0, 1.0, 0));
    }

    mod props {
        use super::*;
        use crate::metrics::reference::tiny_scene;
        use proptest::prelude::*;

        fn scores(views: &[ViewSequence]) -> Option<CrossViewScores> {
            evaluate(views, 0.5, true).ok().and_then(|r| r.cross)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn bounded(seed in any::<u64>()) {
                if let Some(c) = scores(&tiny_scene(seed)) {
                    let id = c.cvid;
                    for v in [id.f1, id.precision, id.recall] {
                        prop_assert!((0.0..=1.0).contains(&v));
                    }
                    if id.precision + id.recall > 0.0 {
                        let h = 2.0 * id.precision * id.recall / (id.precision + id.recall);
                        prop_assert!((id.f1 - h).abs() < 1e-12);
                    }
                    prop_assert!(c.cvma.value <= 1.0);
                }
            }

            #[test]
            fn false_positive_never_helps(seed in any::<u64>(), pick in any::<usize>(), frame in 1u32..12) {
                let mut views = tiny_scene(seed);
                let Some(before) = scores(&views) else { return Ok(()) };
                let v = pick % views.len();
                let bbox = BBox { left: 5000.0, top: 5000.0, width: 10.0, height: 10.0 };
                views[v].pred.push(Observation { frame, id: 9999, bbox });
                let after = scores(&views).unwrap();
                prop_assert!(after.cvma.value <= before.cvma.value);
                prop_assert!(after.cvid.precision <= before.cvid.precision);
            }

            #[test]
            fn relabelling_predictions_is_harmless(seed in any::<u64>(), mult in 1u64..50, shift in 0u64..1000) {
                let views = tiny_scene(seed);
                let Some(before) = scores(&views) else { return Ok(()) };
                let relabelled: Vec<ViewSequence> = views
                    .iter()
                    .map(|v| ViewSequence {
                        gt: v.gt.clone(),
                        pred: v.pred.iter().map(|o| Observation { id: o.id * mult + shift, ..*o }).collect(),
                    })
                    .collect();
                let after = scores(&relabelled).unwrap();
                prop_assert_eq!(after.cvma.value, before.cvma.value);
                prop_assert_eq!(after.cvid.f1, before.cvid.f1);
            }
        }
    }
}
