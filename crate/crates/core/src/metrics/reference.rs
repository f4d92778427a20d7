//! Exhaustive evaluator for tiny scenes.
//!
//! Shares no code with the fast path beyond [`iou`](crate::model::iou):
//! frame matchings and identity mappings are found by enumerating every
//! partial injection.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Observation, ViewSequence};
use crate::error::{Error, Result};
use crate::model::{iou_unchecked, BBox};

pub const MAX_IDS: usize = 8;
pub const MAX_FRAMES: usize = 20;
/// Per `(view, frame)`, on either side.
pub const MAX_BOXES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceScores {
    pub cvma: f64,
    pub cvidf1: f64,
    pub cvidp: f64,
    pub cvidr: f64,
    pub mota: f64,
    pub idf1: f64,
    pub idsw: usize,
}

/// `(view, frame, gt id, pred id)` for every matched box.
type Match = (usize, u32, u64, u64);

fn distinct(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Best partial injection gt -> pred over pairs with IoU >= threshold, by
/// count first and IoU sum second. `choice[i]` is the pred index or `None`.
fn best_frame_matching(ious: &[Vec<f64>], threshold: f64) -> Vec<Option<usize>> {
    fn rec(
        i: usize,
        ious: &[Vec<f64>],
        threshold: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        score: (usize, f64),
        best: &mut (usize, f64, Vec<Option<usize>>),
    ) {
        if i == ious.len() {
            if score.0 > best.0 || (score.0 == best.0 && score.1 > best.1) {
                *best = (score.0, score.1, cur.clone());
            }
            return;
        }
        cur[i] = None;
        rec(i + 1, ious, threshold, used, cur, score, best);
        for j in 0..used.len() {
            if !used[j] && ious[i][j] >= threshold {
                used[j] = true;
                cur[i] = Some(j);
                rec(i + 1, ious, threshold, used, cur, (score.0 + 1, score.1 + ious[i][j]), best);
                cur[i] = None;
                used[j] = false;
            }
        }
    }
    let n_pred = ious.first().map_or(0, Vec::len);
    let mut best = (0, -1.0, vec![None; ious.len()]);
    rec(0, ious, threshold, &mut vec![false; n_pred], &mut vec![None; ious.len()], (0, 0.0), &mut best);
    best.2
}

/// Largest number of `matches` consistent with one injective id mapping.
/// Pairs that never co-occur add nothing and are skipped.
fn best_mapping(matches: &[Match]) -> usize {
    let gts = distinct(matches.iter().map(|m| m.2).collect());
    let preds = distinct(matches.iter().map(|m| m.3).collect());
    let count = |g: u64, p: u64| matches.iter().filter(|m| m.2 == g && m.3 == p).count();
    let table: Vec<Vec<usize>> = gts.iter().map(|&g| preds.iter().map(|&p| count(g, p)).collect()).collect();
    fn rec(i: usize, table: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
        if i == table.len() {
            return 0;
        }
        let mut best = rec(i + 1, table, used);
        for j in 0..used.len() {
            if !used[j] && table[i][j] > 0 {
                used[j] = true;
                best = best.max(table[i][j] + rec(i + 1, table, used));
                used[j] = false;
            }
        }
        best
    }
    rec(0, &table, &mut vec![false; preds.len()])
}

fn f1(tp: usize, n_gt: usize, n_pred: usize) -> (f64, f64, f64) {
    let p = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let r = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (f, p, r)
}

/// Scores a scene whose predictions carry global IDs.
pub fn reference_scores(views: &[ViewSequence], iou_threshold: f64) -> Result<ReferenceScores> {
    let gt_ids = distinct(views.iter().flat_map(|v| v.gt.iter().map(|o| o.id)).collect());
    let mut frames: Vec<u32> = views.iter().flat_map(|v| v.gt.iter().chain(&v.pred).map(|o| o.frame)).collect();
    frames.sort_unstable();
    frames.dedup();
    if gt_ids.len() > MAX_IDS {
        return Err(Error::InstanceTooLarge("more than 8 ground-truth identities"));
    }
    if frames.len() > MAX_FRAMES {
        return Err(Error::InstanceTooLarge("more than 20 frames"));
    }

    let mut n_gt = 0;
    let mut n_pred = 0;
    let mut misses = 0;
    let mut fps = 0;
    let mut matches: Vec<Match> = Vec::new();
    for (vi, v) in views.iter().enumerate() {
        for &f in &frames {
            let g: Vec<_> = v.gt.iter().filter(|o| o.frame == f).collect();
            let p: Vec<_> = v.pred.iter().filter(|o| o.frame == f).collect();
            if g.len() > MAX_BOXES || p.len() > MAX_BOXES {
                return Err(Error::InstanceTooLarge("more than 8 boxes in one frame"));
            }
            let ious: Vec<Vec<f64>> =
                g.iter().map(|a| p.iter().map(|b| iou_unchecked(&a.bbox, &b.bbox)).collect()).collect();
            let choice = best_frame_matching(&ious, iou_threshold);
            let k = choice.iter().flatten().count();
            n_gt += g.len();
            n_pred += p.len();
            misses += g.len() - k;
            fps += p.len() - k;
            for (i, c) in choice.iter().enumerate() {
                if let Some(j) = c {
                    matches.push((vi, f, g[i].id, p[*j].id));
                }
            }
        }
    }
    if n_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }

    // Mismatched pairs: compare against the pred id seen at the identity's
    // latest earlier matched frame, in the lowest view matched there.
    let mut mme = 0;
    for m in &matches {
        let earlier = matches.iter().filter(|o| o.2 == m.2 && o.1 < m.1).map(|o| o.1).max();
        if let Some(t) = earlier {
            let reference = matches.iter().filter(|o| o.2 == m.2 && o.1 == t).min_by_key(|o| o.0).unwrap().3;
            if reference != m.3 {
                mme += 1;
            }
        }
    }
    let cvma = 1.0 - (misses + fps + 2 * mme) as f64 / n_gt as f64;
    let (cvidf1, cvidp, cvidr) = f1(best_mapping(&matches), n_gt, n_pred);

    // Single-view counts, per view then summed.
    let mut idsw = 0;
    let mut idtp = 0;
    for vi in 0..views.len() {
        let mine: Vec<Match> = matches.iter().filter(|m| m.0 == vi).copied().collect();
        for m in &mine {
            let prev = mine.iter().filter(|o| o.2 == m.2 && o.1 < m.1).max_by_key(|o| o.1);
            if prev.is_some_and(|o| o.3 != m.3) {
                idsw += 1;
            }
        }
        idtp += best_mapping(&mine);
    }
    let mota = 1.0 - (misses + fps + idsw) as f64 / n_gt as f64;
    let (idf1, _, _) = f1(idtp, n_gt, n_pred);
    Ok(ReferenceScores { cvma, cvidf1, cvidp, cvidr, mota, idf1, idsw })
}

/// Up to 5 agents over up to 3 views and 12 frames; predictions are
/// jittered, sometimes dropped, relabelled from a pool of 8 ids, plus
/// occasional false positives.
pub fn tiny_scene(seed: u64) -> Vec<ViewSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_views = rng.random_range(1..=3);
    let n_ids = rng.random_range(1..=5u64);
    let n_frames = rng.random_range(1..=12u32);
    (0..n_views)
        .map(|_| {
            let mut vs = ViewSequence::default();
            let mut label: Vec<u64> = (0..n_ids).collect();
            for f in 1..=n_frames {
                for g in 0..n_ids {
                    if rng.random_bool(0.15) {
                        continue;
                    }
                    let bbox = BBox {
                        left: g as f64 * 15.0 + rng.random_range(0.0..6.0),
                        top: rng.random_range(0.0..6.0),
                        width: rng.random_range(8.0..14.0),
                        height: rng.random_range(8.0..14.0),
                    };
                    vs.gt.push(Observation { frame: f, id: g, bbox });
                    if rng.random_bool(0.2) {
                        continue;
                    }
                    if rng.random_bool(0.1) {
                        label[g as usize] = rng.random_range(0..8);
                    }
                    let jitter = BBox {
                        left: bbox.left + rng.random_range(-3.0..3.0),
                        top: bbox.top + rng.random_range(-3.0..3.0),
                        ..bbox
                    };
                    vs.pred.push(Observation { frame: f, id: label[g as usize], bbox: jitter });
                }
                if rng.random_bool(0.2) {
                    let bbox = BBox { left: rng.random_range(0.0..80.0), top: 0.0, width: 10.0, height: 10.0 };
                    vs.pred.push(Observation { frame: f, id: rng.random_range(0..8), bbox });
                }
            }
            vs
        })
        .collect()
}
