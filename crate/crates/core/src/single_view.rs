//! Frame-to-frame association inside one camera view.
//!
//! Appearance-only matching: cosine distance between the track's smoothed
//! single-view embedding and each detection, gated at `delta_s`, solved with
//! the Hungarian algorithm. Leftover pairs may then be matched on box overlap.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::assign::{gate, hungarian, CostMatrix};
use crate::error::{Error, Result};
use crate::model::{cosine_distance, ema_update, iou_unchecked, BBox, Detection, Track, TrackStatus, ViewId};

#[derive(Debug, Clone, PartialEq)]
pub struct SvConfig {
    /// Minimum detection confidence admitted to tracking.
    pub delta_d: f64,
    /// Cosine-distance gate for appearance matching.
    pub delta_s: f64,
    pub ema_alpha: f64,
    /// Frames without an update before a track dies.
    pub max_age: u32,
    /// Matches needed before a track is confirmed.
    pub min_hits: u32,
    pub iou_fallback: bool,
    pub iou_fallback_threshold: f64,
    /// Emit linearly interpolated boxes for frames a track was missed in,
    /// once the track is matched again.
    pub interpolate_gaps: bool,
}

impl Default for SvConfig {
    fn default() -> Self {
        SvConfig {
            delta_d: 0.5,
            delta_s: 0.3,
            ema_alpha: 0.9,
            max_age: 30,
            min_hits: 2,
            iou_fallback: true,
            iou_fallback_threshold: 0.3,
            interpolate_gaps: true,
        }
    }
}

impl SvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_s > 0.0 && self.delta_s < 2.0) {
            return Err(Error::InvalidParameter("delta_s must lie in (0, 2)"));
        }
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::InvalidParameter("ema_alpha must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.iou_fallback_threshold) {
            return Err(Error::InvalidParameter("iou fallback threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One output box of a confirmed track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub frame: u32,
    pub view: ViewId,
    pub local_id: u32,
    pub bbox: BBox,
    pub confidence: f64,
}

/// Appearance cost between every track (rows) and detection (columns).
pub fn build_cost_matrix(tracks: &[&Track], detections: &[&Detection]) -> Result<CostMatrix> {
    let mut m = CostMatrix::new(tracks.len(), detections.len(), 0.0);
    for (r, t) in tracks.iter().enumerate() {
        for (c, d) in detections.iter().enumerate() {
            m.set(r, c, cosine_distance(&t.smoothed_single_emb, &d.single_emb)?);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct SingleViewTracker {
    view: ViewId,
    config: SvConfig,
    tracks: Vec<Track>,
    /// Rows held back while a track is still tentative.
    pending: BTreeMap<u32, Vec<TrackRow>>,
    next_local_id: u32,
    last_frame: Option<u32>,
}

impl SingleViewTracker {
    pub fn new(view: ViewId, config: SvConfig) -> Result<Self> {
        config.validate()?;
        Ok(SingleViewTracker {
            view,
            config,
            tracks: Vec::new(),
            pending: BTreeMap::new(),
            next_local_id: 0,
            last_frame: None,
        })
    }

    pub fn view(&self) -> ViewId {
        self.view
    }

    pub fn config(&self) -> &SvConfig {
        &self.config
    }

    /// Live (non-dead) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub(crate) fn tracks_mut(&mut self) -> &mut [Track] {
        &mut self.tracks
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.last_frame
    }

    /// Advances the view by one frame. Returns rows for confirmed tracks,
    /// including rows held back while a track was tentative and rows
    /// interpolated over gaps.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<TrackRow>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::OutOfOrderFrame { view: self.view.0, last, got: frame });
            }
        }
        if detections.iter().any(|d| d.view != self.view) {
            return Err(Error::InvalidParameter("detection from another view"));
        }
        self.last_frame = Some(frame);

        let dets: Vec<&Detection> = detections.iter().filter(|d| d.confidence >= self.config.delta_d).collect();

        let mut det_for_track: Vec<Option<usize>> = alloc::vec![None; self.tracks.len()];
        let mut det_taken = alloc::vec![false; dets.len()];

        {
            let track_refs: Vec<&Track> = self.tracks.iter().collect();
            let cost = gate(&build_cost_matrix(&track_refs, &dets)?, self.config.delta_s);
            for (r, c) in hungarian(&cost).pairs {
                det_for_track[r] = Some(c);
                det_taken[c] = true;
            }
        }

        if self.config.iou_fallback {
            let rest_tracks: Vec<usize> = (0..self.tracks.len()).filter(|&r| det_for_track[r].is_none()).collect();
            let rest_dets: Vec<usize> = (0..dets.len()).filter(|&c| !det_taken[c]).collect();
            if !rest_tracks.is_empty() && !rest_dets.is_empty() {
                let overlap = CostMatrix::from_fn(rest_tracks.len(), rest_dets.len(), |r, c| {
                    1.0 - iou_unchecked(&self.tracks[rest_tracks[r]].last_box, &dets[rest_dets[c]].bbox)
                });
                let gated = gate(&overlap, 1.0 - self.config.iou_fallback_threshold);
                for (r, c) in hungarian(&gated).pairs {
                    det_for_track[rest_tracks[r]] = Some(rest_dets[c]);
                    det_taken[rest_dets[c]] = true;
                }
            }
        }

        let mut rows = Vec::new();
        for (idx, assigned) in det_for_track.iter().enumerate() {
            match assigned {
                Some(c) => self.update_track(idx, dets[*c], frame, &mut rows)?,
                None => {
                    let cfg_max_age = self.config.max_age;
                    let t = &mut self.tracks[idx];
                    t.age_since_update = frame - t.last_frame;
                    if t.age_since_update > cfg_max_age {
                        t.status = TrackStatus::Dead;
                    }
                }
            }
        }

        for (c, det) in dets.iter().enumerate() {
            if !det_taken[c] {
                self.spawn(det, frame, &mut rows)?;
            }
        }

        for t in self.tracks.iter().filter(|t| t.status == TrackStatus::Dead) {
            self.pending.remove(&t.local_id);
        }
        self.tracks.retain(Track::is_alive);

        rows.sort_by_key(|r| (r.frame, r.local_id));
        Ok(rows)
    }

    fn update_track(&mut self, idx: usize, det: &Detection, frame: u32, rows: &mut Vec<TrackRow>) -> Result<()> {
        let alpha = self.config.ema_alpha;
        let t = &mut self.tracks[idx];
        let mut new_rows = Vec::new();
        if self.config.interpolate_gaps {
            let gap = frame - t.last_frame;
            for k in 1..gap {
                let s = f64::from(k) / f64::from(gap);
                new_rows.push(TrackRow {
                    frame: t.last_frame + k,
                    view: t.view,
                    local_id: t.local_id,
                    bbox: t.last_box.lerp(&det.bbox, s),
                    confidence: t.last_confidence + (det.confidence - t.last_confidence) * s,
                });
            }
        }
        new_rows.push(TrackRow {
            frame,
            view: t.view,
            local_id: t.local_id,
            bbox: det.bbox,
            confidence: det.confidence,
        });

        t.smoothed_single_emb = ema_update(&t.smoothed_single_emb, &det.single_emb, alpha)?;
        t.smoothed_cross_emb = ema_update(&t.smoothed_cross_emb, &det.cross_emb, alpha)?;
        t.last_box = det.bbox;
        t.last_confidence = det.confidence;
        t.last_frame = frame;
        t.age_since_update = 0;
        t.hits += 1;

        let local_id = t.local_id;
        match t.status {
            TrackStatus::Confirmed => rows.extend(new_rows),
            TrackStatus::Tentative => {
                let held = self.pending.entry(local_id).or_default();
                held.extend(new_rows);
                if t.hits >= self.config.min_hits {
                    t.status = TrackStatus::Confirmed;
                    rows.extend(self.pending.remove(&local_id).unwrap_or_default());
                }
            }
            TrackStatus::Dead => unreachable!("dead tracks are dropped at the end of every step"),
        }
        Ok(())
    }

    fn spawn(&mut self, det: &Detection, frame: u32, rows: &mut Vec<TrackRow>) -> Result<()> {
        let local_id = self.next_local_id;
        self.next_local_id += 1;
        let confirmed = self.config.min_hits <= 1;
        let row = TrackRow { frame, view: self.view, local_id, bbox: det.bbox, confidence: det.confidence };
        if confirmed {
            rows.push(row);
        } else {
            self.pending.insert(local_id, alloc::vec![row]);
        }
        self.tracks.push(Track {
            local_id,
            view: self.view,
            last_frame: frame,
            last_box: det.bbox,
            last_confidence: det.confidence,
            smoothed_single_emb: det.single_emb.normalized()?,
            smoothed_cross_emb: det.cross_emb.normalized()?,
            age_since_update: 0,
            hits: 1,
            status: if confirmed { TrackStatus::Confirmed } else { TrackStatus::Tentative },
            global_id: None,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmbeddingVec;
    use alloc::vec;

    fn emb(v: &[f64]) -> EmbeddingVec {
        EmbeddingVec(v.to_vec())
    }

    fn det(frame: u32, x: f64, e: &[f64]) -> Detection {
        Detection {
            view: ViewId(0),
            frame,
            bbox: BBox { left: x, top: 0.0, width: 10.0, height: 20.0 },
            confidence: 0.9,
            single_emb: emb(e),
            cross_emb: emb(e),
            gt_global_id: None,
        }
    }

    fn track(e: &[f64]) -> Track {
        Track {
            local_id: 0,
            view: ViewId(0),
            last_frame: 1,
            last_box: BBox { left: 0.0, top: 0.0, width: 1.0, height: 1.0 },
            last_confidence: 1.0,
            smoothed_single_emb: emb(e),
            smoothed_cross_emb: emb(e),
            age_since_update: 0,
            hits: 1,
            status: TrackStatus::Confirmed,
            global_id: None,
        }
    }

    #[test]
    fn cost_matrix_by_hand() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let t0 = track(&[1.0, 0.0]);
        let t1 = track(&[0.0, 1.0]);
        let d0 = det(1, 0.0, &[1.0, 0.0]);
        let d1 = det(1, 0.0, &[0.0, 1.0]);
        let d2 = det(1, 0.0, &[s, s]);
        let m = build_cost_matrix(&[&t0, &t1], &[&d0, &d1, &d2]).unwrap();
        let expect = [[0.0, 1.0, 1.0 - s], [1.0, 0.0, 1.0 - s]];
        for (r, row) in expect.iter().enumerate() {
            for (c, want) in row.iter().enumerate() {
                assert!((m.get(r, c) - want).abs() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn gate_at_default_threshold() {
        let m = CostMatrix::from_rows(&[vec![0.05, 0.31, 0.29], vec![0.3, 1.2, 0.7]]);
        let g = gate(&m, 0.3);
        let survivors: Vec<(usize, usize)> =
            (0..2).flat_map(|r| (0..3).map(move |c| (r, c))).filter(|&(r, c)| !g.is_gated(r, c)).collect();
        assert_eq!(survivors, vec![(0, 0), (0, 2), (1, 0)]);
    }

    #[test]
    fn confirmation_releases_held_rows() {
        let mut sv = SingleViewTracker::new(ViewId(0), SvConfig::default()).unwrap();
        assert!(sv.step(1, &[det(1, 0.0, &[1.0, 0.0])]).unwrap().is_empty());
        let rows = sv.step(2, &[det(2, 1.0, &[1.0, 0.0])]).unwrap();
        assert_eq!(rows.iter().map(|r| r.frame).collect::<Vec<_>>(), vec![1, 2]);
        assert!(rows.iter().all(|r| r.local_id == 0));
        assert_eq!(sv.tracks()[0].status, TrackStatus::Confirmed);
    }

    #[test]
    fn empty_frame_ages_tracks() {
        let mut sv = SingleViewTracker::new(ViewId(0), SvConfig::default()).unwrap();
        sv.step(1, &[det(1, 0.0, &[1.0, 0.0]), det(1, 50.0, &[0.0, 1.0])]).unwrap();
        sv.step(2, &[det(2, 0.0, &[1.0, 0.0]), det(2, 50.0, &[0.0, 1.0])]).unwrap();
        let rows = sv.step(3, &[]).unwrap();
        assert!(rows.is_empty());
        assert!(sv.tracks().iter().all(|t| t.age_since_update == 1));
    }

    #[test]
    fn gap_is_interpolated_on_rematch() {
        let mut sv = SingleViewTracker::new(ViewId(0), SvConfig::default()).unwrap();
        sv.step(1, &[det(1, 0.0, &[1.0, 0.0])]).unwrap();
        sv.step(2, &[det(2, 2.0, &[1.0, 0.0])]).unwrap();
        sv.step(3, &[]).unwrap();
        sv.step(4, &[]).unwrap();
        let rows = sv.step(5, &[det(5, 8.0, &[1.0, 0.0])]).unwrap();
        assert_eq!(rows.iter().map(|r| r.frame).collect::<Vec<_>>(), vec![3, 4, 5]);
        assert!((rows[0].bbox.left - 4.0).abs() < 1e-12);
        assert!((rows[1].bbox.left - 6.0).abs() < 1e-12);
    }

    #[test]
    fn tracks_die_after_max_age() {
        let cfg = SvConfig { max_age: 2, ..SvConfig::default() };
        let mut sv = SingleViewTracker::new(ViewId(0), cfg).unwrap();
        sv.step(1, &[det(1, 0.0, &[1.0, 0.0])]).unwrap();
        sv.step(2, &[]).unwrap();
        sv.step(3, &[]).unwrap();
        assert_eq!(sv.tracks().len(), 1);
        sv.step(4, &[]).unwrap();
        assert!(sv.tracks().is_empty());
        // A returning object gets a fresh local id.
        sv.step(5, &[det(5, 0.0, &[1.0, 0.0])]).unwrap();
        assert_eq!(sv.tracks()[0].local_id, 1);
    }

    #[test]
    fn low_confidence_and_out_of_order_rejected() {
        let mut sv = SingleViewTracker::new(ViewId(0), SvConfig::default()).unwrap();
        let mut weak = det(1, 0.0, &[1.0, 0.0]);
        weak.confidence = 0.49;
        sv.step(1, &[weak]).unwrap();
        assert!(sv.tracks().is_empty());
        assert!(matches!(sv.step(1, &[]), Err(Error::OutOfOrderFrame { .. })));
    }

    #[test]
    fn iou_fallback_rescues_appearance_outlier() {
        let mut sv = SingleViewTracker::new(ViewId(0), SvConfig::default()).unwrap();
        sv.step(1, &[det(1, 0.0, &[1.0, 0.0])]).unwrap();
        sv.step(2, &[det(2, 0.0, &[1.0, 0.0])]).unwrap();
        // Orthogonal appearance but same place.
        let rows = sv.step(3, &[det(3, 1.0, &[0.0, 1.0])]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].local_id, 0);

        let cfg = SvConfig { iou_fallback: false, ..SvConfig::default() };
        let mut sv = SingleViewTracker::new(ViewId(0), cfg).unwrap();
        sv.step(1, &[det(1, 0.0, &[1.0, 0.0])]).unwrap();
        sv.step(2, &[det(2, 0.0, &[1.0, 0.0])]).unwrap();
        let rows = sv.step(3, &[det(3, 1.0, &[0.0, 1.0])]).unwrap();
        assert!(rows.is_empty());
        assert_eq!(sv.tracks().len(), 2);
    }
}
