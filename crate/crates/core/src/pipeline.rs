//! Alternating single-view and cross-view matching over a multi-view stream.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::cross_view::{CrossViewMatcher, CvConfig};
use crate::error::{Error, Result};
use crate::model::{BBox, Detection, TrackStatus, ViewId};
use crate::single_view::{SingleViewTracker, SvConfig, TrackRow};

/// Every tunable of a tracking/evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub delta_d: f64,
    pub delta_s: f64,
    pub delta_c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub ema_alpha: f64,
    pub max_age: u32,
    pub min_hits: u32,
    pub iou_fallback: bool,
    pub iou_fallback_threshold: f64,
    pub interpolate_gaps: bool,
    pub symmetric_matching: bool,
    pub iou_threshold_eval: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sv = SvConfig::default();
        let cv = CvConfig::default();
        RunConfig {
            delta_d: sv.delta_d,
            delta_s: sv.delta_s,
            delta_c: cv.delta_c,
            epsilon: cv.epsilon,
            gamma: cv.gamma,
            ema_alpha: sv.ema_alpha,
            max_age: sv.max_age,
            min_hits: sv.min_hits,
            iou_fallback: sv.iou_fallback,
            iou_fallback_threshold: sv.iou_fallback_threshold,
            interpolate_gaps: sv.interpolate_gaps,
            symmetric_matching: cv.symmetric,
            iou_threshold_eval: 0.5,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn sv_config(&self) -> SvConfig {
        SvConfig {
            delta_d: self.delta_d,
            delta_s: self.delta_s,
            ema_alpha: self.ema_alpha,
            max_age: self.max_age,
            min_hits: self.min_hits,
            iou_fallback: self.iou_fallback,
            iou_fallback_threshold: self.iou_fallback_threshold,
            interpolate_gaps: self.interpolate_gaps,
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig { delta_c: self.delta_c, epsilon: self.epsilon, gamma: self.gamma, symmetric: self.symmetric_matching }
    }
}

/// One output box labelled with its global identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRow {
    pub frame: u32,
    pub view: ViewId,
    pub global_id: u64,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub single: Vec<TrackRow>,
    pub cross: Vec<GlobalRow>,
}

/// Per-view results of a whole run, each sorted by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackingOutput {
    pub single: Vec<Vec<TrackRow>>,
    pub cross: Vec<Vec<GlobalRow>>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    views: Vec<SingleViewTracker>,
    matcher: CrossViewMatcher,
}

impl Tracker {
    pub fn new(n_views: usize, config: &RunConfig) -> Result<Self> {
        let views =
            (0..n_views).map(|v| SingleViewTracker::new(ViewId(v), config.sv_config())).collect::<Result<_>>()?;
        Ok(Tracker { views, matcher: CrossViewMatcher::new(config.cv_config())? })
    }

    pub fn views(&self) -> &[SingleViewTracker] {
        &self.views
    }

    pub fn matcher(&self) -> &CrossViewMatcher {
        &self.matcher
    }

    /// Single-view step on every view, then cross-view matching.
    /// `detections[v]` holds view `v`'s detections at `frame`.
    pub fn step(&mut self, frame: u32, detections: &[Vec<Detection>]) -> Result<FrameOutput> {
        if detections.len() != self.views.len() {
            return Err(Error::DimensionMismatch { expected: self.views.len(), found: detections.len() });
        }
        let mut single = Vec::new();
        for (sv, dets) in self.views.iter_mut().zip(detections) {
            single.extend(sv.step(frame, dets)?);
        }
        self.matcher.step(&mut self.views, frame)?;
        debug_assert!(self.views_exclusive(), "a global id is shared by two live tracks of one view");

        let cross = single
            .iter()
            .map(|row| {
                let gid = self.views[row.view.0]
                    .tracks()
                    .iter()
                    .find(|t| t.local_id == row.local_id)
                    .and_then(|t| t.global_id)
                    .expect("rows come from live confirmed tracks, which all hold a global id");
                GlobalRow {
                    frame: row.frame,
                    view: row.view,
                    global_id: gid,
                    bbox: row.bbox,
                    confidence: row.confidence,
                }
            })
            .collect();
        Ok(FrameOutput { single, cross })
    }

    /// No two live confirmed tracks of one view share a global ID.
    pub fn views_exclusive(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.views
            .iter()
            .flat_map(|sv| sv.tracks().iter())
            .filter(|t| t.status == TrackStatus::Confirmed)
            .filter_map(|t| t.global_id.map(|g| (t.view, g)))
            .all(|k| seen.insert(k))
    }
}

/// Tracks a whole stream; `stream[v][k]` holds view `v`'s detections at
/// frame `first_frame + k`. Views may have different lengths.
pub fn track_stream(config: &RunConfig, stream: &[Vec<Vec<Detection>>], first_frame: u32) -> Result<TrackingOutput> {
    let n_views = stream.len();
    let n_frames = stream.iter().map(Vec::len).max().unwrap_or(0);
    let mut tracker = Tracker::new(n_views, config)?;
    let mut out = TrackingOutput { single: alloc::vec![Vec::new(); n_views], cross: alloc::vec![Vec::new(); n_views] };
    let empty = Vec::new();
    for k in 0..n_frames {
        let frame = first_frame + k as u32;
        let dets: Vec<Vec<Detection>> = stream.iter().map(|v| v.get(k).unwrap_or(&empty).clone()).collect();
        let fo = tracker.step(frame, &dets)?;
        for r in fo.single {
            out.single[r.view.0].push(r);
        }
        for r in fo.cross {
            out.cross[r.view.0].push(r);
        }
    }
    for rows in &mut out.single {
        rows.sort_by_key(|r| (r.frame, r.local_id));
    }
    for rows in &mut out.cross {
        rows.sort_by_key(|r| (r.frame, r.global_id));
    }
    Ok(out)
}
