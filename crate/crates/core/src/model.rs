//! Domain types shared by tracking, simulation and evaluation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Camera view index within one scene group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewId(pub usize);

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        let b = BBox { left, top, width, height };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.left.is_finite() && self.top.is_finite();
        if !(finite && self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(Error::InvalidBox { width: self.width, height: self.height });
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    /// Component-wise linear blend, `t = 0` gives `self`.
    pub fn lerp(&self, other: &BBox, t: f64) -> BBox {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        BBox {
            left: mix(self.left, other.left),
            top: mix(self.top, other.top),
            width: mix(self.width, other.width),
            height: mix(self.height, other.height),
        }
    }
}

/// Intersection over union of two valid boxes.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(iou_unchecked(a, b))
}

pub(crate) fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.left.max(b.left);
    let ih = a.bottom().min(b.bottom()) - a.top.max(b.top);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Dense feature vector. Tracking code keeps these L2-normalised so that a
/// dot product is a cosine similarity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingVec(pub Vec<f64>);

impl EmbeddingVec {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVec(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }

    pub fn dot(&self, other: &EmbeddingVec) -> Result<f64> {
        check_dims(self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    /// Unit-length copy; fails for zero or non-finite norms.
    pub fn normalized(&self) -> Result<EmbeddingVec> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(EmbeddingVec(self.0.iter().map(|v| v / n).collect()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(a: &EmbeddingVec, b: &EmbeddingVec) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// `1 - cos(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &EmbeddingVec, b: &EmbeddingVec) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if !(na.is_finite() && nb.is_finite() && na > 0.0 && nb > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let cos = (dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Exponential moving average `alpha * old + (1 - alpha) * new`, renormalised.
pub fn ema_update(old: &EmbeddingVec, new: &EmbeddingVec, alpha: f64) -> Result<EmbeddingVec> {
    check_dims(old, new)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter("ema alpha must lie in [0, 1]"));
    }
    let mixed: Vec<f64> = old.0.iter().zip(&new.0).map(|(o, n)| alpha * o + (1.0 - alpha) * n).collect();
    EmbeddingVec(mixed).normalized()
}

/// One observed box in one view at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub view: ViewId,
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
    pub single_emb: EmbeddingVec,
    pub cross_emb: EmbeddingVec,
    /// Only set by the simulator.
    pub gt_global_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// `(view, local_id)`: identifies a per-view track across the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackKey {
    pub view: ViewId,
    pub local_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub local_id: u32,
    pub view: ViewId,
    pub last_frame: u32,
    pub last_box: BBox,
    pub last_confidence: f64,
    pub smoothed_single_emb: EmbeddingVec,
    pub smoothed_cross_emb: EmbeddingVec,
    pub age_since_update: u32,
    pub hits: u32,
    pub status: TrackStatus,
    pub global_id: Option<u64>,
}

impl Track {
    pub fn key(&self) -> TrackKey {
        TrackKey { view: self.view, local_id: self.local_id }
    }

    pub fn is_alive(&self) -> bool {
        self.status != TrackStatus::Dead
    }
}

/// Sticky assignment of per-view tracks to global identities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalIdMap {
    assigned: BTreeMap<TrackKey, u64>,
    next_id: u64,
}

impl GlobalIdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &TrackKey) -> Option<u64> {
        self.assigned.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.assigned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assigned.is_empty()
    }

    /// Every `(track, global id)` binding made so far, in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&TrackKey, &u64)> {
        self.assigned.iter()
    }

    /// Number of distinct identities minted.
    pub fn minted(&self) -> u64 {
        self.next_id
    }

    pub(crate) fn mint(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Binds `key` to `gid` unless it already holds one.
    pub(crate) fn bind(&mut self, key: TrackKey, gid: u64) -> u64 {
        *self.assigned.entry(key).or_insert(gid)
    }

    /// Tracks holding `gid`.
    pub fn members(&self, gid: u64) -> impl Iterator<Item = &TrackKey> {
        self.assigned.iter().filter(move |(_, g)| **g == gid).map(|(k, _)| k)
    }
}
