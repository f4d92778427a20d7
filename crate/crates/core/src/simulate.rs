//! Deterministic multi-camera scene generator.
//!
//! Agents walk random-waypoint paths on a ground-plane arena. Each camera
//! sees an axis-aligned sub-rectangle and projects ground positions to
//! boxes with an affine map; boxes shrink with distance from the camera's
//! reference edge. Detections are the visible boxes with dropouts, jitter
//! and Poisson false positives. Embeddings come from a per-identity vector
//! (shared by all views) mixed with a per-(identity, view) vector, so the
//! single-view feature carries view-specific appearance while the
//! cross-view feature does not.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{BBox, Detection, EmbeddingVec, ViewId};

/// Ground-plane rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    fn is_valid(&self) -> bool {
        self.x1 > self.x0 && self.y1 > self.y0 && [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite())
    }
}

/// Side of the visible rectangle the camera stands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    South,
    North,
    West,
    East,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub visible: Rect,
    /// Pixels per meter along the reference edge.
    pub pixel_scale: f64,
    pub reference: Edge,
}

/// Person height used for box sizes, meters.
const PERSON_HEIGHT: f64 = 1.8;
const ASPECT: f64 = 0.4;
/// Distance at which boxes are half their edge-side size, meters.
const FALLOFF: f64 = 5.0;
/// Spread of hard-negative false positives around a real identity.
const HARD_NEGATIVE_SPREAD: f64 = 1.0;

impl CameraSpec {
    /// `(along, depth)`: position along the reference edge and distance from it.
    fn edge_coords(&self, x: f64, y: f64) -> (f64, f64) {
        let r = &self.visible;
        match self.reference {
            Edge::South => (x - r.x0, y - r.y0),
            Edge::North => (r.x1 - x, r.y1 - y),
            Edge::West => (r.y1 - y, x - r.x0),
            Edge::East => (y - r.y0, r.x1 - x),
        }
    }

    fn extent(&self) -> (f64, f64) {
        let r = &self.visible;
        match self.reference {
            Edge::South | Edge::North => (r.x1 - r.x0, r.y1 - r.y0),
            Edge::West | Edge::East => (r.y1 - r.y0, r.x1 - r.x0),
        }
    }

    fn box_height(&self, depth: f64) -> f64 {
        PERSON_HEIGHT * self.pixel_scale * FALLOFF / (FALLOFF + depth)
    }

    /// Box of an agent standing at `(x, y)`; the foot point sits at the
    /// bottom centre.
    pub fn project(&self, x: f64, y: f64) -> BBox {
        let (along, depth) = self.edge_coords(x, y);
        let (_, depth_extent) = self.extent();
        let h = self.box_height(depth);
        let w = ASPECT * h;
        let foot_x = along * self.pixel_scale;
        let foot_y = (depth_extent - depth) * self.pixel_scale * 0.5 + PERSON_HEIGHT * self.pixel_scale;
        BBox { left: foot_x - w / 2.0, top: foot_y - h, width: w, height: h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub n_agents: usize,
    pub n_views: usize,
    pub n_frames: u32,
    pub arena: Rect,
    /// Meters per frame, `(min, max)`.
    pub speed_range: (f64, f64),
    pub cameras: Vec<CameraSpec>,
    pub miss_prob: f64,
    /// Expected false positives per view per frame.
    pub fp_rate: f64,
    pub box_jitter_sigma: f64,
    pub sigma_cross: f64,
    pub sigma_single: f64,
    pub view_component_weight: f64,
    pub embedding_dim: usize,
    /// Draw false-positive embeddings near real identities.
    pub hard_negatives: bool,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig::with_views(3)
    }
}

impl SceneConfig {
    /// Noise-free scene with `n_views` cameras that all cover the whole
    /// arena from different sides.
    pub fn with_views(n_views: usize) -> Self {
        let arena = Rect::new(0.0, 0.0, 20.0, 20.0);
        SceneConfig {
            n_agents: 6,
            n_views,
            n_frames: 200,
            arena,
            speed_range: (0.05, 0.15),
            cameras: default_cameras(arena, n_views),
            miss_prob: 0.0,
            fp_rate: 0.0,
            box_jitter_sigma: 0.0,
            sigma_cross: 0.0,
            sigma_single: 0.0,
            view_component_weight: 0.5,
            embedding_dim: 512,
            hard_negatives: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = Error::InvalidParameter;
        if self.n_agents < 1 {
            return Err(fail("n_agents must be at least 1"));
        }
        if self.n_views < 2 {
            return Err(fail("n_views must be at least 2"));
        }
        if self.n_frames < 1 {
            return Err(fail("n_frames must be at least 1"));
        }
        if !self.arena.is_valid() {
            return Err(fail("arena must be a non-empty rectangle"));
        }
        let (lo, hi) = self.speed_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(fail("speed range must satisfy 0 <= min <= max"));
        }
        if self.cameras.len() != self.n_views {
            return Err(fail("one camera spec per view required"));
        }
        for cam in &self.cameras {
            if !cam.visible.is_valid() || !cam.visible.overlaps(&self.arena) {
                return Err(fail("camera rectangle must overlap the arena"));
            }
            if !(cam.pixel_scale > 0.0 && cam.pixel_scale.is_finite()) {
                return Err(fail("pixel scale must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.miss_prob) {
            return Err(fail("miss_prob must lie in [0, 1)"));
        }
        for v in [self.fp_rate, self.box_jitter_sigma, self.sigma_cross, self.sigma_single] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(fail("noise parameters must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.view_component_weight) {
            return Err(fail("view_component_weight must lie in [0, 1]"));
        }
        if self.embedding_dim == 0 {
            return Err(fail("embedding_dim must be positive"));
        }
        Ok(())
    }
}

/// Full-arena cameras on alternating sides.
pub fn default_cameras(arena: Rect, n_views: usize) -> Vec<CameraSpec> {
    const SIDES: [Edge; 4] = [Edge::South, Edge::West, Edge::East, Edge::North];
    (0..n_views).map(|v| CameraSpec { visible: arena, pixel_scale: 40.0, reference: SIDES[v % 4] }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtBox {
    pub frame: u32,
    pub view: ViewId,
    pub global_id: u64,
    pub bbox: BBox,
    /// Ground-plane position of the agent.
    pub ground: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub n_frames: u32,
    /// `boxes[v]` sorted by `(frame, global_id)`.
    pub boxes: Vec<Vec<GtBox>>,
    /// `trajectories[agent][frame - 1]`.
    pub trajectories: Vec<Vec<(f64, f64)>>,
}

/// A detection before features are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDetection {
    pub view: ViewId,
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
    /// `None` for false positives.
    pub source: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub truth: SceneTruth,
    /// `detections[v][frame - 1]`.
    pub detections: Vec<Vec<Vec<SimDetection>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScene {
    pub truth: SceneTruth,
    /// `stream[v][frame - 1]`.
    pub stream: Vec<Vec<Vec<Detection>>>,
}

const MOTION_STREAM: u64 = 0;
const DETECTION_STREAM: u64 = 1;
const EMBEDDING_STREAM: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Walker {
    pos: (f64, f64),
    target: (f64, f64),
    speed: f64,
}

fn uniform_point(rng: &mut ChaCha8Rng, r: &Rect) -> (f64, f64) {
    (rng.random_range(r.x0..=r.x1), rng.random_range(r.y0..=r.y1))
}

fn uniform_speed(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random-waypoint ground trajectories, one position per frame.
fn walk(config: &SceneConfig) -> Vec<Vec<(f64, f64)>> {
    let mut rng = rng_for(config.seed, MOTION_STREAM);
    let mut walkers: Vec<Walker> = (0..config.n_agents)
        .map(|_| Walker {
            pos: uniform_point(&mut rng, &config.arena),
            target: uniform_point(&mut rng, &config.arena),
            speed: uniform_speed(&mut rng, config.speed_range),
        })
        .collect();
    let mut paths = vec![Vec::with_capacity(config.n_frames as usize); config.n_agents];
    for _ in 0..config.n_frames {
        for (w, path) in walkers.iter_mut().zip(paths.iter_mut()) {
            path.push(w.pos);
            let (dx, dy) = (w.target.0 - w.pos.0, w.target.1 - w.pos.1);
            let dist = libm::hypot(dx, dy);
            if dist <= w.speed {
                w.pos = w.target;
                w.target = uniform_point(&mut rng, &config.arena);
                w.speed = uniform_speed(&mut rng, config.speed_range);
            } else {
                w.pos = (w.pos.0 + dx / dist * w.speed, w.pos.1 + dy / dist * w.speed);
            }
        }
    }
    paths
}

fn jitter(rng: &mut ChaCha8Rng, b: BBox, sigma: f64) -> BBox {
    if sigma == 0.0 {
        return b;
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    BBox {
        left: b.left + n.sample(rng),
        top: b.top + n.sample(rng),
        width: (b.width + n.sample(rng)).max(1.0),
        height: (b.height + n.sample(rng)).max(1.0),
    }
}

fn false_positive_box(rng: &mut ChaCha8Rng, cam: &CameraSpec) -> BBox {
    let (along_extent, depth_extent) = cam.extent();
    let r = &cam.visible;
    let along = rng.random_range(0.0..=along_extent);
    let depth = rng.random_range(0.0..=depth_extent);
    let (x, y) = match cam.reference {
        Edge::South => (r.x0 + along, r.y0 + depth),
        Edge::North => (r.x1 - along, r.y1 - depth),
        Edge::West => (r.x0 + depth, r.y1 - along),
        Edge::East => (r.x1 - depth, r.y0 + along),
    };
    let b = cam.project(x, y);
    let s = rng.random_range(0.6..1.2);
    BBox { left: b.left, top: b.bottom() - b.height * s, width: b.width * s, height: b.height * s }
}

/// Ground truth plus raw detections (no features yet).
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let trajectories = walk(config);
    let mut rng = rng_for(config.seed, DETECTION_STREAM);
    let poisson = if config.fp_rate > 0.0 {
        Some(Poisson::new(config.fp_rate).map_err(|_| Error::InvalidParameter("fp_rate"))?)
    } else {
        None
    };

    let mut gt = vec![Vec::new(); config.n_views];
    let mut detections = vec![Vec::with_capacity(config.n_frames as usize); config.n_views];
    for (v, cam) in config.cameras.iter().enumerate() {
        let view = ViewId(v);
        for f in 0..config.n_frames {
            let frame = f + 1;
            let mut dets = Vec::new();
            for (g, path) in trajectories.iter().enumerate() {
                let (x, y) = path[f as usize];
                if !cam.visible.contains(x, y) {
                    continue;
                }
                let bbox = cam.project(x, y);
                gt[v].push(GtBox { frame, view, global_id: g as u64, bbox, ground: (x, y) });
                let dropped = rng.random_bool(config.miss_prob);
                let bbox = jitter(&mut rng, bbox, config.box_jitter_sigma);
                let confidence = rng.random_range(0.6..=1.0);
                if !dropped {
                    dets.push(SimDetection { view, frame, bbox, confidence, source: Some(g as u64) });
                }
            }
            if let Some(p) = &poisson {
                let n_fp = p.sample(&mut rng) as usize;
                for _ in 0..n_fp {
                    let bbox = false_positive_box(&mut rng, cam);
                    let confidence = rng.random_range(0.3..=1.0);
                    dets.push(SimDetection { view, frame, bbox, confidence, source: None });
                }
            }
            dets.shuffle(&mut rng);
            detections[v].push(dets);
        }
    }
    Ok(Scene { truth: SceneTruth { n_frames: config.n_frames, boxes: gt, trajectories }, detections })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = libm::sqrt(v.iter().map(|x| x * x).sum());
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Isotropic noise with expected norm close to `sigma`.
fn add_noise(rng: &mut ChaCha8Rng, base: &mut [f64], sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    let scale = sigma / libm::sqrt(base.len() as f64);
    for x in base.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x += scale * z;
    }
}

fn finish(v: Vec<f64>) -> Result<EmbeddingVec> {
    EmbeddingVec(v).normalized()
}

/// Fixed identity vector per agent and view vector per (agent, view).
pub struct IdentityBank {
    pub identity: Vec<Vec<f64>>,
    /// `view_part[g][v]`.
    pub view_part: Vec<Vec<Vec<f64>>>,
}

impl IdentityBank {
    pub fn draw(rng: &mut ChaCha8Rng, n_ids: usize, n_views: usize, dim: usize) -> Self {
        let identity = (0..n_ids).map(|_| random_unit(rng, dim)).collect();
        let view_part = (0..n_ids).map(|_| (0..n_views).map(|_| random_unit(rng, dim)).collect()).collect();
        IdentityBank { identity, view_part }
    }

    /// View-invariant feature: `u_g + σ·noise`, normalised.
    pub fn cross(&self, rng: &mut ChaCha8Rng, g: usize, sigma: f64) -> Result<EmbeddingVec> {
        let mut v = self.identity[g].clone();
        add_noise(rng, &mut v, sigma);
        finish(v)
    }

    /// `(1 − λ)·u_g + λ·w_{g,v} + σ·noise`, normalised.
    pub fn single(&self, rng: &mut ChaCha8Rng, g: usize, view: usize, lambda: f64, sigma: f64) -> Result<EmbeddingVec> {
        let mut v: Vec<f64> = self.identity[g]
            .iter()
            .zip(&self.view_part[g][view])
            .map(|(u, w)| (1.0 - lambda) * u + lambda * w)
            .collect();
        add_noise(rng, &mut v, sigma);
        finish(v)
    }
}

/// Attaches single-view and cross-view features to every detection.
pub fn sample_embeddings(scene: &Scene, config: &SceneConfig) -> Result<Vec<Vec<Vec<Detection>>>> {
    config.validate()?;
    let dim = config.embedding_dim;
    let mut rng = rng_for(config.seed, EMBEDDING_STREAM);
    let bank = IdentityBank::draw(&mut rng, config.n_agents, config.n_views, dim);
    let lambda = config.view_component_weight;

    let mut stream = Vec::with_capacity(scene.detections.len());
    for per_view in &scene.detections {
        let mut frames = Vec::with_capacity(per_view.len());
        for dets in per_view {
            let mut out = Vec::with_capacity(dets.len());
            for d in dets {
                let (cross_emb, single_emb) = match d.source {
                    Some(g) => {
                        let g = g as usize;
                        (
                            bank.cross(&mut rng, g, config.sigma_cross)?,
                            bank.single(&mut rng, g, d.view.0, lambda, config.sigma_single)?,
                        )
                    }
                    None if config.hard_negatives => {
                        let g = rng.random_range(0..config.n_agents);
                        let mut c = bank.identity[g].clone();
                        let mut s = bank.single(&mut rng, g, d.view.0, lambda, 0.0)?.0;
                        for (x, n) in c.iter_mut().zip(random_unit(&mut rng, dim)) {
                            *x += HARD_NEGATIVE_SPREAD * n;
                        }
                        for (x, n) in s.iter_mut().zip(random_unit(&mut rng, dim)) {
                            *x += HARD_NEGATIVE_SPREAD * n;
                        }
                        (finish(c)?, finish(s)?)
                    }
                    None => (EmbeddingVec(random_unit(&mut rng, dim)), EmbeddingVec(random_unit(&mut rng, dim))),
                };
                out.push(Detection {
                    view: d.view,
                    frame: d.frame,
                    bbox: d.bbox,
                    confidence: d.confidence,
                    single_emb,
                    cross_emb,
                    gt_global_id: d.source,
                });
            }
            frames.push(out);
        }
        stream.push(frames);
    }
    Ok(stream)
}

/// [`generate_scene`] followed by [`sample_embeddings`].
pub fn simulate(config: &SceneConfig) -> Result<SimulatedScene> {
    let scene = generate_scene(config)?;
    let stream = sample_embeddings(&scene, config)?;
    Ok(SimulatedScene { truth: scene.truth, stream })
}
