//! Toy embedding trainer comparing head layouts on synthetic features.
//!
//! Raw features come from the simulator's appearance model: an identity
//! component shared by all views plus an identity-specific view component.
//! A shared linear trunk maps them to a hidden representation, standing in
//! for the backbone. On top of it:
//!
//! * `Shared`: one embedding (the trunk output) feeds both the global-ID
//!   classifier and a plain local-ID classifier.
//! * `DecoupledPlain`: separate cross-view and single-view projections; the
//!   single-view branch uses plain local-ID cross-entropy.
//! * `DecoupledConflictFree`: same, with the conflict-free loss instead.
//!
//! Training is deterministic full-batch gradient descent on the
//! uncertainty-weighted total loss (no detection term, weights fixed at
//! their initial values). Cross-view quality is measured by nearest-neighbour
//! retrieval of held-out same-identity samples across views.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    conflict_free_ce, cross_view_ce, plain_single_view_ce, total_loss, Gradients, LinearHead, LossGrad, Sample,
    UncertaintyWeights,
};
use crate::error::{Error, Result};
use crate::model::{cosine_distance, EmbeddingVec, ViewId};
use crate::simulate::IdentityBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Shared,
    DecoupledPlain,
    DecoupledConflictFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatchConfig {
    pub n_ids: usize,
    pub n_views: usize,
    /// Training samples per (identity, view).
    pub samples_per_pair: usize,
    /// Held-out samples per (identity, view).
    pub held_out_per_pair: usize,
    pub feature_dim: usize,
    pub view_component_weight: f64,
    pub noise: f64,
}

impl Default for SyntheticBatchConfig {
    fn default() -> Self {
        SyntheticBatchConfig {
            n_ids: 12,
            n_views: 3,
            samples_per_pair: 6,
            held_out_per_pair: 4,
            feature_dim: 24,
            view_component_weight: 0.5,
            noise: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub n_ids: usize,
    pub n_views: usize,
    pub train: Vec<Sample>,
    pub held_out: Vec<Sample>,
}

impl SyntheticBatch {
    /// Local IDs are `view * n_ids + gid`.
    pub fn generate(config: &SyntheticBatchConfig, seed: u64) -> Result<Self> {
        if config.n_ids == 0 || config.n_views == 0 || config.feature_dim == 0 {
            return Err(Error::InvalidParameter("batch dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = IdentityBank::draw(&mut rng, config.n_ids, config.n_views, config.feature_dim);
        let draw = |per_pair: usize, rng: &mut ChaCha8Rng| -> Result<Vec<Sample>> {
            let mut out = Vec::new();
            for view in 0..config.n_views {
                for gid in 0..config.n_ids {
                    for _ in 0..per_pair {
                        let x = bank.single(rng, gid, view, config.view_component_weight, config.noise)?;
                        out.push(Sample { x: x.0, gid, lid: view * config.n_ids + gid, view: ViewId(view) });
                    }
                }
            }
            Ok(out)
        };
        let train = draw(config.samples_per_pair, &mut rng)?;
        let held_out = draw(config.held_out_per_pair, &mut rng)?;
        Ok(SyntheticBatch { n_ids: config.n_ids, n_views: config.n_views, train, held_out })
    }

    pub fn n_lids(&self) -> usize {
        self.n_ids * self.n_views
    }

    pub fn lid_views(&self) -> Vec<ViewId> {
        (0..self.n_lids()).map(|c| ViewId(c / self.n_ids)).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.train.first().map_or(0, |s| s.x.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub mode: TrainMode,
    pub trunk: LinearHead,
    /// Present for the decoupled modes.
    pub cross_proj: Option<LinearHead>,
    pub single_proj: Option<LinearHead>,
    pub gid_classifier: LinearHead,
    pub lid_classifier: LinearHead,
}

/// Hidden width of the trunk; also the embedding width of each branch.
const HIDDEN: usize = 8;

impl ToyModel {
    pub fn init(mode: TrainMode, feature_dim: usize, n_ids: usize, n_lids: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = LinearHead::random(&mut rng, HIDDEN, feature_dim);
        let (cross_proj, single_proj) = match mode {
            TrainMode::Shared => (None, None),
            _ => {
                (Some(LinearHead::random(&mut rng, HIDDEN, HIDDEN)), Some(LinearHead::random(&mut rng, HIDDEN, HIDDEN)))
            }
        };
        ToyModel {
            mode,
            trunk,
            cross_proj,
            single_proj,
            gid_classifier: LinearHead::random(&mut rng, n_ids, HIDDEN),
            lid_classifier: LinearHead::random(&mut rng, n_lids, HIDDEN),
        }
    }

    /// Feature used for cross-view retrieval.
    pub fn cross_embedding(&self, x: &[f64]) -> Vec<f64> {
        let h = self.trunk.forward(x);
        match &self.cross_proj {
            Some(p) => p.forward(&h),
            None => h,
        }
    }

    pub fn single_embedding(&self, x: &[f64]) -> Vec<f64> {
        let h = self.trunk.forward(x);
        match &self.single_proj {
            Some(p) => p.forward(&h),
            None => h,
        }
    }
}

fn with_x(batch: &[Sample], xs: &[Vec<f64>]) -> Vec<Sample> {
    batch.iter().zip(xs).map(|(s, x)| Sample { x: x.clone(), ..s.clone() }).collect()
}

fn scale(g: &mut Gradients, k: f64) {
    g.weights.iter_mut().chain(g.bias.iter_mut()).chain(g.inputs.iter_mut().flatten()).for_each(|v| *v *= k);
}

fn add_rows(a: &mut [Vec<f64>], b: &[Vec<f64>]) {
    for (x, y) in a.iter_mut().zip(b) {
        for (u, v) in x.iter_mut().zip(y) {
            *u += v;
        }
    }
}

struct Step {
    loss: f64,
    trunk: Gradients,
    cross_proj: Option<Gradients>,
    single_proj: Option<Gradients>,
    gid: Gradients,
    lid: Gradients,
}

fn evaluate(model: &ToyModel, batch: &SyntheticBatch, weights: UncertaintyWeights) -> Result<Step> {
    let inputs: Vec<Vec<f64>> = batch.train.iter().map(|s| s.x.clone()).collect();
    let hidden: Vec<Vec<f64>> = inputs.iter().map(|x| model.trunk.forward(x)).collect();
    let project = |p: &Option<LinearHead>| -> Vec<Vec<f64>> {
        match p {
            Some(p) => hidden.iter().map(|h| p.forward(h)).collect(),
            None => hidden.clone(),
        }
    };
    let cross_in = project(&model.cross_proj);
    let single_in = project(&model.single_proj);

    let LossGrad { loss: l_cross, grad: mut gid } =
        cross_view_ce(&model.gid_classifier, &with_x(&batch.train, &cross_in))?;
    let single_batch = with_x(&batch.train, &single_in);
    let LossGrad { loss: l_single, grad: mut lid } = match model.mode {
        TrainMode::DecoupledConflictFree => conflict_free_ce(&model.lid_classifier, &single_batch, &batch.lid_views())?,
        _ => plain_single_view_ce(&model.lid_classifier, &single_batch)?,
    };
    let total = total_loss(0.0, l_single, l_cross, weights);
    scale(&mut gid, total.d_reid);
    scale(&mut lid, total.d_reid);

    let mut cross_proj = None;
    let mut single_proj = None;
    let mut d_hidden = vec![vec![0.0; HIDDEN]; hidden.len()];
    match (&model.cross_proj, &model.single_proj) {
        (Some(pc), Some(ps)) => {
            let gc = pc.backward(&hidden, &gid.inputs);
            let gs = ps.backward(&hidden, &lid.inputs);
            add_rows(&mut d_hidden, &gc.inputs);
            add_rows(&mut d_hidden, &gs.inputs);
            cross_proj = Some(gc);
            single_proj = Some(gs);
        }
        _ => {
            add_rows(&mut d_hidden, &gid.inputs);
            add_rows(&mut d_hidden, &lid.inputs);
        }
    }
    let trunk = model.trunk.backward(&inputs, &d_hidden);
    Ok(Step { loss: total.value, trunk, cross_proj, single_proj, gid, lid })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ToyModel,
    /// Total loss before each epoch's update, then once more after the last.
    pub trace: Vec<f64>,
}

pub const DEFAULT_EPOCHS: usize = 300;
pub const DEFAULT_LR: f64 = 0.5;

/// Full-batch gradient descent for `epochs` steps at learning rate `lr`.
pub fn toy_train(batch: &SyntheticBatch, mode: TrainMode, epochs: usize, lr: f64, seed: u64) -> Result<TrainOutcome> {
    if batch.train.is_empty() {
        return Err(Error::InvalidParameter("training batch is empty"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidParameter("learning rate must be positive"));
    }
    let weights = UncertaintyWeights::INITIAL;
    let mut model = ToyModel::init(mode, batch.feature_dim(), batch.n_ids, batch.n_lids(), seed);
    let mut trace = Vec::with_capacity(epochs + 1);
    for epoch in 0..=epochs {
        let step = evaluate(&model, batch, weights)?;
        if !step.loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(step.loss);
        if epoch == epochs {
            break;
        }
        model.trunk.descend(&step.trunk, lr);
        if let (Some(p), Some(g)) = (model.cross_proj.as_mut(), step.cross_proj.as_ref()) {
            p.descend(g, lr);
        }
        if let (Some(p), Some(g)) = (model.single_proj.as_mut(), step.single_proj.as_ref()) {
            p.descend(g, lr);
        }
        model.gid_classifier.descend(&step.gid, lr);
        model.lid_classifier.descend(&step.lid, lr);
    }
    Ok(TrainOutcome { model, trace })
}

/// Fraction of held-out samples whose cosine nearest neighbour among
/// another view's samples shares their identity, over all ordered view
/// pairs.
pub fn retrieval_accuracy(model: &ToyModel, samples: &[Sample]) -> Result<f64> {
    let embedded: Vec<(ViewId, usize, EmbeddingVec)> =
        samples.iter().map(|s| (s.view, s.gid, EmbeddingVec(model.cross_embedding(&s.x)))).collect();
    let mut hits = 0usize;
    let mut total = 0usize;
    let views: alloc::collections::BTreeSet<ViewId> = samples.iter().map(|s| s.view).collect();
    for (qv, qg, qe) in &embedded {
        for gv in views.iter().filter(|v| *v != qv) {
            let mut best: Option<(f64, usize)> = None;
            for (v, g, e) in &embedded {
                if v != gv {
                    continue;
                }
                let d = cosine_distance(qe, e)?;
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, *g));
                }
            }
            if let Some((_, g)) = best {
                total += 1;
                if g == *qg {
                    hits += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::InvalidParameter("retrieval needs samples from at least two views"));
    }
    Ok(hits as f64 / total as f64)
}
