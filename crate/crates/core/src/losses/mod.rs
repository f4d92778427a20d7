//! Re-ID training losses with analytic gradients.
//!
//! * [`cross_view_ce`]: softmax cross-entropy over global-ID classes.
//! * [`conflict_free_ce`]: cross-entropy over local-ID classes where each
//!   sample's softmax only runs over classes belonging to its own view, so
//!   the same object seen by another camera is never a negative.
//! * [`total_loss`]: uncertainty-weighted sum of detection and Re-ID losses.
//!
//! Gradients are checked against central differences by
//! [`finite_diff_check`].

mod train;

pub use train::{
    retrieval_accuracy, toy_train, SyntheticBatch, SyntheticBatchConfig, ToyModel, TrainMode, TrainOutcome,
    DEFAULT_EPOCHS, DEFAULT_LR,
};

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ViewId;

/// Affine map `W x + b`; `W` is `n_classes × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    n_classes: usize,
    dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        LinearHead { n_classes, dim, weights: vec![0.0; n_classes * dim], bias: vec![0.0; n_classes] }
    }

    /// Gaussian weights with standard deviation `1/sqrt(dim)`, zero bias.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_classes: usize, dim: usize) -> Self {
        let scale = 1.0 / libm::sqrt(dim.max(1) as f64);
        let weights = (0..n_classes * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * scale
            })
            .collect();
        LinearHead { n_classes, dim, weights, bias: vec![0.0; n_classes] }
    }

    pub fn from_parts(n_classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::InvalidParameter("a head needs at least one class"));
        }
        if weights.len() != n_classes * dim {
            return Err(Error::DimensionMismatch { expected: n_classes * dim, found: weights.len() });
        }
        if bias.len() != n_classes {
            return Err(Error::DimensionMismatch { expected: n_classes, found: bias.len() });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("head parameters must be finite"));
        }
        Ok(LinearHead { n_classes, dim, weights, bias })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes).map(|c| self.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[c]).collect()
    }

    /// Parameter count of `W` and `b` together.
    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Backpropagates `upstream[i] = dL/d(output_i)` through the layer for
    /// inputs `inputs[i]`.
    pub fn backward(&self, inputs: &[Vec<f64>], upstream: &[Vec<f64>]) -> Gradients {
        let mut g = Gradients::zeros(self);
        for (x, up) in inputs.iter().zip(upstream) {
            let mut gx = vec![0.0; self.dim];
            for (c, &u) in up.iter().enumerate() {
                if u == 0.0 {
                    continue;
                }
                g.bias[c] += u;
                let row = self.row(c);
                for k in 0..self.dim {
                    g.weights[c * self.dim + k] += u * x[k];
                    gx[k] += u * row[k];
                }
            }
            g.inputs.push(gx);
        }
        g
    }

    /// Gradient step `θ ← θ − lr·g`.
    pub fn descend(&mut self, g: &Gradients, lr: f64) {
        for (w, d) in self.weights.iter_mut().zip(&g.weights) {
            *w -= lr * d;
        }
        for (b, d) in self.bias.iter_mut().zip(&g.bias) {
            *b -= lr * d;
        }
    }
}

/// Gradients of a scalar loss with respect to a head and its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// One row per sample.
    pub inputs: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(head: &LinearHead) -> Self {
        Gradients { weights: vec![0.0; head.weights.len()], bias: vec![0.0; head.bias.len()], inputs: Vec::new() }
    }

    /// `[W, b, x_0, x_1, ...]`, the layout of [`pack_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.extend_from_slice(&self.bias);
        for x in &self.inputs {
            v.extend_from_slice(x);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Gradients,
}

/// One training observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub gid: usize,
    /// Local IDs are scoped to one view.
    pub lid: usize,
    pub view: ViewId,
}

/// Mean over the batch of `−log softmax_S(z)[target]`, where `S` is the set
/// of classes `allowed(i, c)` admits for sample `i` (the target is always
/// admitted).
fn masked_ce(
    head: &LinearHead,
    xs: &[&[f64]],
    targets: &[usize],
    allowed: impl Fn(usize, usize) -> bool,
) -> Result<LossGrad> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("batch must not be empty"));
    }
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut upstream = Vec::with_capacity(xs.len());
    for (i, (x, &y)) in xs.iter().zip(targets).enumerate() {
        if x.len() != head.dim {
            return Err(Error::DimensionMismatch { expected: head.dim, found: x.len() });
        }
        if y >= head.n_classes {
            return Err(Error::LabelOutOfRange { label: y, n_classes: head.n_classes });
        }
        let z = head.forward(x);
        let in_set: Vec<bool> = (0..head.n_classes).map(|c| c == y || allowed(i, c)).collect();
        let max = (0..head.n_classes).filter(|&c| in_set[c]).map(|c| z[c]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..head.n_classes).filter(|&c| in_set[c]).map(|c| libm::exp(z[c] - max)).sum();
        let log_norm = max + libm::log(sum);
        loss += log_norm - z[y];

        let mut dz = vec![0.0; head.n_classes];
        for c in (0..head.n_classes).filter(|&c| in_set[c]) {
            let p = libm::exp(z[c] - log_norm);
            dz[c] = (p - if c == y { 1.0 } else { 0.0 }) / n;
        }
        upstream.push(dz);
    }
    let inputs: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
    Ok(LossGrad { loss: loss / n, grad: head.backward(&inputs, &upstream) })
}

/// Standard softmax cross-entropy over all of the head's classes.
pub fn softmax_ce(head: &LinearHead, xs: &[&[f64]], targets: &[usize]) -> Result<LossGrad> {
    masked_ce(head, xs, targets, |_, _| true)
}

/// Cross-entropy against global-ID targets.
pub fn cross_view_ce(head: &LinearHead, batch: &[Sample]) -> Result<LossGrad> {
    let xs: Vec<&[f64]> = batch.iter().map(|s| s.x.as_slice()).collect();
    let targets: Vec<usize> = batch.iter().map(|s| s.gid).collect();
    softmax_ce(head, &xs, &targets)
}

/// Cross-entropy against local-ID targets with a shared class space across
/// views.
pub fn plain_single_view_ce(head: &LinearHead, batch: &[Sample]) -> Result<LossGrad> {
    let xs: Vec<&[f64]> = batch.iter().map(|s| s.x.as_slice()).collect();
    let targets: Vec<usize> = batch.iter().map(|s| s.lid).collect();
    softmax_ce(head, &xs, &targets)
}

/// Cross-entropy against local-ID targets where sample `i` only competes
/// with classes `c` such that `lid_to_view[c] == lid_to_view[y_i]`.
/// Classes of other views receive exactly zero gradient from `i`.
pub fn conflict_free_ce(head: &LinearHead, batch: &[Sample], lid_to_view: &[ViewId]) -> Result<LossGrad> {
    if lid_to_view.len() < head.n_classes {
        return Err(Error::UnknownClassView(lid_to_view.len()));
    }
    for s in batch {
        if s.lid >= head.n_classes {
            return Err(Error::LabelOutOfRange { label: s.lid, n_classes: head.n_classes });
        }
    }
    let xs: Vec<&[f64]> = batch.iter().map(|s| s.x.as_slice()).collect();
    let targets: Vec<usize> = batch.iter().map(|s| s.lid).collect();
    masked_ce(head, &xs, &targets, |i, c| lid_to_view[c] == lid_to_view[targets[i]])
}

/// Log-variance balance weights of the total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyWeights {
    pub w1: f64,
    pub w2: f64,
}

impl UncertaintyWeights {
    /// Starting values used for training.
    pub const INITIAL: UncertaintyWeights = UncertaintyWeights { w1: -1.85, w2: -1.05 };
}

impl Default for UncertaintyWeights {
    fn default() -> Self {
        Self::INITIAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub d_w1: f64,
    pub d_w2: f64,
    /// `∂L/∂l_det`.
    pub d_det: f64,
    /// `∂L/∂l_single = ∂L/∂l_cross`.
    pub d_reid: f64,
}

/// `½(e^{−w1}·l_det + e^{−w2}·(l_single + l_cross) + w1 + w2)`.
pub fn total_loss(l_det: f64, l_single: f64, l_cross: f64, w: UncertaintyWeights) -> TotalLoss {
    let a = libm::exp(-w.w1);
    let b = libm::exp(-w.w2);
    let reid = l_single + l_cross;
    TotalLoss {
        value: 0.5 * (a * l_det + b * reid + w.w1 + w.w2),
        d_w1: 0.5 * (1.0 - a * l_det),
        d_w2: 0.5 * (1.0 - b * reid),
        d_det: 0.5 * a,
        d_reid: 0.5 * b,
    }
}

/// Largest `|analytic − numeric| / max(1, |numeric|)` over all coordinates,
/// with central differences of step `epsilon`. `f` returns the loss and its
/// analytic gradient at the given parameters.
pub fn finite_diff_check(f: impl Fn(&[f64]) -> (f64, Vec<f64>), params: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1e-2]"));
    }
    let (_, analytic) = f(params);
    if analytic.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), found: analytic.len() });
    }
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        probe[k] = params[k] + epsilon;
        let up = f(&probe).0;
        probe[k] = params[k] - epsilon;
        let down = f(&probe).0;
        probe[k] = params[k];
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max((analytic[k] - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(worst)
}

/// `[W, b, x_0, x_1, ...]`: the parameter layout matching
/// [`Gradients::flatten`].
pub fn pack_params(head: &LinearHead, batch: &[Sample]) -> Vec<f64> {
    let mut v = head.weights.clone();
    v.extend_from_slice(&head.bias);
    for s in batch {
        v.extend_from_slice(&s.x);
    }
    v
}

/// Inverse of [`pack_params`] for a head and batch of the same shape.
pub fn unpack_params(params: &[f64], head: &LinearHead, batch: &[Sample]) -> (LinearHead, Vec<Sample>) {
    let nw = head.weights.len();
    let nb = head.bias.len();
    let mut h = head.clone();
    h.weights.copy_from_slice(&params[..nw]);
    h.bias.copy_from_slice(&params[nw..nw + nb]);
    let mut offset = nw + nb;
    let samples = batch
        .iter()
        .map(|s| {
            let mut s = s.clone();
            let d = s.x.len();
            s.x.copy_from_slice(&params[offset..offset + d]);
            offset += d;
            s
        })
        .collect();
    (h, samples)
}
