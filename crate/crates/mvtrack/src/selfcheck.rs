//! Oracle sweeps behind the `selfcheck` subcommand.

use mvtrack_core::assign::{brute_force_min_cost, hungarian, CostMatrix};
use mvtrack_core::cross_view::adaptive_temperature;
use mvtrack_core::losses::{
    conflict_free_ce, cross_view_ce, finite_diff_check, pack_params, total_loss, unpack_params, LinearHead, Sample,
    UncertaintyWeights,
};
use mvtrack_core::metrics::evaluate;
use mvtrack_core::metrics::reference::{reference_scores, tiny_scene};
use mvtrack_core::ViewId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome { name, passed, detail }
    }
}

/// Random matrix of shape within 1×1..7×7; every other matrix has small
/// integer entries, which produce ties.
pub fn random_cost_matrix(rng: &mut ChaCha8Rng, index: usize) -> CostMatrix {
    let rows = rng.random_range(1..=7);
    let cols = rng.random_range(1..=7);
    if index.is_multiple_of(2) {
        CostMatrix::from_fn(rows, cols, |_, _| f64::from(rng.random_range(0..10u8)))
    } else {
        CostMatrix::from_fn(rows, cols, |_, _| rng.random_range(-5.0..5.0))
    }
}

/// Largest gap between the Hungarian cost and the exhaustive minimum;
/// infinite if some assignment leaves the smaller side partly uncovered.
pub fn hungarian_gap(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..n {
        let m = random_cost_matrix(&mut rng, i);
        let a = hungarian(&m);
        let covered = a.pairs.len() == m.rows().min(m.cols());
        let (best, _) = brute_force_min_cost(&m);
        let diff = (a.total_cost(&m) - best).abs();
        worst = worst.max(if covered { diff } else { f64::INFINITY });
    }
    worst
}

pub fn hungarian_vs_brute_force(n: usize, seed: u64, tolerance: f64) -> CheckOutcome {
    let worst = hungarian_gap(n, seed);
    CheckOutcome::new(
        "hungarian",
        worst <= tolerance,
        format!("{n} matrices, max |hungarian - brute force| = {worst:.3e}"),
    )
}

/// A random head with `n_views` views of `per_view` local classes each,
/// and a batch drawing samples across those views.
pub fn random_batch(rng: &mut ChaCha8Rng) -> (LinearHead, Vec<Sample>, Vec<ViewId>) {
    let dim = rng.random_range(2..=6);
    let n_views = rng.random_range(1..=3);
    let per_view = rng.random_range(1..=3);
    let n_classes = n_views * per_view;
    let head = LinearHead::random(rng, n_classes, dim);
    let lid_views: Vec<ViewId> = (0..n_classes).map(|c| ViewId(c / per_view)).collect();
    let n = rng.random_range(1..=8);
    let batch = (0..n)
        .map(|_| {
            let lid = rng.random_range(0..n_classes);
            Sample {
                x: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                gid: rng.random_range(0..n_classes),
                lid,
                view: lid_views[lid],
            }
        })
        .collect();
    (head, batch, lid_views)
}

/// Largest relative finite-difference error of the cross-view,
/// conflict-free and total-loss gradients over `n` random batches.
pub fn gradient_errors(n: usize, seed: u64, epsilon: f64) -> Result<f64, mvtrack_core::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (head, batch, lid_views) = random_batch(&mut rng);
        let params = pack_params(&head, &batch);
        let cv = |p: &[f64]| {
            let (h, b) = unpack_params(p, &head, &batch);
            let out = cross_view_ce(&h, &b).expect("valid batch");
            (out.loss, out.grad.flatten())
        };
        worst = worst.max(finite_diff_check(cv, &params, epsilon)?);
        let cf = |p: &[f64]| {
            let (h, b) = unpack_params(p, &head, &batch);
            let out = conflict_free_ce(&h, &b, &lid_views).expect("valid batch");
            (out.loss, out.grad.flatten())
        };
        worst = worst.max(finite_diff_check(cf, &params, epsilon)?);

        // [l_det, l_single, l_cross, w1, w2]
        let point: Vec<f64> = vec![
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..5.0),
            rng.random_range(-3.0..1.0),
            rng.random_range(-3.0..1.0),
        ];
        let total = |p: &[f64]| {
            let t = total_loss(p[0], p[1], p[2], UncertaintyWeights { w1: p[3], w2: p[4] });
            (t.value, vec![t.d_det, t.d_reid, t.d_reid, t.d_w1, t.d_w2])
        };
        worst = worst.max(finite_diff_check(total, &point, epsilon)?);
    }
    Ok(worst)
}

pub fn gradients(n: usize, seed: u64, epsilon: f64, tolerance: f64) -> CheckOutcome {
    match gradient_errors(n, seed, epsilon) {
        Ok(worst) => {
            CheckOutcome::new("gradients", worst <= tolerance, format!("{n} batches, max relative error = {worst:.3e}"))
        }
        Err(e) => CheckOutcome::new("gradients", false, e.to_string()),
    }
}

/// Worst deviations of the three conflict-free structure checks:
/// gradient reaching other-view classes, loss change after appending
/// classes of an unused view, loss with one class per view.
pub fn conflict_free_structure(n: usize, seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut leak, mut drift, mut degenerate) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let (head, batch, lid_views) = random_batch(&mut rng);
        for s in &batch {
            let single = conflict_free_ce(&head, std::slice::from_ref(s), &lid_views).expect("valid batch");
            for c in (0..head.n_classes()).filter(|&c| lid_views[c] != s.view) {
                let row = &single.grad.weights[c * head.dim()..(c + 1) * head.dim()];
                leak = row.iter().chain([&single.grad.bias[c]]).fold(leak, |m, g| m.max(g.abs()));
            }
        }

        let extra = rng.random_range(1..=3);
        let foreign = ViewId(lid_views.iter().map(|v| v.0).max().unwrap_or(0) + 1);
        let mut wider = LinearHead::random(&mut rng, head.n_classes() + extra, head.dim());
        wider.weights[..head.weights.len()].copy_from_slice(&head.weights);
        wider.bias[..head.bias.len()].copy_from_slice(&head.bias);
        let mut wider_views = lid_views.clone();
        wider_views.extend(std::iter::repeat_n(foreign, extra));
        let base = conflict_free_ce(&head, &batch, &lid_views).expect("valid batch").loss;
        let widened = conflict_free_ce(&wider, &batch, &wider_views).expect("valid batch").loss;
        drift = drift.max((base - widened).abs());

        let one_each: Vec<ViewId> = (0..head.n_classes()).map(ViewId).collect();
        let relabelled: Vec<Sample> = batch.iter().map(|s| Sample { view: ViewId(s.lid), ..s.clone() }).collect();
        degenerate = degenerate.max(conflict_free_ce(&head, &relabelled, &one_each).expect("valid batch").loss.abs());
    }
    (leak, drift, degenerate)
}

pub fn conflict_free(n: usize, seed: u64, invariance_tolerance: f64) -> CheckOutcome {
    let (leak, drift, degenerate) = conflict_free_structure(n, seed);
    CheckOutcome::new(
        "conflict-free",
        leak == 0.0 && drift <= invariance_tolerance && degenerate == 0.0,
        format!("other-view gradient = {leak:e}, foreign-class drift = {drift:.3e}, singleton loss = {degenerate:e}"),
    )
}

/// Largest disagreement between the fast metrics and the exhaustive
/// reference over `n` tiny scenes, and how many scenes were scored.
pub fn metric_disagreement(n: u64, iou_threshold: f64) -> Result<(f64, usize), String> {
    let mut worst = 0.0f64;
    let mut scored = 0;
    for seed in 0..n {
        let views = tiny_scene(seed);
        let (fast, slow) = match (evaluate(&views, iou_threshold, true), reference_scores(&views, iou_threshold)) {
            (Err(mvtrack_core::Error::EmptyGroundTruth), Err(mvtrack_core::Error::EmptyGroundTruth)) => continue,
            (Ok(f), Ok(s)) => (f, s),
            (a, b) => return Err(format!("scene {seed}: fast {:?} vs reference {:?}", a.err(), b.err())),
        };
        scored += 1;
        let pairs = [
            (fast.cvma().unwrap_or(f64::NAN), slow.cvma),
            (fast.cvidf1().unwrap_or(f64::NAN), slow.cvidf1),
            (fast.mota, slow.mota),
            (fast.idf1, slow.idf1),
            (fast.idsw as f64, slow.idsw as f64),
        ];
        for (a, b) in pairs {
            let d = (a - b).abs();
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    Ok((worst, scored))
}

pub fn metric_oracle(n: u64, tolerance: f64) -> CheckOutcome {
    match metric_disagreement(n, 0.5) {
        Ok((worst, scored)) => CheckOutcome::new(
            "metric-oracle",
            worst <= tolerance,
            format!("{scored} scenes, max deviation = {worst:.3e}"),
        ),
        Err(e) => CheckOutcome::new("metric-oracle", false, e),
    }
}

pub fn temperature(tolerance: f64) -> CheckOutcome {
    let at3 = adaptive_temperature(0.5, 0.5, 3).map(|t| (t - 2.0 * 4f64.ln()).abs());
    let increasing =
        (1..100).all(|a| match (adaptive_temperature(0.5, 0.5, a), adaptive_temperature(0.5, 0.5, a + 1)) {
            (Ok(x), Ok(y)) => y > x,
            _ => false,
        });
    match at3 {
        Ok(err) => CheckOutcome::new(
            "temperature",
            err <= tolerance && increasing,
            format!("|tau(3) - 2 ln 4| = {err:.3e}, increasing over 1..100: {increasing}"),
        ),
        Err(e) => CheckOutcome::new("temperature", false, e.to_string()),
    }
}

/// The sweep run by `selfcheck`.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        hungarian_vs_brute_force(1000, 1, 0.0),
        gradients(50, 2, 1e-5, 1e-4),
        conflict_free(50, 3, 1e-12),
        metric_oracle(200, 1e-9),
        temperature(1e-12),
    ]
}
