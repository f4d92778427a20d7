use std::collections::BTreeSet;

use mvtrack_core::metrics::{evaluate, scene_sequences, MetricsReport};
use mvtrack_core::pipeline::{track_stream, TrackingOutput};
use mvtrack_core::simulate::{simulate, SceneConfig, SimulatedScene};
use mvtrack_core::RunConfig;

fn noisy(seed: u64) -> SceneConfig {
    SceneConfig {
        n_agents: 6,
        n_frames: 200,
        miss_prob: 0.1,
        fp_rate: 0.2,
        sigma_cross: 0.1,
        sigma_single: 0.1,
        seed,
        ..SceneConfig::with_views(3)
    }
}

fn run(cfg: &SceneConfig, run_cfg: &RunConfig) -> (SimulatedScene, TrackingOutput) {
    let scene = simulate(cfg).unwrap();
    let out = track_stream(run_cfg, &scene.stream, 1).unwrap();
    (scene, out)
}

fn scores(scene: &SimulatedScene, out: &TrackingOutput) -> (MetricsReport, MetricsReport) {
    let cross = evaluate(&scene_sequences(&scene.truth, out, true), 0.5, true).unwrap();
    let single = evaluate(&scene_sequences(&scene.truth, out, false), 0.5, false).unwrap();
    (cross, single)
}

#[test]
fn noise_free_scene_is_tracked_perfectly() {
    for seed in [1, 7] {
        let (scene, out) = run(&SceneConfig { seed, ..SceneConfig::with_views(3) }, &RunConfig::default());
        let (cross, single) = scores(&scene, &out);
        assert_eq!(cross.cvma(), Some(1.0));
        assert_eq!(cross.cvidf1(), Some(1.0));
        assert_eq!(single.idsw, 0);
        assert_eq!(single.idf1, 1.0);
    }
}

#[test]
fn noisy_scene_stays_accurate() {
    for seed in 0..3 {
        let (scene, out) = run(&noisy(seed), &RunConfig::default());
        let (cross, single) = scores(&scene, &out);
        assert!(cross.cvma().unwrap() >= 0.95, "seed {seed}: {:?}", cross.cvma());
        assert!(cross.cvidf1().unwrap() >= 0.95, "seed {seed}: {:?}", cross.cvidf1());
        assert!(single.idf1 >= 0.9, "seed {seed}: {}", single.idf1);
    }
}

#[test]
fn single_view_identity_is_stable() {
    let cfg = SceneConfig { miss_prob: 0.1, sigma_single: 0.1, seed: 11, ..SceneConfig::with_views(2) };
    let (scene, out) = run(&cfg, &RunConfig::default());
    let (_, single) = scores(&scene, &out);
    assert!(single.idf1 >= 0.9, "{}", single.idf1);
}

#[test]
fn runs_are_deterministic() {
    let a = run(&noisy(5), &RunConfig::default());
    let b = run(&noisy(5), &RunConfig::default());
    assert_eq!(a.1, b.1);
    assert_eq!(a.0, b.0);
}

#[test]
fn ids_are_unique_within_each_frame_and_view() {
    let (_, out) = run(&noisy(3), &RunConfig::default());
    for rows in &out.single {
        let keys: Vec<_> = rows.iter().map(|r| (r.frame, r.local_id)).collect();
        assert_eq!(keys.len(), keys.iter().collect::<BTreeSet<_>>().len());
    }
    for rows in &out.cross {
        let keys: Vec<_> = rows.iter().map(|r| (r.frame, r.global_id)).collect();
        assert_eq!(keys.len(), keys.iter().collect::<BTreeSet<_>>().len());
    }
}

#[test]
fn rows_are_sorted_and_views_consistent() {
    let (_, out) = run(&noisy(4), &RunConfig::default());
    for (v, rows) in out.single.iter().enumerate() {
        assert!(rows.windows(2).all(|w| (w[0].frame, w[0].local_id) < (w[1].frame, w[1].local_id)));
        assert!(rows.iter().all(|r| r.view.0 == v));
    }
    assert_eq!(out.single.iter().map(Vec::len).sum::<usize>(), out.cross.iter().map(Vec::len).sum::<usize>());
}

#[test]
fn without_smoothing_still_tracks_clean_scene() {
    let run_cfg = RunConfig { ema_alpha: 0.0, ..RunConfig::default() };
    let (scene, out) = run(&SceneConfig { seed: 2, ..SceneConfig::with_views(2) }, &run_cfg);
    let (cross, _) = scores(&scene, &out);
    assert_eq!(cross.cvidf1(), Some(1.0));
}

#[test]
fn smoothing_helps_under_heavy_appearance_noise() {
    let heavy = SceneConfig { sigma_single: 0.6, sigma_cross: 0.6, ..noisy(6) };
    let idf1 = |alpha: f64| {
        let (scene, out) = run(&heavy, &RunConfig { ema_alpha: alpha, ..RunConfig::default() });
        scores(&scene, &out).1.idf1
    };
    let (none, default, sluggish) = (idf1(0.0), idf1(0.9), idf1(0.99));
    assert!(default >= 0.95, "{default}");
    assert!(default > none + 0.2 && default > sluggish + 0.2, "{none} {default} {sluggish}");
}
