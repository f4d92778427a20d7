//! Flat `key = value` configuration with `#` comments.
//!
//! One file may carry both scene keys (read by `simulate`) and tracker keys
//! (read by `track`); `seed` feeds both. Unknown keys are rejected.

use std::fmt::Write as _;

use mvtrack_core::simulate::{default_cameras, Rect, SceneConfig};
use mvtrack_core::RunConfig;

use crate::error::{Error, Result};
use crate::mot::format_g;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub scene: SceneConfig,
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<Settings> {
    let mut s = Settings::default();
    let mut arena = s.scene.arena;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config { line, message };
        let (key, value) =
            content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let real = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("`{key}` needs a number, got `{value}`")))
        };
        let int =
            || value.parse::<u64>().map_err(|_| err(format!("`{key}` needs a non-negative integer, got `{value}`")));
        let flag = || parse_bool(value).ok_or_else(|| err(format!("`{key}` needs true or false, got `{value}`")));
        let small = |v: u64| u32::try_from(v).map_err(|_| err(format!("`{key}` is too large")));
        match key {
            "delta_d" => s.run.delta_d = real()?,
            "delta_s" => s.run.delta_s = real()?,
            "delta_c" => s.run.delta_c = real()?,
            "epsilon" => s.run.epsilon = real()?,
            "gamma" => s.run.gamma = real()?,
            "ema_alpha" => s.run.ema_alpha = real()?,
            "max_age" => s.run.max_age = small(int()?)?,
            "min_hits" => s.run.min_hits = small(int()?)?,
            "iou_fallback" => s.run.iou_fallback = flag()?,
            "iou_fallback_threshold" => s.run.iou_fallback_threshold = real()?,
            "interpolate_gaps" => s.run.interpolate_gaps = flag()?,
            "symmetric_matching" => s.run.symmetric_matching = flag()?,
            "iou_threshold_eval" => s.run.iou_threshold_eval = real()?,
            "seed" => {
                s.run.seed = int()?;
                s.scene.seed = s.run.seed;
            }
            "n_agents" => s.scene.n_agents = int()? as usize,
            "n_views" => s.scene.n_views = int()? as usize,
            "n_frames" => s.scene.n_frames = small(int()?)?,
            "arena_width" => arena.x1 = arena.x0 + real()?,
            "arena_height" => arena.y1 = arena.y0 + real()?,
            "speed_min" => s.scene.speed_range.0 = real()?,
            "speed_max" => s.scene.speed_range.1 = real()?,
            "miss_prob" => s.scene.miss_prob = real()?,
            "fp_rate" => s.scene.fp_rate = real()?,
            "box_jitter_sigma" => s.scene.box_jitter_sigma = real()?,
            "sigma_cross" => s.scene.sigma_cross = real()?,
            "sigma_single" => s.scene.sigma_single = real()?,
            "view_component_weight" => s.scene.view_component_weight = real()?,
            "embedding_dim" => s.scene.embedding_dim = int()? as usize,
            "hard_negatives" => s.scene.hard_negatives = flag()?,
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }
    s.scene.arena = arena;
    s.scene.cameras = default_cameras(arena, s.scene.n_views);
    Ok(s)
}

/// Writes every key; parsing the result gives back the same settings.
pub fn write_config(s: &Settings) -> String {
    let r = &s.run;
    let c = &s.scene;
    let Rect { x0, y0, x1, y1 } = c.arena;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("seed", r.seed.to_string());
    kv("delta_d", format_g(r.delta_d));
    kv("delta_s", format_g(r.delta_s));
    kv("delta_c", format_g(r.delta_c));
    kv("epsilon", format_g(r.epsilon));
    kv("gamma", format_g(r.gamma));
    kv("ema_alpha", format_g(r.ema_alpha));
    kv("max_age", r.max_age.to_string());
    kv("min_hits", r.min_hits.to_string());
    kv("iou_fallback", r.iou_fallback.to_string());
    kv("iou_fallback_threshold", format_g(r.iou_fallback_threshold));
    kv("interpolate_gaps", r.interpolate_gaps.to_string());
    kv("symmetric_matching", r.symmetric_matching.to_string());
    kv("iou_threshold_eval", format_g(r.iou_threshold_eval));
    kv("n_agents", c.n_agents.to_string());
    kv("n_views", c.n_views.to_string());
    kv("n_frames", c.n_frames.to_string());
    kv("arena_width", format_g(x1 - x0));
    kv("arena_height", format_g(y1 - y0));
    kv("speed_min", format_g(c.speed_range.0));
    kv("speed_max", format_g(c.speed_range.1));
    kv("miss_prob", format_g(c.miss_prob));
    kv("fp_rate", format_g(c.fp_rate));
    kv("box_jitter_sigma", format_g(c.box_jitter_sigma));
    kv("sigma_cross", format_g(c.sigma_cross));
    kv("sigma_single", format_g(c.sigma_single));
    kv("view_component_weight", format_g(c.view_component_weight));
    kv("embedding_dim", c.embedding_dim.to_string());
    kv("hard_negatives", c.hard_negatives.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = parse_config("# nothing here\n\n").unwrap();
        assert_eq!(s, Settings::default());
        assert_eq!((s.run.delta_d, s.run.delta_s, s.run.delta_c), (0.5, 0.3, 0.5));
        assert_eq!((s.run.epsilon, s.run.gamma, s.run.ema_alpha), (0.5, 0.5, 0.9));
        assert_eq!((s.run.max_age, s.run.min_hits, s.run.iou_fallback), (30, 2, true));
        assert_eq!(s.run.iou_threshold_eval, 0.5);
    }

    #[test]
    fn one_key_changes_one_field() {
        let s = parse_config("delta_s = 0.25  # tighter\n").unwrap();
        let expected = Settings { run: RunConfig { delta_s: 0.25, ..RunConfig::default() }, ..Settings::default() };
        assert_eq!(s, expected);
    }

    #[test]
    fn seed_and_views() {
        let s = parse_config("seed = 42\nn_views = 4\narena_width = 30\n").unwrap();
        assert_eq!((s.run.seed, s.scene.seed), (42, 42));
        assert_eq!(s.scene.cameras.len(), 4);
        assert_eq!(s.scene.arena.x1, 30.0);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse_config("bogus = 1"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("\ndelta_d = abc"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("max_age"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("iou_fallback = maybe"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn write_then_parse() {
        let s = parse_config("seed = 3\nmiss_prob = 0.1\nsigma_cross = 0.1\nhard_negatives = on\n").unwrap();
        assert_eq!(parse_config(&write_config(&s)).unwrap(), s);
    }
}
