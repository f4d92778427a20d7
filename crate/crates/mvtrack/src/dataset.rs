//! Directory layout shared by the subcommands.
//!
//! ```text
//! <scene>/config.txt
//! <scene>/gt/view_<i>.txt            frame,gid,box,1,ground_x,ground_y,0
//! <scene>/det/view_<i>.txt           frame,-1,box,conf,-1,-1,-1
//! <scene>/det/view_<i>.single.emb
//! <scene>/det/view_<i>.cross.emb
//! <tracks>/single/view_<i>.txt       frame,local_id,box,conf,-1,-1,-1
//! <tracks>/cross/view_<i>.txt        frame,global_id,box,conf,-1,-1,-1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use mvtrack_core::metrics::Observation;
use mvtrack_core::pipeline::TrackingOutput;
use mvtrack_core::simulate::SimulatedScene;
use mvtrack_core::{BBox, Detection, EmbeddingVec, ViewId};

use crate::config::{write_config, Settings};
use crate::embedding::{parse_sidecar, write_sidecar, Sidecar, SidecarRow};
use crate::error::{Error, Result};
use crate::mot::{parse_mot, write_mot, MotRecord};

pub fn view_file(dir: &Path, view: usize, suffix: &str) -> PathBuf {
    dir.join(format!("view_{view}{suffix}"))
}

/// Number of consecutive `view_<i>.txt` files starting at 0.
pub fn count_views(dir: &Path) -> Result<usize> {
    if !dir.is_dir() {
        return Err(Error::Validation(format!("{} is not a directory", dir.display())));
    }
    Ok((0..).take_while(|&v| view_file(dir, v, ".txt").is_file()).count())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, contents).map_err(Error::io(path))
}

pub fn read_mot_file(path: &Path) -> Result<Vec<MotRecord>> {
    parse_mot(&read(path)?).map_err(|e| e.in_file(path))
}

fn bbox_array(b: &BBox) -> [f64; 4] {
    [b.left, b.top, b.width, b.height]
}

fn to_bbox(r: &MotRecord) -> BBox {
    BBox { left: r.bb_left, top: r.bb_top, width: r.bb_width, height: r.bb_height }
}

pub fn write_scene(dir: &Path, scene: &SimulatedScene, settings: &Settings) -> Result<()> {
    write(&dir.join("config.txt"), &write_config(settings))?;
    for (v, boxes) in scene.truth.boxes.iter().enumerate() {
        let mut gt: Vec<MotRecord> = boxes
            .iter()
            .map(|b| MotRecord {
                x: b.ground.0,
                y: b.ground.1,
                z: 0.0,
                ..MotRecord::labelled(b.frame, b.global_id as i64, bbox_array(&b.bbox), 1.0)
            })
            .collect();
        gt.sort_by_key(|r| (r.frame, r.id));
        write(&view_file(&dir.join("gt"), v, ".txt"), &write_mot(&gt))?;
    }
    let dim = scene
        .stream
        .iter()
        .flatten()
        .flatten()
        .map(|d| d.cross_emb.dim())
        .next()
        .unwrap_or(settings.scene.embedding_dim);
    for (v, frames) in scene.stream.iter().enumerate() {
        let mut dets = Vec::new();
        let mut single = Sidecar { dim, rows: Vec::new() };
        let mut cross = Sidecar { dim, rows: Vec::new() };
        for frame in frames {
            for (k, d) in frame.iter().enumerate() {
                dets.push(MotRecord::detection(d.frame, bbox_array(&d.bbox), d.confidence));
                single.rows.push(SidecarRow { frame: d.frame, det_index: k, values: d.single_emb.0.clone() });
                cross.rows.push(SidecarRow { frame: d.frame, det_index: k, values: d.cross_emb.0.clone() });
            }
        }
        let det_dir = dir.join("det");
        write(&view_file(&det_dir, v, ".txt"), &write_mot(&dets))?;
        write(&view_file(&det_dir, v, ".single.emb"), &write_sidecar(&single))?;
        write(&view_file(&det_dir, v, ".cross.emb"), &write_sidecar(&cross))?;
    }
    Ok(())
}

fn check_sidecar(path: &Path, sidecar: &Sidecar, dets: &[MotRecord]) -> Result<()> {
    if sidecar.rows.len() != dets.len() {
        return Err(Error::Validation(format!(
            "{}: {} embedding rows for {} detections",
            path.display(),
            sidecar.rows.len(),
            dets.len()
        )));
    }
    let mut index = 0;
    for (i, (row, det)) in sidecar.rows.iter().zip(dets).enumerate() {
        if i > 0 && dets[i - 1].frame != det.frame {
            index = 0;
        }
        if row.frame != det.frame || row.det_index != index {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!("expected frame {} index {index}", det.frame),
            });
        }
        index += 1;
    }
    Ok(())
}

/// `stream[v][frame - 1]`, read from a `det` directory.
pub fn read_detections(det_dir: &Path) -> Result<Vec<Vec<Vec<Detection>>>> {
    let n_views = count_views(det_dir)?;
    if n_views == 0 {
        return Err(Error::Validation(format!("no view_0.txt in {}", det_dir.display())));
    }
    let mut stream = Vec::with_capacity(n_views);
    for v in 0..n_views {
        let dets = read_mot_file(&view_file(det_dir, v, ".txt"))?;
        let mut sidecars = Vec::new();
        for suffix in [".single.emb", ".cross.emb"] {
            let path = view_file(det_dir, v, suffix);
            let s = parse_sidecar(&read(&path)?).map_err(|e| e.in_file(&path))?;
            check_sidecar(&path, &s, &dets)?;
            sidecars.push(s);
        }
        let n_frames = dets.last().map_or(0, |d| d.frame as usize);
        let mut frames: Vec<Vec<Detection>> = vec![Vec::new(); n_frames];
        for ((d, s), c) in dets.iter().zip(&sidecars[0].rows).zip(&sidecars[1].rows) {
            frames[d.frame as usize - 1].push(Detection {
                view: ViewId(v),
                frame: d.frame,
                bbox: to_bbox(d),
                confidence: d.conf,
                single_emb: EmbeddingVec(s.values.clone()),
                cross_emb: EmbeddingVec(c.values.clone()),
                gt_global_id: None,
            });
        }
        stream.push(frames);
    }
    Ok(stream)
}

pub fn write_tracks(dir: &Path, out: &TrackingOutput) -> Result<()> {
    for (v, rows) in out.single.iter().enumerate() {
        let recs: Vec<MotRecord> = rows
            .iter()
            .map(|r| MotRecord::labelled(r.frame, i64::from(r.local_id), bbox_array(&r.bbox), r.confidence))
            .collect();
        write(&view_file(&dir.join("single"), v, ".txt"), &write_mot(&recs))?;
    }
    for (v, rows) in out.cross.iter().enumerate() {
        let recs: Vec<MotRecord> = rows
            .iter()
            .map(|r| MotRecord::labelled(r.frame, r.global_id as i64, bbox_array(&r.bbox), r.confidence))
            .collect();
        write(&view_file(&dir.join("cross"), v, ".txt"), &write_mot(&recs))?;
    }
    Ok(())
}

/// Labelled boxes of every `view_<i>.txt` in `dir`.
pub fn read_observations(dir: &Path) -> Result<Vec<Vec<Observation>>> {
    let n = count_views(dir)?;
    (0..n)
        .map(|v| {
            let path = view_file(dir, v, ".txt");
            read_mot_file(&path)?
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let id = u64::try_from(r.id).map_err(|_| Error::Parse {
                        path: path.clone(),
                        line: i + 1,
                        message: format!("identity {} must be non-negative", r.id),
                    })?;
                    Ok(Observation { frame: r.frame, id, bbox: to_bbox(r) })
                })
                .collect()
        })
        .collect()
}
