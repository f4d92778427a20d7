//! Embedding sidecar: a `dim=<K>` header, then `frame,det_index,v1,...,vK`
//! per detection, `det_index` counting from 0 within the frame.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mot::format_g;

#[derive(Debug, Clone, PartialEq)]
pub struct SidecarRow {
    pub frame: u32,
    pub det_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub dim: usize,
    pub rows: Vec<SidecarRow>,
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((i, header)) = lines.next() else {
        return Err(Error::Format { line: 1, message: "missing `dim=<K>` header".into() });
    };
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Format { line: i + 1, message: "expected `dim=<K>` with K > 0".into() })?;
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let err = |message: String| Error::Format { line: i + 1, message };
        let fields: Vec<&str> = raw.trim().split(',').map(str::trim).collect();
        if fields.len() != dim + 2 {
            return Err(err(format!("expected {} fields, found {}", dim + 2, fields.len())));
        }
        let frame = fields[0].parse().map_err(|_| err(format!("bad frame `{}`", fields[0])))?;
        let det_index = fields[1].parse().map_err(|_| err(format!("bad detection index `{}`", fields[1])))?;
        let values = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(format!("bad value `{f}`"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(SidecarRow { frame, det_index, values });
    }
    Ok(Sidecar { dim, rows })
}

pub fn write_sidecar(sidecar: &Sidecar) -> String {
    let mut s = format!("dim={}\n", sidecar.dim);
    for r in &sidecar.rows {
        let _ = write!(s, "{},{}", r.frame, r.det_index);
        for v in &r.values {
            s.push(',');
            s.push_str(&format_g(*v));
        }
        s.push('\n');
    }
    s
}
