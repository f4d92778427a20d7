//! MOT Challenge text layout:
//! `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    /// `-1` for raw detections.
    pub id: i64,
    pub bb_left: f64,
    pub bb_top: f64,
    pub bb_width: f64,
    pub bb_height: f64,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MotRecord {
    pub fn detection(frame: u32, bbox: [f64; 4], conf: f64) -> Self {
        MotRecord::labelled(frame, -1, bbox, conf)
    }

    pub fn labelled(frame: u32, id: i64, bbox: [f64; 4], conf: f64) -> Self {
        MotRecord {
            frame,
            id,
            bb_left: bbox[0],
            bb_top: bbox[1],
            bb_width: bbox[2],
            bb_height: bbox[3],
            conf,
            x: -1.0,
            y: -1.0,
            z: -1.0,
        }
    }

    pub fn bbox(&self) -> [f64; 4] {
        [self.bb_left, self.bb_top, self.bb_width, self.bb_height]
    }
}

/// `%g` with six significant digits.
pub fn format_g(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Parses a whole file. Blank lines are skipped; frames must not decrease.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>> {
    let mut out: Vec<MotRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let err = |message: String| Error::Format { line, message };
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", fields.len())));
        }
        let frame: u32 = fields[0].parse().map_err(|_| err(format!("bad frame `{}`", fields[0])))?;
        if frame == 0 {
            return Err(err("frames are 1-based".into()));
        }
        let id: i64 = fields[1].parse().map_err(|_| err(format!("bad id `{}`", fields[1])))?;
        let mut reals = [0.0f64; 8];
        for (k, f) in fields[2..].iter().enumerate() {
            reals[k] = f.parse().map_err(|_| err(format!("bad number `{f}` in column {}", k + 3)))?;
            if !reals[k].is_finite() {
                return Err(err(format!("non-finite value in column {}", k + 3)));
            }
        }
        if let Some(prev) = out.last() {
            if frame < prev.frame {
                return Err(err(format!("frame {frame} after frame {}", prev.frame)));
            }
        }
        let [bb_left, bb_top, bb_width, bb_height, conf, x, y, z] = reals;
        out.push(MotRecord { frame, id, bb_left, bb_top, bb_width, bb_height, conf, x, y, z });
    }
    Ok(out)
}

pub fn write_mot(records: &[MotRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.frame,
            r.id,
            format_g(r.bb_left),
            format_g(r.bb_top),
            format_g(r.bb_width),
            format_g(r.bb_height),
            format_g(r.conf),
            format_g(r.x),
            format_g(r.y),
            format_g(r.z)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g_formatting() {
        assert_eq!(format_g(0.9), "0.9");
        assert_eq!(format_g(-1.0), "-1");
        assert_eq!(format_g(10.0), "10");
        assert_eq!(format_g(123.456789), "123.457");
        assert_eq!(format_g(0.0001234567), "0.000123457");
        assert_eq!(format_g(0.00001234567), "1.23457e-05");
        assert_eq!(format_g(1234567.0), "1.23457e+06");
        assert_eq!(format_g(999999.7), "1e+06");
        assert_eq!(format_g(-0.0), "0");
    }

    #[test]
    fn single_detection_line() {
        let r = parse_mot("1,-1,10,20,30,40,0.9,-1,-1,-1\n").unwrap();
        assert_eq!(r, vec![MotRecord::detection(1, [10.0, 20.0, 30.0, 40.0], 0.9)]);
        assert_eq!(write_mot(&r), "1,-1,10,20,30,40,0.9,-1,-1,-1\n");
    }

    #[test]
    fn empty_file() {
        assert!(parse_mot("").unwrap().is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "1,-1,10,20,30,40,0.9,-1,-1,-1\n1,-1,10,20,30\n";
        assert!(matches!(parse_mot(bad), Err(Error::Format { line: 2, .. })));
        let bad = "1,-1,10,20,30,40,0.9,-1,-1,-1\n2,x,10,20,30,40,0.9,-1,-1,-1\n";
        assert!(matches!(parse_mot(bad), Err(Error::Format { line: 2, .. })));
        let backwards = "2,-1,10,20,30,40,0.9,-1,-1,-1\n\n1,-1,10,20,30,40,0.9,-1,-1,-1\n";
        assert!(matches!(parse_mot(backwards), Err(Error::Format { line: 3, .. })));
        assert!(matches!(parse_mot("0,-1,1,1,1,1,1,-1,-1,-1"), Err(Error::Format { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn rewrite_is_stable(v in -1e9f64..1e9, e in -12i32..12) {
            let x = v * 10f64.powi(e);
            let once = format_g(x);
            let back: f64 = once.parse().unwrap();
            prop_assert_eq!(format_g(back), once.clone());
            prop_assert!((back - x).abs() <= 1e-5 * x.abs());
        }
    }
}
