//! MOTChallenge text records.
//!
//! One comma-separated record per line: `frame, id, left, top, width, height,
//! conf, x, y, z`. Detection files use id `-1`. Any fields after the tenth are
//! read as the candidate's appearance descriptor; standard files have none.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::BBox;

#[derive(Debug, Clone, PartialEq)]
pub struct MotRecord {
    /// 1-based frame number.
    pub frame: u32,
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub appearance: Vec<f64>,
}

impl MotRecord {
    pub fn new(frame: u32, id: i64, bbox: BBox<f64>, conf: f64) -> Self {
        Self {
            frame,
            id,
            left: bbox.left,
            top: bbox.top,
            width: bbox.width,
            height: bbox.height,
            conf,
            x: -1.0,
            y: -1.0,
            z: -1.0,
            appearance: Vec::new(),
        }
    }

    pub fn bbox(&self) -> BBox<f64> {
        BBox::new(self.left, self.top, self.width, self.height)
    }

    /// 0-based frame index.
    pub fn frame_index(&self) -> usize {
        self.frame as usize - 1
    }
}

fn parse_line(line: &str, n: usize) -> Result<MotRecord> {
    let err = |message: String| Error::Parse { line: n, message };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(err(format!("expected at least 7 fields, found {}", fields.len())));
    }
    let num = |i: usize| -> Result<f64> {
        let v: f64 = fields[i].parse().map_err(|_| err(format!("field {} `{}` is not a number", i + 1, fields[i])))?;
        if !v.is_finite() {
            return Err(err(format!("field {} is not finite", i + 1)));
        }
        Ok(v)
    };
    let frame: u32 = fields[0].parse().map_err(|_| err(format!("frame `{}` is not a positive integer", fields[0])))?;
    if frame == 0 {
        return Err(err("frames are numbered from 1".into()));
    }
    let id: i64 = fields[1].parse().map_err(|_| err(format!("id `{}` is not an integer", fields[1])))?;
    let (width, height) = (num(4)?, num(5)?);
    if width <= 0.0 || height <= 0.0 {
        return Err(err(format!("box size {width}x{height} must be positive")));
    }
    let opt = |i: usize| if i < fields.len() { num(i) } else { Ok(-1.0) };
    Ok(MotRecord {
        frame,
        id,
        left: num(2)?,
        top: num(3)?,
        width,
        height,
        conf: num(6)?,
        x: opt(7)?,
        y: opt(8)?,
        z: opt(9)?,
        appearance: (10..fields.len()).map(num).collect::<Result<_>>()?,
    })
}

/// Parses records in file order.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

/// Parses a file and sorts records by frame, keeping file order within a frame.
pub fn load_mot(path: &Path) -> Result<Vec<MotRecord>> {
    let mut records = parse_mot(&std::fs::read_to_string(path)?)?;
    records.sort_by_key(|r| r.frame);
    Ok(records)
}

/// Renders records with the shortest float text that parses back to the same value.
pub fn write_mot(records: &[MotRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.left, r.top, r.width, r.height, r.conf, r.x, r.y, r.z
        );
        for v in &r.appearance {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_mot(path: &Path, records: &[MotRecord]) -> Result<()> {
    std::fs::write(path, write_mot(records))?;
    Ok(())
}

/// Groups records into 0-based frame buckets; `frame_count` extends the range
/// with empty frames.
pub fn group_by_frame(records: &[MotRecord], frame_count: usize) -> Vec<Vec<MotRecord>> {
    let n = records.iter().map(|r| r.frame as usize).max().unwrap_or(0).max(frame_count);
    let mut frames = vec![Vec::new(); n];
    for r in records {
        frames[r.frame_index()].push(r.clone());
    }
    frames
}
