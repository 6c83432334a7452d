//! MOTChallenge I/O, CLEAR MOT evaluation and synthetic scenarios.

mod clear;
mod mot;
mod scenario;

pub use clear::{clear_mot, ClearMotReport, FrameMatches};
pub use mot::{group_by_frame, load_mot, parse_mot, save_mot, write_mot, MotRecord};
pub use scenario::{generate_scenario, Scenario, ScenarioSpec};

use crate::error::Result;
use crate::pipeline::Trajectory;
use crate::scalar::Scalar;
use crate::types::{BBox, Candidate};

fn to_scalar<T: Scalar>(b: BBox<f64>) -> BBox<T> {
    BBox::new(T::lit(b.left), T::lit(b.top), T::lit(b.width), T::lit(b.height))
}

/// Detection candidates per frame (0-based) from MOT records.
pub fn records_to_candidates<T: Scalar>(records: &[MotRecord], frame_count: usize) -> Result<Vec<Vec<Candidate<T>>>> {
    group_by_frame(records, frame_count)
        .into_iter()
        .enumerate()
        .map(|(f, list)| {
            list.iter()
                .map(|r| {
                    let app = r.appearance.iter().map(|&v| T::lit(v)).collect();
                    Candidate::detection(f, to_scalar(r.bbox()), T::lit(r.conf), app)
                })
                .collect()
        })
        .collect()
}

/// Ground-truth boxes per frame (0-based).
pub fn records_to_boxes<T: Scalar>(records: &[MotRecord], frame_count: usize) -> Vec<Vec<BBox<T>>> {
    group_by_frame(records, frame_count)
        .into_iter()
        .map(|list| list.iter().map(|r| to_scalar(r.bbox())).collect())
        .collect()
}

/// MOT result records, ordered by frame then id.
pub fn trajectories_to_records<T: Scalar>(trajectories: &[Trajectory<T>]) -> Vec<MotRecord> {
    let mut out: Vec<MotRecord> = trajectories
        .iter()
        .flat_map(|t| {
            t.boxes.iter().map(move |(f, b)| {
                let bbox = BBox::new(b.left.to_f64_lossy(), b.top.to_f64_lossy(), b.width.to_f64_lossy(), b.height.to_f64_lossy());
                MotRecord::new(*f as u32 + 1, t.id as i64, bbox, 1.0)
            })
        })
        .collect();
    out.sort_by_key(|r| (r.frame, r.id));
    out
}

/// Frames spanned by a set of records (the largest 1-based frame number).
pub fn frame_span(records: &[MotRecord]) -> usize {
    records.iter().map(|r| r.frame as usize).max().unwrap_or(0)
}
