//! Index algebra between candidate multi-indices, pair indices and flattened
//! assignment-vector positions, plus the sliding association-window schedule.
//!
//! The math layer is 1-based: candidate `i` of a frame with `I` candidates runs
//! over `1..=I`, and the pair between frames `k-1` and `k` flattens to
//! `j = (i_prev - 1) * I_k + i_next`. Storage everywhere else in the crate is
//! 0-based; [`to_storage`] and [`from_storage`] are the only conversion points.

use log::warn;

use crate::error::{Error, Result};

/// Converts a 1-based math index to a 0-based storage offset.
#[inline]
pub fn to_storage(i: usize) -> usize {
    debug_assert!(i >= 1, "math indices are 1-based");
    i - 1
}

/// Converts a 0-based storage offset to a 1-based math index.
#[inline]
pub fn from_storage(offset: usize) -> usize {
    offset + 1
}

/// Flattens `(i_prev, i_next)` into the position `j` of the local assignment vector.
pub fn flatten_pair(i_prev: usize, i_next: usize, next_len: usize) -> Result<usize> {
    if i_prev == 0 || i_next == 0 || i_next > next_len {
        return Err(Error::Range(format!(
            "pair ({i_prev}, {i_next}) outside 1-based grid with {next_len} columns"
        )));
    }
    Ok((i_prev - 1) * next_len + i_next)
}

/// Inverse of [`flatten_pair`]. `prev_len` bounds the grid from above.
pub fn unflatten_pair(j: usize, prev_len: usize, next_len: usize) -> Result<(usize, usize)> {
    if next_len == 0 || j == 0 || j > prev_len * next_len {
        return Err(Error::Range(format!(
            "flat index {j} outside 1..={} for a {prev_len}x{next_len} grid",
            prev_len * next_len
        )));
    }
    Ok(((j - 1) / next_len + 1, (j - 1) % next_len + 1))
}

/// Storage-level flattening: 0-based row/column to 0-based vector offset.
#[inline]
pub(crate) fn flat_offset(row: usize, col: usize, next_len: usize) -> usize {
    row * next_len + col
}

/// A pair index between frames `k-1` and `k` in 1-based math coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairIndex {
    pub k: usize,
    pub i_prev: usize,
    pub i_next: usize,
    pub j: usize,
}

impl PairIndex {
    pub fn new(k: usize, i_prev: usize, i_next: usize, next_len: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Range("pair identifiers start at 1".into()));
        }
        let j = flatten_pair(i_prev, i_next, next_len)?;
        Ok(Self { k, i_prev, i_next, j })
    }

    pub fn from_flat(k: usize, j: usize, prev_len: usize, next_len: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Range("pair identifiers start at 1".into()));
        }
        let (i_prev, i_next) = unflatten_pair(j, prev_len, next_len)?;
        Ok(Self { k, i_prev, i_next, j })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStatus {
    Ok,
    /// Fewer frames than one association batch needs.
    TooShort,
}

/// Frame ranges of the sliding association batches over a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    pub windows: Vec<Vec<usize>>,
    pub status: ScheduleStatus,
}

/// Consecutive windows of `order + 1` frames sharing `overlap` frames.
///
/// If the stride leaves a tail uncovered, one final window ending on the last
/// frame is appended so the windows always tile the sequence.
pub fn batch_windows(frame_count: usize, order: usize, overlap: usize) -> Result<BatchSchedule> {
    let span = order + 1;
    if order < 1 || overlap >= span {
        return Err(Error::Contract(format!(
            "overlap {overlap} must be smaller than the window span {span}"
        )));
    }
    if frame_count < span {
        warn!("sequence of {frame_count} frames is shorter than one {span}-frame batch");
        return Ok(BatchSchedule { windows: Vec::new(), status: ScheduleStatus::TooShort });
    }
    let stride = span - overlap;
    let mut windows: Vec<Vec<usize>> = (0..=frame_count - span)
        .step_by(stride)
        .map(|s| (s..s + span).collect())
        .collect();
    if windows.last().map(|w| w[span - 1]) != Some(frame_count - 1) {
        let s = frame_count - span;
        windows.push((s..s + span).collect());
    }
    Ok(BatchSchedule { windows, status: ScheduleStatus::Ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn flatten_examples() {
        assert_eq!(flatten_pair(2, 1, 3).unwrap(), 4);
        for n in 1..6 {
            assert_eq!(flatten_pair(1, 1, n).unwrap(), 1);
        }
        assert_eq!(flatten_pair(3, 3, 3).unwrap(), 9);
    }

    #[test]
    fn flatten_rejects_out_of_range() {
        assert!(matches!(flatten_pair(0, 1, 3), Err(Error::Range(_))));
        assert!(matches!(flatten_pair(1, 4, 3), Err(Error::Range(_))));
        assert!(matches!(unflatten_pair(13, 4, 3), Err(Error::Range(_))));
        assert!(matches!(unflatten_pair(0, 4, 3), Err(Error::Range(_))));
    }

    #[test]
    fn unflatten_examples() {
        assert_eq!(unflatten_pair(4, 2, 3).unwrap(), (2, 1));
        assert_eq!(unflatten_pair(1, 5, 5).unwrap(), (1, 1));
        // exhaustive round trip over the 4x3 grid
        for j in 1..=12 {
            let (a, b) = unflatten_pair(j, 4, 3).unwrap();
            assert!((1..=4).contains(&a) && (1..=3).contains(&b));
            assert_eq!(flatten_pair(a, b, 3).unwrap(), j);
        }
    }

    #[test]
    fn bijection_on_all_small_grids() {
        for prev in 1..=8 {
            for next in 1..=8 {
                let mut seen = BTreeSet::new();
                for a in 1..=prev {
                    for b in 1..=next {
                        let j = flatten_pair(a, b, next).unwrap();
                        assert!(seen.insert(j));
                        assert_eq!(unflatten_pair(j, prev, next).unwrap(), (a, b));
                        assert_eq!(flat_offset(to_storage(a), to_storage(b), next), to_storage(j));
                    }
                }
                assert_eq!(seen, (1..=prev * next).collect());
            }
        }
    }

    #[test]
    fn pair_index_constructors_agree() {
        let p = PairIndex::new(2, 3, 2, 4).unwrap();
        assert_eq!(p, PairIndex::from_flat(2, p.j, 5, 4).unwrap());
        assert!(PairIndex::new(0, 1, 1, 1).is_err());
    }

    #[test]
    fn window_examples() {
        let s = batch_windows(5, 2, 2).unwrap();
        assert_eq!(s.windows, vec![vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4]]);
        assert_eq!(batch_windows(3, 2, 2).unwrap().windows, vec![vec![0, 1, 2]]);
        let s = batch_windows(10, 2, 2).unwrap();
        assert_eq!(s.windows.len(), 10 - 3 + 1);
        assert_eq!(s.windows.iter().map(|w| w[0]).collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn short_sequence_yields_empty_schedule() {
        let s = batch_windows(2, 2, 2).unwrap();
        assert!(s.windows.is_empty());
        assert_eq!(s.status, ScheduleStatus::TooShort);
        assert!(batch_windows(10, 2, 3).is_err());
    }

    #[test]
    fn windows_tile_and_anchor_each_interior_frame_once() {
        for n in 3..40 {
            let s = batch_windows(n, 2, 2).unwrap();
            let union: BTreeSet<usize> = s.windows.iter().flatten().copied().collect();
            assert_eq!(union, (0..n).collect());
            let anchors: Vec<usize> = s.windows.iter().map(|w| w[1]).collect();
            assert_eq!(anchors, (1..n - 1).collect::<Vec<_>>());
            for pair in s.windows.windows(2) {
                assert_eq!(pair[0][1], pair[1][0]);
                assert_eq!(&pair[0][1..], &pair[1][..2]);
            }
        }
        // wider strides still tile
        for n in 4..30 {
            let s = batch_windows(n, 3, 1).unwrap();
            let union: BTreeSet<usize> = s.windows.iter().flatten().copied().collect();
            assert_eq!(union, (0..n).collect());
        }
    }
}
