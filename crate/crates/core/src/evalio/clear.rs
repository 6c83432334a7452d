//! CLEAR MOT metrics with IoU matching.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::mda::{max_weight_assignment, Matrix};

use super::mot::MotRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatches {
    pub frame: u32,
    /// `(gt id, hypothesis id, IoU)`.
    pub matches: Vec<(i64, i64, f64)>,
    pub false_positives: usize,
    pub misses: usize,
    pub switches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearMotReport {
    pub mota: f64,
    /// Mean IoU over matched pairs (higher is better).
    pub motp: f64,
    /// Percentage of ground-truth targets matched in at least 80% of their frames.
    pub mostly_tracked: f64,
    /// Percentage matched in at most 20% of their frames.
    pub mostly_lost: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub gt_boxes: usize,
    pub gt_targets: usize,
    pub matches: usize,
    pub frames: Vec<FrameMatches>,
}

impl fmt::Display for ClearMotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MOTA\tMOTP\tMT\tML\tFP\tFN\tIDS")?;
        write!(
            f,
            "{:.4}\t{:.4}\t{:.1}%\t{:.1}%\t{}\t{}\t{}",
            self.mota, self.motp, self.mostly_tracked, self.mostly_lost, self.false_positives, self.false_negatives, self.id_switches
        )
    }
}

/// Per-frame matching at IoU `>= iou_threshold`. A ground-truth target keeps
/// its previous-frame hypothesis while that pair still clears the threshold;
/// the rest are matched by maximum total IoU. A matched target whose
/// hypothesis differs from its most recent earlier one counts a switch.
pub fn clear_mot(gt: &[MotRecord], hyp: &[MotRecord], iou_threshold: f64) -> ClearMotReport {
    let mut gt_frames: BTreeMap<u32, Vec<&MotRecord>> = BTreeMap::new();
    let mut hyp_frames: BTreeMap<u32, Vec<&MotRecord>> = BTreeMap::new();
    for r in gt {
        gt_frames.entry(r.frame).or_default().push(r);
    }
    for r in hyp {
        hyp_frames.entry(r.frame).or_default().push(r);
    }
    let frames: BTreeSet<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();

    let mut previous: HashMap<i64, i64> = HashMap::new();
    let mut last_seen: HashMap<i64, i64> = HashMap::new();
    let mut lifespan: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    let (mut fp, mut fn_, mut ids, mut total_iou, mut n_match) = (0, 0, 0, 0.0, 0);
    let mut log = Vec::with_capacity(frames.len());

    for frame in frames {
        let g = gt_frames.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let h = hyp_frames.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let iou = |gi: usize, hi: usize| g[gi].bbox().iou(&h[hi].bbox());
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut matches = Vec::new();

        for (gi, gr) in g.iter().enumerate() {
            let Some(&prev_h) = previous.get(&gr.id) else { continue };
            if let Some(hi) = (0..h.len()).find(|&hi| !h_used[hi] && h[hi].id == prev_h) {
                let v = iou(gi, hi);
                if v >= iou_threshold {
                    g_used[gi] = true;
                    h_used[hi] = true;
                    matches.push((gi, hi, v));
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|&i| !h_used[i]).collect();
        if !free_g.is_empty() && !free_h.is_empty() {
            let mut w = Matrix::from_vec(free_g.len(), free_h.len(), vec![f64::NEG_INFINITY; free_g.len() * free_h.len()])
                .expect("shape");
            for (a, &gi) in free_g.iter().enumerate() {
                for (b, &hi) in free_h.iter().enumerate() {
                    let v = iou(gi, hi);
                    if v >= iou_threshold {
                        w[(a, b)] = v;
                    }
                }
            }
            for (a, b) in max_weight_assignment(&w).into_iter().enumerate() {
                if let Some(b) = b {
                    let (gi, hi) = (free_g[a], free_h[b]);
                    g_used[gi] = true;
                    h_used[hi] = true;
                    matches.push((gi, hi, iou(gi, hi)));
                }
            }
        }

        let mut switches = 0;
        let mut frame_map = HashMap::new();
        let mut entry_log = Vec::with_capacity(matches.len());
        for &(gi, hi, v) in &matches {
            let (gid, hid) = (g[gi].id, h[hi].id);
            if last_seen.get(&gid).is_some_and(|&prev| prev != hid) {
                switches += 1;
            }
            last_seen.insert(gid, hid);
            frame_map.insert(gid, hid);
            total_iou += v;
            entry_log.push((gid, hid, v));
        }
        for (gi, gr) in g.iter().enumerate() {
            let e = lifespan.entry(gr.id).or_insert((0, 0));
            e.0 += 1;
            e.1 += g_used[gi] as usize;
        }
        previous = frame_map;
        let misses = g_used.iter().filter(|u| !**u).count();
        let false_pos = h_used.iter().filter(|u| !**u).count();
        fp += false_pos;
        fn_ += misses;
        ids += switches;
        n_match += matches.len();
        entry_log.sort_by_key(|e| e.0);
        log.push(FrameMatches { frame, matches: entry_log, false_positives: false_pos, misses, switches });
    }

    let gt_boxes = gt.len();
    let errors = fp + fn_ + ids;
    let mota = if gt_boxes > 0 {
        1.0 - errors as f64 / gt_boxes as f64
    } else if errors == 0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    let targets = lifespan.len();
    let pct = |n: usize| if targets == 0 { 0.0 } else { 100.0 * n as f64 / targets as f64 };
    let mt = lifespan.values().filter(|(life, hit)| *hit as f64 >= 0.8 * *life as f64).count();
    let ml = lifespan.values().filter(|(life, hit)| *hit as f64 <= 0.2 * *life as f64).count();
    ClearMotReport {
        mota,
        motp: if n_match > 0 { total_iou / n_match as f64 } else { 0.0 },
        mostly_tracked: pct(mt),
        mostly_lost: pct(ml),
        false_positives: fp,
        false_negatives: fn_,
        id_switches: ids,
        gt_boxes,
        gt_targets: targets,
        matches: n_match,
        frames: log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BBox;

    fn rec(frame: u32, id: i64, x: f64) -> MotRecord {
        MotRecord::new(frame, id, BBox::new(x, 0.0, 10.0, 20.0), 1.0)
    }

    fn two_targets() -> Vec<MotRecord> {
        (1..=10).flat_map(|f| [rec(f, 1, f as f64), rec(f, 2, 100.0 + f as f64)]).collect()
    }

    #[test]
    fn perfect_tracking() {
        let gt = two_targets();
        let r = clear_mot(&gt, &gt, 0.5);
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.motp, 1.0);
        assert_eq!((r.false_positives, r.false_negatives, r.id_switches), (0, 0, 0));
        assert_eq!(r.mostly_tracked, 100.0);
        assert_eq!(r.mostly_lost, 0.0);
    }

    #[test]
    fn empty_hypothesis() {
        let gt = two_targets();
        let r = clear_mot(&gt, &[], 0.5);
        assert_eq!(r.false_negatives, gt.len());
        assert_eq!(r.mota, 0.0);
        assert_eq!(r.mostly_lost, 100.0);
    }

    #[test]
    fn single_identity_flip() {
        let gt = two_targets();
        let hyp: Vec<MotRecord> = gt
            .iter()
            .map(|r| {
                let mut h = r.clone();
                if r.id == 1 && r.frame > 5 {
                    h.id = 7;
                }
                h
            })
            .collect();
        let r = clear_mot(&gt, &hyp, 0.5);
        assert_eq!(r.id_switches, 1);
        assert_eq!(r.mostly_tracked, 100.0);
        assert!((r.mota - (1.0 - 1.0 / 20.0)).abs() < 1e-12);
        assert_eq!(r.frames[5].switches, 1);
    }

    #[test]
    fn continuity_is_preferred_over_better_overlap() {
        // gt 1 at x=0; hypothesis 5 followed it, hypothesis 6 now overlaps slightly better
        let gt = vec![rec(1, 1, 0.0), rec(2, 1, 0.0)];
        let hyp = vec![rec(1, 5, 0.0), rec(2, 5, 2.0), rec(2, 6, 1.0)];
        let r = clear_mot(&gt, &hyp, 0.5);
        assert_eq!(r.id_switches, 0);
        assert_eq!(r.frames[1].matches[0].1, 5);
        assert_eq!(r.false_positives, 1);
    }

    #[test]
    fn deleting_hypotheses_never_helps() {
        let gt = two_targets();
        let mut hyp = gt.clone();
        let mut prev = clear_mot(&gt, &hyp, 0.5);
        while !hyp.is_empty() {
            hyp.remove(hyp.len() / 2);
            let r = clear_mot(&gt, &hyp, 0.5);
            assert!(r.false_negatives >= prev.false_negatives);
            assert!(r.false_negatives + r.id_switches >= prev.false_negatives);
            prev = r;
        }
    }
}
