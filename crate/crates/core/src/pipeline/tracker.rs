use log::debug;

use crate::affinity::{compute_affinity, generate_hypotheses, AffinityParams};
use crate::error::{Error, Result};
use crate::index::batch_windows;
use crate::mda::{discretize, solve_soft, PairMask, PairMatching, PairVirtuals, PartialNormMask, ZeroLinePolicy};
use crate::scalar::Scalar;
use crate::types::{AssociationBatch, BBox, Candidate, Origin};

use super::config::PipelineConfig;
use super::quality::QualityEstimator;
use super::virtuals::resolve_virtuals;

/// Frames of history used for the constant-velocity motion estimate.
const VELOCITY_SPAN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Coasting,
    Exited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub id: u64,
    pub boxes: Vec<(usize, BBox<T>)>,
    pub status: TrackStatus,
    pub frames_coasting: usize,
    /// Frame and candidate index of the latest box; the track's link into the next window.
    pub last: Option<(usize, usize)>,
    /// Descriptor of the last confident detection.
    pub appearance: Vec<T>,
}

impl<T: Scalar> Track<T> {
    /// Mean per-frame displacement over the recent boxes.
    pub fn velocity(&self) -> [T; 2] {
        let n = self.boxes.len();
        if n < 2 {
            return [T::zero(); 2];
        }
        let span = (n - 1).min(VELOCITY_SPAN);
        let (f0, b0) = &self.boxes[n - 1 - span];
        let (f1, b1) = &self.boxes[n - 1];
        let dt = T::from_usize_lossy(f1 - f0);
        let (c0, c1) = (b0.center(), b1.center());
        [(c1[0] - c0[0]) / dt, (c1[1] - c0[1]) / dt]
    }

    /// Constant-velocity prediction for the frame after the latest box.
    pub fn predict(&self) -> Option<BBox<T>> {
        let (_, b) = self.boxes.last()?;
        let v = self.velocity();
        let c = b.center();
        Some(BBox::from_center([c[0] + v[0], c[1] + v[1]], b.width, b.height))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState<T> {
    pub tracks: Vec<Track<T>>,
    pub next_id: u64,
}

impl<T> Default for TrackState<T> {
    fn default() -> Self {
        Self { tracks: Vec::new(), next_id: 1 }
    }
}

impl<T: Scalar> TrackState<T> {
    /// The live track whose latest box is candidate `index` of `frame`.
    pub fn track_at(&self, frame: usize, index: usize) -> Result<Option<usize>> {
        let mut hits = self
            .tracks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.status != TrackStatus::Exited && t.last == Some((frame, index)))
            .map(|(k, _)| k);
        let first = hits.next();
        if let Some(other) = hits.next() {
            return Err(Error::InternalInvariant(format!(
                "tracks {} and {} both end on candidate {index} of frame {frame}",
                self.tracks[first.unwrap_or(0)].id,
                self.tracks[other].id
            )));
        }
        Ok(first)
    }

    fn open(&mut self, frame: usize, index: usize, cand: &Candidate<T>) -> usize {
        self.tracks.push(Track {
            id: self.next_id,
            boxes: vec![(frame, cand.bbox)],
            status: TrackStatus::Active,
            frames_coasting: 0,
            last: Some((frame, index)),
            appearance: cand.appearance.clone(),
        });
        self.next_id += 1;
        self.tracks.len() - 1
    }

    pub fn trajectories(&self) -> Vec<Trajectory<T>> {
        self.tracks
            .iter()
            .filter(|t| !t.boxes.is_empty())
            .map(|t| Trajectory { id: t.id, boxes: t.boxes.clone() })
            .collect()
    }
}

/// One output trajectory: an id and its per-frame boxes in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub id: u64,
    pub boxes: Vec<(usize, BBox<T>)>,
}

/// Solves one window: hypotheses, affinity with virtual scaling, soft
/// assignment under the partial mask, and discretization.
pub fn associate<T: Scalar>(
    batch: &AssociationBatch<T>,
    params: &AffinityParams<T>,
    config: &PipelineConfig<T>,
) -> Result<Vec<PairMatching>> {
    let hypotheses = generate_hypotheses(batch, &config.gate);
    let bundle = compute_affinity(batch, &hypotheses, params, config.alpha)?;
    let order = batch.order();
    let mask = PartialNormMask {
        pairs: (0..order)
            .map(|k| PairMask {
                column_only_rows: batch.virtual_index(k).into_iter().collect(),
                row_only_cols: batch.virtual_index(k + 1).into_iter().collect(),
            })
            .collect(),
    };
    let soft = solve_soft(&bundle.a, &batch.sizes(), &mask, config.solver, ZeroLinePolicy::Skip)?;
    let virtuals: Vec<PairVirtuals> = (0..order)
        .map(|k| PairVirtuals { row: batch.virtual_index(k), col: batch.virtual_index(k + 1) })
        .collect();
    Ok(discretize(soft.matrices(), &virtuals))
}

/// Online tracker over a fixed sequence of per-frame candidates.
///
/// Windows of three frames are processed in order; the window anchored at
/// frame `t` extends every track ending on frame `t` by one box on `t + 1`.
/// Coasting tracks materialise their predictions as candidates so later
/// windows can link them.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    params: AffinityParams<T>,
    config: PipelineConfig<T>,
    frames: Vec<Vec<Candidate<T>>>,
    state: TrackState<T>,
    first_anchor: Option<usize>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(frames: Vec<Vec<Candidate<T>>>, params: AffinityParams<T>, config: PipelineConfig<T>) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        for (f, list) in frames.iter().enumerate() {
            if let Some(c) = list.iter().find(|c| c.is_virtual() || c.frame_index != f) {
                return Err(Error::InputValidation(format!(
                    "frame {f} holds a {} candidate for frame {}",
                    if c.is_virtual() { "virtual" } else { "real" },
                    c.frame_index
                )));
            }
        }
        Ok(Self { params, config, frames, state: TrackState::default(), first_anchor: None })
    }

    pub fn state(&self) -> &TrackState<T> {
        &self.state
    }

    /// Current candidates of `frame`, including materialised predictions.
    pub fn candidates(&self, frame: usize) -> &[Candidate<T>] {
        &self.frames[frame]
    }

    pub fn trajectories(&self) -> Vec<Trajectory<T>> {
        self.state.trajectories()
    }

    /// Runs target management on the window `[t - 1, t, t + 1]`.
    pub fn track_batch(&mut self, window: &[usize], quality: &dyn QualityEstimator<T>) -> Result<()> {
        let &[prev, t, next] = window else {
            return Err(Error::Contract(format!("tracking windows span three frames, got {window:?}")));
        };
        if next >= self.frames.len() || prev + 1 != t || t + 1 != next {
            return Err(Error::Contract(format!("window {window:?} outside a {}-frame sequence", self.frames.len())));
        }
        let first_window = *self.first_anchor.get_or_insert(t) == t;
        self.reacquire(t, quality)?;
        if self.frames[t].is_empty() {
            return Ok(());
        }

        let mut anchors = self.frames[t].clone();
        let mut owners = Vec::with_capacity(anchors.len());
        for (i, a) in anchors.iter_mut().enumerate() {
            let owner = self.state.track_at(t, i)?;
            if let Some(k) = owner {
                a.velocity = self.state.tracks[k].velocity();
            }
            owners.push(owner);
        }
        let mut before = self.frames[prev].clone();
        before.push(Candidate::virtual_slot(prev));
        let mut after = self.frames[next].clone();
        after.push(Candidate::virtual_slot(next));
        let mut batch = AssociationBatch::new(2, vec![prev, t, next], vec![before, anchors, after])?;
        resolve_virtuals(&mut batch, &self.params);
        let matchings = associate(&batch, &self.params, &self.config)?;
        let threshold = self.config.quality_threshold;
        // coasting appends predictions to `next`; indices at or past these counts are virtual
        let (real_prev, real_next) = (self.frames[prev].len(), self.frames[next].len());

        for (i, owner) in owners.into_iter().enumerate() {
            let anchor = &batch.candidates(1)[i];
            let k = match owner {
                Some(k) => k,
                None => {
                    if anchor.origin != Origin::Detection || quality.evaluate(t, &anchor.bbox, anchor.score) <= threshold {
                        continue;
                    }
                    let k = self.state.open(t, i, anchor);
                    debug!("frame {t}: track {} starts", self.state.tracks[k].id);
                    if first_window {
                        let row = matchings[0].col_to_row[i].filter(|&r| r < real_prev);
                        if let Some(r) = row {
                            self.state.tracks[k].boxes.insert(0, (prev, self.frames[prev][r].bbox));
                        }
                    }
                    k
                }
            };
            let prediction = self.state.tracks[k].predict().ok_or_else(|| {
                Error::InternalInvariant(format!("track {} has no boxes", self.state.tracks[k].id))
            })?;
            let partner = matchings[1].row_to_col[i].filter(|&j| j < real_next);
            match partner {
                Some(j) => {
                    let cand = &self.frames[next][j];
                    let q = quality.evaluate(next, &cand.bbox, cand.score);
                    if prediction.iou(&cand.bbox) < self.config.t_dif && q < threshold {
                        self.coast(k, next, prediction);
                    } else {
                        let (bbox, confident) = (cand.bbox, q >= threshold && cand.origin == Origin::Detection);
                        let appearance = confident.then(|| cand.appearance.clone());
                        let track = &mut self.state.tracks[k];
                        track.boxes.push((next, bbox));
                        track.last = Some((next, j));
                        track.status = TrackStatus::Active;
                        track.frames_coasting = 0;
                        if let Some(app) = appearance {
                            track.appearance = app;
                        }
                    }
                }
                None => {
                    let (fw, fh) = self.config.frame_size;
                    let frame = BBox::new(T::zero(), T::zero(), fw, fh);
                    if prediction.intersection(&frame) / prediction.area() < self.config.t_exit {
                        self.exit(k, next, false);
                    } else {
                        self.coast(k, next, prediction);
                    }
                }
            }
        }
        Ok(())
    }

    /// Hands each coasting track the best unclaimed confident detection
    /// overlapping its prediction on frame `t` (IoU >= `t_dif`), then drops
    /// prediction candidates no live track ends on.
    fn reacquire(&mut self, t: usize, quality: &dyn QualityEstimator<T>) -> Result<()> {
        let threshold = self.config.quality_threshold;
        let mut owner = vec![None; self.frames[t].len()];
        for (k, track) in self.state.tracks.iter().enumerate() {
            match track.last {
                Some((f, i)) if f == t && track.status != TrackStatus::Exited => {
                    if owner[i].replace(k).is_some() {
                        return Err(Error::InternalInvariant(format!("two tracks end on candidate {i} of frame {t}")));
                    }
                }
                _ => {}
            }
        }
        let cands = &self.frames[t];
        let mut pairs = Vec::new();
        for (p, pred) in cands.iter().enumerate().filter(|(_, c)| c.origin == Origin::Prediction) {
            let Some(k) = owner[p] else { continue };
            for (d, det) in cands.iter().enumerate() {
                if det.origin != Origin::Detection || owner[d].is_some() {
                    continue;
                }
                let iou = pred.bbox.iou(&det.bbox);
                if iou >= self.config.t_dif && quality.evaluate(t, &det.bbox, det.score) > threshold {
                    pairs.push((iou, k, p, d));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then((a.2, a.3).cmp(&(b.2, b.3))));
        for (_, k, p, d) in pairs {
            if owner[p] != Some(k) || owner[d].is_some() {
                continue;
            }
            owner[p] = None;
            owner[d] = Some(k);
            let det = &self.frames[t][d];
            let track = &mut self.state.tracks[k];
            if let Some(last) = track.boxes.last_mut() {
                *last = (t, det.bbox);
            }
            track.last = Some((t, d));
            track.frames_coasting = 0;
            track.status = TrackStatus::Active;
            track.appearance = det.appearance.clone();
            debug!("frame {t}: track {} reacquires a detection", track.id);
        }

        let keep: Vec<bool> =
            self.frames[t].iter().enumerate().map(|(i, c)| c.origin != Origin::Prediction || owner[i].is_some()).collect();
        if keep.iter().all(|&k| k) {
            return Ok(());
        }
        let mut remap = vec![None; keep.len()];
        let mut n = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                remap[i] = Some(n);
                n += 1;
            }
        }
        let old = std::mem::take(&mut self.frames[t]);
        self.frames[t] = old.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(c, _)| c).collect();
        for track in &mut self.state.tracks {
            if let Some((f, i)) = track.last {
                if f == t {
                    track.last = remap[i].map(|j| (t, j));
                }
            }
        }
        Ok(())
    }

    fn coast(&mut self, k: usize, frame: usize, prediction: BBox<T>) {
        let track = &mut self.state.tracks[k];
        track.frames_coasting += 1;
        if track.frames_coasting > self.config.max_coast_frames {
            self.exit(k, frame, true);
            return;
        }
        let cand = match Candidate::prediction(frame, prediction, track.appearance.clone()) {
            Ok(c) => c,
            Err(_) => {
                self.exit(k, frame, true);
                return;
            }
        };
        self.frames[frame].push(cand);
        let track = &mut self.state.tracks[k];
        track.boxes.push((frame, prediction));
        track.last = Some((frame, self.frames[frame].len() - 1));
        track.status = TrackStatus::Coasting;
    }

    /// Ends a track; a track dropped after coasting loses its unconfirmed tail.
    fn exit(&mut self, k: usize, frame: usize, drop_coasted: bool) {
        let track = &mut self.state.tracks[k];
        if drop_coasted {
            let keep = track.boxes.len().saturating_sub(track.frames_coasting.saturating_sub(1));
            track.boxes.truncate(keep.max(1));
        }
        track.status = TrackStatus::Exited;
        track.last = None;
        debug!("frame {frame}: track {} exits", track.id);
    }
}

/// Tracks a whole sequence and returns every trajectory, ordered by id.
pub fn run_sequence<T: Scalar>(
    frames: Vec<Vec<Candidate<T>>>,
    params: &AffinityParams<T>,
    config: &PipelineConfig<T>,
    quality: &dyn QualityEstimator<T>,
) -> Result<Vec<Trajectory<T>>> {
    if frames.len() < 3 {
        return Err(Error::InputValidation(format!("tracking needs at least 3 frames, got {}", frames.len())));
    }
    let schedule = batch_windows(frames.len(), 2, 2)?;
    let mut tracker = Tracker::new(frames, *params, *config)?;
    for window in &schedule.windows {
        tracker.track_batch(window, quality)?;
    }
    Ok(tracker.trajectories())
}
