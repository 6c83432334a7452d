//! Domain value types: candidates, boxes, association batches and hypotheses.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default appearance descriptor length: an 8-bin histogram per color channel.
pub const DEFAULT_DESCRIPTOR_LEN: usize = 24;

/// Axis-aligned box in pixels, `(left, top, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub left: T,
    pub top: T,
    pub width: T,
    pub height: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(left: T, top: T, width: T, height: T) -> Self {
        Self { left, top, width, height }
    }

    pub fn from_center(center: [T; 2], width: T, height: T) -> Self {
        let half = T::lit(0.5);
        Self { left: center[0] - half * width, top: center[1] - half * height, width, height }
    }

    pub fn center(&self) -> [T; 2] {
        let half = T::lit(0.5);
        [self.left + half * self.width, self.top + half * self.height]
    }

    pub fn right(&self) -> T {
        self.left + self.width
    }

    pub fn bottom(&self) -> T {
        self.top + self.height
    }

    pub fn area(&self) -> T {
        self.width.max(T::zero()) * self.height.max(T::zero())
    }

    pub fn diagonal(&self) -> T {
        self.width.hypot(self.height)
    }

    pub fn intersection(&self, other: &Self) -> T {
        let w = self.right().min(other.right()) - self.left.max(other.left);
        let h = self.bottom().min(other.bottom()) - self.top.max(other.top);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union <= T::zero() {
            T::zero()
        } else {
            inter / union
        }
    }

    /// Fraction of this box's area lying inside `other`.
    pub fn coverage_by(&self, other: &Self) -> T {
        let a = self.area();
        if a <= T::zero() {
            T::zero()
        } else {
            self.intersection(other) / a
        }
    }

    pub fn is_finite(&self) -> bool {
        self.left.is_finite() && self.top.is_finite() && self.width.is_finite() && self.height.is_finite()
    }
}

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Detection,
    /// A single-object-tracking prediction promoted into the candidate set of a
    /// later batch (coasting target).
    Prediction,
    /// Per-frame placeholder for a missed detection.
    Virtual,
}

/// A detection, a promoted prediction or the virtual placeholder on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub frame_index: usize,
    center: Option<[T; 2]>,
    pub bbox: BBox<T>,
    pub score: T,
    pub origin: Origin,
    pub appearance: Vec<T>,
    /// Motion prior in pixels per frame, used when extrapolating a virtual partner.
    pub velocity: [T; 2],
}

impl<T: Scalar> Candidate<T> {
    pub fn detection(frame_index: usize, bbox: BBox<T>, score: T, appearance: Vec<T>) -> Result<Self> {
        Self::real(frame_index, bbox, score, appearance, Origin::Detection)
    }

    pub fn prediction(frame_index: usize, bbox: BBox<T>, appearance: Vec<T>) -> Result<Self> {
        Self::real(frame_index, bbox, T::one(), appearance, Origin::Prediction)
    }

    fn real(frame_index: usize, bbox: BBox<T>, score: T, appearance: Vec<T>, origin: Origin) -> Result<Self> {
        if !(bbox.width > T::zero() && bbox.height > T::zero()) {
            return Err(Error::InputValidation(format!(
                "candidate on frame {frame_index} has non-positive box size {}x{}",
                bbox.width, bbox.height
            )));
        }
        Ok(Self {
            frame_index,
            center: Some(bbox.center()),
            bbox,
            score,
            origin,
            appearance,
            velocity: [T::zero(); 2],
        })
    }

    /// The virtual placeholder. Its center is unresolved until the tracker fixes
    /// it per anchor; its descriptor is borrowed from whichever anchor it pairs with.
    pub fn virtual_slot(frame_index: usize) -> Self {
        Self {
            frame_index,
            center: None,
            bbox: BBox::new(T::zero(), T::zero(), T::zero(), T::zero()),
            score: T::zero(),
            origin: Origin::Virtual,
            appearance: Vec::new(),
            velocity: [T::zero(); 2],
        }
    }

    pub fn with_velocity(mut self, velocity: [T; 2]) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn is_virtual(&self) -> bool {
        self.origin == Origin::Virtual
    }

    pub fn center(&self) -> Result<[T; 2]> {
        self.center.ok_or(Error::UnresolvedVirtual { frame: self.frame_index })
    }
}

/// Per-anchor resolved virtual centers: `centers[k][anchor]` for frame slot `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualResolution<T> {
    pub centers: Vec<Vec<Option<[T; 2]>>>,
}

/// `K + 1` consecutive frames of candidates solved as one assignment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationBatch<T> {
    order: usize,
    frames: Vec<usize>,
    candidates: Vec<Vec<Candidate<T>>>,
    resolution: Option<VirtualResolution<T>>,
}

impl<T: Scalar> AssociationBatch<T> {
    pub fn new(order: usize, frames: Vec<usize>, candidates: Vec<Vec<Candidate<T>>>) -> Result<Self> {
        if order < 2 {
            return Err(Error::Contract(format!("batch order must be at least 2, got {order}")));
        }
        if frames.len() != order + 1 || candidates.len() != order + 1 {
            return Err(Error::Contract(format!(
                "batch of order {order} needs {} frames, got {} frames and {} candidate lists",
                order + 1,
                frames.len(),
                candidates.len()
            )));
        }
        if frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!("batch frames {frames:?} not strictly increasing")));
        }
        for (slot, list) in candidates.iter().enumerate() {
            let virtuals: Vec<usize> =
                list.iter().enumerate().filter(|(_, c)| c.is_virtual()).map(|(i, _)| i).collect();
            match virtuals.as_slice() {
                [] => {}
                [v] if *v + 1 == list.len() => {}
                _ => {
                    return Err(Error::Contract(format!(
                        "frame slot {slot}: at most one virtual candidate, and only in the last position"
                    )))
                }
            }
        }
        Ok(Self { order, frames, candidates, resolution: None })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    /// Slot of the anchor frame inside the batch.
    pub fn anchor_slot(&self) -> usize {
        self.order / 2
    }

    pub fn anchor_frame(&self) -> usize {
        self.frames[self.anchor_slot()]
    }

    pub fn candidates(&self, slot: usize) -> &[Candidate<T>] {
        &self.candidates[slot]
    }

    pub fn all_candidates(&self) -> &[Vec<Candidate<T>>] {
        &self.candidates
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.candidates.iter().map(Vec::len).collect()
    }

    pub fn virtual_index(&self, slot: usize) -> Option<usize> {
        self.candidates[slot].last().filter(|c| c.is_virtual()).map(|_| self.candidates[slot].len() - 1)
    }

    pub fn has_virtuals(&self) -> bool {
        (0..=self.order).any(|k| self.virtual_index(k).is_some())
    }

    pub fn resolution(&self) -> Option<&VirtualResolution<T>> {
        self.resolution.as_ref()
    }

    pub(crate) fn set_resolution(&mut self, resolution: VirtualResolution<T>) {
        self.resolution = Some(resolution);
    }

    /// Center of candidate `index` in `slot` as seen from `anchor` (virtual
    /// candidates resolve to the per-anchor location).
    pub fn center_for(&self, slot: usize, index: usize, anchor: usize) -> Result<[T; 2]> {
        let c = &self.candidates[slot][index];
        if !c.is_virtual() {
            return c.center();
        }
        self.resolution
            .as_ref()
            .and_then(|r| r.centers.get(slot)?.get(anchor).copied().flatten())
            .ok_or(Error::UnresolvedVirtual { frame: c.frame_index })
    }
}

/// One `(K+1)`-tuple of 0-based candidate offsets and its affinity.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisTrajectory<T> {
    pub indices: Vec<usize>,
    pub affinity: T,
}
