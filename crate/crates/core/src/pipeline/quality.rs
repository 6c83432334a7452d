use crate::scalar::Scalar;
use crate::types::BBox;

/// Scores how well a box frames a real object, in `[0, 1]`.
pub trait QualityEstimator<T> {
    fn evaluate(&self, frame: usize, bbox: &BBox<T>, score: T) -> T;
}

/// 1 when the box overlaps a ground-truth object with IoU >= 0.5, else 0.
#[derive(Debug, Clone)]
pub struct GroundTruthQuality<T> {
    boxes: Vec<Vec<BBox<T>>>,
}

impl<T: Scalar> GroundTruthQuality<T> {
    /// `boxes[f]` lists the ground-truth boxes of frame `f`.
    pub fn new(boxes: Vec<Vec<BBox<T>>>) -> Self {
        Self { boxes }
    }
}

impl<T: Scalar> QualityEstimator<T> for GroundTruthQuality<T> {
    fn evaluate(&self, frame: usize, bbox: &BBox<T>, _score: T) -> T {
        let hit = self.boxes.get(frame).is_some_and(|gt| gt.iter().any(|g| g.iou(bbox) >= T::lit(0.5)));
        if hit {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Detector confidence squashed by a logistic centred at 0.5.
#[derive(Debug, Clone, Copy)]
pub struct ConfidenceQuality<T> {
    pub center: T,
    pub width: T,
}

impl<T: Scalar> Default for ConfidenceQuality<T> {
    fn default() -> Self {
        Self { center: T::lit(0.5), width: T::lit(0.1) }
    }
}

impl<T: Scalar> QualityEstimator<T> for ConfidenceQuality<T> {
    fn evaluate(&self, _frame: usize, _bbox: &BBox<T>, score: T) -> T {
        T::one() / (T::one() + (-(score - self.center) / self.width).exp())
    }
}
