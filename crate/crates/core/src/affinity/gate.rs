//! Connection gate and hypothesis-trajectory generation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{AssociationBatch, Candidate, HypothesisTrajectory};

/// Adaptive spatial/size gate between candidates on consecutive frames.
///
/// Two real candidates connect when their center distance is within
/// `base_distance_factor` mean box diagonals and their height ratio lies inside
/// `size_ratio_bounds`. A candidate with no connection retries with both bounds
/// widened by `relaxation_factor` per step, at most `max_relaxations` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionGateConfig<T> {
    pub base_distance_factor: T,
    pub size_ratio_bounds: (T, T),
    pub relaxation_factor: T,
    pub max_relaxations: usize,
}

impl<T: Scalar> Default for ConnectionGateConfig<T> {
    fn default() -> Self {
        Self {
            base_distance_factor: T::one(),
            size_ratio_bounds: (T::lit(0.5), T::lit(2.0)),
            relaxation_factor: T::lit(2.0),
            max_relaxations: 2,
        }
    }
}

impl<T: Scalar> ConnectionGateConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_ratio_bounds;
        if !(self.base_distance_factor > T::zero()
            && lo > T::zero()
            && lo < T::one()
            && hi > T::one()
            && self.relaxation_factor > T::one())
        {
            return Err(Error::InputValidation(format!("invalid connection gate {self:?}")));
        }
        Ok(())
    }

    /// Distance multiple after `level` relaxations.
    pub fn distance_factor(&self, level: usize) -> T {
        self.base_distance_factor * self.relaxation_factor.powi(level as i32)
    }

    /// Whether two real candidates connect at relaxation `level`.
    pub fn passes(&self, a: &Candidate<T>, b: &Candidate<T>, level: usize) -> bool {
        let (Ok(pa), Ok(pb)) = (a.center(), b.center()) else {
            return false;
        };
        let widen = self.relaxation_factor.powi(level as i32);
        let reach = self.distance_factor(level) * T::lit(0.5) * (a.bbox.diagonal() + b.bbox.diagonal());
        let dist = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        let ratio = b.bbox.height / a.bbox.height;
        let (lo, hi) = self.size_ratio_bounds;
        dist <= reach && ratio >= lo / widen && ratio <= hi * widen
    }

    /// Lowest relaxation level at which `c` connects to any real candidate of `others`.
    fn level(&self, c: &Candidate<T>, others: &[Candidate<T>], forward: bool) -> Option<usize> {
        (0..=self.max_relaxations).find(|&r| {
            others
                .iter()
                .filter(|o| !o.is_virtual())
                .any(|o| if forward { self.passes(c, o, r) } else { self.passes(o, c, r) })
        })
    }
}

/// Valid edges between slot `k` and slot `k + 1`, as an adjacency list.
pub(crate) fn slot_edges<T: Scalar>(
    gate: &ConnectionGateConfig<T>,
    prev: &[Candidate<T>],
    next: &[Candidate<T>],
) -> Vec<Vec<usize>> {
    let fwd: Vec<Option<usize>> = prev.iter().map(|a| gate.level(a, next, true)).collect();
    let bwd: Vec<Option<usize>> = next.iter().map(|b| gate.level(b, prev, false)).collect();
    prev.iter()
        .enumerate()
        .map(|(ia, a)| {
            next.iter()
                .enumerate()
                .filter(|(ib, b)| match (a.is_virtual(), b.is_virtual()) {
                    (true, true) => false,
                    (true, false) | (false, true) => true,
                    (false, false) => {
                        gate.passes(a, b, 0)
                            || fwd[ia].is_some_and(|r| gate.passes(a, b, r))
                            || bwd[*ib].is_some_and(|r| gate.passes(a, b, r))
                    }
                })
                .map(|(ib, _)| ib)
                .collect()
        })
        .collect()
}

/// Enumerates every index tuple whose consecutive pairs all pass the gate.
///
/// Virtual candidates connect to every real candidate on adjacent frames. The
/// result is sorted by anchor candidate, then lexicographically.
pub fn generate_hypotheses<T: Scalar>(
    batch: &AssociationBatch<T>,
    gate: &ConnectionGateConfig<T>,
) -> Vec<HypothesisTrajectory<T>> {
    let order = batch.order();
    let edges: Vec<Vec<Vec<usize>>> =
        (0..order).map(|k| slot_edges(gate, batch.candidates(k), batch.candidates(k + 1))).collect();

    let mut out = Vec::new();
    let mut path = Vec::with_capacity(order + 1);
    for start in 0..batch.candidates(0).len() {
        path.clear();
        path.push(start);
        extend(&edges, &mut path, order, &mut out);
    }
    let anchor = batch.anchor_slot();
    out.sort_by(|a: &HypothesisTrajectory<T>, b| {
        (a.indices[anchor], &a.indices).cmp(&(b.indices[anchor], &b.indices))
    });
    out
}

fn extend<T: Scalar>(
    edges: &[Vec<Vec<usize>>],
    path: &mut Vec<usize>,
    order: usize,
    out: &mut Vec<HypothesisTrajectory<T>>,
) {
    let k = path.len() - 1;
    if k == order {
        out.push(HypothesisTrajectory { indices: path.clone(), affinity: T::zero() });
        return;
    }
    for &next in &edges[k][path[k]] {
        path.push(next);
        extend(edges, path, order, out);
        path.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BBox;
    use proptest::prelude::*;

    fn det(frame: usize, cx: f64, cy: f64, w: f64, h: f64) -> Candidate<f64> {
        Candidate::detection(frame, BBox::from_center([cx, cy], w, h), 1.0, vec![1.0]).unwrap()
    }

    fn batch(c: Vec<Vec<Candidate<f64>>>) -> AssociationBatch<f64> {
        AssociationBatch::new(2, vec![0, 1, 2], c).unwrap()
    }

    #[test]
    fn far_apart_stationary_targets_give_two_hypotheses() {
        let b = batch(
            (0..3).map(|f| vec![det(f, 50.0, 50.0, 10.0, 20.0), det(f, 400.0, 300.0, 10.0, 20.0)]).collect(),
        );
        let h = generate_hypotheses(&b, &ConnectionGateConfig::default());
        let tuples: Vec<_> = h.iter().map(|t| t.indices.clone()).collect();
        assert_eq!(tuples, vec![vec![0, 0, 0], vec![1, 1, 1]]);
    }

    #[test]
    fn single_candidate_per_frame() {
        let b = batch((0..3).map(|f| vec![det(f, 10.0 * f as f64, 0.0, 10.0, 20.0)]).collect());
        assert_eq!(generate_hypotheses(&b, &ConnectionGateConfig::default()).len(), 1);
    }

    #[test]
    fn isolated_candidate_connects_after_relaxation() {
        // diagonal of a 30x40 box is 50; base reach 50, one relaxation reaches 100
        let gate = ConnectionGateConfig::default();
        let frames = vec![
            vec![det(0, 0.0, 0.0, 30.0, 40.0)],
            vec![det(1, 70.0, 0.0, 30.0, 40.0)],
            vec![det(2, 140.0, 0.0, 30.0, 40.0)],
        ];
        let b = batch(frames.clone());
        assert!(!gate.passes(&frames[0][0], &frames[1][0], 0));
        assert!(gate.passes(&frames[0][0], &frames[1][0], 1));
        assert_eq!(generate_hypotheses(&b, &gate).len(), 1);
        let strict = ConnectionGateConfig { max_relaxations: 0, ..gate };
        assert!(generate_hypotheses(&b, &strict).is_empty());
    }

    #[test]
    fn size_ratio_gate() {
        let gate = ConnectionGateConfig { max_relaxations: 0, ..Default::default() };
        let a = det(0, 0.0, 0.0, 10.0, 20.0);
        assert!(gate.passes(&a, &det(1, 0.0, 0.0, 10.0, 39.0), 0));
        assert!(!gate.passes(&a, &det(1, 0.0, 0.0, 10.0, 41.0), 0));
        assert!(!gate.passes(&a, &det(1, 0.0, 0.0, 10.0, 9.0), 0));
    }

    #[test]
    fn virtuals_connect_unconditionally() {
        let b = batch(vec![
            vec![det(0, 0.0, 0.0, 10.0, 20.0), Candidate::virtual_slot(0)],
            vec![det(1, 500.0, 0.0, 10.0, 20.0)],
            vec![Candidate::virtual_slot(2)],
        ]);
        let h = generate_hypotheses(&b, &ConnectionGateConfig::default());
        let tuples: Vec<_> = h.iter().map(|t| t.indices.clone()).collect();
        assert_eq!(tuples, vec![vec![1, 0, 0]]);
    }

    #[test]
    fn invalid_gate_rejected() {
        let g = ConnectionGateConfig { size_ratio_bounds: (1.5, 2.0), ..ConnectionGateConfig::<f64>::default() };
        assert!(g.validate().is_err());
        assert!(ConnectionGateConfig::<f64>::default().validate().is_ok());
    }

    fn tuples(b: &AssociationBatch<f64>, gate: &ConnectionGateConfig<f64>) -> Vec<Vec<usize>> {
        generate_hypotheses(b, gate).into_iter().map(|t| t.indices).collect()
    }

    #[test]
    fn relaxed_reach_can_shrink_when_the_base_grows() {
        // nearest partner at 1.5 diagonals puts `a` on level 1 (reach 2), so the
        // partner at 1.9 connects; at base 1.6 neither end needs relaxing and the edge goes
        let frames = vec![
            vec![det(0, 0.0, 0.0, 30.0, 40.0), det(0, -155.0, 0.0, 30.0, 40.0)],
            vec![det(1, 75.0, 0.0, 30.0, 40.0), det(1, -95.0, 0.0, 30.0, 40.0)],
            vec![det(2, 75.0, 0.0, 30.0, 40.0), det(2, -95.0, 0.0, 30.0, 40.0)],
        ];
        let b = batch(frames);
        let gate = ConnectionGateConfig { max_relaxations: 1, ..Default::default() };
        let wider = ConnectionGateConfig { base_distance_factor: 1.6, ..gate };
        assert!(tuples(&b, &gate).contains(&vec![0, 1, 1]));
        assert!(!tuples(&b, &wider).contains(&vec![0, 1, 1]));
    }

    fn frame_strategy(frame: usize) -> impl Strategy<Value = Vec<Candidate<f64>>> {
        proptest::collection::vec((0.0..300.0f64, 0.0..200.0f64, 10.0..60.0f64), 1..4).prop_map(move |v| {
            v.into_iter().map(|(x, y, h)| det(frame, x, y, 0.4 * h, h)).collect()
        })
    }

    proptest! {
        #[test]
        fn enlarging_the_base_reach_never_removes_a_hypothesis(
            f0 in frame_strategy(0),
            f1 in frame_strategy(1),
            f2 in frame_strategy(2),
            base in 0.2..2.0f64,
            grow in 1.0..3.0f64,
        ) {
            let b = batch(vec![f0, f1, f2]);
            let gate = ConnectionGateConfig { base_distance_factor: base, max_relaxations: 0, ..Default::default() };
            let wider = ConnectionGateConfig { base_distance_factor: base * grow, ..gate };
            let small = tuples(&b, &gate);
            let large = tuples(&b, &wider);
            for t in &small {
                prop_assert!(large.contains(t), "{t:?} lost");
            }
        }
    }
}
