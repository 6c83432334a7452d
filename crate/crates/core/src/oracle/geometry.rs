//! Exhaustive evaluators for the hypothesis gate and the multilinear objective.

use crate::affinity::ConnectionGateConfig;
use crate::scalar::Scalar;
use crate::tensor::{for_each_index, DenseTensor};
use crate::types::{AssociationBatch, Candidate};

fn geometry_ok<T: Scalar>(gate: &ConnectionGateConfig<T>, a: &Candidate<T>, b: &Candidate<T>, level: usize) -> bool {
    let widen = gate.relaxation_factor.powi(level as i32);
    let (ca, cb) = (a.bbox.center(), b.bbox.center());
    let dist = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
    let diag = |c: &Candidate<T>| (c.bbox.width.powi(2) + c.bbox.height.powi(2)).sqrt();
    let reach = gate.base_distance_factor * widen * (diag(a) + diag(b)) / T::lit(2.0);
    let ratio = b.bbox.height / a.bbox.height;
    dist <= reach && ratio * widen >= gate.size_ratio_bounds.0 && ratio <= gate.size_ratio_bounds.1 * widen
}

fn needed_level<T: Scalar>(
    gate: &ConnectionGateConfig<T>,
    me: &Candidate<T>,
    others: &[Candidate<T>],
    me_first: bool,
) -> Option<usize> {
    let mut best = None;
    for o in others.iter().filter(|o| !o.is_virtual()) {
        for level in 0..=gate.max_relaxations {
            let ok = if me_first { geometry_ok(gate, me, o, level) } else { geometry_ok(gate, o, me, level) };
            if ok {
                best = Some(best.map_or(level, |b: usize| b.min(level)));
                break;
            }
        }
    }
    best
}

fn edge_ok<T: Scalar>(gate: &ConnectionGateConfig<T>, prev: &[Candidate<T>], next: &[Candidate<T>], a: usize, b: usize) -> bool {
    let (ca, cb) = (&prev[a], &next[b]);
    if ca.is_virtual() || cb.is_virtual() {
        return !(ca.is_virtual() && cb.is_virtual());
    }
    let mut levels = vec![0];
    levels.extend(needed_level(gate, ca, next, true));
    levels.extend(needed_level(gate, cb, prev, false));
    levels.into_iter().any(|l| geometry_ok(gate, ca, cb, l))
}

/// Every index tuple of the batch whose consecutive pairs pass the gate,
/// found by testing the full product space.
pub fn brute_force_hypotheses<T: Scalar>(batch: &AssociationBatch<T>, gate: &ConnectionGateConfig<T>) -> Vec<Vec<usize>> {
    let sizes = batch.sizes();
    let mut out = Vec::new();
    for_each_index(&sizes, |idx| {
        let ok = (0..batch.order())
            .all(|k| edge_ok(gate, batch.candidates(k), batch.candidates(k + 1), idx[k], idx[k + 1]));
        if ok {
            out.push(idx.to_vec());
        }
    });
    out
}

/// `sum_i c_i * prod_k X^(k)[i_{k-1}, i_k]` evaluated directly on the
/// `(K+1)`-order tensor, with `x[k]` the row-major `I_k x I_{k+1}` matrix.
pub fn energy_on_c<T: Scalar>(c: &DenseTensor<T>, valid_mask: &[bool], x: &[Vec<T>]) -> T {
    let sizes = c.shape();
    let mut total = T::zero();
    for_each_index(sizes, |idx| {
        let off = c.offset(idx);
        if !valid_mask[off] {
            return;
        }
        let mut term = c.data()[off];
        for k in 0..x.len() {
            term *= x[k][idx[k] * sizes[k + 1] + idx[k + 1]];
        }
        total += term;
    });
    total
}
