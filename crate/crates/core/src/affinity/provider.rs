//! Differentiable two-level affinity: pairwise appearance/position scores
//! against the anchor plus a long-term constant-velocity consistency score.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{for_each_index, DenseTensor};
use crate::types::{AssociationBatch, HypothesisTrajectory};

use super::params::AffinityParams;

/// Per-hypothesis record mapping `dL/dc` back to parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeEntry<T> {
    pub c_offset: usize,
    pub a_offset: usize,
    /// `dc/dparams` in [`AffinityParams::NAMES`] order.
    pub jacobian: [T; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityTensorBundle<T> {
    /// Affinity per candidate tuple, shape `(I_0, ..., I_K)`.
    pub c: DenseTensor<T>,
    /// Pairwise-index reshape of `c`, shape `(I_0 I_1, ..., I_{K-1} I_K)`.
    pub a: DenseTensor<T>,
    /// Membership of each `c` entry in the valid hypothesis set.
    pub valid_mask: Vec<bool>,
    pub tape: Vec<TapeEntry<T>>,
}

impl<T: Scalar> AffinityTensorBundle<T> {
    /// `dL/dc` for every `c` entry, given `dL/da`.
    pub fn c_gradient(&self, dl_da: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        check_shape(dl_da, self.a.shape())?;
        let mut g = DenseTensor::zeros(self.c.shape());
        let mut idx = vec![0; self.c.order()];
        for off in 0..self.c.len() {
            self.c.unravel_into(off, &mut idx);
            g.data_mut()[off] = dl_da.data()[pair_offset(self.a.shape(), self.c.shape(), &idx)];
        }
        Ok(g)
    }
}

fn check_shape<T: Scalar>(t: &DenseTensor<T>, shape: &[usize]) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::Contract(format!("gradient shape {:?} does not match {:?}", t.shape(), shape)));
    }
    Ok(())
}

/// Shape of the pairwise-index tensor for candidate counts `sizes`.
pub fn pair_shape(sizes: &[usize]) -> Vec<usize> {
    sizes.windows(2).map(|w| w[0] * w[1]).collect()
}

/// Offset in the pairwise tensor of the entry holding candidate tuple `index`.
fn pair_offset(a_shape: &[usize], sizes: &[usize], index: &[usize]) -> usize {
    let mut off = 0;
    for k in 1..sizes.len() {
        let j = crate::index::flat_offset(index[k - 1], index[k], sizes[k]);
        off = off * a_shape[k - 1] + j;
    }
    off
}

/// Reshapes the `(K+1)`-order affinity tensor into the `K`-order pairwise one.
///
/// An entry `a_{j_1..j_K}` equals `c_{i_0..i_K}` when every adjacent pair of
/// pair indices shares its middle candidate, and is zero otherwise. Entries of
/// `c` outside `valid_mask` are treated as zero.
pub fn reshape_c_to_a<T: Scalar>(c: &DenseTensor<T>, valid_mask: &[bool]) -> Result<DenseTensor<T>> {
    if valid_mask.len() != c.len() {
        return Err(Error::Contract(format!("mask of {} entries for tensor of {}", valid_mask.len(), c.len())));
    }
    if c.order() < 3 {
        return Err(Error::Contract(format!("affinity tensor must have order at least 3, got {}", c.order())));
    }
    let a_shape = pair_shape(c.shape());
    let mut a = DenseTensor::zeros(&a_shape);
    for_each_index(c.shape(), |idx| {
        let off = c.offset(idx);
        if valid_mask[off] {
            a.data_mut()[pair_offset(&a_shape, c.shape(), idx)] = c.data()[off];
        }
    });
    Ok(a)
}

fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        T::one()
    } else {
        dot / (na * nb)
    }
}

struct Member<'a, T> {
    center: [T; 2],
    height: T,
    appearance: &'a [T],
}

/// Affinity and its parameter Jacobian for one hypothesis.
fn score<T: Scalar>(members: &[Member<'_, T>], anchor: usize, params: &AffinityParams<T>) -> (T, [T; 5]) {
    let s = params.position_scale;
    let two = T::lit(2.0);
    let mut pairwise = T::zero();
    let mut d_scale = T::zero();
    let mut d_appearance = T::zero();
    let a = &members[anchor];
    for (k, m) in members.iter().enumerate() {
        if k == anchor {
            continue;
        }
        let cos = cosine(m.appearance, a.appearance);
        let d2 = (m.center[0] - a.center[0]).powi(2) + (m.center[1] - a.center[1]).powi(2);
        let pw = (params.appearance_weight * (cos - T::one()) - d2 / (two * s * s)).exp();
        pairwise += pw;
        d_scale += pw * d2 / (s * s * s);
        d_appearance += pw * (cos - T::one());
    }

    let mut accel = T::zero();
    let mut size_accel = T::zero();
    for w in members.windows(3) {
        let ax = w[2].center[0] - two * w[1].center[0] + w[0].center[0];
        let ay = w[2].center[1] - two * w[1].center[1] + w[0].center[1];
        accel += ax.hypot(ay);
        size_accel += (w[2].height.ln() - two * w[1].height.ln() + w[0].height.ln()).powi(2);
    }
    let phi = (-params.motion_weight * accel / s - params.size_weight * size_accel).exp();
    let lw = params.long_term_weight;

    let value = lw * phi + pairwise;
    let jac = [
        -lw * phi * accel / s,
        lw * phi * params.motion_weight * accel / (s * s) + d_scale,
        -lw * phi * size_accel,
        d_appearance,
        phi,
    ];
    (value, jac)
}

/// Builds `C`, its reshape `A`, the validity mask and the gradient tape.
///
/// Hypotheses containing `m` virtual candidates are scaled by `alpha^m`; a
/// virtual member takes the anchor's descriptor and box size and its per-anchor
/// resolved center.
pub fn compute_affinity<T: Scalar>(
    batch: &AssociationBatch<T>,
    hypotheses: &[HypothesisTrajectory<T>],
    params: &AffinityParams<T>,
    alpha: T,
) -> Result<AffinityTensorBundle<T>> {
    if hypotheses.is_empty() {
        return Err(Error::Contract("compute_affinity needs at least one hypothesis".into()));
    }
    params.validate()?;
    let order = batch.order();
    let anchor = batch.anchor_slot();
    let sizes = batch.sizes();
    let mut dim: Option<usize> = None;
    for (slot, list) in batch.all_candidates().iter().enumerate() {
        for (i, c) in list.iter().filter(|c| !c.is_virtual()).enumerate() {
            if c.appearance.iter().any(|v| !v.is_finite()) || !c.bbox.is_finite() {
                return Err(Error::InputValidation(format!("non-finite input on slot {slot}, candidate {i}")));
            }
            match dim {
                None => dim = Some(c.appearance.len()),
                Some(d) if d != c.appearance.len() => {
                    return Err(Error::InputValidation(format!(
                        "descriptor length {} on slot {slot} differs from {d}",
                        c.appearance.len()
                    )))
                }
                _ => {}
            }
        }
    }

    let mut c = DenseTensor::zeros(&sizes);
    let mut valid_mask = vec![false; c.len()];
    let a_shape = pair_shape(&sizes);
    let mut tape = Vec::with_capacity(hypotheses.len());
    for h in hypotheses {
        if h.indices.len() != order + 1 || h.indices.iter().zip(&sizes).any(|(&i, &n)| i >= n) {
            return Err(Error::Contract(format!("hypothesis {:?} does not fit sizes {sizes:?}", h.indices)));
        }
        let anchor_idx = h.indices[anchor];
        let anchor_cand = &batch.candidates(anchor)[anchor_idx];
        if anchor_cand.is_virtual() {
            return Err(Error::Contract("virtual candidates cannot act as anchors".into()));
        }
        let mut members = Vec::with_capacity(order + 1);
        let mut virtuals = 0;
        for (slot, &i) in h.indices.iter().enumerate() {
            let cand = &batch.candidates(slot)[i];
            let center = batch.center_for(slot, i, anchor_idx)?;
            if cand.is_virtual() {
                virtuals += 1;
                members.push(Member { center, height: anchor_cand.bbox.height, appearance: &anchor_cand.appearance });
            } else {
                members.push(Member { center, height: cand.bbox.height, appearance: &cand.appearance });
            }
        }
        let (value, mut jac) = score(&members, anchor, params);
        let scale = alpha.powi(virtuals);
        for g in jac.iter_mut() {
            *g *= scale;
        }
        let value = value * scale;
        if !value.is_finite() || jac.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("affinity of hypothesis {:?}", h.indices)));
        }
        let off = c.offset(&h.indices);
        c.data_mut()[off] = value;
        valid_mask[off] = true;
        tape.push(TapeEntry { c_offset: off, a_offset: pair_offset(&a_shape, &sizes, &h.indices), jacobian: jac });
    }
    let a = reshape_c_to_a(&c, &valid_mask)?;
    Ok(AffinityTensorBundle { c, a, valid_mask, tape })
}

/// Maps `dL/dA` through the reshape and the provider tape to parameter gradients.
pub fn backprop_affinity<T: Scalar>(
    bundle: &AffinityTensorBundle<T>,
    dl_da: &DenseTensor<T>,
) -> Result<AffinityParams<T>> {
    check_shape(dl_da, bundle.a.shape())?;
    let mut grad = [T::zero(); 5];
    for entry in &bundle.tape {
        let upstream = dl_da.data()[entry.a_offset];
        for (g, j) in grad.iter_mut().zip(entry.jacobian) {
            *g += upstream * j;
        }
    }
    Ok(AffinityParams::from_array(grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{generate_hypotheses, ConnectionGateConfig};
    use crate::types::{BBox, Candidate};

    fn det(frame: usize, cx: f64, cy: f64, h: f64, app: Vec<f64>) -> Candidate<f64> {
        Candidate::detection(frame, BBox::from_center([cx, cy], h / 2.0, h), 1.0, app).unwrap()
    }

    fn three(cands: [Candidate<f64>; 3]) -> AssociationBatch<f64> {
        let [a, b, c] = cands;
        AssociationBatch::new(2, vec![0, 1, 2], vec![vec![a], vec![b], vec![c]]).unwrap()
    }

    fn single_value(b: &AssociationBatch<f64>, p: &AffinityParams<f64>) -> f64 {
        let h = generate_hypotheses(b, &ConnectionGateConfig::default());
        compute_affinity(b, &h, p, 1.0).unwrap().c.data()[0]
    }

    #[test]
    fn identical_static_candidates_reach_the_maximum() {
        let p = AffinityParams::default();
        let app = vec![0.2, 0.5, 0.3];
        let best = single_value(&three([0, 1, 2].map(|f| det(f, 10.0, 10.0, 40.0, app.clone()))), &p);
        assert!((best - (p.long_term_weight + 2.0)).abs() < 1e-12);
        let other = vec![0.5, 0.2, 0.3];
        let variants = [
            [det(0, 12.0, 10.0, 40.0, app.clone()), det(1, 10.0, 10.0, 40.0, app.clone()), det(2, 10.0, 10.0, 40.0, app.clone())],
            [det(0, 10.0, 10.0, 40.0, other.clone()), det(1, 10.0, 10.0, 40.0, app.clone()), det(2, 10.0, 10.0, 40.0, app.clone())],
            [det(0, 10.0, 10.0, 44.0, app.clone()), det(1, 10.0, 10.0, 40.0, app.clone()), det(2, 10.0, 10.0, 40.0, app.clone())],
        ];
        for v in variants {
            assert!(single_value(&three(v), &p) < best);
        }
    }

    #[test]
    fn entries_outside_the_hypothesis_set_are_zero() {
        let far = |f, x| det(f, x, 0.0, 40.0, vec![1.0]);
        let b = AssociationBatch::new(
            2,
            vec![0, 1, 2],
            (0..3).map(|f| vec![far(f, 0.0), far(f, 1000.0)]).collect(),
        )
        .unwrap();
        let h = generate_hypotheses(&b, &ConnectionGateConfig::default());
        let bundle = compute_affinity(&b, &h, &AffinityParams::default(), 1.0).unwrap();
        for (off, &valid) in bundle.valid_mask.iter().enumerate() {
            if !valid {
                assert_eq!(bundle.c.data()[off], 0.0);
            } else {
                assert!(bundle.c.data()[off] > 0.0);
            }
        }
        assert_eq!(bundle.valid_mask.iter().filter(|v| **v).count(), 2);
    }

    #[test]
    fn single_hypothesis_gradient_matches_closed_form() {
        let b = three([
            det(0, 0.0, 0.0, 40.0, vec![1.0, 0.0]),
            det(1, 3.0, 1.0, 44.0, vec![1.0, 1.0]),
            det(2, 8.0, 1.0, 44.0, vec![0.0, 1.0]),
        ]);
        let p = AffinityParams { motion_weight: 0.7, position_scale: 5.0, size_weight: 2.0, appearance_weight: 1.5, long_term_weight: 0.8 };
        let h = generate_hypotheses(&b, &ConnectionGateConfig::default());
        let bundle = compute_affinity(&b, &h, &p, 1.0).unwrap();
        let mut up = DenseTensor::zeros(bundle.a.shape());
        up.data_mut()[bundle.tape[0].a_offset] = 1.0;
        let g = backprop_affinity(&bundle, &up).unwrap();

        // hand derivation: cos = 1/sqrt(2) for both pairs, d01^2 = 10, d12^2 = 25
        // acceleration |(5,0) - (3,1)| = sqrt(5), log-height acceleration -ln(1.1)
        let cos = 0.5f64.sqrt();
        let s = 5.0;
        let pw = |d2: f64| (1.5 * (cos - 1.0) - d2 / (2.0 * s * s)).exp();
        let acc = 5.0f64.sqrt();
        let dsz = (1.1f64).ln().powi(2);
        let phi = (-0.7 * acc / s - 2.0 * dsz).exp();
        let c = 0.8 * phi + pw(10.0) + pw(25.0);
        assert!((bundle.c.data()[0] - c).abs() < 1e-12);
        let expect = [
            -0.8 * phi * acc / s,
            0.8 * phi * 0.7 * acc / (s * s) + pw(10.0) * 10.0 / s.powi(3) + pw(25.0) * 25.0 / s.powi(3),
            -0.8 * phi * dsz,
            (pw(10.0) + pw(25.0)) * (cos - 1.0),
            phi,
        ];
        for (a, e) in g.to_array().iter().zip(expect) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient_and_shape_is_checked() {
        let b = three([0, 1, 2].map(|f| det(f, 1.0 * f as f64, 0.0, 40.0, vec![1.0])));
        let h = generate_hypotheses(&b, &ConnectionGateConfig::default());
        let bundle = compute_affinity(&b, &h, &AffinityParams::default(), 1.0).unwrap();
        let g = backprop_affinity(&bundle, &DenseTensor::zeros(bundle.a.shape())).unwrap();
        assert_eq!(g, AffinityParams::zeros());
        assert!(matches!(backprop_affinity(&bundle, &DenseTensor::zeros(&[2, 2])), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_descriptor_rejected() {
        let b = three([det(0, 0.0, 0.0, 40.0, vec![f64::NAN]), det(1, 0.0, 0.0, 40.0, vec![1.0]), det(2, 0.0, 0.0, 40.0, vec![1.0])]);
        let h = vec![HypothesisTrajectory { indices: vec![0, 0, 0], affinity: 0.0 }];
        assert!(matches!(compute_affinity(&b, &h, &AffinityParams::default(), 1.0), Err(Error::InputValidation(_))));
    }

    #[test]
    fn reshape_examples() {
        let c = DenseTensor::from_vec(&[1, 1, 1], vec![0.4]).unwrap();
        let a = reshape_c_to_a(&c, &[true]).unwrap();
        assert_eq!(a.shape(), &[1, 1]);
        assert_eq!(a.data(), &[0.4]);

        let mut c = DenseTensor::zeros(&[2, 2, 2]);
        c.set(&[1, 0, 1], 0.7);
        let a = reshape_c_to_a(&c, &[true; 8]).unwrap();
        // 1-based c_212 lands on a_{3,2}
        let j1 = crate::index::flatten_pair(2, 1, 2).unwrap();
        let j2 = crate::index::flatten_pair(1, 2, 2).unwrap();
        assert_eq!((j1, j2), (3, 2));
        assert_eq!(a.get(&[j1 - 1, j2 - 1]), 0.7);
        assert_eq!(a.data().iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn reshape_support_is_the_middle_agreement_pattern() {
        let c = DenseTensor::from_vec(&[2, 2, 2], vec![1.0; 8]).unwrap();
        let a = reshape_c_to_a(&c, &[true; 8]).unwrap();
        assert_eq!(a.shape(), &[4, 4]);
        let mut nonzero = 0;
        for j1 in 1..=4 {
            for j2 in 1..=4 {
                let (_, mid1) = crate::index::unflatten_pair(j1, 2, 2).unwrap();
                let (mid2, _) = crate::index::unflatten_pair(j2, 2, 2).unwrap();
                let v = a.get(&[j1 - 1, j2 - 1]);
                assert_eq!(v != 0.0, mid1 == mid2);
                nonzero += (v != 0.0) as usize;
            }
        }
        assert_eq!(nonzero, 8);
    }
}
