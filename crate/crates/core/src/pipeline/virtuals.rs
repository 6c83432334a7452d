use crate::affinity::AffinityParams;
use crate::scalar::Scalar;
use crate::types::{AssociationBatch, VirtualResolution};

/// Grid half-width in steps; the step is one eighth of the anchor's box diagonal.
const GRID_STEPS: i32 = 8;

/// Fixes, for every anchor, where each virtual candidate sits.
///
/// A virtual on the slot `d` frames away from the anchor starts at the
/// anchor's constant-velocity extrapolation `p + d v` and moves to the grid
/// point maximising the pairwise position score against the anchor plus the
/// motion term penalising departure from the extrapolation. Virtual anchors
/// resolve nothing.
pub fn resolve_virtuals<T: Scalar>(batch: &mut AssociationBatch<T>, params: &AffinityParams<T>) {
    let anchor_slot = batch.anchor_slot();
    let anchors = batch.candidates(anchor_slot).to_vec();
    let centers = (0..=batch.order())
        .map(|slot| {
            if batch.virtual_index(slot).is_none() {
                return vec![None; anchors.len()];
            }
            let offset = T::from_usize_lossy(slot.abs_diff(anchor_slot));
            let sign = if slot < anchor_slot { -T::one() } else { T::one() };
            anchors
                .iter()
                .map(|a| {
                    let p = a.center().ok()?;
                    let target = [p[0] + sign * offset * a.velocity[0], p[1] + sign * offset * a.velocity[1]];
                    Some(refine(p, target, a.bbox.diagonal(), params))
                })
                .collect()
        })
        .collect();
    batch.set_resolution(VirtualResolution { centers });
}

fn refine<T: Scalar>(anchor: [T; 2], target: [T; 2], diagonal: T, params: &AffinityParams<T>) -> [T; 2] {
    let s = params.position_scale;
    let score = |q: [T; 2]| {
        let d2 = (q[0] - anchor[0]).powi(2) + (q[1] - anchor[1]).powi(2);
        let off = (q[0] - target[0]).hypot(q[1] - target[1]);
        -d2 / (T::lit(2.0) * s * s) - params.motion_weight * off / s
    };
    let step = diagonal / T::lit(f64::from(GRID_STEPS));
    let mut best = (target, score(target));
    for dy in -GRID_STEPS..=GRID_STEPS {
        for dx in -GRID_STEPS..=GRID_STEPS {
            let q = [target[0] + T::lit(f64::from(dx)) * step, target[1] + T::lit(f64::from(dy)) * step];
            let v = score(q);
            if v > best.1 {
                best = (q, v);
            }
        }
    }
    best.0
}
