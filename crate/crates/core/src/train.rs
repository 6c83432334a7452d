//! End-to-end training of the affinity parameters on ground-truth windows.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::affinity::{backprop_affinity, compute_affinity, generate_hypotheses, AffinityParams, ConnectionGateConfig};
use crate::error::{Error, Result};
use crate::evalio::{group_by_frame, MotRecord};
use crate::index::batch_windows;
use crate::kv::KeyValues;
use crate::mda::{backward_soft, bce_loss, solve_soft, Matrix, PartialNormMask, SolverConfig, ZeroLinePolicy};
use crate::scalar::Scalar;
use crate::types::{AssociationBatch, BBox, Candidate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub epochs: usize,
    /// Seeds the per-epoch window order.
    pub seed: u64,
    pub gate: ConnectionGateConfig<T>,
    pub solver: SolverConfig,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::lit(0.05),
            epochs: 50,
            seed: 0,
            gate: ConnectionGateConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub const KEYS: [&'static str; 2] = ["learning_rate", "epochs"];

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= T::zero() && self.learning_rate.is_finite()) {
            return Err(Error::InputValidation(format!("learning rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if self.solver.power_iterations == 0 || self.solver.norm_pairs == 0 {
            return Err(Error::InputValidation("power_iterations and norm_pairs must be positive".into()));
        }
        self.gate.validate()
    }

    /// Overrides `learning_rate` and `epochs`; gate and solver keys are shared
    /// with the tracking configuration and merged there.
    pub fn merged_with(&self, kv: &KeyValues) -> Result<Self> {
        let mut c = *self;
        c.learning_rate = T::lit(kv.get_or("learning_rate", c.learning_rate.to_f64_lossy())?);
        c.epochs = kv.get_or("epochs", c.epochs)?;
        c.validate()?;
        Ok(c)
    }
}

/// A ground-truth box as a training candidate, with its target id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCandidate<T> {
    pub id: i64,
    pub candidate: Candidate<T>,
}

/// Training frames (0-based) from ground-truth records.
pub fn labeled_frames<T: Scalar>(records: &[MotRecord], frame_count: usize) -> Result<Vec<Vec<LabeledCandidate<T>>>> {
    group_by_frame(records, frame_count)
        .into_iter()
        .enumerate()
        .map(|(f, list)| {
            list.iter()
                .map(|r| {
                    let b = r.bbox();
                    let bbox = BBox::new(T::lit(b.left), T::lit(b.top), T::lit(b.width), T::lit(b.height));
                    let app = r.appearance.iter().map(|&v| T::lit(v)).collect();
                    Ok(LabeledCandidate { id: r.id, candidate: Candidate::detection(f, bbox, T::one(), app)? })
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub params: AffinityParams<T>,
    /// Mean loss over all usable windows before training (entry 0) and after each epoch.
    pub curve: Vec<T>,
    /// Windows skipped as degenerate during each evaluation pass.
    pub skipped_windows: usize,
}

impl<T: Scalar> TrainReport<T> {
    /// One `epoch loss` line per curve entry.
    pub fn render_curve(&self) -> String {
        let mut out = String::new();
        for (e, v) in self.curve.iter().enumerate() {
            let _ = writeln!(out, "{e} {:.17e}", v.to_f64_lossy());
        }
        out
    }

    pub fn save_curve(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render_curve())?;
        Ok(())
    }
}

struct Window<T> {
    batch: AssociationBatch<T>,
    truth: Vec<Matrix<T>>,
}

fn build_windows<T: Scalar>(frames: &[Vec<LabeledCandidate<T>>]) -> Result<Vec<Window<T>>> {
    let schedule = batch_windows(frames.len(), 2, 2)?;
    schedule
        .windows
        .iter()
        .map(|w| {
            let slots: Vec<&Vec<LabeledCandidate<T>>> = w.iter().map(|&f| &frames[f]).collect();
            let truth = slots
                .windows(2)
                .map(|p| {
                    let mut m = Matrix::zeros(p[0].len(), p[1].len());
                    for (r, a) in p[0].iter().enumerate() {
                        for (c, b) in p[1].iter().enumerate() {
                            if a.id == b.id {
                                m[(r, c)] = T::one();
                            }
                        }
                    }
                    m
                })
                .collect();
            let candidates = slots.iter().map(|s| s.iter().map(|l| l.candidate.clone()).collect()).collect();
            Ok(Window { batch: AssociationBatch::new(2, w.clone(), candidates)?, truth })
        })
        .collect()
}

/// Loss per assignment entry and, if requested, its parameter gradient;
/// `None` for a window without any hypothesis.
fn window_loss<T: Scalar>(
    w: &Window<T>,
    params: &AffinityParams<T>,
    config: &TrainConfig<T>,
    with_grad: bool,
) -> Result<Option<(T, Option<AffinityParams<T>>)>> {
    let hypotheses = generate_hypotheses(&w.batch, &config.gate);
    if hypotheses.is_empty() {
        return Ok(None);
    }
    let bundle = compute_affinity(&w.batch, &hypotheses, params, T::one())?;
    let sizes = w.batch.sizes();
    let mask = PartialNormMask::empty(sizes.len() - 1);
    let soft = solve_soft(&bundle.a, &sizes, &mask, config.solver, ZeroLinePolicy::Error)?;
    let (loss, mut grads) = bce_loss(soft.matrices(), &w.truth)?;
    let entries = T::from_usize_lossy(w.truth.iter().map(|m| m.rows() * m.cols()).sum());
    if !with_grad {
        return Ok(Some((loss / entries, None)));
    }
    for g in &mut grads {
        for v in g.as_mut_slice() {
            *v /= entries;
        }
    }
    let dl_da = backward_soft(&bundle.a, &soft, &grads)?;
    Ok(Some((loss / entries, Some(backprop_affinity(&bundle, &dl_da)?))))
}

/// Whether an error marks a window as unusable rather than a failed run.
fn degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateContraction { .. } | Error::DegenerateNormalization { .. })
}

fn evaluate<T: Scalar>(windows: &[Window<T>], params: &AffinityParams<T>, config: &TrainConfig<T>) -> Result<(T, usize)> {
    let mut total = T::zero();
    let mut used = 0;
    let mut skipped = 0;
    for w in windows {
        match window_loss(w, params, config, false) {
            Ok(Some((l, _))) => {
                total += l;
                used += 1;
            }
            Ok(None) => skipped += 1,
            Err(e) if degenerate(&e) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::InputValidation("no usable training window".into()));
    }
    Ok((total / T::from_usize_lossy(used), skipped))
}

/// Plain per-window gradient descent on the provider parameters.
///
/// Every window of three ground-truth frames is solved without virtual
/// candidates and scored by BCE against the identity-derived assignment.
/// Windows whose hypotheses or normalization degenerate are skipped and counted.
pub fn train<T: Scalar>(
    frames: &[Vec<LabeledCandidate<T>>],
    init: &AffinityParams<T>,
    config: &TrainConfig<T>,
) -> Result<TrainReport<T>> {
    config.validate()?;
    init.validate()?;
    let windows = build_windows(frames)?;
    if windows.is_empty() {
        return Err(Error::InputValidation(format!("{} frames are too few to train on", frames.len())));
    }
    let mut params = *init;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (initial, skipped) = evaluate(&windows, &params, config)?;
    if skipped > 0 {
        warn!("skipped {skipped} degenerate windows of {}", windows.len());
    }
    let mut curve = vec![initial];
    let mut order: Vec<usize> = (0..windows.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &w in &order {
            match window_loss(&windows[w], &params, config, true) {
                Ok(Some((_, Some(g)))) => params = params.descend(&g, config.learning_rate),
                Ok(_) => {}
                Err(e) if degenerate(&e) => {}
                Err(e) => return Err(e),
            }
        }
        let (loss, _) = evaluate(&windows, &params, config)?;
        info!("epoch {epoch}: mean loss {loss}");
        curve.push(loss);
    }
    Ok(TrainReport { params, curve, skipped_windows: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalio::{generate_scenario, ScenarioSpec};

    fn frames(seed: u64, count: usize) -> Vec<Vec<LabeledCandidate<f64>>> {
        let spec = ScenarioSpec { frame_count: count, target_count: 5, seed, ..Default::default() };
        let s = generate_scenario(&spec).unwrap();
        labeled_frames(&s.gt, s.frame_count).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_the_curve_flat() {
        let config = TrainConfig { learning_rate: 0.0, epochs: 3, ..Default::default() };
        let r = train(&frames(1, 8), &AffinityParams::default(), &config).unwrap();
        assert_eq!(r.curve.len(), 4);
        assert!(r.curve.iter().all(|&v| v == r.curve[0]));
        assert_eq!(r.params, AffinityParams::default());
    }

    #[test]
    fn same_seed_same_curve() {
        let config = TrainConfig { epochs: 3, seed: 5, ..Default::default() };
        let f = frames(2, 8);
        let a = train(&f, &AffinityParams::default(), &config).unwrap();
        let b = train(&f, &AffinityParams::default(), &config).unwrap();
        assert_eq!(a.render_curve(), b.render_curve());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn empty_frames_are_skipped_and_counted() {
        let mut f = frames(3, 8);
        f[4].clear();
        let config = TrainConfig { epochs: 1, ..Default::default() };
        let r = train(&f, &AffinityParams::default(), &config).unwrap();
        assert_eq!(r.skipped_windows, 3);
        assert!(r.curve.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn too_few_frames_is_an_error() {
        assert!(train(&frames(4, 2), &AffinityParams::default(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn truth_matrices_follow_ids() {
        let w = build_windows(&frames(5, 3)).unwrap();
        assert_eq!(w.len(), 1);
        for m in &w[0].truth {
            for r in 0..m.rows() {
                assert_eq!(m.row_sum(r), 1.0);
            }
        }
    }
}
