//! Provider parameter gradients through both solver layers on scenario windows.

use mdatrack::affinity::{backprop_affinity, compute_affinity, generate_hypotheses, AffinityParams, ConnectionGateConfig};
use mdatrack::evalio::{generate_scenario, ScenarioSpec};
use mdatrack::mda::{backward_soft, bce_loss, solve_soft, Matrix, PartialNormMask, SolverConfig, ZeroLinePolicy};
use mdatrack::oracle::{finite_diff_grad, first_mismatch, FdConfig};
use mdatrack::train::labeled_frames;
use mdatrack::types::AssociationBatch;

fn window(frames: &[Vec<mdatrack::train::LabeledCandidate<f64>>], t: usize) -> (AssociationBatch<f64>, Vec<Matrix<f64>>) {
    let slots = [&frames[t - 1], &frames[t], &frames[t + 1]];
    let truth = slots
        .windows(2)
        .map(|p| {
            let mut m = Matrix::zeros(p[0].len(), p[1].len());
            for (r, a) in p[0].iter().enumerate() {
                for (c, b) in p[1].iter().enumerate() {
                    m[(r, c)] = f64::from(u8::from(a.id == b.id));
                }
            }
            m
        })
        .collect();
    let candidates = slots.iter().map(|s| s.iter().map(|l| l.candidate.clone()).collect()).collect();
    (AssociationBatch::new(2, vec![t - 1, t, t + 1], candidates).unwrap(), truth)
}

fn loss(batch: &AssociationBatch<f64>, truth: &[Matrix<f64>], params: &AffinityParams<f64>) -> f64 {
    let h = generate_hypotheses(batch, &ConnectionGateConfig::default());
    let bundle = compute_affinity(batch, &h, params, 1.0).unwrap();
    let sizes = batch.sizes();
    let soft = solve_soft(&bundle.a, &sizes, &PartialNormMask::empty(2), SolverConfig::default(), ZeroLinePolicy::Error).unwrap();
    bce_loss(soft.matrices(), truth).unwrap().0
}

#[test]
fn analytic_parameter_gradient_matches_finite_differences() {
    let spec = ScenarioSpec { noise_sigma: 1.0, target_count: 12, seed: 3, ..Default::default() };
    let scenario = generate_scenario(&spec).unwrap();
    let frames = labeled_frames::<f64>(&scenario.gt, scenario.frame_count).unwrap();
    let params = AffinityParams { motion_weight: 0.3, size_weight: 0.2, appearance_weight: 0.5, ..AffinityParams::untrained() };
    let mut checked = 0;
    for t in (1..scenario.frame_count - 1).step_by(7) {
        let (batch, truth) = window(&frames, t);
        let h = generate_hypotheses(&batch, &ConnectionGateConfig::default());
        if h.len() <= batch.sizes()[1] {
            continue; // no ambiguity: the loss is flat
        }
        let bundle = compute_affinity(&batch, &h, &params, 1.0).unwrap();
        let sizes = batch.sizes();
        let soft = solve_soft(&bundle.a, &sizes, &PartialNormMask::empty(2), SolverConfig::default(), ZeroLinePolicy::Error).unwrap();
        let (_, dl_dx) = bce_loss(soft.matrices(), &truth).unwrap();
        let dl_da = backward_soft(&bundle.a, &soft, &dl_dx).unwrap();
        let analytic = backprop_affinity(&bundle, &dl_da).unwrap().to_array();
        let numeric = finite_diff_grad(
            |p| loss(&batch, &truth, &AffinityParams::from_array([p[0], p[1], p[2], p[3], p[4]])),
            &params.to_array(),
            FdConfig::default(),
        )
        .unwrap();
        assert_eq!(first_mismatch(&analytic, &numeric, 1e-5, 1e-9), None, "window at {t}");
        checked += 1;
    }
    assert!(checked >= 2, "only {checked} ambiguous windows");
}
