//! Whole-sequence tracking and MOT file handling.

use mdatrack::affinity::AffinityParams;
use mdatrack::evalio::{
    clear_mot, generate_scenario, load_mot, records_to_boxes, records_to_candidates, save_mot, trajectories_to_records,
    ScenarioSpec,
};
use mdatrack::pipeline::{run_sequence, ConfidenceQuality, GroundTruthQuality, PipelineConfig};

#[test]
fn noiseless_scenarios_are_tracked_perfectly() {
    for seed in 0..5 {
        let s = generate_scenario(&ScenarioSpec { seed, ..Default::default() }).unwrap();
        let frames = records_to_candidates::<f64>(&s.detections, s.frame_count).unwrap();
        let traj = run_sequence(frames, &AffinityParams::default(), &PipelineConfig::default(), &ConfidenceQuality::default()).unwrap();
        let m = clear_mot(&s.gt, &trajectories_to_records(&traj), 0.5);
        assert_eq!((m.mota, m.id_switches), (1.0, 0), "seed {seed}");
        assert_eq!(traj.len(), 10);
    }
}

#[test]
fn oracle_quality_matches_confidence_quality_on_clean_input() {
    let s = generate_scenario(&ScenarioSpec { seed: 7, ..Default::default() }).unwrap();
    let run = |oracle: bool| {
        let frames = records_to_candidates::<f64>(&s.detections, s.frame_count).unwrap();
        let traj = if oracle {
            let q = GroundTruthQuality::new(records_to_boxes(&s.gt, s.frame_count));
            run_sequence(frames, &AffinityParams::default(), &PipelineConfig::default(), &q)
        } else {
            run_sequence(frames, &AffinityParams::default(), &PipelineConfig::default(), &ConfidenceQuality::default())
        };
        trajectories_to_records(&traj.unwrap())
    };
    assert_eq!(run(true), run(false));
}

#[test]
fn tracking_output_survives_a_file_round_trip() {
    let spec = ScenarioSpec { noise_sigma: 1.0, miss_prob: 0.1, fp_rate: 0.2, seed: 4, ..Default::default() };
    let s = generate_scenario(&spec).unwrap();
    let frames = records_to_candidates::<f64>(&s.detections, s.frame_count).unwrap();
    let traj = run_sequence(frames, &AffinityParams::default(), &PipelineConfig::default(), &ConfidenceQuality::default()).unwrap();
    let records = trajectories_to_records(&traj);
    let path = std::env::temp_dir().join(format!("mdatrack-tracking-{}.txt", std::process::id()));
    save_mot(&path, &records).unwrap();
    let loaded = load_mot(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(clear_mot(&s.gt, &loaded, 0.5), clear_mot(&s.gt, &records, 0.5));
}

#[test]
fn noisy_runs_are_bit_reproducible() {
    let spec = ScenarioSpec { noise_sigma: 2.0, miss_prob: 0.15, fp_rate: 0.5, seed: 11, ..Default::default() };
    let run = || {
        let s = generate_scenario(&spec).unwrap();
        let frames = records_to_candidates::<f64>(&s.detections, s.frame_count).unwrap();
        let traj = run_sequence(frames, &AffinityParams::default(), &PipelineConfig::default(), &ConfidenceQuality::default());
        traj.unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.id, y.id);
        let bits = |t: &mdatrack::pipeline::Trajectory<f64>| -> Vec<(usize, [u64; 4])> {
            t.boxes.iter().map(|(f, b)| (*f, [b.left, b.top, b.width, b.height].map(f64::to_bits))).collect()
        };
        assert_eq!(bits(x), bits(y));
    }
}
