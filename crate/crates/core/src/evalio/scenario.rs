//! Synthetic constant-velocity scenes with noisy, incomplete detections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::types::BBox;

use super::mot::MotRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub frame_count: usize,
    pub target_count: usize,
    /// Speed range in pixels per frame.
    pub speed: (f64, f64),
    /// Box height range in pixels; widths are 0.35 to 0.5 of the height.
    pub height: (f64, f64),
    pub noise_sigma: f64,
    pub miss_prob: f64,
    /// Mean number of false positives per frame.
    pub fp_rate: f64,
    pub frame_size: (f64, f64),
    pub descriptor_len: usize,
    /// Relative per-frame jitter of descriptor bins.
    pub appearance_noise: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            frame_count: 50,
            target_count: 10,
            speed: (0.5, 4.0),
            height: (40.0, 90.0),
            noise_sigma: 0.0,
            miss_prob: 0.0,
            fp_rate: 0.0,
            frame_size: (960.0, 540.0),
            descriptor_len: crate::types::DEFAULT_DESCRIPTOR_LEN,
            appearance_noise: 0.1,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub const KEYS: [&'static str; 15] = [
        "frame_count",
        "target_count",
        "speed_min",
        "speed_max",
        "height_min",
        "height_max",
        "noise_sigma",
        "miss_prob",
        "fp_rate",
        "frame_width",
        "frame_height",
        "descriptor_len",
        "appearance_noise",
        "seed",
        "scenario_seed",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InputValidation(format!("scenario: {m}")));
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return bad("miss_prob must lie in [0, 1]");
        }
        if !(self.noise_sigma >= 0.0 && self.fp_rate >= 0.0 && self.appearance_noise >= 0.0) {
            return bad("noise_sigma, fp_rate and appearance_noise must be nonnegative");
        }
        if !(self.speed.0 >= 0.0 && self.speed.0 <= self.speed.1) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(self.height.0 > 0.0 && self.height.0 <= self.height.1) {
            return bad("height range must satisfy 0 < min <= max");
        }
        if !(self.frame_size.0 > self.height.1 && self.frame_size.1 > self.height.1) {
            return bad("frame must be larger than the largest box");
        }
        if self.descriptor_len == 0 {
            return bad("descriptor_len must be positive");
        }
        Ok(())
    }

    /// Overrides fields present in `kv`. `scenario_seed` takes precedence over `seed`.
    pub fn merged_with(&self, kv: &KeyValues) -> Result<Self> {
        let mut s = self.clone();
        s.frame_count = kv.get_or("frame_count", s.frame_count)?;
        s.target_count = kv.get_or("target_count", s.target_count)?;
        s.speed = (kv.get_or("speed_min", s.speed.0)?, kv.get_or("speed_max", s.speed.1)?);
        s.height = (kv.get_or("height_min", s.height.0)?, kv.get_or("height_max", s.height.1)?);
        s.noise_sigma = kv.get_or("noise_sigma", s.noise_sigma)?;
        s.miss_prob = kv.get_or("miss_prob", s.miss_prob)?;
        s.fp_rate = kv.get_or("fp_rate", s.fp_rate)?;
        s.frame_size = (kv.get_or("frame_width", s.frame_size.0)?, kv.get_or("frame_height", s.frame_size.1)?);
        s.descriptor_len = kv.get_or("descriptor_len", s.descriptor_len)?;
        s.appearance_noise = kv.get_or("appearance_noise", s.appearance_noise)?;
        s.seed = kv.get_or("seed", s.seed)?;
        s.seed = kv.get_or("scenario_seed", s.seed)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("frame_count", self.frame_count);
        kv.insert("target_count", self.target_count);
        kv.insert("speed_min", self.speed.0);
        kv.insert("speed_max", self.speed.1);
        kv.insert("height_min", self.height.0);
        kv.insert("height_max", self.height.1);
        kv.insert("noise_sigma", self.noise_sigma);
        kv.insert("miss_prob", self.miss_prob);
        kv.insert("fp_rate", self.fp_rate);
        kv.insert("frame_width", self.frame_size.0);
        kv.insert("frame_height", self.frame_size.1);
        kv.insert("descriptor_len", self.descriptor_len);
        kv.insert("appearance_noise", self.appearance_noise);
        kv.insert("seed", self.seed);
        kv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gt: Vec<MotRecord>,
    pub detections: Vec<MotRecord>,
    pub frame_count: usize,
    pub frame_size: (f64, f64),
}

fn histogram(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn reflect(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    if *pos < lo {
        *pos = 2.0 * lo - *pos;
        *vel = -*vel;
    } else if *pos > hi {
        *pos = 2.0 * hi - *pos;
        *vel = -*vel;
    }
}

/// Ground truth and detections, fully determined by `spec.seed`.
///
/// Targets move at constant velocity and bounce off the frame edges. Each
/// target has a stable random histogram descriptor, jittered per frame; the
/// detection of a target carries that frame's descriptor.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (fw, fh) = spec.frame_size;

    struct Target {
        center: [f64; 2],
        velocity: [f64; 2],
        width: f64,
        height: f64,
        descriptor: Vec<f64>,
    }
    let mut targets: Vec<Target> = (0..spec.target_count)
        .map(|_| {
            let height = rng.gen_range(spec.height.0..=spec.height.1);
            let width = height * rng.gen_range(0.35..=0.5);
            let speed = rng.gen_range(spec.speed.0..=spec.speed.1);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            Target {
                center: [rng.gen_range(width / 2.0..=fw - width / 2.0), rng.gen_range(height / 2.0..=fh - height / 2.0)],
                velocity: [speed * angle.cos(), speed * angle.sin()],
                width,
                height,
                descriptor: histogram(&mut rng, spec.descriptor_len),
            }
        })
        .collect();

    let center_noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::InputValidation(e.to_string()))?;
    let app_noise = Normal::new(0.0, spec.appearance_noise).map_err(|e| Error::InputValidation(e.to_string()))?;
    let fp_count = (spec.fp_rate > 0.0)
        .then(|| Poisson::new(spec.fp_rate).map_err(|e| Error::InputValidation(e.to_string())))
        .transpose()?;

    let mut gt = Vec::new();
    let mut detections = Vec::new();
    for f in 0..spec.frame_count {
        let frame = (f + 1) as u32;
        for (id, t) in targets.iter_mut().enumerate() {
            if f > 0 {
                for d in 0..2 {
                    t.center[d] += t.velocity[d];
                }
                reflect(&mut t.center[0], &mut t.velocity[0], t.width / 2.0, fw - t.width / 2.0);
                reflect(&mut t.center[1], &mut t.velocity[1], t.height / 2.0, fh - t.height / 2.0);
            }
            let appearance: Vec<f64> =
                t.descriptor.iter().map(|&v| (v * (1.0 + app_noise.sample(&mut rng))).max(0.0)).collect();
            let mut g = MotRecord::new(frame, id as i64 + 1, BBox::from_center(t.center, t.width, t.height), 1.0);
            g.appearance = appearance.clone();
            gt.push(g);

            let missed = rng.gen_bool(spec.miss_prob);
            let jitter = [center_noise.sample(&mut rng), center_noise.sample(&mut rng)];
            let conf = rng.gen_range(0.55..=1.0);
            if !missed {
                let c = [t.center[0] + jitter[0], t.center[1] + jitter[1]];
                let mut d = MotRecord::new(frame, -1, BBox::from_center(c, t.width, t.height), conf);
                d.appearance = appearance;
                detections.push(d);
            }
        }
        let fps = fp_count.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..fps {
            let height = rng.gen_range(spec.height.0..=spec.height.1);
            let width = height * rng.gen_range(0.35..=0.5);
            let c = [rng.gen_range(width / 2.0..=fw - width / 2.0), rng.gen_range(height / 2.0..=fh - height / 2.0)];
            let mut d = MotRecord::new(frame, -1, BBox::from_center(c, width, height), rng.gen_range(0.0..0.45));
            d.appearance = histogram(&mut rng, spec.descriptor_len);
            detections.push(d);
        }
    }
    Ok(Scenario { gt, detections, frame_count: spec.frame_count, frame_size: spec.frame_size })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_detections_equal_ground_truth() {
        let s = generate_scenario(&ScenarioSpec { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(s.gt.len(), 500);
        assert_eq!(s.detections.len(), s.gt.len());
        for (g, d) in s.gt.iter().zip(&s.detections) {
            assert_eq!(g.bbox(), d.bbox());
            assert_eq!(g.appearance, d.appearance);
        }
    }

    #[test]
    fn all_missed() {
        let s = generate_scenario(&ScenarioSpec { miss_prob: 1.0, ..Default::default() }).unwrap();
        assert!(s.detections.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ScenarioSpec { noise_sigma: 1.0, miss_prob: 0.1, fp_rate: 0.2, seed: 11, ..Default::default() };
        assert_eq!(generate_scenario(&spec).unwrap(), generate_scenario(&spec).unwrap());
        let other = generate_scenario(&ScenarioSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(other, generate_scenario(&ScenarioSpec { seed: 11, ..Default::default() }).unwrap());
    }

    #[test]
    fn boxes_stay_inside_the_frame() {
        let s = generate_scenario(&ScenarioSpec { frame_count: 300, speed: (5.0, 9.0), ..Default::default() }).unwrap();
        for g in &s.gt {
            assert!(g.left >= -1e-9 && g.top >= -1e-9);
            assert!(g.left + g.width <= 960.0 + 1e-9 && g.top + g.height <= 540.0 + 1e-9);
        }
    }

    #[test]
    fn key_value_round_trip_and_validation() {
        let spec = ScenarioSpec { noise_sigma: 1.5, seed: 9, ..Default::default() };
        assert_eq!(ScenarioSpec::default().merged_with(&spec.to_key_values()).unwrap(), spec);
        let mut kv = KeyValues::default();
        kv.insert("miss_prob", 1.5);
        assert!(ScenarioSpec::default().merged_with(&kv).is_err());
    }
}
