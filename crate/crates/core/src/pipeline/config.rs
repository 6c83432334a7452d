use crate::affinity::ConnectionGateConfig;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::mda::SolverConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig<T> {
    /// Affinity scale per virtual member of a hypothesis.
    pub alpha: T,
    /// Prediction/box IoU below which a low-quality box is replaced by the prediction.
    pub t_dif: T,
    /// Visible fraction of a prediction below which the target exits.
    pub t_exit: T,
    /// Quality above which an untracked anchor starts a track.
    pub quality_threshold: T,
    pub max_coast_frames: usize,
    /// Frame width and height in pixels.
    pub frame_size: (T, T),
    pub gate: ConnectionGateConfig<T>,
    pub solver: SolverConfig,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.8),
            t_dif: T::lit(0.5),
            t_exit: T::lit(0.3),
            quality_threshold: T::lit(0.5),
            max_coast_frames: 10,
            frame_size: (T::lit(960.0), T::lit(540.0)),
            gate: ConnectionGateConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    pub const KEYS: [&'static str; 14] = [
        "alpha",
        "t_dif",
        "t_exit",
        "quality_threshold",
        "max_coast_frames",
        "frame_width",
        "frame_height",
        "gate_distance",
        "gate_ratio_min",
        "gate_ratio_max",
        "gate_relaxation",
        "gate_max_relaxations",
        "power_iterations",
        "norm_pairs",
    ];

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::InputValidation(format!("alpha must lie strictly inside (0, 1), got {}", self.alpha)));
        }
        if !unit(self.t_dif) || !unit(self.t_exit) || !unit(self.quality_threshold) {
            return Err(Error::InputValidation("t_dif, t_exit and quality_threshold must lie in [0, 1]".into()));
        }
        if !(self.frame_size.0 > T::zero() && self.frame_size.1 > T::zero()) {
            return Err(Error::InputValidation("frame size must be positive".into()));
        }
        if self.solver.power_iterations == 0 || self.solver.norm_pairs == 0 {
            return Err(Error::InputValidation("power_iterations and norm_pairs must be positive".into()));
        }
        self.gate.validate()
    }

    pub fn merged_with(&self, kv: &KeyValues) -> Result<Self> {
        let get = |key: &str, v: T| -> Result<T> { Ok(T::lit(kv.get_or(key, v.to_f64_lossy())?)) };
        let mut c = *self;
        c.alpha = get("alpha", c.alpha)?;
        c.t_dif = get("t_dif", c.t_dif)?;
        c.t_exit = get("t_exit", c.t_exit)?;
        c.quality_threshold = get("quality_threshold", c.quality_threshold)?;
        c.max_coast_frames = kv.get_or("max_coast_frames", c.max_coast_frames)?;
        c.frame_size = (get("frame_width", c.frame_size.0)?, get("frame_height", c.frame_size.1)?);
        c.gate.base_distance_factor = get("gate_distance", c.gate.base_distance_factor)?;
        c.gate.size_ratio_bounds =
            (get("gate_ratio_min", c.gate.size_ratio_bounds.0)?, get("gate_ratio_max", c.gate.size_ratio_bounds.1)?);
        c.gate.relaxation_factor = get("gate_relaxation", c.gate.relaxation_factor)?;
        c.gate.max_relaxations = kv.get_or("gate_max_relaxations", c.gate.max_relaxations)?;
        c.solver.power_iterations = kv.get_or("power_iterations", c.solver.power_iterations)?;
        c.solver.norm_pairs = kv.get_or("norm_pairs", c.solver.norm_pairs)?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::<f64>::default().validate().unwrap();
    }

    #[test]
    fn alpha_must_be_interior() {
        for alpha in [0.0, 1.0, 1.5] {
            let c = PipelineConfig::<f64> { alpha, ..Default::default() };
            assert!(matches!(c.validate(), Err(Error::InputValidation(_))));
        }
    }

    #[test]
    fn merge_overrides_only_given_keys() {
        let kv = KeyValues::parse("alpha = 0.6\nmax_coast_frames = 3\nnorm_pairs = 20\n").unwrap();
        let c = PipelineConfig::<f64>::default().merged_with(&kv).unwrap();
        assert_eq!(c.alpha, 0.6);
        assert_eq!(c.max_coast_frames, 3);
        assert_eq!(c.solver.norm_pairs, 20);
        assert_eq!(c.t_dif, 0.5);
    }
}
