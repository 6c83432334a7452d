use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::scalar::Scalar;

/// Smallest position scale kept by [`AffinityParams::project`], in pixels.
pub const MIN_POSITION_SCALE: f64 = 1e-3;

/// Learnable weights of the affinity provider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityParams<T> {
    /// Penalty on center acceleration in the long-term term.
    pub motion_weight: T,
    /// Length scale in pixels for every position attenuation.
    pub position_scale: T,
    /// Penalty on log-height acceleration in the long-term term.
    pub size_weight: T,
    /// Sharpness of the descriptor cosine similarity in the pairwise term.
    pub appearance_weight: T,
    /// Weight of the long-term term relative to the two pairwise terms.
    pub long_term_weight: T,
}

impl<T: Scalar> Default for AffinityParams<T> {
    fn default() -> Self {
        Self {
            motion_weight: T::one(),
            position_scale: T::lit(32.0),
            size_weight: T::one(),
            appearance_weight: T::one(),
            long_term_weight: T::one(),
        }
    }
}

impl<T: Scalar> AffinityParams<T> {
    pub const COUNT: usize = 5;
    pub const NAMES: [&'static str; 5] =
        ["motion_weight", "position_scale", "size_weight", "appearance_weight", "long_term_weight"];

    /// Starting point for training: equal pairwise and long-term weight,
    /// default length scale, and no motion, size or appearance sharpness.
    pub fn untrained() -> Self {
        Self {
            motion_weight: T::zero(),
            position_scale: T::lit(32.0),
            size_weight: T::zero(),
            appearance_weight: T::zero(),
            long_term_weight: T::one(),
        }
    }

    pub fn zeros() -> Self {
        Self::from_array([T::zero(); 5])
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.motion_weight, self.position_scale, self.size_weight, self.appearance_weight, self.long_term_weight]
    }

    pub fn from_array(v: [T; 5]) -> Self {
        Self {
            motion_weight: v[0],
            position_scale: v[1],
            size_weight: v[2],
            appearance_weight: v[3],
            long_term_weight: v[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::InputValidation(format!("non-finite affinity parameters {self:?}")));
        }
        if self.position_scale <= T::zero() || self.long_term_weight < T::zero() {
            return Err(Error::InputValidation(format!(
                "position_scale must be positive and long_term_weight nonnegative: {self:?}"
            )));
        }
        Ok(())
    }

    /// Restores the feasible set after a gradient step.
    pub fn project(&mut self) {
        self.position_scale = self.position_scale.max(T::lit(MIN_POSITION_SCALE));
        self.long_term_weight = self.long_term_weight.max(T::zero());
    }

    /// `self - step * grad`, followed by projection.
    pub fn descend(&self, grad: &Self, step: T) -> Self {
        let p = self.to_array();
        let g = grad.to_array();
        let mut next = Self::from_array(std::array::from_fn(|i| p[i] - step * g[i]));
        next.project();
        next
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            kv.insert(name, v);
        }
        kv
    }

    /// Reads every parameter present in `kv`, keeping `self` for missing keys.
    pub fn merged_with(&self, kv: &KeyValues) -> Result<Self> {
        let mut v = self.to_array();
        for (slot, name) in v.iter_mut().zip(Self::NAMES) {
            if let Some(raw) = kv.get::<f64>(name)? {
                *slot = T::lit(raw);
            }
        }
        let p = Self::from_array(v);
        p.validate()?;
        Ok(p)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.expect_only(&Self::NAMES)?;
        for name in Self::NAMES {
            if kv.raw(name).is_none() {
                return Err(Error::InputValidation(format!("parameter file lacks `{name}`")));
            }
        }
        Self::default().merged_with(kv)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_key_values().render())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_restores_constraints() {
        let mut p = AffinityParams::<f64> { position_scale: -3.0, long_term_weight: -1.0, ..Default::default() };
        p.project();
        assert!(p.validate().is_ok());
    }

    #[test]
    fn missing_or_unknown_keys_rejected() {
        let kv = KeyValues::parse("motion_weight = 1\n").unwrap();
        assert!(AffinityParams::<f64>::from_key_values(&kv).is_err());
        let mut kv = AffinityParams::<f64>::default().to_key_values();
        kv.insert("bogus", 1);
        assert!(AffinityParams::<f64>::from_key_values(&kv).is_err());
    }

    proptest! {
        #[test]
        fn file_round_trip_is_bit_exact(v in proptest::array::uniform5(-1e6f64..1e6)) {
            let mut p = AffinityParams::from_array(v);
            p.project();
            let dir = std::env::temp_dir().join(format!("mdatrack-params-{}", std::process::id()));
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("p.txt");
            p.save(&path).unwrap();
            let q = AffinityParams::<f64>::load(&path).unwrap();
            for (a, b) in p.to_array().iter().zip(q.to_array()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
