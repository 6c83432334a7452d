//! Central finite differences.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-coordinate step `rel_step * |x_i| + abs_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub rel_step: f64,
    pub abs_step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { rel_step: 1e-5, abs_step: 1e-8 }
    }
}

/// Central-difference gradient of `f` at `x0`.
pub fn finite_diff_grad<T: Scalar>(mut f: impl FnMut(&[T]) -> T, x0: &[T], config: FdConfig) -> Result<Vec<T>> {
    let mut x = x0.to_vec();
    let mut grad = Vec::with_capacity(x0.len());
    for i in 0..x0.len() {
        let h = T::lit(config.rel_step) * x0[i].abs() + T::lit(config.abs_step);
        x[i] = x0[i] + h;
        let up = f(&x);
        x[i] = x0[i] - h;
        let down = f(&x);
        x[i] = x0[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Probe { coordinate: i });
        }
        // (x0 + h) - (x0 - h) need not equal 2h exactly
        grad.push((up - down) / ((x0[i] + h) - (x0[i] - h)));
    }
    Ok(grad)
}

/// First coordinate where `|analytic - numeric| > atol + rtol * |numeric|`.
pub fn first_mismatch<T: Scalar>(analytic: &[T], numeric: &[T], rtol: f64, atol: f64) -> Option<(usize, T, T)> {
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .find(|(_, (&a, &n))| !((a - n).abs() <= T::lit(atol) + T::lit(rtol) * n.abs()))
        .map(|(i, (&a, &n))| (i, a, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_constant() {
        let g = finite_diff_grad(|x: &[f64]| x[0] * x[0], &[3.0], FdConfig::default()).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_diff_grad(|_: &[f64]| 4.2, &[1.0, -2.0, 0.0], FdConfig::default()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn non_finite_probe_names_the_coordinate() {
        let f = |x: &[f64]| if x[1] > 1.0 { f64::NAN } else { x[0] };
        assert!(matches!(finite_diff_grad(f, &[0.0, 1.0], FdConfig::default()), Err(Error::Probe { coordinate: 1 })));
    }

    #[test]
    fn mismatch_reporting() {
        assert_eq!(first_mismatch(&[1.0, 2.0], &[1.0, 2.0 + 1e-9], 1e-6, 0.0), None);
        assert_eq!(first_mismatch(&[1.0, 2.5], &[1.0, 2.0], 1e-6, 0.0).map(|m| m.0), Some(1));
        assert!(first_mismatch(&[f64::NAN], &[0.0], 1.0, 1.0).is_some());
    }
}
