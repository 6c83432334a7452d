use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::matrix::Matrix;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

/// Binary cross entropy summed over every entry of every pair, and its gradient.
///
/// The gradient is that of the clamped expression, so it vanishes where the
/// clamp is active.
pub fn bce_loss<T: Scalar>(pred: &[Matrix<T>], truth: &[Matrix<T>]) -> Result<(T, Vec<Matrix<T>>)> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!("{} predicted pairs vs {} ground-truth pairs", pred.len(), truth.len())));
    }
    let eps = T::lit(EPS);
    let hi = T::one() - eps;
    let mut loss = T::zero();
    let mut grads = Vec::with_capacity(pred.len());
    for (k, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.shape() != t.shape() {
            return Err(Error::Contract(format!("pair {}: shape {:?} vs {:?}", k + 1, p.shape(), t.shape())));
        }
        let mut g = Matrix::zeros(p.rows(), p.cols());
        for ((gv, &x), &y) in g.as_mut_slice().iter_mut().zip(p.as_slice()).zip(t.as_slice()) {
            let xc = x.max(eps).min(hi);
            loss -= y * xc.ln() + (T::one() - y) * (T::one() - xc).ln();
            if x > eps && x < hi {
                *gv = -y / xc + (T::one() - y) / (T::one() - xc);
            }
        }
        grads.push(g);
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_near_zero() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (l, g) = bce_loss(&[x.clone()], &[x]).unwrap();
        assert!(l >= 0.0 && l <= 4.0 * (1.0f64 - EPS).ln().abs() + 1e-15);
        assert!(g[0].as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn half_everywhere_is_m_ln2() {
        let p = Matrix::from_vec(2, 3, vec![0.5; 6]).unwrap();
        let t = Matrix::from_vec(2, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let (l, _) = bce_loss(&[p.clone(), p.clone()], &[t.clone(), t]).unwrap();
        assert!((l - 12.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = Matrix::<f64>::zeros(2, 2);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(bce_loss(&[a.clone()], &[b]), Err(Error::Contract(_))));
        assert!(bce_loss(&[a.clone()], &[]).is_err());
    }
}
