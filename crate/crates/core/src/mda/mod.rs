//! The differentiable assignment solver: power iteration layer, l1
//! normalization layer, loss and discretization.

mod discretize;
mod hungarian;
mod loss;
mod matrix;
mod norm;
mod power;

use std::fmt::Write as _;

pub use discretize::{discretize, PairMatching, PairVirtuals};
pub use hungarian::max_weight_assignment;
pub use loss::{bce_loss, EPS};
pub use matrix::{vectors_to_matrices, Matrix};
pub use norm::{
    l1_normalize_backward, l1_normalize_backward_log, l1_normalize_forward, Direction, NormStep, NormalizationState, PairMask,
    PartialNormMask, ZeroLinePolicy,
};
pub use power::{
    contract_full, power_iteration_backward, power_iteration_backward_log, power_iteration_forward, AssignmentState, PowerStep, MIN_CONTRACTION,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    /// Power iterations `N`.
    pub power_iterations: usize,
    /// Alternating (row, column) normalization pairs `M`.
    pub norm_pairs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { power_iterations: 10, norm_pairs: 10 }
    }
}

/// Forward result of both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment<T> {
    pub power: AssignmentState<T>,
    pub normalized: NormalizationState<T>,
}

impl<T: Scalar> SoftAssignment<T> {
    pub fn matrices(&self) -> &[Matrix<T>] {
        &self.normalized.output
    }
}

/// Power iteration on `a`, then l1 normalization of the reshaped iterates.
pub fn solve_soft<T: Scalar>(
    a: &DenseTensor<T>,
    sizes: &[usize],
    mask: &PartialNormMask,
    config: SolverConfig,
    zero_lines: ZeroLinePolicy,
) -> Result<SoftAssignment<T>> {
    let expected: Vec<usize> = sizes.windows(2).map(|w| w[0] * w[1]).collect();
    if a.shape() != expected.as_slice() {
        return Err(Error::Contract(format!("tensor shape {:?} does not fit frame sizes {sizes:?}", a.shape())));
    }
    let power = power_iteration_forward(a, config.power_iterations)?;
    let matrices = scaled_matrices(&power.log_x, sizes, mask)?;
    let normalized = l1_normalize_forward(&matrices, mask, config.norm_pairs, zero_lines)?;
    Ok(SoftAssignment { power, normalized })
}

/// Reshapes `exp(ln x)` into pair matrices, dividing every row that the first
/// normalization step rescales by its largest entry. The normalized output is
/// unchanged, and rows far below the floating-point range keep their ratios.
fn scaled_matrices<T: Scalar>(log_x: &[Vec<T>], sizes: &[usize], mask: &PartialNormMask) -> Result<Vec<Matrix<T>>> {
    if mask.pairs.len() != log_x.len() {
        return Err(Error::Contract(format!("mask covers {} pairs, got {} vectors", mask.pairs.len(), log_x.len())));
    }
    let mut out = vectors_to_matrices(log_x, sizes)?;
    for (m, pm) in out.iter_mut().zip(&mask.pairs) {
        let cols = m.cols();
        for r in 0..m.rows() {
            let row = &mut m.as_mut_slice()[r * cols..(r + 1) * cols];
            let shift = if pm.column_only_rows.contains(&r) {
                T::zero()
            } else {
                row.iter().copied().fold(T::neg_infinity(), T::max)
            };
            let shift = if shift.is_finite() { shift } else { T::zero() };
            for v in row.iter_mut() {
                *v = (*v - shift).exp();
            }
        }
    }
    Ok(out)
}

/// `dL/dA` given `dL/dX` on the normalized output.
///
/// Gradients travel as `x * dL/dx` through both layers, which stays finite
/// however concentrated the power iterates are.
pub fn backward_soft<T: Scalar>(
    a: &DenseTensor<T>,
    solution: &SoftAssignment<T>,
    dl_dx: &[Matrix<T>],
) -> Result<DenseTensor<T>> {
    if dl_dx.len() != solution.normalized.output.len() {
        return Err(Error::Contract("gradient count does not match the solution".into()));
    }
    let mut u = Vec::with_capacity(dl_dx.len());
    for (g, y) in dl_dx.iter().zip(&solution.normalized.output) {
        if g.shape() != y.shape() {
            return Err(Error::Contract(format!("gradient shape {:?} vs output {:?}", g.shape(), y.shape())));
        }
        let data = g.as_slice().iter().zip(y.as_slice()).map(|(&g, &y)| g * y).collect();
        u.push(Matrix::from_vec(g.rows(), g.cols(), data)?);
    }
    let into_power = l1_normalize_backward_log(&solution.normalized, &u)?;
    let vectors: Vec<Vec<T>> = into_power.into_iter().map(Matrix::into_vec).collect();
    power_iteration_backward_log(a, &solution.power, &vectors)
}

fn write_values<T: Scalar>(out: &mut String, values: &[T]) {
    let line: Vec<String> = values.iter().map(|v| format!("{:.16e}", v.to_f64_lossy())).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

fn write_matrix<T: Scalar>(out: &mut String, label: &str, m: &Matrix<T>) {
    let _ = writeln!(out, "{label} {} {}", m.rows(), m.cols());
    for r in 0..m.rows() {
        write_values(out, m.row(r));
    }
}

impl<T: Scalar> AssignmentState<T> {
    /// Plain-text dump: per pair and iterate, a `x <k> <n> <len>` header line
    /// and the values at 17 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in 0..=self.iterations() {
            for (k, xk) in self.iterate(n).iter().enumerate() {
                let _ = writeln!(out, "x {} {} {}", k + 1, n, xk.len());
                write_values(&mut out, xk);
            }
        }
        for (n, step) in self.history.iter().enumerate() {
            let _ = writeln!(out, "normalizer {n} 1");
            write_values(&mut out, &[step.normalizer]);
        }
        out
    }
}

impl<T: Scalar> SoftAssignment<T> {
    /// [`AssignmentState::dump`] followed by the normalized matrices.
    pub fn dump(&self) -> String {
        let mut out = self.power.dump();
        for (k, m) in self.normalized.output.iter().enumerate() {
            write_matrix(&mut out, &format!("X {}", k + 1), m);
        }
        out
    }
}
