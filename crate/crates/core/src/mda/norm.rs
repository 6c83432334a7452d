//! Alternating row/column l1 normalization with partial masks for virtual lines.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::matrix::Matrix;

/// Lines exempt from one normalization direction, for one pair.
///
/// A virtual row is normalized only column-wise and a virtual column only
/// row-wise, so one virtual candidate can absorb several partners.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairMask {
    pub column_only_rows: Vec<usize>,
    pub row_only_cols: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialNormMask {
    pub pairs: Vec<PairMask>,
}

impl PartialNormMask {
    /// Full normalization on `pairs` matrices.
    pub fn empty(pairs: usize) -> Self {
        Self { pairs: vec![PairMask::default(); pairs] }
    }
}

/// What to do with a line that is identically zero when normalization starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroLinePolicy {
    #[default]
    Error,
    /// Leave it out of every step and report it.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rows,
    Cols,
}

/// One normalization step: its input and the divisors of the lines it touched.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStep<T> {
    pub direction: Direction,
    pub input: Matrix<T>,
    /// `(line, sum)` for every normalized line.
    pub sums: Vec<(usize, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationState<T> {
    pub output: Vec<Matrix<T>>,
    /// Per pair, the steps in execution order.
    pub history: Vec<Vec<NormStep<T>>>,
    /// Per pair, `(rows, cols)` that were zero on entry and skipped.
    pub skipped: Vec<(Vec<usize>, Vec<usize>)>,
}

fn normalize_step<T: Scalar>(x: &Matrix<T>, direction: Direction, lines: &[usize]) -> (Matrix<T>, Vec<(usize, T)>) {
    let mut y = x.clone();
    let mut sums = Vec::with_capacity(lines.len());
    for &l in lines {
        match direction {
            Direction::Rows => {
                let s = x.row_sum(l);
                for c in 0..x.cols() {
                    y[(l, c)] = x[(l, c)] / s;
                }
                sums.push((l, s));
            }
            Direction::Cols => {
                let s = x.col_sum(l);
                for r in 0..x.rows() {
                    y[(r, l)] = x[(r, l)] / s;
                }
                sums.push((l, s));
            }
        }
    }
    (y, sums)
}

/// Applies `pairs` alternating (row, column) normalization pairs to every matrix.
pub fn l1_normalize_forward<T: Scalar>(
    matrices: &[Matrix<T>],
    mask: &PartialNormMask,
    pairs: usize,
    zero_lines: ZeroLinePolicy,
) -> Result<NormalizationState<T>> {
    if mask.pairs.len() != matrices.len() {
        return Err(Error::Contract(format!("mask covers {} pairs, got {} matrices", mask.pairs.len(), matrices.len())));
    }
    let mut output = Vec::with_capacity(matrices.len());
    let mut history = Vec::with_capacity(matrices.len());
    let mut skipped = Vec::with_capacity(matrices.len());
    for (k, (x, m)) in matrices.iter().zip(&mask.pairs).enumerate() {
        if x.as_slice().iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Contract(format!("pair {}: matrix must be finite and nonnegative", k + 1)));
        }
        let mut zero_rows = Vec::new();
        let mut rows = Vec::new();
        for r in (0..x.rows()).filter(|r| !m.column_only_rows.contains(r)) {
            if x.row_sum(r) > T::zero() {
                rows.push(r);
            } else if zero_lines == ZeroLinePolicy::Error {
                return Err(Error::DegenerateNormalization { pair: k + 1, line: format!("row {}", r + 1) });
            } else {
                zero_rows.push(r);
            }
        }
        let mut zero_cols = Vec::new();
        let mut cols = Vec::new();
        for c in (0..x.cols()).filter(|c| !m.row_only_cols.contains(c)) {
            if x.col_sum(c) > T::zero() {
                cols.push(c);
            } else if zero_lines == ZeroLinePolicy::Error {
                return Err(Error::DegenerateNormalization { pair: k + 1, line: format!("column {}", c + 1) });
            } else {
                zero_cols.push(c);
            }
        }

        let mut current = x.clone();
        let mut steps = Vec::with_capacity(2 * pairs);
        for _ in 0..pairs {
            for (direction, lines) in [(Direction::Rows, &rows), (Direction::Cols, &cols)] {
                let (next, sums) = normalize_step(&current, direction, lines);
                steps.push(NormStep { direction, input: std::mem::replace(&mut current, next), sums });
            }
        }
        if current.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("pair {}: normalization produced non-finite values", k + 1)));
        }
        output.push(current);
        history.push(steps);
        skipped.push((zero_rows, zero_cols));
    }
    Ok(NormalizationState { output, history, skipped })
}

/// Reverse pass of [`l1_normalize_forward`]: `dL/dX` at the input.
///
/// For a normalized line with input `x`, sum `s` and output `y = x / s`, the
/// input gradient is `(g - <g, y>) / s`; untouched lines pass `g` through.
pub fn l1_normalize_backward<T: Scalar>(state: &NormalizationState<T>, dl_dx_final: &[Matrix<T>]) -> Result<Vec<Matrix<T>>> {
    if dl_dx_final.len() != state.output.len() {
        return Err(Error::Contract("gradient count does not match normalization state".into()));
    }
    let mut out = Vec::with_capacity(dl_dx_final.len());
    for (k, (g, steps)) in dl_dx_final.iter().zip(&state.history).enumerate() {
        if g.shape() != state.output[k].shape() {
            return Err(Error::Contract(format!("pair {}: gradient shape {:?} mismatches", k + 1, g.shape())));
        }
        let mut grad = g.clone();
        for step in steps.iter().rev() {
            let x = &step.input;
            for &(l, s) in &step.sums {
                match step.direction {
                    Direction::Rows => {
                        let dot: T = (0..x.cols()).map(|c| grad[(l, c)] * x[(l, c)] / s).sum();
                        for c in 0..x.cols() {
                            grad[(l, c)] = (grad[(l, c)] - dot) / s;
                        }
                    }
                    Direction::Cols => {
                        let dot: T = (0..x.rows()).map(|r| grad[(r, l)] * x[(r, l)] / s).sum();
                        for r in 0..x.rows() {
                            grad[(r, l)] = (grad[(r, l)] - dot) / s;
                        }
                    }
                }
            }
        }
        out.push(grad);
    }
    Ok(out)
}

/// Reverse pass in log-gradients: maps `u = Y * dL/dY` at the output to
/// `x * dL/dx` at the input.
///
/// A normalized line with output `y` maps `u -> u - y sum(u)`; no step divides,
/// so inputs of any magnitude are handled.
pub fn l1_normalize_backward_log<T: Scalar>(state: &NormalizationState<T>, u_final: &[Matrix<T>]) -> Result<Vec<Matrix<T>>> {
    if u_final.len() != state.output.len() {
        return Err(Error::Contract("gradient count does not match normalization state".into()));
    }
    let mut out = Vec::with_capacity(u_final.len());
    for (k, (u, steps)) in u_final.iter().zip(&state.history).enumerate() {
        if u.shape() != state.output[k].shape() {
            return Err(Error::Contract(format!("pair {}: gradient shape {:?} mismatches", k + 1, u.shape())));
        }
        let mut u = u.clone();
        for step in steps.iter().rev() {
            let x = &step.input;
            for &(l, s) in &step.sums {
                match step.direction {
                    Direction::Rows => {
                        let total: T = u.row(l).iter().copied().sum();
                        for c in 0..x.cols() {
                            u[(l, c)] -= x[(l, c)] / s * total;
                        }
                    }
                    Direction::Cols => {
                        let total: T = (0..x.rows()).map(|r| u[(r, l)]).sum();
                        for r in 0..x.rows() {
                            u[(r, l)] -= x[(r, l)] / s * total;
                        }
                    }
                }
            }
        }
        out.push(u);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn doubly_stochastic_is_a_fixed_point() {
        let x = m(&[&[0.25, 0.75], &[0.75, 0.25]]);
        let s = l1_normalize_forward(&[x.clone()], &PartialNormMask::empty(1), 5, ZeroLinePolicy::Error).unwrap();
        assert_eq!(s.output[0], x);
    }

    #[test]
    fn diagonal_scaling_after_one_row_pass() {
        let s = l1_normalize_forward(&[m(&[&[2.0, 0.0], &[0.0, 3.0]])], &PartialNormMask::empty(1), 1, ZeroLinePolicy::Error)
            .unwrap();
        assert_eq!(s.history[0][0].direction, Direction::Rows);
        assert_eq!(s.history[0][1].input, m(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(s.output[0], m(&[&[1.0, 0.0], &[0.0, 1.0]]));
    }

    #[test]
    fn one_by_one_has_zero_gradient() {
        let s = l1_normalize_forward(&[m(&[&[0.3]])], &PartialNormMask::empty(1), 3, ZeroLinePolicy::Error).unwrap();
        assert_eq!(s.output[0][(0, 0)], 1.0);
        let g = l1_normalize_backward(&s, &[m(&[&[5.0]])]).unwrap();
        assert_eq!(g[0][(0, 0)], 0.0);
        let z = l1_normalize_backward(&s, &[m(&[&[0.0]])]).unwrap();
        assert_eq!(z[0][(0, 0)], 0.0);
    }

    #[test]
    fn zero_lines_error_or_skip() {
        let x = m(&[&[1.0, 0.0], &[0.0, 0.0]]);
        match l1_normalize_forward(&[x.clone()], &PartialNormMask::empty(1), 2, ZeroLinePolicy::Error) {
            Err(Error::DegenerateNormalization { pair: 1, line }) => assert_eq!(line, "row 2"),
            other => panic!("unexpected {other:?}"),
        }
        let s = l1_normalize_forward(&[x], &PartialNormMask::empty(1), 2, ZeroLinePolicy::Skip).unwrap();
        assert_eq!(s.skipped[0], (vec![1], vec![1]));
        assert_eq!(s.output[0], m(&[&[1.0, 0.0], &[0.0, 0.0]]));
    }

    #[test]
    fn masked_virtual_column_only_row_normalized() {
        let x = m(&[&[0.2, 0.1, 0.9], &[0.1, 0.3, 0.8], &[0.4, 0.2, 0.7]]);
        let mask = PartialNormMask { pairs: vec![PairMask { column_only_rows: vec![], row_only_cols: vec![2] }] };
        let s = l1_normalize_forward(&[x], &mask, 50, ZeroLinePolicy::Error).unwrap();
        let y = &s.output[0];
        for r in 0..3 {
            assert!((y.row_sum(r) - 1.0).abs() < 1e-6);
        }
        for c in 0..2 {
            assert!((y.col_sum(c) - 1.0).abs() < 1e-12);
        }
        // the last step is a column step, which leaves the virtual column untouched
        let last = s.history[0].last().unwrap();
        assert!(last.sums.iter().all(|(l, _)| *l != 2));
    }

    #[test]
    fn log_gradient_matches_linear() {
        let x = m(&[&[0.2, 0.1, 0.9], &[0.1, 0.3, 0.8], &[0.4, 0.2, 0.7]]);
        let g = m(&[&[1.0, -0.5, 0.3], &[0.2, 0.7, -1.1], &[0.4, 0.0, 0.9]]);
        let mask = PartialNormMask { pairs: vec![PairMask { column_only_rows: vec![1], row_only_cols: vec![] }] };
        let s = l1_normalize_forward(&[x.clone()], &mask, 4, ZeroLinePolicy::Error).unwrap();
        let lin = l1_normalize_backward(&s, &[g.clone()]).unwrap();
        let mut u = g.clone();
        for (v, y) in u.as_mut_slice().iter_mut().zip(s.output[0].as_slice()) {
            *v *= *y;
        }
        let log = l1_normalize_backward_log(&s, &[u]).unwrap();
        for i in 0..9 {
            assert!((log[0].as_slice()[i] - lin[0].as_slice()[i] * x.as_slice()[i]).abs() < 1e-12);
        }
    }
}
