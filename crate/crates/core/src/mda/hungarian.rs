//! Maximum-weight bipartite assignment (Kuhn-Munkres with potentials).

use crate::scalar::Scalar;

use super::matrix::Matrix;

/// Maximum-weight assignment on `weights`, returning each row's column.
///
/// Entries equal to negative infinity are forbidden. With more rows than
/// columns some rows stay unassigned, and vice versa. Rows whose only
/// options are forbidden are left unassigned.
pub fn max_weight_assignment<T: Scalar>(weights: &Matrix<T>) -> Vec<Option<usize>> {
    let (rows, cols) = weights.shape();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let by_col = max_weight_assignment(&weights.transpose());
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }

    let finite_max = weights
        .as_slice()
        .iter()
        .filter(|v| v.is_finite())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    // forbidden entries cost more than any complete assignment of allowed ones
    let forbidden = (finite_max + T::one()) * T::from_usize_lossy(rows + 1) * T::lit(4.0);
    let cost = |r: usize, c: usize| {
        let w = weights[(r, c)];
        if w.is_finite() {
            -w
        } else {
            forbidden
        }
    };

    // 1-based potentials over rows (u) and columns (v); p[c] is the row matched to column c
    let inf = T::infinity();
    let mut u = vec![T::zero(); rows + 1];
    let mut v = vec![T::zero(); cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=cols {
        if p[j] != 0 && weights[(p[j] - 1, j - 1)].is_finite() {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}
