//! Soft-to-binary assignment per frame pair.

use crate::scalar::Scalar;

use super::hungarian::max_weight_assignment;
use super::matrix::Matrix;

/// Virtual row/column positions of one pair matrix, if any.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairVirtuals {
    pub row: Option<usize>,
    pub col: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatching {
    /// Partner column of each row; virtual rows are `None` here.
    pub row_to_col: Vec<Option<usize>>,
    /// Partner row of each column; virtual columns are `None` here.
    pub col_to_row: Vec<Option<usize>>,
    /// The binary assignment matrix.
    pub binary: Matrix<u8>,
}

/// Binary assignments realising the soft matrices.
///
/// Real rows and columns are matched by maximum total weight. Every real line
/// may alternatively take the virtual partner at that partner's weight; a
/// virtual line may absorb any number of real lines. Without virtuals a line
/// stays unmatched only when it has no positive-weight partner left.
pub fn discretize<T: Scalar>(matrices: &[Matrix<T>], virtuals: &[PairVirtuals]) -> Vec<PairMatching> {
    matrices
        .iter()
        .enumerate()
        .map(|(k, x)| discretize_pair(x, virtuals.get(k).copied().unwrap_or_default()))
        .collect()
}

fn discretize_pair<T: Scalar>(x: &Matrix<T>, v: PairVirtuals) -> PairMatching {
    let real_rows: Vec<usize> = (0..x.rows()).filter(|r| Some(*r) != v.row).collect();
    let real_cols: Vec<usize> = (0..x.cols()).filter(|c| Some(*c) != v.col).collect();
    let (nr, nc) = (real_rows.len(), real_cols.len());

    // left: real rows then one dummy per real column; right: real columns then one dummy per real row
    let ninf = T::neg_infinity();
    let mut w = Matrix::from_vec(nr + nc, nc + nr, vec![ninf; (nr + nc) * (nc + nr)]).expect("square");
    for (a, &r) in real_rows.iter().enumerate() {
        for (b, &c) in real_cols.iter().enumerate() {
            let val = x[(r, c)];
            if val > T::zero() {
                w[(a, b)] = val;
            }
        }
        w[(a, nc + a)] = v.col.map_or(T::zero(), |vc| x[(r, vc)]);
    }
    for (b, &c) in real_cols.iter().enumerate() {
        w[(nr + b, b)] = v.row.map_or(T::zero(), |vr| x[(vr, c)]);
        for a in 0..nr {
            w[(nr + b, nc + a)] = T::zero();
        }
    }
    let solution = max_weight_assignment(&w);

    let mut row_to_col = vec![None; x.rows()];
    let mut col_to_row = vec![None; x.cols()];
    let mut binary = Matrix::<u8>::from_vec(x.rows(), x.cols(), vec![0; x.rows() * x.cols()]).expect("shape");
    for (a, &r) in real_rows.iter().enumerate() {
        match solution[a] {
            Some(b) if b < nc => {
                let c = real_cols[b];
                row_to_col[r] = Some(c);
                col_to_row[c] = Some(r);
                binary[(r, c)] = 1;
            }
            Some(_) => {
                if let Some(vc) = v.col {
                    row_to_col[r] = Some(vc);
                    binary[(r, vc)] = 1;
                }
            }
            None => {}
        }
    }
    for (b, &c) in real_cols.iter().enumerate() {
        if col_to_row[c].is_none() && solution[nr + b] == Some(b) {
            if let Some(vr) = v.row {
                col_to_row[c] = Some(vr);
                binary[(vr, c)] = 1;
            }
        }
    }
    PairMatching { row_to_col, col_to_row, binary }
}
