//! Compressed Sparse Row storage.

use std::sync::Arc;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::precision::{cast_scalar, Precision, Scalar};

/// Largest index representable by the 32-bit index type.
pub const MAX_INDEX: usize = i32::MAX as usize;

/// Square or rectangular sparse matrix in canonical CSR form.
///
/// Canonical means `row_ptr[0] == 0`, `row_ptr` nondecreasing ending at
/// `nnz`, and column indices strictly increasing within each row. The
/// sparsity pattern is reference counted so precision copies share it.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Arc<[usize]>,
    col_idx: Arc<[u32]>,
    values: Vec<T>,
}

impl<T: Scalar> PartialEq for CsrMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
            && self.values == other.values
    }
}

fn validate(
    n_rows: usize,
    n_cols: usize,
    row_ptr: &[usize],
    col_idx: &[u32],
    nvals: usize,
) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidMatrix(msg));
    if n_rows == 0 || n_cols == 0 {
        return bad("dimensions must be positive".into());
    }
    if n_rows > MAX_INDEX || n_cols > MAX_INDEX {
        return bad(format!("dimension exceeds 32-bit index range ({MAX_INDEX})"));
    }
    if row_ptr.len() != n_rows + 1 {
        return bad(format!(
            "row_ptr has length {}, expected {}",
            row_ptr.len(),
            n_rows + 1
        ));
    }
    if row_ptr[0] != 0 {
        return bad("row_ptr[0] must be 0".into());
    }
    let nnz = row_ptr[n_rows];
    if nnz != col_idx.len() || nnz != nvals {
        return bad(format!(
            "row_ptr ends at {nnz} but there are {} column indices and {nvals} values",
            col_idx.len()
        ));
    }
    for r in 0..n_rows {
        let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
        if hi < lo {
            return bad(format!("row_ptr decreases at row {r}"));
        }
        let row = &col_idx[lo..hi];
        for (k, &c) in row.iter().enumerate() {
            if c as usize >= n_cols {
                return bad(format!("column {c} out of range in row {r}"));
            }
            if k > 0 && row[k - 1] >= c {
                return bad(format!("column indices not strictly increasing in row {r}"));
            }
        }
    }
    Ok(())
}

impl<T: Scalar> CsrMatrix<T> {
    /// Build from raw arrays, rejecting anything not in canonical form.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<T>,
    ) -> Result<Self> {
        validate(n_rows, n_cols, &row_ptr, &col_idx, values.len())?;
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr: row_ptr.into(),
            col_idx: col_idx.into(),
            values,
        })
    }

    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= n_rows || t.1 >= n_cols) {
            return Err(Error::InvalidMatrix(format!(
                "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
            )));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c as u32);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::new(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::new(
            n,
            n,
            (0..=n).collect(),
            (0..n as u32).collect(),
            diag.to_vec(),
        )
        .expect("diagonal matrix is canonical")
    }

    /// Sparse copy of a dense matrix keeping every nonzero entry.
    pub fn from_dense(a: &DenseMatrix<T>) -> Self {
        let mut trip = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != T::zero() {
                    trip.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), trip).expect("dense input is in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[u32], &[T]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn max_nnz_row(&self) -> usize {
        self.row_ptr
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    }

    /// Average nonzeros per row.
    pub fn avg_nnz_row(&self) -> f64 {
        self.nnz() as f64 / self.n_rows as f64
    }

    /// True when both share the same pattern allocation.
    pub fn shares_pattern_with<S>(&self, other: &CsrMatrix<S>) -> bool {
        Arc::ptr_eq(&self.row_ptr, &other.row_ptr) && Arc::ptr_eq(&self.col_idx, &other.col_idx)
    }

    pub fn frobenius_norm(&self) -> T {
        crate::dense::norm2(&self.values)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.n_rows)
            .map(|r| self.row(r).1.iter().fold(T::zero(), |s, v| s + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((c as usize, r, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, trip).expect("transpose is in range")
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(r, c as usize)] = v;
            }
        }
        d
    }

    /// Check that `(row_ptr, col_idx)` arrays are canonical for the given shape.
    pub fn validate_parts(
        n_rows: usize,
        n_cols: usize,
        row_ptr: &[usize],
        col_idx: &[u32],
        nvals: usize,
    ) -> Result<()> {
        validate(n_rows, n_cols, row_ptr, col_idx, nvals)
    }

    /// Row and column of the entry stored at position `k`.
    fn coords(&self, k: usize) -> (usize, usize) {
        let r = self.row_ptr.partition_point(|&p| p <= k) - 1;
        (r, self.col_idx[k] as usize)
    }
}

/// Copy `a` into precision `T`, sharing its sparsity pattern.
pub fn convert_matrix<S: Scalar, T: Scalar>(a: &CsrMatrix<S>) -> Result<CsrMatrix<T>> {
    let values = a
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            cast_scalar(v).ok_or_else(|| {
                let (row, col) = a.coords(k);
                Error::MatrixOverflow { row, col }
            })
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(CsrMatrix {
        n_rows: a.n_rows,
        n_cols: a.n_cols,
        row_ptr: Arc::clone(&a.row_ptr),
        col_idx: Arc::clone(&a.col_idx),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, StencilSpec};

    #[test]
    fn validator_rejects_shuffled_columns() {
        assert!(CsrMatrix::<f64>::new(2, 3, vec![0, 2, 3], vec![0, 2, 1], vec![1.0; 3]).is_ok());
        let err = CsrMatrix::<f64>::new(2, 3, vec![0, 2, 3], vec![2, 0, 1], vec![1.0; 3]);
        assert!(matches!(err, Err(Error::InvalidMatrix(_))));
        assert!(CsrMatrix::<f64>::new(2, 2, vec![0, 2, 2], vec![1, 1], vec![1.0; 2]).is_err());
        assert!(CsrMatrix::<f64>::new(2, 2, vec![1, 2, 2], vec![1], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(2, 2, vec![0, 1, 2], vec![0, 5], vec![1.0; 2]).is_err());
        assert!(CsrMatrix::<f64>::new(2, 2, vec![0, 1, 2], vec![0, 1], vec![1.0]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(a.row_ptr(), &[0, 1, 2]);
        assert_eq!(a.col_idx(), &[1, 0]);
        assert_eq!(a.values(), &[2.0, 4.0]);
    }

    #[test]
    fn convert_identity_shares_pattern() {
        let a = CsrMatrix::<f64>::identity(3);
        let b: CsrMatrix<f32> = convert_matrix(&a).unwrap();
        assert!(b.shares_pattern_with(&a));
        assert_eq!(b.values(), &[1.0f32; 3]);
        assert_eq!(b.precision(), Precision::Fp32);
    }

    #[test]
    fn laplace_round_trip_is_bit_exact() {
        let a = generate(&StencilSpec::laplace2d(4)).unwrap();
        let b: CsrMatrix<f32> = convert_matrix(&a).unwrap();
        let c: CsrMatrix<f64> = convert_matrix(&b).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn overflow_reports_coordinates() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (2, 1, 1e39), (2, 2, 1.0)]).unwrap();
        match convert_matrix::<f64, f32>(&a) {
            Err(Error::MatrixOverflow { row, col }) => assert_eq!((row, col), (2, 1)),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn generated_matrices_validate() {
        for spec in [
            StencilSpec::laplace2d(7),
            StencilSpec::laplace3d(4),
            StencilSpec::bent_pipe2d(6),
            StencilSpec::biharmonic2d(6),
            StencilSpec::star2d(5),
        ] {
            let a = generate(&spec).unwrap();
            CsrMatrix::<f64>::validate_parts(a.n_rows(), a.n_cols(), a.row_ptr(), a.col_idx(), a.nnz())
                .unwrap();
        }
    }
}
