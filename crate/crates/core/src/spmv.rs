//! CSR matrix-vector product and the cache-reuse speedup model.
//!
//! The model compares fp64 SpMV with no reuse of `x` in cache against fp32
//! SpMV with perfect reuse of `x`. Reads of the row pointers and writes to
//! `y` are ignored.

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::precision::{DenseVector, Scalar};

pub const SIZE_INT: f64 = 4.0;
pub const SIZE_FLOAT: f64 = 4.0;
pub const SIZE_DOUBLE: f64 = 8.0;

/// y = A x with per-row sequential accumulation in `T`.
pub fn spmv_into<T: Scalar>(a: &CsrMatrix<T>, x: &[T], y: &mut [T]) -> Result<()> {
    if x.len() != a.n_cols() {
        return Err(Error::DimensionMismatch {
            context: "spmv x",
            expected: a.n_cols(),
            found: x.len(),
        });
    }
    if y.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "spmv y",
            expected: a.n_rows(),
            found: y.len(),
        });
    }
    let row_ptr = a.row_ptr();
    let col_idx = a.col_idx();
    let values = a.values();
    for (r, yr) in y.iter_mut().enumerate() {
        let mut acc = T::zero();
        for k in row_ptr[r]..row_ptr[r + 1] {
            acc += values[k] * x[col_idx[k] as usize];
        }
        *yr = acc;
    }
    Ok(())
}

pub fn spmv<T: Scalar>(a: &CsrMatrix<T>, x: &DenseVector<T>) -> Result<DenseVector<T>> {
    let mut y = DenseVector::zeros(a.n_rows());
    spmv_into(a, x.as_slice(), y.as_mut_slice())?;
    Ok(y)
}

/// Inputs of the cache-read volume model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpmvModelInput {
    /// Average nonzeros per row.
    pub w: f64,
    /// Number of rows.
    pub n: usize,
}

impl SpmvModelInput {
    pub fn new(w: f64, n: usize) -> Result<Self> {
        if !(w >= 1.0) || !w.is_finite() {
            return Err(Error::Domain(format!("nonzeros per row must be >= 1, got {w}")));
        }
        if n == 0 {
            return Err(Error::Domain("row count must be positive".into()));
        }
        Ok(Self { w, n })
    }

    pub fn from_matrix<T: Scalar>(a: &CsrMatrix<T>) -> Result<Self> {
        Self::new(a.avg_nnz_row(), a.n_rows())
    }
}

/// Bytes read into cache by one SpMV in each precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheReadVolumes {
    pub double_reads: f64,
    pub float_reads: f64,
}

impl CacheReadVolumes {
    pub fn ratio(&self) -> f64 {
        self.double_reads / self.float_reads
    }
}

pub fn cache_read_volumes(input: SpmvModelInput) -> CacheReadVolumes {
    let n = input.n as f64;
    let w = input.w;
    CacheReadVolumes {
        // one value, one column index and one uncached x entry per nonzero
        double_reads: n * w * (SIZE_INT + 2.0 * SIZE_DOUBLE),
        // x is read once per row-length of work
        float_reads: n * w * (SIZE_INT + SIZE_FLOAT) + n * SIZE_FLOAT,
    }
}

/// Expected fp64 to fp32 SpMV speedup, 5w / (2w + 1).
pub fn predicted_speedup(w: f64) -> Result<f64> {
    if !(w >= 1.0) || !w.is_finite() {
        return Err(Error::Domain(format!("nonzeros per row must be >= 1, got {w}")));
    }
    Ok(5.0 * w / (2.0 * w + 1.0))
}
