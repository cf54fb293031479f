//! Dense micro-kernels: dot, norm, axpy and GEMV over column-major storage.
//!
//! Every reduction uses a fixed summation order, so results are bitwise
//! reproducible for a given input.

use crate::error::{Error, Result};
use crate::precision::{DenseVector, Scalar};

const PAIRWISE_BLOCK: usize = 128;

fn pairwise_sum<T: Scalar>(n: usize, term: &impl Fn(usize) -> T, start: usize) -> T {
    if n <= PAIRWISE_BLOCK {
        let mut acc = T::zero();
        for i in start..start + n {
            acc += term(i);
        }
        acc
    } else {
        let half = n / 2;
        pairwise_sum(half, term, start) + pairwise_sum(n - half, term, start + half)
    }
}

/// Inner product accumulated pairwise in `T`.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    pairwise_sum(x.len(), &|i| x[i] * y[i], 0)
}

/// Euclidean norm accumulated in the vector's own precision, with a
/// compensated sum of squares in sequential order.
pub fn norm2<T: Scalar>(x: &[T]) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for &v in x {
        let sq = v * v;
        let t = sum + sq;
        if sum.abs() >= sq {
            comp += (sum - t) + sq;
        } else {
            comp += (sq - t) + sum;
        }
        sum = t;
    }
    (sum + comp).sqrt()
}

pub fn norm2_vec<T: Scalar>(x: &DenseVector<T>) -> T {
    norm2(x.as_slice())
}

/// y += alpha * x
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn norm_inf<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Borrowed column-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a, T> {
    pub nrows: usize,
    pub ncols: usize,
    data: &'a [T],
}

impl<'a, T: Scalar> MatRef<'a, T> {
    pub fn new(nrows: usize, ncols: usize, data: &'a [T]) -> Result<Self> {
        if data.len() < nrows * ncols {
            return Err(Error::DimensionMismatch {
                context: "column-major storage",
                expected: nrows * ncols,
                found: data.len(),
            });
        }
        Ok(Self {
            nrows,
            ncols,
            data: &data[..nrows * ncols],
        })
    }

    pub fn col(&self, j: usize) -> &'a [T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.nrows + i]
    }
}

/// Owned column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    /// Build from row-major nested rows (convenient for literals).
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    context: "dense matrix row",
                    expected: ncols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_ref(&self) -> MatRef<'_, T> {
        MatRef {
            nrows: self.nrows,
            ncols: self.ncols,
            data: &self.data,
        }
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[j * self.nrows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[j * self.nrows + i]
    }
}

/// Block of up to `capacity` basis vectors of length `n`, stored contiguously.
#[derive(Debug, Clone)]
pub struct MultiVector<T> {
    n: usize,
    capacity: usize,
    count: usize,
    data: Vec<T>,
}

impl<T: Scalar> MultiVector<T> {
    /// Allocate storage, surfacing allocation failure as [`Error::Resource`].
    pub fn with_capacity(n: usize, capacity: usize) -> Result<Self> {
        let len = n
            .checked_mul(capacity)
            .ok_or_else(|| Error::Resource(format!("basis of {capacity} vectors of length {n}")))?;
        let mut data = Vec::new();
        data.try_reserve_exact(len).map_err(|_| {
            Error::Resource(format!(
                "cannot allocate {capacity} basis vectors of length {n} ({} bytes)",
                len.saturating_mul(std::mem::size_of::<T>())
            ))
        })?;
        data.resize(len, T::zero());
        Ok(Self {
            n,
            capacity,
            count: 0,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.count = 0;
    }

    pub fn col(&self, j: usize) -> &[T] {
        assert!(j < self.count, "column {j} not populated");
        &self.data[j * self.n..(j + 1) * self.n]
    }

    /// Append a column; panics when full.
    pub fn push(&mut self, v: &[T]) {
        assert!(self.count < self.capacity, "multivector full");
        assert_eq!(v.len(), self.n);
        let j = self.count;
        self.data[j * self.n..(j + 1) * self.n].copy_from_slice(v);
        self.count += 1;
    }

    /// First `k` populated columns as a matrix view.
    pub fn leading(&self, k: usize) -> MatRef<'_, T> {
        assert!(k <= self.count);
        MatRef {
            nrows: self.n,
            ncols: k,
            data: &self.data[..k * self.n],
        }
    }

    pub fn as_ref(&self) -> MatRef<'_, T> {
        self.leading(self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// y <- alpha * op(A) * x + beta * y, entirely in `T`.
///
/// With `Transpose::Yes` each output entry is a pairwise-accumulated column
/// dot product; with `Transpose::No` columns are accumulated left to right.
pub fn gemv<T: Scalar>(
    a: MatRef<'_, T>,
    trans: Transpose,
    alpha: T,
    x: &[T],
    beta: T,
    y: &mut [T],
) -> Result<()> {
    let (xlen, ylen) = match trans {
        Transpose::No => (a.ncols, a.nrows),
        Transpose::Yes => (a.nrows, a.ncols),
    };
    if x.len() != xlen {
        return Err(Error::DimensionMismatch {
            context: "gemv x",
            expected: xlen,
            found: x.len(),
        });
    }
    if y.len() != ylen {
        return Err(Error::DimensionMismatch {
            context: "gemv y",
            expected: ylen,
            found: y.len(),
        });
    }
    match trans {
        Transpose::Yes => {
            for (j, yj) in y.iter_mut().enumerate() {
                let d = dot(a.col(j), x);
                *yj = if beta == T::zero() {
                    alpha * d
                } else {
                    alpha * d + beta * *yj
                };
            }
        }
        Transpose::No => {
            if beta == T::zero() {
                y.iter_mut().for_each(|v| *v = T::zero());
            } else if beta != T::one() {
                scale(beta, y);
            }
            for (j, &xj) in x.iter().enumerate() {
                axpy(alpha * xj, a.col(j), y);
            }
        }
    }
    Ok(())
}

/// Convenience wrapper over [`gemv`] for owned vectors.
pub fn gemv_vec<T: Scalar>(
    a: MatRef<'_, T>,
    trans: Transpose,
    alpha: T,
    x: &DenseVector<T>,
    beta: T,
    y: &DenseVector<T>,
) -> Result<DenseVector<T>> {
    let mut out = y.clone();
    gemv(a, trans, alpha, x.as_slice(), beta, out.as_mut_slice())?;
    Ok(out)
}
