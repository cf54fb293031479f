//! Block Jacobi: LU-factored dense diagonal blocks over contiguous index ranges.

use super::{check_dims, Preconditioner};
use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::precision::{DenseVector, Scalar};
use crate::timing::KernelTimer;

/// One LU factorization with partial pivoting, column-major, L unit-lower.
#[derive(Debug, Clone)]
struct LuBlock<T> {
    start: usize,
    size: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> LuBlock<T> {
    fn factor(start: usize, size: usize, mut lu: Vec<T>, index: usize) -> Result<Self> {
        let at = |i: usize, j: usize| j * size + i;
        let mut piv = vec![0; size];
        for k in 0..size {
            let mut p = k;
            let mut best = lu[at(k, k)].abs();
            for i in k + 1..size {
                let v = lu[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularBlock(index));
            }
            piv[k] = p;
            if p != k {
                for j in 0..size {
                    lu.swap(at(k, j), at(p, j));
                }
            }
            let inv = T::one() / lu[at(k, k)];
            for i in k + 1..size {
                lu[at(i, k)] *= inv;
            }
            for j in k + 1..size {
                let ukj = lu[at(k, j)];
                if ukj != T::zero() {
                    for i in k + 1..size {
                        let lik = lu[at(i, k)];
                        lu[at(i, j)] -= lik * ukj;
                    }
                }
            }
        }
        Ok(Self {
            start,
            size,
            lu,
            piv,
        })
    }

    fn solve_in_place(&self, b: &mut [T]) {
        let n = self.size;
        let at = |i: usize, j: usize| j * n + i;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for j in 0..n {
            let bj = b[j];
            for i in j + 1..n {
                b[i] -= self.lu[at(i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.lu[at(j, j)];
            let bj = b[j];
            for i in 0..j {
                b[i] -= self.lu[at(i, j)] * bj;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockJacobiPreconditioner<T> {
    n: usize,
    block_size: usize,
    blocks: Vec<LuBlock<T>>,
}

impl<T: Scalar> BlockJacobiPreconditioner<T> {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }
}

/// Extract and factor the diagonal blocks `A[ik..(i+1)k, ik..(i+1)k]`.
pub fn build_block_jacobi<T: Scalar>(
    a: &CsrMatrix<T>,
    k: usize,
) -> Result<BlockJacobiPreconditioner<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("block size must be >= 1".into()));
    }
    if !a.is_square() {
        return Err(Error::InvalidArgument("block Jacobi needs a square matrix".into()));
    }
    let n = a.n_rows();
    let mut blocks = Vec::with_capacity(n.div_ceil(k));
    for (index, start) in (0..n).step_by(k).enumerate() {
        let size = k.min(n - start);
        let mut dense = vec![T::zero(); size * size];
        for r in 0..size {
            let (cols, vals) = a.row(start + r);
            for (&c, &v) in cols.iter().zip(vals) {
                let c = c as usize;
                if c >= start && c < start + size {
                    dense[(c - start) * size + r] = v;
                }
            }
        }
        blocks.push(LuBlock::factor(start, size, dense, index)?);
    }
    Ok(BlockJacobiPreconditioner {
        n,
        block_size: k,
        blocks,
    })
}

impl<T: Scalar> Preconditioner<T> for BlockJacobiPreconditioner<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T], _timer: &KernelTimer) -> Result<()> {
        check_dims("block Jacobi input", self.n, x.len())?;
        check_dims("block Jacobi output", self.n, y.len())?;
        y.copy_from_slice(x);
        for b in &self.blocks {
            b.solve_in_place(&mut y[b.start..b.start + b.size]);
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!("jacobi:{}", self.block_size)
    }
}

pub fn apply_block_jacobi<T: Scalar>(
    m: &BlockJacobiPreconditioner<T>,
    x: &DenseVector<T>,
) -> Result<DenseVector<T>> {
    let mut y = DenseVector::zeros(x.len());
    m.apply(x.as_slice(), y.as_mut_slice(), &KernelTimer::new())?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::tridiagonal;
    use nalgebra::DMatrix;

    /// Inverse of the block-diagonal part of `a` via dense per-block inverses.
    fn block_inverse_oracle(a: &CsrMatrix<f64>, k: usize) -> DMatrix<f64> {
        let n = a.n_rows();
        let mut out = DMatrix::zeros(n, n);
        for start in (0..n).step_by(k) {
            let size = k.min(n - start);
            let blk = DMatrix::from_fn(size, size, |i, j| a.get(start + i, start + j));
            let inv = blk.try_inverse().expect("nonsingular block");
            out.view_mut((start, start), (size, size)).copy_from(&inv);
        }
        out
    }

    #[test]
    fn diagonal_k1_is_inverse() {
        let a = CsrMatrix::from_diagonal(&[2.0, 4.0, -8.0]);
        let m = build_block_jacobi(&a, 1).unwrap();
        let y = apply_block_jacobi(&m, &DenseVector::from(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[0.5, 0.25, -0.125]);
    }

    #[test]
    fn tridiagonal_blocks_match_dense_inverse() {
        let a = tridiagonal(6, -1.0, 2.0, -1.0);
        let m = build_block_jacobi(&a, 2).unwrap();
        assert_eq!(m.num_blocks(), 3);
        let oracle = block_inverse_oracle(&a, 2);
        let x = vec![1.0, -2.0, 0.5, 3.0, -1.0, 2.0];
        let y = apply_block_jacobi(&m, &DenseVector::from(x.clone())).unwrap();
        let expect = oracle * nalgebra::DVector::from_vec(x);
        for (p, q) in y.iter().zip(expect.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_last_block_and_pivoting() {
        // leading zero forces a row swap inside the first block
        let a = CsrMatrix::from_triplets(
            5,
            5,
            vec![
                (0, 1, 1.0),
                (1, 0, 2.0),
                (1, 1, 1.0),
                (2, 2, 3.0),
                (3, 3, 1.0),
                (3, 4, 2.0),
                (4, 3, 4.0),
                (0, 4, 7.0),
            ],
        )
        .unwrap();
        let m = build_block_jacobi(&a, 3).unwrap();
        assert_eq!(m.num_blocks(), 2);
        let oracle = block_inverse_oracle(&a, 3);
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y = apply_block_jacobi(&m, &DenseVector::from(x.clone())).unwrap();
        let expect = oracle * nalgebra::DVector::from_vec(x);
        for (p, q) in y.iter().zip(expect.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_block_is_named() {
        let a = CsrMatrix::from_triplets(4, 4, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0)])
            .unwrap();
        assert!(build_block_jacobi(&a, 2).is_ok());
        let b = CsrMatrix::from_diagonal(&[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(build_block_jacobi(&b, 2), Err(Error::SingularBlock(1))));
        assert!(build_block_jacobi(&b, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn apply_is_linear(seed in 0u64..200, k in 1usize..7) {
            let a = crate::gen::random_sparse(13, 3, 6.0, seed);
            let m = build_block_jacobi(&a, k).unwrap();
            let x: Vec<f64> = (0..13).map(|i| ((i as u64 * 7 + seed) % 5) as f64 - 2.0).collect();
            let z: Vec<f64> = (0..13).map(|i| ((i as u64 * 3 + seed) % 7) as f64 * 0.5).collect();
            let xz: Vec<f64> = x.iter().zip(&z).map(|(p, q)| p + q).collect();
            let f = |v: &[f64]| apply_block_jacobi(&m, &DenseVector::from(v.to_vec())).unwrap();
            let (fx, fz, fxz) = (f(&x), f(&z), f(&xz));
            let oracle = block_inverse_oracle(&a, k);
            let cond = oracle.norm() * 20.0;
            for i in 0..13 {
                proptest::prop_assert!((fxz[i] - fx[i] - fz[i]).abs() <= 100.0 * f64::EPSILON * cond * 10.0);
            }
        }
    }
}
