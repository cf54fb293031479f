//! Right preconditioners and bandwidth-reducing reordering.
//!
//! Preconditioners are applied as `A M^-1 y = b`, `x = M^-1 y`, so the
//! residual seen by GMRES is the residual of the original system.

mod jacobi;
mod poly;
mod rcm;

pub use jacobi::{apply_block_jacobi, build_block_jacobi, BlockJacobiPreconditioner};
pub use poly::{
    apply_poly, apply_poly_into, build_poly_precond, BasisChoice, build_poly_precond_with, NewtonRoot, PolyBasis, PolyOperator,
    PolynomialPreconditioner, POWER_BASIS_MAX_DEGREE,
};
pub use rcm::{bandwidth, rcm_reorder, Permutation};

use crate::error::{Error, Result};
use crate::precision::{convert_slice, DenseVector};
use crate::precision::Scalar;
use crate::timing::KernelTimer;

/// Action of M^-1 on a vector in precision `T`.
pub trait Preconditioner<T: Scalar> {
    fn dim(&self) -> usize;

    /// y = M^-1 x
    fn apply(&self, x: &[T], y: &mut [T], timer: &KernelTimer) -> Result<()>;

    fn label(&self) -> String;
}

pub(crate) fn check_dims(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

/// Applies an fp32 preconditioner to fp64 vectors: round x to fp32, apply,
/// embed the result back into fp64.
pub struct CastPreconditioner<'a> {
    inner: &'a dyn Preconditioner<f32>,
}

impl<'a> CastPreconditioner<'a> {
    pub fn new(inner: &'a dyn Preconditioner<f32>) -> Self {
        Self { inner }
    }
}

impl Preconditioner<f64> for CastPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64], timer: &KernelTimer) -> Result<()> {
        check_dims("cast preconditioner input", self.dim(), x.len())?;
        check_dims("cast preconditioner output", self.dim(), y.len())?;
        let x32: Vec<f32> = convert_slice(x)?;
        let mut y32 = vec![0.0f32; y.len()];
        self.inner.apply(&x32, &mut y32, timer)?;
        for (out, &v) in y.iter_mut().zip(&y32) {
            *out = v as f64;
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!("{} (fp32)", self.inner.label())
    }
}

/// One-shot cast-apply of an fp32 preconditioner to an fp64 vector.
pub fn cast_apply(
    m: &dyn Preconditioner<f32>,
    x: &DenseVector<f64>,
    timer: &KernelTimer,
) -> Result<DenseVector<f64>> {
    let mut y = DenseVector::zeros(x.len());
    CastPreconditioner::new(m).apply(x.as_slice(), y.as_mut_slice(), timer)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csr::{convert_matrix, CsrMatrix};
    use crate::gen::{generate, StencilSpec};

    #[test]
    fn identity_polynomial_rounds_through_fp32() {
        let a32: CsrMatrix<f32> = CsrMatrix::identity(3);
        let p = PolynomialPreconditioner::from_coefficients(vec![1.0f32]).unwrap();
        let op = PolyOperator::new(&p, &a32).unwrap();
        let x = DenseVector::from(vec![std::f64::consts::PI, 1.0 / 3.0, 2.0]);
        let y = cast_apply(&op, &x, &KernelTimer::new()).unwrap();
        for (yi, xi) in y.iter().zip(x.iter()) {
            assert_eq!(*yi, (*xi as f32) as f64);
        }
    }

    #[test]
    fn identity_blocks_are_bitwise() {
        let a32: CsrMatrix<f32> = CsrMatrix::identity(4);
        let m = build_block_jacobi(&a32, 2).unwrap();
        let x = DenseVector::from(vec![0.5, -1.25, 3.0, 1024.0]);
        let y = cast_apply(&m, &x, &KernelTimer::new()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn cast_overflow_is_reported() {
        let a32: CsrMatrix<f32> = CsrMatrix::identity(2);
        let m = build_block_jacobi(&a32, 1).unwrap();
        let x = DenseVector::from(vec![1.0, 1e300]);
        assert!(matches!(
            cast_apply(&m, &x, &KernelTimer::new()),
            Err(Error::Overflow { index: 1 })
        ));
    }

    #[test]
    fn cast_poly_close_to_fp64_apply() {
        let a = generate(&StencilSpec::laplace2d(10)).unwrap();
        let a32: CsrMatrix<f32> = convert_matrix(&a).unwrap();
        let coeffs = vec![0.9, -0.4, 0.07, -0.004];
        let p64 = PolynomialPreconditioner::from_coefficients(coeffs.clone()).unwrap();
        let p32 = PolynomialPreconditioner::from_coefficients(
            coeffs.iter().map(|&c| c as f32).collect(),
        )
        .unwrap();
        let x: DenseVector<f64> = (0..a.n_rows()).map(|i| ((i * 37 % 11) as f64) / 7.0 - 0.6).collect();
        let timer = KernelTimer::new();
        let exact = apply_poly(&p64, &a, &x, &timer).unwrap();
        let op = PolyOperator::new(&p32, &a32).unwrap();
        let cast = cast_apply(&op, &x, &timer).unwrap();
        let xnorm = crate::dense::norm2(x.as_slice());
        for (p, q) in exact.iter().zip(cast.iter()) {
            assert!((p - q).abs() <= 1e3 * 2f64.powi(-24) * xnorm);
        }
    }
}
