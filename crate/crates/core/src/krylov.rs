//! Arnoldi process with two-pass classical Gram-Schmidt (CGS2) and the
//! Givens-rotation least-squares update of the Hessenberg system.

use crate::dense::{gemv, norm2, DenseMatrix, MultiVector, Transpose};
use crate::error::{Error, Result};
use crate::precision::Scalar;
use crate::timing::{Kernel, KernelTimer};

/// The (m+1) x m upper-Hessenberg least-squares problem min ||gamma e1 - H y||.
///
/// Keeps the raw Arnoldi coefficients alongside their Givens-reduced form so
/// the Arnoldi relation can be checked after the fact.
#[derive(Debug, Clone)]
pub struct HessenbergLs<T> {
    m: usize,
    raw: DenseMatrix<T>,
    reduced: DenseMatrix<T>,
    cos: Vec<T>,
    sin: Vec<T>,
    rhs: Vec<T>,
    filled: usize,
    rotated: usize,
}

impl<T: Scalar> HessenbergLs<T> {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            raw: DenseMatrix::zeros(m + 1, m),
            reduced: DenseMatrix::zeros(m + 1, m),
            cos: vec![T::one(); m],
            sin: vec![T::zero(); m],
            rhs: vec![T::zero(); m + 1],
            filled: 0,
            rotated: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.m
    }

    /// Start a new cycle with right-hand side gamma * e1.
    pub fn reset(&mut self, gamma: T) {
        self.rhs.iter_mut().for_each(|v| *v = T::zero());
        self.rhs[0] = gamma;
        self.filled = 0;
        self.rotated = 0;
    }

    /// Store column `j`: entries 0..=j from `h_col` and `h_subdiag` at row j+1.
    pub fn set_column(&mut self, j: usize, h_col: &[T], h_subdiag: T) {
        assert!(j < self.m && j == self.filled, "columns must be filled in order");
        assert_eq!(h_col.len(), j + 1);
        for target in [&mut self.raw, &mut self.reduced] {
            let col = target.col_mut(j);
            col.iter_mut().for_each(|v| *v = T::zero());
            col[..=j].copy_from_slice(h_col);
            col[j + 1] = h_subdiag;
        }
        self.filled = j + 1;
    }

    /// Mutable access to the not-yet-rotated column `j` (diagnostic use).
    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        assert!(j < self.filled && j >= self.rotated, "column already reduced");
        self.reduced.col_mut(j)
    }

    /// Apply earlier rotations to column `j`, annihilate its subdiagonal and
    /// rotate the right-hand side. Returns the implicit residual norm.
    pub fn givens_update(&mut self, j: usize) -> T {
        assert!(j == self.rotated && j < self.filled, "givens_update out of order");
        let col = self.reduced.col_mut(j);
        for i in 0..j {
            let (c, s) = (self.cos[i], self.sin[i]);
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = c * b - s * a;
        }
        let (a, b) = (col[j], col[j + 1]);
        let (c, s) = if b == T::zero() {
            (T::one(), T::zero())
        } else {
            let r = a.hypot(b);
            (a / r, b / r)
        };
        col[j] = c * a + s * b;
        col[j + 1] = T::zero();
        self.cos[j] = c;
        self.sin[j] = s;
        let g = self.rhs[j];
        self.rhs[j] = c * g;
        self.rhs[j + 1] = -s * g;
        self.rotated = j + 1;
        self.rhs[j + 1].abs()
    }

    pub fn implicit_resnorm(&self) -> T {
        self.rhs[self.rotated].abs()
    }

    pub fn rotation(&self, j: usize) -> (T, T) {
        (self.cos[j], self.sin[j])
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    /// Unrotated Hessenberg entry h_{i,j} (0-based).
    pub fn raw(&self, i: usize, j: usize) -> T {
        self.raw[(i, j)]
    }

    /// Triangular factor entry after rotation.
    pub fn reduced(&self, i: usize, j: usize) -> T {
        self.reduced[(i, j)]
    }

    /// Back-substitution on the first `j` rotated columns.
    pub fn solve_least_squares(&self, j: usize) -> Result<Vec<T>> {
        assert!(j <= self.rotated, "rotations not applied through step {j}");
        let mut d = self.rhs[..j].to_vec();
        for i in (0..j).rev() {
            let mut s = d[i];
            for k in i + 1..j {
                s -= self.reduced[(i, k)] * d[k];
            }
            let diag = self.reduced[(i, i)];
            if diag == T::zero() || !diag.is_finite() {
                return Err(Error::SingularHessenberg(i));
            }
            d[i] = s / diag;
        }
        Ok(d)
    }
}

/// Result of one Arnoldi step.
#[derive(Debug, Clone)]
pub struct ArnoldiStep<T> {
    /// h_{0..=j, j}: sum of both Gram-Schmidt passes.
    pub h_col: Vec<T>,
    pub h_subdiag: T,
    pub breakdown: bool,
}

/// Per-cycle Arnoldi state: basis V, Hessenberg system and scratch space.
#[derive(Debug, Clone)]
pub struct ArnoldiWorkspace<T> {
    basis: MultiVector<T>,
    hess: HessenbergLs<T>,
    w: Vec<T>,
    pass1: Vec<T>,
    pass2: Vec<T>,
    steps: usize,
    breakdown_tol: T,
}

impl<T: Scalar> ArnoldiWorkspace<T> {
    /// Workspace for up to `m` steps on vectors of length `n`, with the
    /// default breakdown tolerance of `10 u`.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::with_breakdown_tol(n, m, T::from_f64(10.0) * T::unit_roundoff())
    }

    pub fn with_breakdown_tol(n: usize, m: usize, breakdown_tol: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("restart length must be >= 1".into()));
        }
        Ok(Self {
            basis: MultiVector::with_capacity(n, m + 1)?,
            hess: HessenbergLs::new(m),
            w: vec![T::zero(); n],
            pass1: Vec::with_capacity(m + 1),
            pass2: Vec::with_capacity(m + 1),
            steps: 0,
            breakdown_tol,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn m(&self) -> usize {
        self.hess.capacity()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn basis(&self) -> &MultiVector<T> {
        &self.basis
    }

    pub fn hessenberg(&self) -> &HessenbergLs<T> {
        &self.hess
    }

    pub fn hessenberg_mut(&mut self) -> &mut HessenbergLs<T> {
        &mut self.hess
    }

    pub fn breakdown_tol(&self) -> T {
        self.breakdown_tol
    }

    /// Begin a cycle from residual `r0`: v1 = r0 / ||r0||. Returns gamma.
    /// A zero residual leaves the basis empty.
    pub fn start(&mut self, r0: &[T], timer: &KernelTimer) -> Result<T> {
        if r0.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "arnoldi start vector",
                expected: self.n(),
                found: r0.len(),
            });
        }
        self.basis.clear();
        self.steps = 0;
        let gamma = timer.time(Kernel::Norm, || norm2(r0));
        if !gamma.is_finite() {
            return Err(Error::NonFinite("initial residual"));
        }
        self.hess.reset(gamma);
        if gamma > T::zero() {
            let inv = T::one() / gamma;
            self.w.iter_mut().zip(r0).for_each(|(w, &r)| *w = r * inv);
            self.basis.push(&self.w);
        }
        Ok(gamma)
    }

    /// Extend the basis by one vector using `op` (A, or A M^-1 under right
    /// preconditioning) and store the new Hessenberg column.
    pub fn arnoldi_step(
        &mut self,
        op: &mut dyn FnMut(&[T], &mut [T]) -> Result<()>,
        timer: &KernelTimer,
    ) -> Result<ArnoldiStep<T>> {
        let j = self.steps;
        if j >= self.m() {
            return Err(Error::InvalidArgument(format!(
                "arnoldi step {j} exceeds restart length {}",
                self.m()
            )));
        }
        if self.basis.count() != j + 1 {
            return Err(Error::InvalidArgument(
                "arnoldi step requires a started, unbroken basis".into(),
            ));
        }
        let n = self.n();
        let mut w = std::mem::take(&mut self.w);
        let applied = op(self.basis.col(j), &mut w);
        if let Err(e) = applied {
            self.w = w;
            return Err(e);
        }
        if w.len() != n {
            let found = w.len();
            w.resize(n, T::zero());
            self.w = w;
            return Err(Error::DimensionMismatch {
                context: "operator output",
                expected: n,
                found,
            });
        }
        let w_init = timer.time(Kernel::Norm, || norm2(&w));
        if !w_init.is_finite() {
            self.w = w;
            return Err(Error::NonFinite("arnoldi operator output"));
        }

        let v = self.basis.leading(j + 1);
        self.pass1.resize(j + 1, T::zero());
        self.pass2.resize(j + 1, T::zero());
        for pass in [&mut self.pass1, &mut self.pass2] {
            timer.time(Kernel::GemvTrans, || {
                gemv(v, Transpose::Yes, T::one(), &w, T::zero(), pass)
            })?;
            timer.time(Kernel::GemvNoTrans, || {
                gemv(v, Transpose::No, -T::one(), pass, T::one(), &mut w)
            })?;
        }
        let h_col: Vec<T> = self
            .pass1
            .iter()
            .zip(&self.pass2)
            .map(|(&a, &b)| a + b)
            .collect();
        let h_subdiag = timer.time(Kernel::Norm, || norm2(&w));
        if !h_subdiag.is_finite() || h_col.iter().any(|h| !h.is_finite()) {
            self.w = w;
            return Err(Error::NonFinite("arnoldi orthogonalization"));
        }
        let breakdown = h_subdiag <= self.breakdown_tol * w_init;
        if !breakdown {
            let inv = T::one() / h_subdiag;
            w.iter_mut().for_each(|x| *x *= inv);
            self.basis.push(&w);
        }
        self.w = w;
        self.hess.set_column(j, &h_col, h_subdiag);
        self.steps = j + 1;
        Ok(ArnoldiStep {
            h_col,
            h_subdiag,
            breakdown,
        })
    }

    /// Rotate the latest column; returns the implicit residual norm.
    pub fn givens_update(&mut self) -> T {
        self.hess.givens_update(self.steps - 1)
    }

    pub fn solve_least_squares(&self) -> Result<Vec<T>> {
        self.hess.solve_least_squares(self.steps)
    }

    /// Loss of orthogonality max |V^T V - I| over the populated columns.
    pub fn orthogonality_loss(&self) -> f64 {
        let k = self.basis.count();
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let d: f64 = self
                    .basis
                    .col(a)
                    .iter()
                    .zip(self.basis.col(b))
                    .map(|(&x, &y)| x.as_f64() * y.as_f64())
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csr::CsrMatrix;
    use crate::spmv::spmv_into;

    fn op_for<'a>(a: &'a CsrMatrix<f64>) -> impl FnMut(&[f64], &mut [f64]) -> Result<()> + 'a {
        move |x, y| spmv_into(a, x, y)
    }

    #[test]
    fn identity_breaks_down_immediately() {
        let a = CsrMatrix::<f64>::identity(3);
        let timer = KernelTimer::new();
        let mut ws = ArnoldiWorkspace::new(3, 3).unwrap();
        ws.start(&[1.0, 0.0, 0.0], &timer).unwrap();
        let step = ws.arnoldi_step(&mut op_for(&a), &timer).unwrap();
        assert_eq!(step.h_col, vec![1.0]);
        assert!(step.h_subdiag.abs() < 1e-15);
        assert!(step.breakdown);
        assert_eq!(timer.calls(Kernel::GemvTrans), 2);
        assert_eq!(timer.calls(Kernel::GemvNoTrans), 2);
    }

    #[test]
    fn permutation_step() {
        let a = CsrMatrix::new(2, 2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).unwrap();
        let timer = KernelTimer::new();
        let mut ws = ArnoldiWorkspace::new(2, 2).unwrap();
        ws.start(&[1.0, 0.0], &timer).unwrap();
        let step = ws.arnoldi_step(&mut op_for(&a), &timer).unwrap();
        assert_eq!(step.h_col, vec![0.0]);
        assert_eq!(step.h_subdiag, 1.0);
        assert!(!step.breakdown);
        assert_eq!(ws.basis().col(1), &[0.0, 1.0]);
    }

    #[test]
    fn operator_errors_surface() {
        let timer = KernelTimer::new();
        let mut ws = ArnoldiWorkspace::<f64>::new(2, 2).unwrap();
        ws.start(&[1.0, 1.0], &timer).unwrap();
        let mut nan = |_: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = f64::NAN);
            Ok(())
        };
        assert!(matches!(ws.arnoldi_step(&mut nan, &timer), Err(Error::NonFinite(_))));
        let mut short = |_: &[f64], y: &mut [f64]| {
            let _ = y;
            Err(Error::DimensionMismatch {
                context: "test",
                expected: 2,
                found: 1,
            })
        };
        assert!(ws.arnoldi_step(&mut short, &timer).is_err());
    }

    #[test]
    fn trivially_triangular_column() {
        let mut h = HessenbergLs::<f64>::new(1);
        h.reset(6.0);
        h.set_column(0, &[2.0], 0.0);
        assert_eq!(h.givens_update(0), 0.0);
        assert_eq!(h.solve_least_squares(1).unwrap(), vec![3.0]);
    }

    #[test]
    fn equal_entries_rotate_by_forty_five_degrees() {
        let mut h = HessenbergLs::<f64>::new(1);
        h.reset(1.0);
        h.set_column(0, &[1.0], 1.0);
        let res = h.givens_update(0);
        let (c, s) = h.rotation(0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c - r).abs() < 1e-15 && (s - r).abs() < 1e-15);
        assert!((res - r).abs() < 1e-15);
        // min over y of ||[1,0] - [1,1] y|| is at y = 1/2
        assert!((h.solve_least_squares(1).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diagonal_solve() {
        let mut h = HessenbergLs::<f64>::new(2);
        h.reset(4.0);
        h.set_column(0, &[2.0], 0.0);
        h.givens_update(0);
        h.set_column(1, &[0.0, 5.0], 0.0);
        h.givens_update(1);
        assert_eq!(h.solve_least_squares(2).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn zero_diagonal_is_singular() {
        let mut h = HessenbergLs::<f64>::new(1);
        h.reset(1.0);
        h.set_column(0, &[0.0], 0.0);
        h.givens_update(0);
        assert!(matches!(h.solve_least_squares(1), Err(Error::SingularHessenberg(0))));
    }

    #[test]
    fn two_step_matches_normal_equations() {
        // H = [[2, 1], [1, 3], [0, 1]], gamma = 1
        let mut h = HessenbergLs::<f64>::new(2);
        h.reset(1.0);
        h.set_column(0, &[2.0], 1.0);
        h.givens_update(0);
        h.set_column(1, &[1.0, 3.0], 1.0);
        let res = h.givens_update(1);
        let d = h.solve_least_squares(2).unwrap();
        // normal equations: (H^T H) y = H^T e1
        let (a11, a12, a22) = (5.0, 5.0, 11.0);
        let (b1, b2) = (2.0, 1.0);
        let det = a11 * a22 - a12 * a12;
        let y = [(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det];
        assert!((d[0] - y[0]).abs() < 1e-12 && (d[1] - y[1]).abs() < 1e-12);
        let r = [1.0 - 2.0 * y[0] - y[1], -y[0] - 3.0 * y[1], -y[1]];
        let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        assert!((res - rn).abs() < 1e-12);
    }

    #[test]
    fn implicit_resnorm_non_increasing() {
        let a = crate::gen::generate(&crate::gen::StencilSpec::bent_pipe2d(8)).unwrap();
        let timer = KernelTimer::new();
        let mut ws = ArnoldiWorkspace::new(a.n_rows(), 30).unwrap();
        let r0: Vec<f64> = (0..a.n_rows()).map(|i| (i as f64).sin() + 1.5).collect();
        ws.start(&r0, &timer).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..30 {
            let step = ws.arnoldi_step(&mut op_for(&a), &timer).unwrap();
            let res = ws.givens_update();
            assert!(res <= prev);
            prev = res;
            if step.breakdown {
                break;
            }
        }
    }
}
