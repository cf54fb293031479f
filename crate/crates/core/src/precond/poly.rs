//! GMRES-polynomial preconditioner p(A) ~ A^-1.
//!
//! `d + 1` Arnoldi steps from a seeded random vector give the residual
//! polynomial pi(t) = 1 - t p(t) of degree `d + 1` minimizing ||pi(A) v||.
//! Low degrees store p in the power basis; higher degrees store the roots of
//! pi (harmonic Ritz values) in Leja order and apply p through the product
//! form, which stays well conditioned in single precision.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dims, Preconditioner};
use crate::csr::CsrMatrix;
use crate::dense::axpy;
use crate::error::{Error, Result};
use crate::krylov::ArnoldiWorkspace;
use crate::precision::{DenseVector, Scalar};
use crate::spmv::spmv_into;
use crate::timing::{Kernel, KernelTimer};

/// Degrees up to this use the power basis unless overridden.
pub const POWER_BASIS_MAX_DEGREE: usize = 10;

/// Root of the residual polynomial; complex roots come in conjugate pairs
/// stored once as `Pair { re, im }` with `im > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NewtonRoot<T> {
    Real(T),
    Pair { re: T, im: T },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolyBasis<T> {
    /// c_0 .. c_d of p(t) = sum c_k t^k.
    Power(Vec<T>),
    /// Roots of 1 - t p(t), Leja ordered.
    NewtonRoots(Vec<NewtonRoot<T>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisChoice {
    Auto,
    Power,
    NewtonRoots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPreconditioner<T> {
    basis: PolyBasis<T>,
}

impl<T: Scalar> PolynomialPreconditioner<T> {
    pub fn from_coefficients(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("polynomial needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        Ok(Self {
            basis: PolyBasis::Power(coeffs),
        })
    }

    pub fn from_roots(roots: Vec<NewtonRoot<T>>) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::InvalidArgument("polynomial needs at least one root".into()));
        }
        let bad = roots.iter().any(|r| match *r {
            NewtonRoot::Real(t) => !t.is_finite() || t == T::zero(),
            NewtonRoot::Pair { re, im } => !re.is_finite() || !im.is_finite() || im <= T::zero(),
        });
        if bad {
            return Err(Error::NonFinite("polynomial roots"));
        }
        Ok(Self {
            basis: PolyBasis::NewtonRoots(roots),
        })
    }

    pub fn basis(&self) -> &PolyBasis<T> {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        match &self.basis {
            PolyBasis::Power(c) => c.len() - 1,
            PolyBasis::NewtonRoots(r) => {
                r.iter()
                    .map(|root| match root {
                        NewtonRoot::Real(_) => 1,
                        NewtonRoot::Pair { .. } => 2,
                    })
                    .sum::<usize>()
                    - 1
            }
        }
    }

    /// Evaluate p at a real scalar (diagnostics and tests).
    pub fn eval(&self, t: f64) -> f64 {
        match &self.basis {
            PolyBasis::Power(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck.as_f64()),
            PolyBasis::NewtonRoots(roots) => {
                let mut pi = 1.0;
                for r in roots {
                    pi *= match *r {
                        NewtonRoot::Real(th) => 1.0 - t / th.as_f64(),
                        NewtonRoot::Pair { re, im } => {
                            let (a, b) = (re.as_f64(), im.as_f64());
                            let m2 = a * a + b * b;
                            1.0 - 2.0 * a * t / m2 + t * t / m2
                        }
                    };
                }
                (1.0 - pi) / t
            }
        }
    }
}

/// Build the degree-`d` GMRES polynomial for `a`, choosing the basis by degree.
pub fn build_poly_precond<T: Scalar>(
    a: &CsrMatrix<T>,
    d: usize,
    seed: u64,
) -> Result<PolynomialPreconditioner<T>> {
    build_poly_precond_with(a, d, seed, BasisChoice::Auto)
}

pub fn build_poly_precond_with<T: Scalar>(
    a: &CsrMatrix<T>,
    d: usize,
    seed: u64,
    choice: BasisChoice,
) -> Result<PolynomialPreconditioner<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("polynomial preconditioner needs a square matrix".into()));
    }
    let n = a.n_rows();
    let steps = (d + 1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<T> = (0..n).map(|_| T::from_f64(rng.random_range(-1.0..1.0))).collect();

    let timer = KernelTimer::new();
    let mut ws = ArnoldiWorkspace::new(n, steps)?;
    let beta = ws.start(&start, &timer)?;
    let mut op = |x: &[T], y: &mut [T]| spmv_into(a, x, y);
    let mut k = 0;
    let mut broke = false;
    while k < steps {
        let step = ws.arnoldi_step(&mut op, &timer)?;
        ws.givens_update();
        k += 1;
        if step.breakdown {
            broke = true;
            break;
        }
    }
    if k < d + 1 {
        log::warn!(
            "polynomial preconditioner: Krylov space exhausted after {k} steps, degree reduced from {d} to {}",
            k - 1
        );
    }
    let degree = k - 1;
    let use_power = match choice {
        BasisChoice::Auto => degree <= POWER_BASIS_MAX_DEGREE,
        BasisChoice::Power => true,
        BasisChoice::NewtonRoots => false,
    };

    let h = ws.hessenberg();
    if use_power {
        let y = ws.solve_least_squares()?;
        let beta = beta.as_f64();
        // v_j = q_j(A) v in the power basis
        let mut q: Vec<Vec<f64>> = vec![vec![1.0 / beta]];
        for j in 0..k - 1 {
            let mut next = vec![0.0; j + 2];
            for (p, &c) in q[j].iter().enumerate() {
                next[p + 1] += c;
            }
            for (i, qi) in q.iter().enumerate().take(j + 1) {
                let hij = h.raw(i, j).as_f64();
                for (p, &c) in qi.iter().enumerate() {
                    next[p] -= hij * c;
                }
            }
            let sub = h.raw(j + 1, j).as_f64();
            next.iter_mut().for_each(|c| *c /= sub);
            q.push(next);
        }
        let mut coeffs = vec![0.0; k];
        for (yj, qj) in y.iter().zip(&q) {
            for (p, &c) in qj.iter().enumerate() {
                coeffs[p] += yj.as_f64() * c;
            }
        }
        PolynomialPreconditioner::from_coefficients(coeffs.into_iter().map(T::from_f64).collect())
    } else {
        let sub = if broke { 0.0 } else { h.raw(k, k - 1).as_f64() };
        let hk = DMatrix::from_fn(k, k, |i, j| h.raw(i, j).as_f64());
        let roots = harmonic_ritz_values(&hk, sub)?;
        let ordered = leja_order(&roots);
        let cast = ordered
            .into_iter()
            .map(|r| match r {
                NewtonRoot::Real(t) => NewtonRoot::Real(T::from_f64(t)),
                NewtonRoot::Pair { re, im } => NewtonRoot::Pair {
                    re: T::from_f64(re),
                    im: T::from_f64(im),
                },
            })
            .collect();
        PolynomialPreconditioner::from_roots(cast)
    }
}

/// Eigenvalues of H + h^2 H^-T e_k e_k^T.
fn harmonic_ritz_values(hk: &DMatrix<f64>, sub: f64) -> Result<Vec<Complex<f64>>> {
    let k = hk.nrows();
    let mut m = hk.clone();
    if sub != 0.0 {
        let mut ek = nalgebra::DVector::zeros(k);
        ek[k - 1] = 1.0;
        let f = hk
            .transpose()
            .lu()
            .solve(&ek)
            .ok_or(Error::SingularHessenberg(k - 1))?;
        for i in 0..k {
            m[(i, k - 1)] += sub * sub * f[i];
        }
    }
    let eig = m.complex_eigenvalues();
    let vals: Vec<Complex<f64>> = eig.iter().copied().collect();
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || z.norm() == 0.0) {
        return Err(Error::NonFinite("harmonic Ritz values"));
    }
    Ok(vals)
}

/// Modified Leja ordering; conjugate pairs stay adjacent.
fn leja_order(vals: &[Complex<f64>]) -> Vec<NewtonRoot<f64>> {
    let scale = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let real_tol = 1e-12 * scale;
    let mut cands: Vec<NewtonRoot<f64>> = Vec::new();
    let mut reals: Vec<f64> = vals.iter().filter(|z| z.im.abs() <= real_tol).map(|z| z.re).collect();
    reals.sort_by(f64::total_cmp);
    cands.extend(reals.into_iter().map(NewtonRoot::Real));
    let mut pairs: Vec<(f64, f64)> = vals
        .iter()
        .filter(|z| z.im > real_tol)
        .map(|z| (z.re, z.im))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cands.extend(pairs.into_iter().map(|(re, im)| NewtonRoot::Pair { re, im }));

    let points = |r: &NewtonRoot<f64>| -> Vec<Complex<f64>> {
        match *r {
            NewtonRoot::Real(t) => vec![Complex::new(t, 0.0)],
            NewtonRoot::Pair { re, im } => vec![Complex::new(re, im), Complex::new(re, -im)],
        }
    };
    let mut chosen: Vec<Complex<f64>> = Vec::new();
    let mut out = Vec::with_capacity(cands.len());
    let mut remaining = cands;
    while !remaining.is_empty() {
        let score = |r: &NewtonRoot<f64>| -> f64 {
            let z = points(r)[0];
            if chosen.is_empty() {
                z.norm().ln()
            } else {
                chosen.iter().map(|c| (z - c).norm().max(f64::MIN_POSITIVE).ln()).sum()
            }
        };
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, r) in remaining.iter().enumerate() {
            let s = score(r);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        let r = remaining.remove(best);
        chosen.extend(points(&r));
        out.push(r);
    }
    out
}

/// y = p(A) x using exactly `degree` SpMV calls.
pub fn apply_poly_into<T: Scalar>(
    p: &PolynomialPreconditioner<T>,
    a: &CsrMatrix<T>,
    x: &[T],
    y: &mut [T],
    timer: &KernelTimer,
) -> Result<()> {
    check_dims("polynomial input", a.n_cols(), x.len())?;
    check_dims("polynomial output", a.n_rows(), y.len())?;
    let n = x.len();
    let spmv = |v: &[T], out: &mut [T]| timer.time(Kernel::SpMV, || spmv_into(a, v, out));
    match &p.basis {
        PolyBasis::Power(c) => {
            let d = c.len() - 1;
            y.iter_mut().zip(x).for_each(|(yi, &xi)| *yi = c[d] * xi);
            let mut t = vec![T::zero(); n];
            for k in (0..d).rev() {
                spmv(y, &mut t)?;
                for i in 0..n {
                    y[i] = t[i] + c[k] * x[i];
                }
            }
        }
        PolyBasis::NewtonRoots(roots) => {
            let mut prod = x.to_vec();
            let mut t = vec![T::zero(); n];
            let mut s = vec![T::zero(); n];
            y.iter_mut().for_each(|v| *v = T::zero());
            let two = T::from_f64(2.0);
            for (idx, root) in roots.iter().enumerate() {
                let last = idx + 1 == roots.len();
                match *root {
                    NewtonRoot::Real(theta) => {
                        let inv = T::one() / theta;
                        axpy(inv, &prod, y);
                        if !last {
                            spmv(&prod, &mut t)?;
                            axpy(-inv, &t, &mut prod);
                        }
                    }
                    NewtonRoot::Pair { re, im } => {
                        let m2 = re * re + im * im;
                        let alpha = two * re / m2;
                        let beta = T::one() / m2;
                        spmv(&prod, &mut t)?;
                        // y += alpha prod - beta A prod
                        axpy(alpha, &prod, y);
                        axpy(-beta, &t, y);
                        if !last {
                            spmv(&t, &mut s)?;
                            axpy(-alpha, &t, &mut prod);
                            axpy(beta, &s, &mut prod);
                        }
                    }
                }
            }
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("polynomial preconditioner apply"));
    }
    Ok(())
}

pub fn apply_poly<T: Scalar>(
    p: &PolynomialPreconditioner<T>,
    a: &CsrMatrix<T>,
    x: &DenseVector<T>,
    timer: &KernelTimer,
) -> Result<DenseVector<T>> {
    let mut y = DenseVector::zeros(a.n_rows());
    apply_poly_into(p, a, x.as_slice(), y.as_mut_slice(), timer)?;
    Ok(y)
}

/// Polynomial bound to the matrix it is evaluated at.
pub struct PolyOperator<'a, T> {
    poly: &'a PolynomialPreconditioner<T>,
    matrix: &'a CsrMatrix<T>,
}

impl<'a, T: Scalar> PolyOperator<'a, T> {
    pub fn new(poly: &'a PolynomialPreconditioner<T>, matrix: &'a CsrMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("polynomial operator needs a square matrix".into()));
        }
        Ok(Self { poly, matrix })
    }
}

impl<T: Scalar> Preconditioner<T> for PolyOperator<'_, T> {
    fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    fn apply(&self, x: &[T], y: &mut [T], timer: &KernelTimer) -> Result<()> {
        apply_poly_into(self.poly, self.matrix, x, y, timer)
    }

    fn label(&self) -> String {
        format!("poly:{}", self.poly.degree())
    }
}
