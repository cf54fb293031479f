//! Restarted GMRES drivers: single-precision GMRES(m), GMRES with iterative
//! refinement (fp32 inner cycles, fp64 residuals), and float-then-double
//! precision switching.
//!
//! Inside a cycle the stopping test uses the implicit (Givens) residual. At
//! every restart the residual is recomputed explicitly and convergence is
//! declared only on the explicit value. A cycle whose implicit residual
//! claims convergence while the explicit relative residual exceeds
//! `10 * rtol` marks the solve with `loss_of_accuracy`.
//!
//! Kernel time attribution: SpMVs of the Arnoldi operator (including those
//! inside preconditioner applies), the Gram-Schmidt GEMVs and norms are
//! timed individually. Restart-boundary residual recomputation, precision
//! casts and vector updates fall into `Other`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::csr::{convert_matrix, CsrMatrix};
use crate::dense::{axpy, gemv, norm2, Transpose};
use crate::error::{Error, Result};
use crate::krylov::ArnoldiWorkspace;
use crate::precision::{convert_slice, Precision, Scalar};
use crate::precond::Preconditioner;
use crate::spmv::spmv_into;
use crate::timing::{Kernel, KernelTimer, KernelTimes};

pub const DEFAULT_RTOL: f64 = 1e-10;
pub const DEFAULT_RESTART: usize = 50;
pub const DEFAULT_MAX_ITERS: usize = 20_000;

/// Explicit/implicit mismatch factor that flags a false convergence signal.
pub const LOSS_OF_ACCURACY_FACTOR: f64 = 10.0;

/// Relative improvement below which consecutive restarts count as stalled.
const STALL_IMPROVEMENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    /// Relative residual tolerance ||b - Ax|| / ||b||.
    pub rtol: f64,
    pub max_iters: usize,
    /// Restart length.
    pub m: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            max_iters: DEFAULT_MAX_ITERS,
            m: DEFAULT_RESTART,
        }
    }
}

impl StopCriteria {
    pub fn new(rtol: f64, max_iters: usize, m: usize) -> Result<Self> {
        let c = Self { rtol, max_iters, m };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rtol must lie in (0, 1), got {}",
                self.rtol
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("restart length m must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Double,
    Single,
    IR,
    FD,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Double => "double",
            SolverKind::Single => "single",
            SolverKind::IR => "ir",
            SolverKind::FD => "fd",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "double" | "fp64" => Ok(SolverKind::Double),
            "single" | "fp32" => Ok(SolverKind::Single),
            "ir" | "gmres-ir" => Ok(SolverKind::IR),
            "fd" | "gmres-fd" => Ok(SolverKind::FD),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub iteration: usize,
    pub implicit_relres: f64,
    /// Present at iteration 0 and at every restart boundary.
    pub explicit_relres: Option<f64>,
    pub phase: Precision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub converged: bool,
    pub total_iters: usize,
    pub iters_fp32: usize,
    pub iters_fp64: usize,
    pub residual_history: Vec<ResidualRecord>,
    pub kernel_times: KernelTimes,
    pub loss_of_accuracy: bool,
    /// Last explicitly computed relative residual.
    pub final_relres: f64,
    /// Smallest explicit relative residual seen.
    pub best_relres: f64,
    /// Iteration at which restarts stopped improving by at least 1%.
    pub stalled_at: Option<usize>,
    pub restarts: usize,
    pub solve_time: f64,
}

impl SolveReport {
    /// Restart-boundary explicit residuals as (iteration, relres).
    pub fn explicit_history(&self) -> Vec<(usize, f64)> {
        self.residual_history
            .iter()
            .filter_map(|r| r.explicit_relres.map(|e| (r.iteration, e)))
            .collect()
    }
}

/// Diagnostic knobs that do not change the algorithm under normal use.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    /// Scale every new Hessenberg diagonal entry by `1 + p` before rotation.
    /// Breaks the Arnoldi relation on purpose so that implicit and explicit
    /// residuals diverge.
    pub hessenberg_perturbation: Option<f64>,
    /// Relative lucky-breakdown threshold; defaults to `10 u`.
    pub breakdown_tol: Option<f64>,
}

struct CycleResult<T> {
    /// V d, the update in the (right-preconditioned) Krylov space.
    update: Vec<T>,
    /// Implicit residual norm after each step.
    implicit: Vec<T>,
    breakdown: bool,
    implicit_converged: bool,
}

impl<T> CycleResult<T> {
    fn steps(&self) -> usize {
        self.implicit.len()
    }
}

fn run_cycle<T: Scalar>(
    ws: &mut ArnoldiWorkspace<T>,
    op: &mut dyn FnMut(&[T], &mut [T]) -> Result<()>,
    r0: &[T],
    max_steps: usize,
    target: T,
    timer: &KernelTimer,
    opts: &SolveOptions,
) -> Result<CycleResult<T>> {
    let n = r0.len();
    let gamma = ws.start(r0, timer)?;
    let mut out = CycleResult {
        update: vec![T::zero(); n],
        implicit: Vec::new(),
        breakdown: false,
        implicit_converged: gamma <= target,
    };
    if gamma == T::zero() {
        return Ok(out);
    }
    for j in 0..max_steps.min(ws.m()) {
        let step = ws.arnoldi_step(op, timer)?;
        if let Some(p) = opts.hessenberg_perturbation {
            let col = ws.hessenberg_mut().column_mut(j);
            col[j] *= T::one() + T::from_f64(p);
        }
        let res = ws.givens_update();
        if !res.is_finite() {
            return Err(Error::NonFinite("implicit residual"));
        }
        out.implicit.push(res);
        if res <= target {
            out.implicit_converged = true;
            break;
        }
        if step.breakdown {
            out.breakdown = true;
            break;
        }
    }
    let d = ws.solve_least_squares()?;
    let k = d.len();
    timer.time(Kernel::GemvNoTrans, || {
        gemv(
            ws.basis().leading(k),
            Transpose::No,
            T::one(),
            &d,
            T::zero(),
            &mut out.update,
        )
    })?;
    Ok(out)
}

/// Result of a single GMRES cycle.
#[derive(Debug, Clone)]
pub struct CycleOutcome<T> {
    pub x: Vec<T>,
    pub implicit_history: Vec<T>,
    pub steps_taken: usize,
    pub breakdown: bool,
}

/// One cycle of at most `m` Arnoldi steps from `x0`, stopping early when the
/// implicit relative residual reaches `rtol` or on lucky breakdown.
pub fn gmres_cycle<T: Scalar>(
    op: &mut dyn FnMut(&[T], &mut [T]) -> Result<()>,
    b: &[T],
    x0: &[T],
    m: usize,
    rtol: f64,
) -> Result<CycleOutcome<T>> {
    let n = b.len();
    check_len("initial guess", n, x0.len())?;
    let timer = KernelTimer::new();
    let mut r = vec![T::zero(); n];
    op(x0, &mut r)?;
    check_len("operator output", n, r.len())?;
    r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
    let bnorm = norm2(b);
    let mut ws = ArnoldiWorkspace::new(n, m)?;
    let target = T::from_f64(rtol) * bnorm;
    let cycle = run_cycle(&mut ws, op, &r, m, target, &timer, &SolveOptions::default())?;
    let mut x = x0.to_vec();
    axpy(T::one(), &cycle.update, &mut x);
    Ok(CycleOutcome {
        x,
        steps_taken: cycle.steps(),
        implicit_history: cycle.implicit,
        breakdown: cycle.breakdown,
    })
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// r = b - A x and its 2-norm, in A's precision.
pub fn explicit_residual<T: Scalar>(a: &CsrMatrix<T>, b: &[T], x: &[T]) -> Result<(T, Vec<T>)> {
    check_len("residual rhs", a.n_rows(), b.len())?;
    let mut r = vec![T::zero(); a.n_rows()];
    spmv_into(a, x, &mut r)?;
    r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
    let norm = norm2(&r);
    Ok((norm, r))
}

/// Tracks restart-boundary residuals for stall diagnostics.
#[derive(Default)]
struct StallMonitor {
    last: Option<f64>,
    streak: usize,
    stalled_at: Option<usize>,
}

impl StallMonitor {
    fn observe(&mut self, iteration: usize, relres: f64) {
        if let Some(prev) = self.last {
            if relres > prev * (1.0 - STALL_IMPROVEMENT) {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            if self.streak >= 2 && self.stalled_at.is_none() {
                self.stalled_at = Some(iteration);
            }
        }
        self.last = Some(relres);
    }
}

/// Operator A M^-1 with an owned scratch buffer.
fn right_preconditioned<'a, T: Scalar>(
    a: &'a CsrMatrix<T>,
    precond: Option<&'a dyn Preconditioner<T>>,
    timer: &'a KernelTimer,
) -> impl FnMut(&[T], &mut [T]) -> Result<()> + 'a {
    let mut scratch = vec![T::zero(); a.n_cols()];
    move |v, w| match precond {
        None => timer.time(Kernel::SpMV, || spmv_into(a, v, w)),
        Some(m) => {
            m.apply(v, &mut scratch, timer)?;
            timer.time(Kernel::SpMV, || spmv_into(a, &scratch, w))
        }
    }
}

fn validate_system<T: Scalar>(a: &CsrMatrix<T>, b: usize, x0: usize) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("GMRES needs a square matrix".into()));
    }
    check_len("right-hand side", a.n_rows(), b)?;
    check_len("initial guess", a.n_rows(), x0)
}

/// Restarted GMRES(m) entirely in precision `T`, optionally right
/// preconditioned. Hitting `max_iters` yields an unconverged report.
pub fn gmres_restarted<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: &[T],
    criteria: &StopCriteria,
    precond: Option<&dyn Preconditioner<T>>,
) -> Result<SolveReport> {
    gmres_restarted_with(a, b, x0, criteria, precond, &SolveOptions::default())
}

pub fn gmres_restarted_with<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: &[T],
    criteria: &StopCriteria,
    precond: Option<&dyn Preconditioner<T>>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    criteria.validate()?;
    validate_system(a, b.len(), x0.len())?;
    if let Some(m) = precond {
        check_len("preconditioner", a.n_rows(), m.dim())?;
    }
    let n = a.n_rows();
    let timer = KernelTimer::new();
    let started = Instant::now();
    let phase = T::PRECISION;

    let bnorm = timer.time(Kernel::Norm, || norm2(b)).as_f64();
    let mut x = x0.to_vec();
    let mut report = empty_report();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        report.x = convert_slice(&x)?;
        report.converged = true;
        report.final_relres = 0.0;
        report.best_relres = 0.0;
        report.residual_history.push(ResidualRecord {
            iteration: 0,
            implicit_relres: 0.0,
            explicit_relres: Some(0.0),
            phase,
        });
        report.kernel_times = timer.finish(started.elapsed());
        report.solve_time = started.elapsed().as_secs_f64();
        return Ok(report);
    }

    let (rnorm, mut r) = explicit_residual(a, b, &x)?;
    let mut rel = rnorm.as_f64() / bnorm;
    if !rel.is_finite() {
        return Err(Error::NonFinite("initial residual"));
    }
    report.residual_history.push(ResidualRecord {
        iteration: 0,
        implicit_relres: rel,
        explicit_relres: Some(rel),
        phase,
    });
    report.best_relres = rel;

    let mut ws = match opts.breakdown_tol {
        Some(tol) => ArnoldiWorkspace::with_breakdown_tol(n, criteria.m, T::from_f64(tol))?,
        None => ArnoldiWorkspace::new(n, criteria.m)?,
    };
    let mut op = right_preconditioned(a, precond, &timer);
    let target = T::from_f64(criteria.rtol * bnorm);
    let mut total = 0;
    let mut converged = rel <= criteria.rtol;
    let mut stall = StallMonitor::default();
    let mut correction = vec![T::zero(); n];

    while !converged && total < criteria.max_iters {
        let budget = criteria.m.min(criteria.max_iters - total);
        let cycle = run_cycle(&mut ws, &mut op, &r, budget, target, &timer, opts)?;
        for (i, res) in cycle.implicit.iter().enumerate() {
            report.residual_history.push(ResidualRecord {
                iteration: total + i + 1,
                implicit_relres: res.as_f64() / bnorm,
                explicit_relres: None,
                phase,
            });
        }
        total += cycle.steps();
        match precond {
            Some(m) => {
                m.apply(&cycle.update, &mut correction, &timer)?;
                axpy(T::one(), &correction, &mut x);
            }
            None => axpy(T::one(), &cycle.update, &mut x),
        }
        let (rnorm, rnew) = explicit_residual(a, b, &x)?;
        r = rnew;
        rel = rnorm.as_f64() / bnorm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("explicit residual"));
        }
        if let Some(last) = report.residual_history.last_mut() {
            last.explicit_relres = Some(rel);
        }
        report.restarts += 1;
        report.best_relres = report.best_relres.min(rel);
        stall.observe(total, rel);
        converged = rel <= criteria.rtol;
        if !converged && cycle.implicit_converged && rel > LOSS_OF_ACCURACY_FACTOR * criteria.rtol {
            log::debug!(
                "loss of accuracy at iteration {total}: implicit converged, explicit relres {rel:e}"
            );
            report.loss_of_accuracy = true;
        }
        if cycle.steps() == 0 {
            break;
        }
    }

    let elapsed = started.elapsed();
    report.x = convert_slice(&x)?;
    report.converged = converged;
    report.total_iters = total;
    match phase {
        Precision::Fp32 => report.iters_fp32 = total,
        Precision::Fp64 => report.iters_fp64 = total,
    }
    report.final_relres = rel;
    report.stalled_at = stall.stalled_at;
    report.kernel_times = timer.finish(elapsed);
    report.solve_time = elapsed.as_secs_f64();
    Ok(report)
}

fn empty_report() -> SolveReport {
    SolveReport {
        x: Vec::new(),
        converged: false,
        total_iters: 0,
        iters_fp32: 0,
        iters_fp64: 0,
        residual_history: Vec::new(),
        kernel_times: KernelTimes::default(),
        loss_of_accuracy: false,
        final_relres: f64::NAN,
        best_relres: f64::INFINITY,
        stalled_at: None,
        restarts: 0,
        solve_time: 0.0,
    }
}

/// GMRES-IR: fp64 residuals and updates around fp32 GMRES(m) cycles.
///
/// The fp32 copy of `a` is made before the clock starts.
pub fn gmres_ir(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x0: &[f64],
    criteria: &StopCriteria,
    precond: Option<&dyn Preconditioner<f32>>,
) -> Result<SolveReport> {
    let a32 = convert_matrix(a)?;
    gmres_ir_with(a, &a32, b, x0, criteria, precond, &SolveOptions::default())
}

/// GMRES-IR with a caller-supplied fp32 copy of the matrix.
///
/// Each outer step scales the fp64 residual to unit norm before rounding to
/// fp32, runs one fp32 cycle from a zero guess, and rescales the correction
/// after widening it back. Convergence is only checked between cycles.
pub fn gmres_ir_with(
    a: &CsrMatrix<f64>,
    a32: &CsrMatrix<f32>,
    b: &[f64],
    x0: &[f64],
    criteria: &StopCriteria,
    precond: Option<&dyn Preconditioner<f32>>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    criteria.validate()?;
    validate_system(a, b.len(), x0.len())?;
    if a32.n_rows() != a.n_rows() || a32.n_cols() != a.n_cols() || a32.nnz() != a.nnz() {
        return Err(Error::InvalidArgument("fp32 matrix copy does not match".into()));
    }
    if let Some(m) = precond {
        check_len("preconditioner", a.n_rows(), m.dim())?;
    }
    let n = a.n_rows();
    let timer = KernelTimer::new();
    let started = Instant::now();
    let mut report = empty_report();

    let bnorm = timer.time(Kernel::Norm, || norm2(b));
    let mut x = x0.to_vec();
    if bnorm == 0.0 {
        report.x = vec![0.0; n];
        report.converged = true;
        report.final_relres = 0.0;
        report.best_relres = 0.0;
        report.residual_history.push(ResidualRecord {
            iteration: 0,
            implicit_relres: 0.0,
            explicit_relres: Some(0.0),
            phase: Precision::Fp64,
        });
        report.kernel_times = timer.finish(started.elapsed());
        return Ok(report);
    }
    let (rnorm, mut r) = explicit_residual(a, b, &x)?;
    let mut rnorm = rnorm;
    let mut rel = rnorm / bnorm;
    report.residual_history.push(ResidualRecord {
        iteration: 0,
        implicit_relres: rel,
        explicit_relres: Some(rel),
        phase: Precision::Fp64,
    });
    report.best_relres = rel;

    let mut ws = match opts.breakdown_tol {
        Some(tol) => ArnoldiWorkspace::<f32>::with_breakdown_tol(n, criteria.m, tol as f32)?,
        None => ArnoldiWorkspace::<f32>::new(n, criteria.m)?,
    };
    let mut op = right_preconditioned(a32, precond, &timer);
    // the inner problem has a unit-norm right-hand side
    let inner_target = criteria.rtol as f32;
    let mut r32 = vec![0.0f32; n];
    let mut u32 = vec![0.0f32; n];
    let mut total = 0;
    let mut converged = rel <= criteria.rtol;
    let mut stall = StallMonitor::default();

    while !converged && total < criteria.max_iters {
        let inv = 1.0 / rnorm;
        for (i, (dst, &src)) in r32.iter_mut().zip(&r).enumerate() {
            let v = (src * inv) as f32;
            if !v.is_finite() {
                return Err(Error::Overflow { index: i });
            }
            *dst = v;
        }
        let budget = criteria.m.min(criteria.max_iters - total);
        let cycle = run_cycle(&mut ws, &mut op, &r32, budget, inner_target, &timer, opts)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFinite("GMRES-IR inner fp32 cycle diverged"),
                other => other,
            })?;
        for (i, res) in cycle.implicit.iter().enumerate() {
            report.residual_history.push(ResidualRecord {
                iteration: total + i + 1,
                implicit_relres: *res as f64 * rnorm / bnorm,
                explicit_relres: None,
                phase: Precision::Fp32,
            });
        }
        total += cycle.steps();
        let u: &[f32] = match precond {
            Some(m) => {
                m.apply(&cycle.update, &mut u32, &timer)?;
                &u32
            }
            None => &cycle.update,
        };
        for (xi, &ui) in x.iter_mut().zip(u) {
            *xi += ui as f64 * rnorm;
        }
        let implicit_rel = cycle.implicit.last().map_or(rel, |&v| v as f64 * rnorm / bnorm);
        let (rn, rnew) = explicit_residual(a, b, &x)?;
        r = rnew;
        rnorm = rn;
        rel = rnorm / bnorm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("GMRES-IR outer residual"));
        }
        if let Some(last) = report.residual_history.last_mut() {
            last.explicit_relres = Some(rel);
        }
        report.restarts += 1;
        report.best_relres = report.best_relres.min(rel);
        stall.observe(total, rel);
        converged = rel <= criteria.rtol;
        if !converged
            && implicit_rel <= criteria.rtol
            && rel > LOSS_OF_ACCURACY_FACTOR * criteria.rtol
        {
            report.loss_of_accuracy = true;
        }
        if cycle.steps() == 0 {
            break;
        }
    }

    let elapsed = started.elapsed();
    report.x = x;
    report.converged = converged;
    report.total_iters = total;
    report.iters_fp32 = total;
    report.final_relres = rel;
    report.stalled_at = stall.stalled_at;
    report.kernel_times = timer.finish(elapsed);
    report.solve_time = elapsed.as_secs_f64();
    Ok(report)
}

/// GMRES-FD: fp32 GMRES(m) for `switch_iter` iterations, then fp64
/// GMRES(m) started from the widened fp32 solution.
pub fn gmres_fd(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x0: &[f64],
    criteria: &StopCriteria,
    switch_iter: usize,
) -> Result<SolveReport> {
    criteria.validate()?;
    if switch_iter % criteria.m != 0 {
        return Err(Error::InvalidArgument(format!(
            "switch_iter {switch_iter} is not a multiple of m = {}",
            criteria.m
        )));
    }
    if switch_iter == 0 {
        return gmres_restarted(a, b, x0, criteria, None);
    }
    validate_system(a, b.len(), x0.len())?;
    let a32: CsrMatrix<f32> = convert_matrix(a)?;
    let b32: Vec<f32> = convert_slice(b)?;
    let x32: Vec<f32> = convert_slice(x0)?;

    let single = StopCriteria {
        max_iters: switch_iter.min(criteria.max_iters),
        ..*criteria
    };
    let first = gmres_restarted(&a32, &b32, &x32, &single, None)?;
    let remaining = criteria.max_iters - first.total_iters;
    let x_switch = first.x.clone();
    let second = if remaining == 0 && !first.converged {
        None
    } else {
        let double = StopCriteria {
            max_iters: remaining.max(1),
            ..*criteria
        };
        Some(gmres_restarted(a, b, &x_switch, &double, None)?)
    };
    Ok(merge_phases(first, second))
}

fn merge_phases(first: SolveReport, second: Option<SolveReport>) -> SolveReport {
    let Some(second) = second else {
        return first;
    };
    let offset = first.total_iters;
    let mut history = first.residual_history;
    history.extend(second.residual_history.iter().map(|r| ResidualRecord {
        iteration: r.iteration + offset,
        ..*r
    }));
    let mut kernel_times = first.kernel_times;
    kernel_times.merge(&second.kernel_times);
    SolveReport {
        x: second.x,
        converged: second.converged,
        total_iters: first.total_iters + second.total_iters,
        iters_fp32: first.total_iters,
        iters_fp64: second.total_iters,
        residual_history: history,
        kernel_times,
        loss_of_accuracy: second.loss_of_accuracy,
        final_relres: second.final_relres,
        best_relres: second.best_relres,
        stalled_at: first.stalled_at.or(second.stalled_at.map(|s| s + offset)),
        restarts: first.restarts + second.restarts,
        solve_time: first.solve_time + second.solve_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::gen::{generate, StencilSpec};

    fn csr_op(a: &CsrMatrix<f64>) -> impl FnMut(&[f64], &mut [f64]) -> Result<()> + '_ {
        move |x, y| spmv_into(a, x, y)
    }

    #[test]
    fn identity_cycle_converges_in_one_step() {
        let a = CsrMatrix::<f64>::identity(2);
        let out = gmres_cycle(&mut csr_op(&a), &[5.0, 6.0], &[0.0, 0.0], 2, 1e-12).unwrap();
        assert_eq!(out.steps_taken, 1);
        assert!((out.x[0] - 5.0).abs() < 1e-14 && (out.x[1] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_direct_solve() {
        let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap());
        let out = gmres_cycle(&mut csr_op(&a), &[1.0, 2.0], &[0.0, 0.0], 2, 1e-12).unwrap();
        assert!((out.x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((out.x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn zero_initial_residual_returns_immediately() {
        let a = CsrMatrix::<f64>::identity(3);
        let out = gmres_cycle(&mut csr_op(&a), &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 3, 1e-10).unwrap();
        assert_eq!(out.steps_taken, 0);
        assert_eq!(out.x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn explicit_residual_cases() {
        let a = CsrMatrix::<f64>::identity(3);
        assert_eq!(explicit_residual(&a, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().0, 0.0);
        assert_eq!(explicit_residual(&a, &[0.0; 3], &[0.0; 3]).unwrap().0, 0.0);
    }

    #[test]
    fn explicit_residual_matches_dense() {
        let mut d = DenseMatrix::<f64>::zeros(10, 10);
        for i in 0..10 {
            for j in 0..10 {
                d[(i, j)] = ((i * 7 + j * 3) % 11) as f64 - 5.0;
            }
        }
        let a = CsrMatrix::from_dense(&d);
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..10).map(|i| (i as f64).sqrt()).collect();
        let (norm, r) = explicit_residual(&a, &b, &x).unwrap();
        let mut ax = vec![0.0; 10];
        gemv(d.as_ref(), Transpose::No, 1.0, &x, 0.0, &mut ax).unwrap();
        let rd: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        for (p, q) in r.iter().zip(&rd) {
            assert!((p - q).abs() <= 100.0 * f64::EPSILON * 50.0);
        }
        assert!((norm - norm2(&rd)).abs() <= 100.0 * f64::EPSILON * norm);
    }

    #[test]
    fn restarted_identity() {
        let a = CsrMatrix::<f64>::identity(7);
        let b: Vec<f64> = (0..7).map(|i| (i as f64 * 1.3).sin() + 2.0).collect();
        let rep = gmres_restarted(&a, &b, &[0.0; 7], &StopCriteria::default(), None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.total_iters, 1);
        assert_eq!(rep.iters_fp64, 1);
        assert_eq!(rep.residual_history.len(), 2);
        assert!(!rep.loss_of_accuracy);
    }

    #[test]
    fn zero_rhs() {
        let a = CsrMatrix::<f64>::identity(3);
        let rep = gmres_restarted(&a, &[0.0; 3], &[1.0; 3], &StopCriteria::default(), None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.x, vec![0.0; 3]);
    }

    #[test]
    fn max_iters_gives_unconverged_report() {
        let a = generate(&StencilSpec::laplace2d(20)).unwrap();
        let b = vec![1.0; a.n_rows()];
        let crit = StopCriteria::new(1e-10, 30, 10).unwrap();
        let rep = gmres_restarted(&a, &b, &vec![0.0; a.n_rows()], &crit, None).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.total_iters, 30);
        assert_eq!(rep.restarts, 3);
        assert_eq!(rep.explicit_history().len(), 4);
    }

    #[test]
    fn criteria_validation() {
        assert!(StopCriteria::new(0.0, 10, 5).is_err());
        assert!(StopCriteria::new(1.0, 10, 5).is_err());
        assert!(StopCriteria::new(1e-8, 10, 0).is_err());
        assert!(StopCriteria::new(1e-8, 0, 5).is_err());
    }

    #[test]
    fn fd_rejects_unaligned_switch() {
        let a = CsrMatrix::<f64>::identity(3);
        let crit = StopCriteria::default();
        assert!(gmres_fd(&a, &[1.0; 3], &[0.0; 3], &crit, 75).is_err());
    }

    #[test]
    fn ir_identity_exact_in_fp32_one_correction() {
        let a = CsrMatrix::<f64>::identity(4);
        let rep = gmres_ir(&a, &[1.0; 4], &[0.0; 4], &StopCriteria::default(), None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iters_fp32, 1);
        assert_eq!(rep.final_relres, 0.0);
    }

    #[test]
    fn ir_identity_two_corrections() {
        let a = CsrMatrix::<f64>::identity(5);
        let rep = gmres_ir(&a, &[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], &StopCriteria::default(), None).unwrap();
        // the first correction carries fp32 rounding of r / ||r||; the second removes it
        assert!(rep.converged);
        assert_eq!(rep.iters_fp32, 2);
        assert_eq!(rep.restarts, 2);
        assert_eq!(rep.iters_fp64, 0);
    }

    #[test]
    fn perturbed_hessenberg_flags_loss_of_accuracy() {
        let a = generate(&StencilSpec::laplace2d(3)).unwrap();
        let b = vec![1.0; 9];
        let crit = StopCriteria::new(1e-10, 40, 20).unwrap();
        let opts = SolveOptions {
            hessenberg_perturbation: Some(0.5),
            ..Default::default()
        };
        let rep = gmres_restarted_with(&a, &b, &[0.0; 9], &crit, None, &opts).unwrap();
        assert!(rep.loss_of_accuracy);
        let clean = gmres_restarted(&a, &b, &[0.0; 9], &crit, None).unwrap();
        assert!(clean.converged && !clean.loss_of_accuracy);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("IR".parse::<SolverKind>().unwrap(), SolverKind::IR);
        assert_eq!("double".parse::<SolverKind>().unwrap(), SolverKind::Double);
        assert!("bicgstab".parse::<SolverKind>().is_err());
    }
}
