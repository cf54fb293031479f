//! Experiment harness: SpMV precision benchmark, solver runs, and sweeps.
//!
//! Wall-clock numbers are reported, never asserted.

use std::fmt;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csr::{convert_matrix, CsrMatrix};
use crate::error::{Error, Result};
use crate::gen::{make_rhs, RhsSpec};
use crate::io::{write_convergence_csv, write_summary_csv, PrecondSpec, RunConfig, SummaryRow};
use crate::precision::{convert_slice, Scalar};
use crate::precond::{
    build_block_jacobi, build_poly_precond, rcm_reorder, Permutation, PolyOperator, Preconditioner,
};
use crate::solvers::{gmres_fd, gmres_ir_with, gmres_restarted, SolveOptions, SolveReport, SolverKind};
use crate::spmv::{predicted_speedup, spmv_into};

pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_TRIALS: usize = 3;
pub const DEFAULT_WARMUP: usize = 50;

/// Row-length threshold separating left and right quadrants.
pub const QUADRANT_MAX_NNZ_ROW: usize = 15;
/// Speedup threshold separating top and bottom quadrants.
pub const QUADRANT_SPEEDUP: f64 = 1.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Quadrant {
    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::TopLeft => "top-left",
            Quadrant::TopRight => "top-right",
            Quadrant::BottomLeft => "bottom-left",
            Quadrant::BottomRight => "bottom-right",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Top means speedup >= 1.7, left means max_nnz_row < 15.
pub fn classify(max_nnz_row: usize, speedup: f64) -> Quadrant {
    let left = max_nnz_row < QUADRANT_MAX_NNZ_ROW;
    let top = speedup >= QUADRANT_SPEEDUP;
    match (top, left) {
        (true, true) => Quadrant::TopLeft,
        (true, false) => Quadrant::TopRight,
        (false, true) => Quadrant::BottomLeft,
        (false, false) => Quadrant::BottomRight,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpmvBenchResult {
    pub name: String,
    pub n: usize,
    pub nnz: usize,
    pub max_nnz_row: usize,
    pub t_fp64: f64,
    pub t_fp32: f64,
    pub measured_speedup: f64,
    pub predicted: f64,
    pub quadrant: Quadrant,
}

pub fn classify_speedup(result: &SpmvBenchResult) -> Quadrant {
    classify(result.max_nnz_row, result.measured_speedup)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpmvBenchOptions {
    pub reps: usize,
    pub trials: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for SpmvBenchOptions {
    fn default() -> Self {
        Self {
            reps: DEFAULT_REPS,
            trials: DEFAULT_TRIALS,
            warmup: DEFAULT_WARMUP,
            seed: 0,
        }
    }
}

fn time_spmv<T: Scalar>(a: &CsrMatrix<T>, x: &[T], opts: &SpmvBenchOptions) -> Result<f64> {
    let mut y = vec![T::zero(); a.n_rows()];
    for _ in 0..opts.warmup {
        spmv_into(a, black_box(x), &mut y)?;
    }
    let mut best = f64::INFINITY;
    for _ in 0..opts.trials {
        let t = Instant::now();
        for _ in 0..opts.reps {
            spmv_into(a, black_box(x), &mut y)?;
            black_box(&mut y);
        }
        best = best.min(t.elapsed().as_secs_f64());
    }
    // a timer tick of zero would make the speedup meaningless
    Ok(best.max(1e-9))
}

/// Time `reps` SpMVs per trial in each precision on a seeded random vector
/// and keep the fastest trial.
pub fn spmv_bench(
    a: &CsrMatrix<f64>,
    name: &str,
    opts: &SpmvBenchOptions,
) -> Result<SpmvBenchResult> {
    if opts.reps == 0 || opts.trials == 0 {
        return Err(Error::InvalidArgument("reps and trials must be >= 1".into()));
    }
    if a.n_rows() == 0 || a.nnz() == 0 {
        return Err(Error::InvalidArgument("SpMV benchmark needs a nonempty matrix".into()));
    }
    let a32: CsrMatrix<f32> = convert_matrix(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x: Vec<f64> = (0..a.n_cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x32: Vec<f32> = convert_slice(&x)?;
    let t_fp64 = time_spmv(a, &x, opts)?;
    let t_fp32 = time_spmv(&a32, &x32, opts)?;
    let measured_speedup = t_fp64 / t_fp32;
    let max_nnz_row = a.max_nnz_row();
    Ok(SpmvBenchResult {
        name: name.to_string(),
        n: a.n_rows(),
        nnz: a.nnz(),
        max_nnz_row,
        t_fp64,
        t_fp32,
        measured_speedup,
        predicted: predicted_speedup(a.avg_nnz_row().max(1.0))?,
        quadrant: classify(max_nnz_row, measured_speedup),
    })
}

pub fn write_spmv_csv(rows: &[SpmvBenchResult], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record([
        "name",
        "n",
        "nnz",
        "max_nnz_row",
        "t_fp64",
        "t_fp32",
        "measured_speedup",
        "predicted",
        "quadrant",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.n.to_string(),
            r.nnz.to_string(),
            r.max_nnz_row.to_string(),
            format!("{:e}", r.t_fp64),
            format!("{:e}", r.t_fp32),
            format!("{:.4}", r.measured_speedup),
            format!("{:.4}", r.predicted),
            r.quadrant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// A loaded, optionally reordered linear system.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub a: CsrMatrix<f64>,
    pub b: Vec<f64>,
    /// Present when RCM was applied; solutions are mapped back through it.
    pub perm: Option<Permutation>,
    a32: Option<CsrMatrix<f32>>,
}

impl System {
    pub fn new(name: impl Into<String>, a: CsrMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if a.n_rows() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "system right-hand side",
                expected: a.n_rows(),
                found: b.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            a,
            b,
            perm: None,
            a32: None,
        })
    }

    /// Load the configured matrix and right-hand side, applying RCM if asked.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let a = cfg.matrix.load()?;
        let b = make_rhs(&cfg.rhs, a.n_rows())?.into_vec();
        let mut sys = Self::new(cfg.matrix.name(), a, b)?;
        if cfg.rcm {
            sys.reorder()?;
        }
        Ok(sys)
    }

    /// Replace the right-hand side.
    pub fn with_rhs(&self, spec: &RhsSpec) -> Result<Self> {
        let mut b = make_rhs(spec, self.a.n_rows())?.into_vec();
        if let Some(p) = &self.perm {
            b = p.apply(&b);
        }
        let mut out = self.clone();
        out.b = b;
        Ok(out)
    }

    fn reorder(&mut self) -> Result<()> {
        let (perm, a) = rcm_reorder(&self.a)?;
        self.b = perm.apply(&self.b);
        self.a = a;
        self.perm = Some(perm);
        self.a32 = None;
        Ok(())
    }

    /// fp32 copy of the matrix, made once and reused across runs.
    pub fn single(&mut self) -> Result<&CsrMatrix<f32>> {
        if self.a32.is_none() {
            self.a32 = Some(convert_matrix(&self.a)?);
        }
        Ok(self.a32.as_ref().expect("just set"))
    }
}

/// Settings for one solve on a [`System`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSetup {
    pub solver: SolverKind,
    pub criteria: crate::solvers::StopCriteria,
    pub precond: PrecondSpec,
    pub switch_iter: usize,
    pub seed: u64,
}

impl SolveSetup {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            solver: cfg.solver,
            criteria: cfg.criteria()?,
            precond: cfg.precond,
            switch_iter: cfg.switch_iter.unwrap_or(0),
            seed: cfg.seed,
        })
    }

    pub fn with_solver(self, solver: SolverKind) -> Self {
        Self { solver, ..self }
    }
}

fn with_precond<T: Scalar, R>(
    a: &CsrMatrix<T>,
    spec: PrecondSpec,
    seed: u64,
    f: impl FnOnce(Option<&dyn Preconditioner<T>>) -> Result<R>,
) -> Result<R> {
    match spec {
        PrecondSpec::None => f(None),
        PrecondSpec::Jacobi(k) => {
            let m = build_block_jacobi(a, k)?;
            f(Some(&m))
        }
        PrecondSpec::Poly(d) => {
            let p = build_poly_precond(a, d, seed)?;
            let op = PolyOperator::new(&p, a)?;
            f(Some(&op))
        }
    }
}

/// Run one solve. Preconditioner setup and the fp32 matrix copy are not
/// part of the reported solve time. The preconditioner is built in the
/// precision of the Krylov iteration it serves.
pub fn run_solver(sys: &mut System, setup: &SolveSetup) -> Result<SolveReport> {
    let n = sys.a.n_rows();
    let mut report = match setup.solver {
        SolverKind::Double => with_precond(&sys.a, setup.precond, setup.seed, |m| {
            gmres_restarted(&sys.a, &sys.b, &vec![0.0; n], &setup.criteria, m)
        })?,
        SolverKind::Single => {
            let b32: Vec<f32> = convert_slice(&sys.b)?;
            let a32 = sys.single()?;
            with_precond(a32, setup.precond, setup.seed, |m| {
                gmres_restarted(a32, &b32, &vec![0.0f32; n], &setup.criteria, m)
            })?
        }
        SolverKind::IR => {
            sys.single()?;
            let a32 = sys.a32.as_ref().expect("fp32 copy built");
            with_precond(a32, setup.precond, setup.seed, |m| {
                gmres_ir_with(
                    &sys.a,
                    a32,
                    &sys.b,
                    &vec![0.0; n],
                    &setup.criteria,
                    m,
                    &SolveOptions::default(),
                )
            })?
        }
        SolverKind::FD => {
            if setup.precond != PrecondSpec::None {
                return Err(Error::Config("solver=fd does not support a preconditioner".into()));
            }
            gmres_fd(&sys.a, &sys.b, &vec![0.0; n], &setup.criteria, setup.switch_iter)?
        }
    };
    if let Some(p) = &sys.perm {
        report.x = p.apply_inverse(&report.x);
    }
    Ok(report)
}

/// Run `runs` times and keep the report with the median solve time.
pub fn median_run(sys: &mut System, setup: &SolveSetup, runs: usize) -> Result<SolveReport> {
    let mut reports = (0..runs.max(1))
        .map(|_| run_solver(sys, setup))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.solve_time.total_cmp(&b.solve_time));
    let mid = reports.len() / 2;
    Ok(reports.swap_remove(mid))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: SolveReport,
    pub summary: SummaryRow,
}

/// Three runs of the configured solver; the median-time run is reported and,
/// when `out_dir` is set, written as `convergence.csv` and `summary.csv`.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut sys = System::from_config(cfg)?;
    let setup = SolveSetup::from_config(cfg)?;
    let report = median_run(&mut sys, &setup, 3)?;
    let summary = SummaryRow::from_report(&sys.name, &sys.a, cfg.solver, &cfg.precond.to_string(), &report);
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_convergence_csv(&report, dir.join("convergence.csv"))?;
        write_summary_csv(std::slice::from_ref(&summary), dir.join("summary.csv"))?;
    }
    Ok(ExperimentOutcome { report, summary })
}

/// Non-time outcome of a sweep run plus its time.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub total_iters: usize,
    pub iters_fp32: usize,
    pub iters_fp64: usize,
    pub converged: bool,
    pub final_relres: f64,
    pub time_s: f64,
}

impl SweepRun {
    fn from_report(r: &SolveReport) -> Self {
        Self {
            total_iters: r.total_iters,
            iters_fp32: r.iters_fp32,
            iters_fp64: r.iters_fp64,
            converged: r.converged,
            final_relres: r.final_relres,
            time_s: r.solve_time,
        }
    }

    /// Equality on every column except time.
    pub fn same_outcome(&self, other: &SweepRun) -> bool {
        self.total_iters == other.total_iters
            && self.iters_fp32 == other.iters_fp32
            && self.iters_fp64 == other.iters_fp64
            && self.converged == other.converged
            && self.final_relres.to_bits() == other.final_relres.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSweep {
    pub double: SweepRun,
    pub ir: SweepRun,
    pub points: Vec<(usize, SweepRun)>,
}

impl SwitchSweep {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv_writer(path.as_ref())?;
        w.write_record([
            "solver",
            "switch_iter",
            "total_iters",
            "iters_fp32",
            "iters_fp64",
            "converged",
            "final_relres",
            "time_s",
        ])?;
        let rows = [("double", None, &self.double), ("ir", None, &self.ir)]
            .into_iter()
            .chain(self.points.iter().map(|(s, r)| ("fd", Some(*s), r)));
        for (solver, switch, r) in rows {
            w.write_record([
                solver.to_string(),
                switch.map(|s| s.to_string()).unwrap_or_default(),
                r.total_iters.to_string(),
                r.iters_fp32.to_string(),
                r.iters_fp64.to_string(),
                r.converged.to_string(),
                format!("{:e}", r.final_relres),
                format!("{:e}", r.time_s),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One GMRES-FD run per switch point plus fp64 and GMRES-IR baselines.
pub fn sweep_switch_point(
    sys: &mut System,
    setup: &SolveSetup,
    switch_points: &[usize],
) -> Result<SwitchSweep> {
    let m = setup.criteria.m;
    if let Some(bad) = switch_points.iter().find(|&&s| s % m != 0) {
        return Err(Error::InvalidArgument(format!("switch point {bad} is not a multiple of m={m}")));
    }
    let plain = SolveSetup {
        precond: PrecondSpec::None,
        ..*setup
    };
    let double = SweepRun::from_report(&run_solver(sys, &plain.with_solver(SolverKind::Double))?);
    let ir = SweepRun::from_report(&run_solver(sys, &plain.with_solver(SolverKind::IR))?);
    let mut points = Vec::with_capacity(switch_points.len());
    for &s in switch_points {
        let fd = SolveSetup {
            switch_iter: s,
            ..plain.with_solver(SolverKind::FD)
        };
        log::info!("switch point {s}");
        points.push((s, SweepRun::from_report(&run_solver(sys, &fd)?)));
    }
    Ok(SwitchSweep { double, ir, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartRow {
    pub m: usize,
    pub double: SweepRun,
    pub ir: SweepRun,
}

impl RestartRow {
    pub fn speedup(&self) -> f64 {
        self.double.time_s / self.ir.time_s
    }
}

/// fp64 GMRES and GMRES-IR at each restart length.
pub fn sweep_restart(sys: &mut System, setup: &SolveSetup, sizes: &[usize]) -> Result<Vec<RestartRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let s = SolveSetup {
            criteria: crate::solvers::StopCriteria::new(setup.criteria.rtol, setup.criteria.max_iters, m)?,
            ..*setup
        };
        log::info!("restart length {m}");
        let double = SweepRun::from_report(&run_solver(sys, &s.with_solver(SolverKind::Double))?);
        let ir = SweepRun::from_report(&run_solver(sys, &s.with_solver(SolverKind::IR))?);
        rows.push(RestartRow { m, double, ir });
    }
    Ok(rows)
}

pub fn write_restart_csv(rows: &[RestartRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["m", "iters_double", "time_double", "iters_ir", "time_ir", "speedup"])?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.double.total_iters.to_string(),
            format!("{:e}", r.double.time_s),
            r.ir.total_iters.to_string(),
            format!("{:e}", r.ir.time_s),
            format!("{:.4}", r.speedup()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhsRow {
    pub rhs: String,
    pub double: SweepRun,
    pub ir: SweepRun,
}

impl RhsRow {
    pub fn speedup(&self) -> f64 {
        self.double.time_s / self.ir.time_s
    }
}

/// fp64 GMRES and GMRES-IR for each right-hand side.
pub fn sweep_rhs(sys: &System, setup: &SolveSetup, kinds: &[RhsSpec]) -> Result<Vec<RhsRow>> {
    let mut rows = Vec::with_capacity(kinds.len());
    for spec in kinds {
        let mut s = sys.with_rhs(spec)?;
        let double = SweepRun::from_report(&run_solver(&mut s, &setup.with_solver(SolverKind::Double))?);
        let ir = SweepRun::from_report(&run_solver(&mut s, &setup.with_solver(SolverKind::IR))?);
        rows.push(RhsRow {
            rhs: spec.label(),
            double,
            ir,
        });
    }
    Ok(rows)
}

pub fn write_rhs_csv(rows: &[RhsRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["rhs", "time_double", "iters_double", "time_ir", "iters_ir", "speedup"])?;
    for r in rows {
        w.write_record([
            r.rhs.clone(),
            format!("{:e}", r.double.time_s),
            r.double.total_iters.to_string(),
            format!("{:e}", r.ir.time_s),
            r.ir.total_iters.to_string(),
            format!("{:.4}", r.speedup()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, StencilSpec};
    use crate::io::MatrixSource;
    use crate::timing::Kernel;

    #[test]
    fn quadrant_examples() {
        assert_eq!(classify(5, 2.3), Quadrant::TopLeft);
        assert_eq!(classify(15, 1.7), Quadrant::TopRight);
        assert_eq!(classify(500, 1.2), Quadrant::BottomRight);
        assert_eq!(classify(14, 1.69), Quadrant::BottomLeft);
    }

    #[test]
    fn bench_rejects_zero_reps() {
        let a = generate(&StencilSpec::laplace2d(5)).unwrap();
        let opts = SpmvBenchOptions {
            reps: 0,
            ..Default::default()
        };
        assert!(spmv_bench(&a, "l", &opts).is_err());
    }

    #[test]
    fn bench_small_matrix() {
        let a = generate(&StencilSpec::laplace2d(30)).unwrap();
        let opts = SpmvBenchOptions {
            reps: 20,
            trials: 2,
            warmup: 2,
            seed: 1,
        };
        let r = spmv_bench(&a, "laplace2d:30", &opts).unwrap();
        assert!(r.t_fp64 > 0.0 && r.t_fp32 > 0.0 && r.measured_speedup > 0.0);
        assert_eq!(r.max_nnz_row, 5);
        assert_eq!(r.quadrant, classify_speedup(&r));
        assert!((r.predicted - predicted_speedup(r.nnz as f64 / r.n as f64).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn identity_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(MatrixSource::Generator(StencilSpec::laplace2d(2)), SolverKind::Double);
        let a = CsrMatrix::<f64>::identity(6);
        let path = dir.path().join("eye.mtx");
        crate::io::write_matrix_market(&a, &path).unwrap();
        cfg.matrix = MatrixSource::File(path);
        cfg.out_dir = Some(dir.path().join("out"));
        let out = run_experiment(&cfg).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.total_iters, 1);
        for k in Kernel::ALL {
            assert!(out.report.kernel_times.seconds.contains_key(&k), "{k}");
        }
        assert!(dir.path().join("out/convergence.csv").exists());
        assert!(dir.path().join("out/summary.csv").exists());
    }

    #[test]
    fn identity_rhs_sweep() {
        let sys = System::new("eye", CsrMatrix::identity(8), vec![1.0; 8]).unwrap();
        let cfg = RunConfig::new(MatrixSource::Generator(StencilSpec::laplace2d(2)), SolverKind::Double);
        let setup = SolveSetup::from_config(&cfg).unwrap();
        let rows = sweep_rhs(&sys, &setup, &[RhsSpec::ones(), RhsSpec::uniform(3), RhsSpec::normal(4)]).unwrap();
        for r in rows {
            assert_eq!(r.double.total_iters, 1, "{}", r.rhs);
            assert_eq!(r.ir.total_iters, 2, "{}", r.rhs);
        }
    }

    #[test]
    fn tiny_restart_sweep_no_restart() {
        let a = generate(&StencilSpec::laplace2d(4)).unwrap();
        let n = a.n_rows();
        let mut sys = System::new("l4", a, vec![1.0; n]).unwrap();
        let cfg = RunConfig::new(MatrixSource::Generator(StencilSpec::laplace2d(4)), SolverKind::Double);
        let setup = SolveSetup::from_config(&cfg).unwrap();
        let rows = sweep_restart(&mut sys, &setup, &[n]).unwrap();
        assert!(rows[0].double.converged && rows[0].double.total_iters <= n);
        assert!(rows[0].ir.converged);
    }

    #[test]
    fn rcm_solution_is_in_original_ordering() {
        let mut cfg = RunConfig::new(MatrixSource::Generator(StencilSpec::bent_pipe2d(12)), SolverKind::Double);
        cfg.rhs = RhsSpec::normal(5);
        cfg.rcm = true;
        let mut sys = System::from_config(&cfg).unwrap();
        let rep = run_solver(&mut sys, &SolveSetup::from_config(&cfg).unwrap()).unwrap();
        let a = generate(&StencilSpec::bent_pipe2d(12)).unwrap();
        let b = make_rhs(&RhsSpec::normal(5), a.n_rows()).unwrap().into_vec();
        let (r, _) = crate::solvers::explicit_residual(&a, &b, &rep.x).unwrap();
        assert!(r / crate::dense::norm2(&b) < 1e-9);
    }
}
