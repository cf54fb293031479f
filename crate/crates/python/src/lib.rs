//! Python bindings: sparse matrices, the three GMRES variants, and the
//! SpMV model.

use std::collections::HashMap;

use mpgmres::bench::{run_solver, spmv_bench as bench_spmv, SolveSetup, SpmvBenchOptions, System};
use mpgmres::gen::{generate, make_rhs, RhsSpec, StencilSpec};
use mpgmres::io::{load_matrix_market, write_matrix_market, PrecondSpec};
use mpgmres::spmv::{predicted_speedup as model_speedup, spmv};
use mpgmres::timing::Kernel;
use mpgmres::{CsrMatrix, Error, SolverKind, StopCriteria};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::File { .. } => PyIOError::new_err(e.to_string()),
        Error::NonFinite(_) | Error::Overflow { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Square sparse matrix in CSR format, stored in double precision.
#[pyclass(name = "Matrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMatrix {
    name: String,
    inner: CsrMatrix<f64>,
}

#[pymethods]
impl PyMatrix {
    /// Finite-difference problem from a spec such as "laplace2d:50".
    #[staticmethod]
    fn generate(spec: &str) -> PyResult<Self> {
        let s: StencilSpec = parse(spec)?;
        Ok(Self {
            name: s.to_string(),
            inner: generate(&s).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            name: path.to_string(),
            inner: load_matrix_market(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_triplets(n: usize, rows: Vec<usize>, cols: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        if rows.len() != cols.len() || rows.len() != values.len() {
            return Err(PyValueError::new_err("rows, cols and values must have equal length"));
        }
        let t = rows.into_iter().zip(cols).zip(values).map(|((r, c), v)| (r, c, v)).collect();
        Ok(Self {
            name: "triplets".into(),
            inner: CsrMatrix::from_triplets(n, n, t).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_matrix_market(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn max_nnz_row(&self) -> usize {
        self.inner.max_nnz_row()
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(spmv(&self.inner, &x.into()).map_err(to_py)?.into_vec())
    }

    /// Right-hand side of kind "ones", "uniform", "normal" or "file:PATH".
    #[pyo3(signature = (kind = "ones", seed = 0))]
    fn rhs(&self, kind: &str, seed: u64) -> PyResult<Vec<f64>> {
        let spec = RhsSpec::parse(kind, seed).map_err(to_py)?;
        Ok(make_rhs(&spec, self.inner.n_rows()).map_err(to_py)?.into_vec())
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}, n={}, nnz={})", self.name, self.inner.n_rows(), self.inner.nnz())
    }
}

/// Outcome of one solve.
#[pyclass(name = "SolveReport", frozen)]
struct PyReport {
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    total_iters: usize,
    #[pyo3(get)]
    iters_fp32: usize,
    #[pyo3(get)]
    iters_fp64: usize,
    #[pyo3(get)]
    final_relres: f64,
    #[pyo3(get)]
    best_relres: f64,
    #[pyo3(get)]
    loss_of_accuracy: bool,
    #[pyo3(get)]
    stalled_at: Option<usize>,
    #[pyo3(get)]
    restarts: usize,
    #[pyo3(get)]
    solve_time: f64,
    /// (iteration, implicit relres, explicit relres or None, "fp32"/"fp64")
    #[pyo3(get)]
    history: Vec<(usize, f64, Option<f64>, String)>,
    /// Seconds per kernel category.
    #[pyo3(get)]
    kernel_times: HashMap<String, f64>,
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(converged={}, total_iters={}, final_relres={:e})",
            if self.converged { "True" } else { "False" },
            self.total_iters,
            self.final_relres
        )
    }
}

/// Solve A x = b. `solver` is "double", "single", "ir" or "fd";
/// `precond` is "none", "jacobi:K" or "poly:D".
#[pyfunction]
#[pyo3(signature = (a, b = None, solver = "double", m = 50, tol = 1e-10, max_iters = 20000,
                    precond = "none", switch_iter = 0, seed = 0, rcm = false))]
#[allow(clippy::too_many_arguments)]
fn solve(
    a: &PyMatrix,
    b: Option<Vec<f64>>,
    solver: &str,
    m: usize,
    tol: f64,
    max_iters: usize,
    precond: &str,
    switch_iter: usize,
    seed: u64,
    rcm: bool,
) -> PyResult<PyReport> {
    let b = b.unwrap_or_else(|| vec![1.0; a.inner.n_rows()]);
    let mut sys = System::new(a.name.clone(), a.inner.clone(), b).map_err(to_py)?;
    if rcm {
        let (perm, pa) = mpgmres::precond::rcm_reorder(&sys.a).map_err(to_py)?;
        sys = System::new(a.name.clone(), pa, perm.apply(&sys.b)).map_err(to_py)?;
        sys.perm = Some(perm);
    }
    let setup = SolveSetup {
        solver: parse::<SolverKind>(solver)?,
        criteria: StopCriteria::new(tol, max_iters, m).map_err(to_py)?,
        precond: parse::<PrecondSpec>(precond)?,
        switch_iter,
        seed,
    };
    let r = run_solver(&mut sys, &setup).map_err(to_py)?;
    let history = r
        .residual_history
        .iter()
        .map(|h| (h.iteration, h.implicit_relres, h.explicit_relres, h.phase.to_string()))
        .collect();
    let kernel_times = Kernel::ALL
        .iter()
        .map(|&k| (k.name().to_string(), r.kernel_times.get(k)))
        .collect();
    Ok(PyReport {
        x: r.x,
        converged: r.converged,
        total_iters: r.total_iters,
        iters_fp32: r.iters_fp32,
        iters_fp64: r.iters_fp64,
        final_relres: r.final_relres,
        best_relres: r.best_relres,
        loss_of_accuracy: r.loss_of_accuracy,
        stalled_at: r.stalled_at,
        restarts: r.restarts,
        solve_time: r.solve_time,
        history,
        kernel_times,
    })
}

/// Model speedup of fp32 over fp64 SpMV for `w` nonzeros per row.
#[pyfunction]
fn predicted_speedup(w: f64) -> PyResult<f64> {
    model_speedup(w).map_err(to_py)
}

/// Time fp64 and fp32 SpMV; returns a dict of timings and speedups.
#[pyfunction]
#[pyo3(signature = (a, reps = 100, trials = 3, warmup = 10, seed = 0))]
fn spmv_bench(a: &PyMatrix, reps: usize, trials: usize, warmup: usize, seed: u64) -> PyResult<HashMap<String, f64>> {
    let opts = SpmvBenchOptions {
        reps,
        trials,
        warmup,
        seed,
    };
    let r = bench_spmv(&a.inner, &a.name, &opts).map_err(to_py)?;
    Ok(HashMap::from([
        ("t_fp64".to_string(), r.t_fp64),
        ("t_fp32".to_string(), r.t_fp32),
        ("measured_speedup".to_string(), r.measured_speedup),
        ("predicted_speedup".to_string(), r.predicted),
        ("max_nnz_row".to_string(), r.max_nnz_row as f64),
    ]))
}

#[pymodule]
fn pympgmres(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(spmv_bench, m)?)?;
    Ok(())
}
