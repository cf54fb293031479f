//! Matrix Market and vector files, convergence/summary CSV, run configs.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::gen::{RhsKind, RhsSpec, StencilSpec};
use crate::precision::{DenseVector, Precision};
use crate::solvers::{
    ResidualRecord, SolveReport, SolverKind, DEFAULT_MAX_ITERS, DEFAULT_RESTART, DEFAULT_RTOL,
};
use crate::timing::Kernel;

/// Smallest tolerance a pure fp32 solve may ask for without `allow_low_tol`.
pub const SINGLE_RTOL_FLOOR: f64 = 1e-6;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::file(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(line: &str) -> Result<(bool, Symmetry)> {
    let lower = line.to_ascii_lowercase();
    let fields: Vec<&str> = lower.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            message: format!("bad Matrix Market header '{line}'"),
        });
    }
    let coordinate = match fields[2] {
        "coordinate" => true,
        "array" => false,
        other => return Err(Error::UnsupportedFormat(format!("storage '{other}'"))),
    };
    if fields[3] != "real" && fields[3] != "double" && fields[3] != "integer" {
        return Err(Error::UnsupportedFormat(format!("field '{}'", fields[3])));
    }
    let sym = match fields[4] {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::UnsupportedFormat(format!("symmetry '{other}'"))),
    };
    Ok((coordinate, sym))
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| {
            r.as_ref()
                .map(|(_, l)| {
                    let t = l.trim();
                    !t.is_empty() && !t.starts_with('%')
                })
                .unwrap_or(true)
        })
}

fn parse_field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} '{tok}'"),
    })
}

/// Parse a `coordinate real general|symmetric` Matrix Market stream.
pub fn read_matrix_market<R: Read>(reader: R) -> Result<CsrMatrix<f64>> {
    let mut reader = BufReader::new(reader);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (coordinate, sym) = parse_header(header.trim())?;
    if !coordinate {
        return Err(Error::UnsupportedFormat("array storage for a sparse matrix".into()));
    }
    let mut lines = data_lines(reader).map(|r| r.map(|(i, l)| (i + 1, l)));
    let (size_line, size) = lines.next().transpose()?.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing size line".into(),
    })?;
    let mut toks = size.split_whitespace();
    let rows: usize = parse_field(toks.next(), size_line, "row count")?;
    let cols: usize = parse_field(toks.next(), size_line, "column count")?;
    let entries: usize = parse_field(toks.next(), size_line, "entry count")?;
    if sym == Symmetry::Symmetric && rows != cols {
        return Err(Error::Parse {
            line: size_line,
            message: "symmetric matrix must be square".into(),
        });
    }
    let mut trip = Vec::with_capacity(if sym == Symmetry::Symmetric { 2 * entries } else { entries });
    let mut seen = 0;
    for item in lines {
        let (line, text) = item?;
        let mut toks = text.split_whitespace();
        let r: usize = parse_field(toks.next(), line, "row index")?;
        let c: usize = parse_field(toks.next(), line, "column index")?;
        let v: f64 = parse_field(toks.next(), line, "value")?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(Error::Parse {
                line,
                message: format!("index ({r}, {c}) outside {rows}x{cols}"),
            });
        }
        if sym == Symmetry::Symmetric && c > r {
            return Err(Error::Parse {
                line,
                message: format!("symmetric storage expects the lower triangle, got ({r}, {c})"),
            });
        }
        trip.push((r - 1, c - 1, v));
        if sym == Symmetry::Symmetric && r != c {
            trip.push((c - 1, r - 1, v));
        }
        seen += 1;
    }
    if seen != entries {
        return Err(Error::Parse {
            line: size_line,
            message: format!("header declares {entries} entries, found {seen}"),
        });
    }
    CsrMatrix::from_triplets(rows, cols, trip)
}

/// Load a Matrix Market file into canonical fp64 CSR.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix<f64>> {
    let path = path.as_ref();
    read_matrix_market(open(path)?)
}

/// Write `a` as `coordinate real general` with round-trip exact values.
pub fn write_matrix_market_to<W: Write>(a: &CsrMatrix<f64>, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market(a: &CsrMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_market_to(a, create(path.as_ref())?)
}

/// Read a dense vector: Matrix Market `array real general` with one column,
/// or plain whitespace-separated values (`%` and `#` start comments).
pub fn read_vector<R: Read>(reader: R) -> Result<DenseVector<f64>> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let mut values = Vec::new();
    let push_tokens = |values: &mut Vec<f64>, text: &str, line: usize| -> Result<()> {
        let text = text.split(['#', '%']).next().unwrap_or_default();
        for tok in text.split_whitespace() {
            values.push(parse_field(Some(tok), line, "vector entry")?);
        }
        Ok(())
    };
    if first.trim_start().starts_with("%%") {
        let (coordinate, _) = parse_header(first.trim())?;
        if coordinate {
            return Err(Error::UnsupportedFormat("coordinate storage for a vector".into()));
        }
        let mut lines = data_lines(reader).map(|r| r.map(|(i, l)| (i + 1, l)));
        let (size_line, size) = lines.next().transpose()?.ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing size line".into(),
        })?;
        let mut toks = size.split_whitespace();
        let rows: usize = parse_field(toks.next(), size_line, "row count")?;
        let cols: usize = parse_field(toks.next(), size_line, "column count")?;
        if cols != 1 {
            return Err(Error::UnsupportedFormat(format!("{cols}-column array as a vector")));
        }
        for item in lines {
            let (line, text) = item?;
            push_tokens(&mut values, &text, line)?;
        }
        if values.len() != rows {
            return Err(Error::Parse {
                line: size_line,
                message: format!("header declares {rows} entries, found {}", values.len()),
            });
        }
    } else {
        push_tokens(&mut values, &first, 1)?;
        for (i, l) in reader.lines().enumerate() {
            push_tokens(&mut values, &l?, i + 2)?;
        }
    }
    Ok(DenseVector::from(values))
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<DenseVector<f64>> {
    let path = path.as_ref();
    read_vector(open(path)?)
}

/// Matrix Market `array real general` column vector.
pub fn write_vector(x: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = create(path.as_ref())?;
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

const CONVERGENCE_HEADER: [&str; 4] = ["iteration", "implicit_relres", "explicit_relres", "phase"];

pub fn write_convergence_to<W: Write>(history: &[ResidualRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CONVERGENCE_HEADER)?;
    for r in history {
        out.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.implicit_relres),
            r.explicit_relres.map(|e| format!("{e:e}")).unwrap_or_default(),
            r.phase.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per iteration; `explicit_relres` is blank between restarts.
pub fn write_convergence_csv(report: &SolveReport, path: impl AsRef<Path>) -> Result<()> {
    write_convergence_to(&report.residual_history, create(path.as_ref())?)
}

pub fn read_convergence_from<R: Read>(r: R) -> Result<Vec<ResidualRecord>> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.clone();
    if header.iter().ne(CONVERGENCE_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected convergence CSV header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in input.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let explicit = match rec.get(2) {
            Some("") | None => None,
            Some(s) => Some(parse_field(Some(s), line, "explicit_relres")?),
        };
        let phase: Precision = rec.get(3).unwrap_or_default().parse().map_err(|_| Error::Parse {
            line,
            message: "invalid phase".into(),
        })?;
        out.push(ResidualRecord {
            iteration: parse_field(rec.get(0), line, "iteration")?,
            implicit_relres: parse_field(rec.get(1), line, "implicit_relres")?,
            explicit_relres: explicit,
            phase,
        });
    }
    Ok(out)
}

pub fn read_convergence_csv(path: impl AsRef<Path>) -> Result<Vec<ResidualRecord>> {
    let path = path.as_ref();
    read_convergence_from(open(path)?)
}

/// One line of a solver-comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub n: usize,
    pub nnz: usize,
    pub solver: String,
    pub precond: String,
    pub time_s: f64,
    pub iters: usize,
    pub converged: bool,
    pub loss_of_accuracy: bool,
    /// Seconds per kernel, in [`Kernel::ALL`] order.
    pub kernel_s: [f64; 5],
}

impl SummaryRow {
    pub fn from_report(
        name: &str,
        a: &CsrMatrix<f64>,
        solver: SolverKind,
        precond: &str,
        report: &SolveReport,
    ) -> Self {
        Self {
            name: name.to_string(),
            n: a.n_rows(),
            nnz: a.nnz(),
            solver: solver.to_string(),
            precond: precond.to_string(),
            time_s: report.solve_time,
            iters: report.total_iters,
            converged: report.converged,
            loss_of_accuracy: report.loss_of_accuracy,
            kernel_s: Kernel::ALL.map(|k| report.kernel_times.get(k)),
        }
    }
}

pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path.as_ref())?);
    let mut header: Vec<String> = [
        "name",
        "n",
        "nnz",
        "solver",
        "precond",
        "time_s",
        "iters",
        "converged",
        "loss_of_accuracy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(Kernel::ALL.iter().map(|k| format!("{}_s", k.name())));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.name.clone(),
            r.n.to_string(),
            r.nnz.to_string(),
            r.solver.clone(),
            r.precond.clone(),
            format!("{:e}", r.time_s),
            r.iters.to_string(),
            r.converged.to_string(),
            r.loss_of_accuracy.to_string(),
        ];
        rec.extend(r.kernel_s.iter().map(|s| format!("{s:e}")));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Where the system matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    File(PathBuf),
    Generator(StencilSpec),
}

impl MatrixSource {
    pub fn load(&self) -> Result<CsrMatrix<f64>> {
        match self {
            MatrixSource::File(p) => load_matrix_market(p),
            MatrixSource::Generator(spec) => crate::gen::generate(spec),
        }
    }

    /// Short name for tables: file stem or generator string.
    pub fn name(&self) -> String {
        match self {
            MatrixSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            MatrixSource::Generator(spec) => spec.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondSpec {
    None,
    Jacobi(usize),
    Poly(usize),
}

impl fmt::Display for PrecondSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecondSpec::None => f.write_str("none"),
            PrecondSpec::Jacobi(k) => write!(f, "jacobi:{k}"),
            PrecondSpec::Poly(d) => write!(f, "poly:{d}"),
        }
    }
}

impl FromStr for PrecondSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid preconditioner '{s}' (none|jacobi:K|poly:D)"));
        if s == "none" {
            return Ok(PrecondSpec::None);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let arg: usize = arg.parse().map_err(|_| bad())?;
        match kind {
            "jacobi" if arg >= 1 => Ok(PrecondSpec::Jacobi(arg)),
            "poly" => Ok(PrecondSpec::Poly(arg)),
            _ => Err(bad()),
        }
    }
}

/// A complete experiment description.
///
/// Text form: `key=value` pairs separated by whitespace or newlines, `#`
/// starts a comment. Keys: `matrix` (Matrix Market path) or `gen`
/// (generator spec), `solver` (double|single|ir|fd), `m`, `tol`,
/// `max_iters`, `precond` (none|jacobi:K|poly:D), `rcm` (true|false), `rhs`
/// (ones|uniform|normal|file:PATH), `seed`, `switch_iter`, `allow_low_tol`,
/// `out`. Hyphens in keys are accepted as underscores.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub matrix: MatrixSource,
    pub solver: SolverKind,
    pub m: usize,
    pub rtol: f64,
    pub max_iters: usize,
    pub precond: PrecondSpec,
    pub rcm: bool,
    pub rhs: RhsSpec,
    pub switch_iter: Option<usize>,
    pub seed: u64,
    pub allow_low_tol: bool,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(matrix: MatrixSource, solver: SolverKind) -> Self {
        Self {
            matrix,
            solver,
            m: DEFAULT_RESTART,
            rtol: DEFAULT_RTOL,
            max_iters: DEFAULT_MAX_ITERS,
            precond: PrecondSpec::None,
            rcm: false,
            rhs: RhsSpec::ones(),
            switch_iter: None,
            seed: 0,
            allow_low_tol: false,
            out_dir: None,
        }
    }

    pub fn criteria(&self) -> Result<crate::solvers::StopCriteria> {
        crate::solvers::StopCriteria::new(self.rtol, self.max_iters, self.m)
    }

    pub fn validate(&self) -> Result<()> {
        self.criteria().map_err(|e| Error::Config(e.to_string()))?;
        match (self.solver, self.switch_iter) {
            (SolverKind::FD, None) => {
                return Err(Error::Config("solver=fd requires switch_iter".into()));
            }
            (SolverKind::FD, Some(s)) if s % self.m != 0 => {
                return Err(Error::Config(format!(
                    "switch_iter={s} is not a multiple of m={}",
                    self.m
                )));
            }
            (SolverKind::FD, Some(_)) => {}
            (_, Some(_)) => {
                return Err(Error::Config("switch_iter only applies to solver=fd".into()));
            }
            (_, None) => {}
        }
        if self.solver == SolverKind::FD && self.precond != PrecondSpec::None {
            return Err(Error::Config("solver=fd does not support a preconditioner".into()));
        }
        if self.solver == SolverKind::Single && self.rtol < SINGLE_RTOL_FLOOR && !self.allow_low_tol {
            return Err(Error::Config(format!(
                "solver=single cannot reach tol={:e}; fp32 stalls near {SINGLE_RTOL_FLOOR:e} \
                 (set allow_low_tol=true to override)",
                self.rtol
            )));
        }
        if let PrecondSpec::Poly(0) = self.precond {
            return Err(Error::Config("poly degree must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical text form; `parse_run_config(c.to_text()) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.matrix {
            MatrixSource::File(p) => s.push_str(&format!("matrix={}\n", p.display())),
            MatrixSource::Generator(g) => s.push_str(&format!("gen={g}\n")),
        }
        s.push_str(&format!("solver={}\n", self.solver));
        s.push_str(&format!("m={}\n", self.m));
        s.push_str(&format!("tol={:e}\n", self.rtol));
        s.push_str(&format!("max_iters={}\n", self.max_iters));
        s.push_str(&format!("precond={}\n", self.precond));
        s.push_str(&format!("rcm={}\n", self.rcm));
        s.push_str(&format!("rhs={}\n", self.rhs.label()));
        s.push_str(&format!("seed={}\n", self.seed));
        if let Some(k) = self.switch_iter {
            s.push_str(&format!("switch_iter={k}\n"));
        }
        if self.allow_low_tol {
            s.push_str("allow_low_tol=true\n");
        }
        if let Some(o) = &self.out_dir {
            s.push_str(&format!("out={}\n", o.display()));
        }
        s
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn config_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

/// Parse the `key=value` config format documented on [`RunConfig`].
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut matrix = None;
    let mut solver = None;
    let mut rhs_text = None;
    let mut cfg = RunConfig::new(MatrixSource::Generator(StencilSpec::laplace2d(2)), SolverKind::Double);
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or_default();
        for tok in line.split_whitespace() {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{tok}'")))?;
            let key = key.replace('-', "_");
            match key.as_str() {
                "matrix" | "gen" if matrix.is_some() => {
                    return Err(Error::Config("matrix given more than once".into()));
                }
                "matrix" => matrix = Some(MatrixSource::File(PathBuf::from(value))),
                "gen" => matrix = Some(MatrixSource::Generator(value.parse().map_err(|e: Error| Error::Config(e.to_string()))?)),
                "solver" if value.is_empty() => {}
                "solver" => solver = Some(value.parse().map_err(|e: Error| Error::Config(e.to_string()))?),
                "m" => cfg.m = config_value(&key, value)?,
                "tol" | "rtol" => cfg.rtol = config_value(&key, value)?,
                "max_iters" => cfg.max_iters = config_value(&key, value)?,
                "precond" => cfg.precond = value.parse()?,
                "rcm" => cfg.rcm = config_value(&key, value)?,
                "rhs" => rhs_text = Some(value.to_string()),
                "seed" => cfg.seed = config_value(&key, value)?,
                "switch_iter" => cfg.switch_iter = Some(config_value(&key, value)?),
                "allow_low_tol" => cfg.allow_low_tol = config_value(&key, value)?,
                "out" => cfg.out_dir = Some(PathBuf::from(value)),
                _ => return Err(Error::Config(format!("unknown key '{key}'"))),
            }
        }
    }
    cfg.solver = solver.ok_or_else(|| Error::Config("solver required".into()))?;
    cfg.matrix = matrix.ok_or_else(|| Error::Config("matrix required (matrix=PATH or gen=SPEC)".into()))?;
    if let Some(r) = rhs_text {
        cfg.rhs = RhsSpec::parse(&r, cfg.seed).map_err(|e| Error::Config(e.to_string()))?;
    }
    if !matches!(cfg.rhs.kind, RhsKind::FromFile(_) | RhsKind::Ones) {
        cfg.rhs.seed = cfg.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_run_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate;

    #[test]
    fn general_two_by_two() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 3\n1 1 4\n1 2 1\n2 1 1\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.row_ptr(), &[0, 2, 3]);
        assert_eq!(a.col_idx(), &[0, 1, 0]);
        assert_eq!(a.values(), &[4.0, 1.0, 1.0]);
    }

    #[test]
    fn symmetric_expansion() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2\n2 1 -1\n3 3 2\n3 2 -1\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.nnz(), 6);
        assert_eq!(a.transpose(), a);
    }

    #[test]
    fn duplicates_are_summed() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.5\n1 1 2.5\n2 2 1\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 4.0);
    }

    #[test]
    fn unsupported_formats() {
        for h in [
            "%%MatrixMarket matrix coordinate complex general",
            "%%MatrixMarket matrix coordinate pattern general",
            "%%MatrixMarket matrix array real general",
            "%%MatrixMarket matrix coordinate real hermitian",
        ] {
            let text = format!("{h}\n1 1 1\n1 1 1\n");
            assert!(matches!(read_matrix_market(text.as_bytes()), Err(Error::UnsupportedFormat(_))), "{h}");
        }
    }

    #[test]
    fn out_of_range_reports_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1\n3 1 1\n";
        match read_matrix_market(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_round_trip() {
        let a = generate(&StencilSpec::bent_pipe2d(9)).unwrap();
        let mut buf = Vec::new();
        write_matrix_market_to(&a, &mut buf).unwrap();
        assert_eq!(read_matrix_market(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn vector_formats() {
        let mm = "%%MatrixMarket matrix array real general\n% c\n3 1\n1.5\n-2\n3e-3\n";
        assert_eq!(read_vector(mm.as_bytes()).unwrap().as_slice(), &[1.5, -2.0, 3e-3]);
        let plain = "1 2\n# comment\n3\n";
        assert_eq!(read_vector(plain.as_bytes()).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert!(read_vector("1 x\n".as_bytes()).is_err());
    }

    #[test]
    fn convergence_round_trip() {
        let hist = vec![
            ResidualRecord { iteration: 0, implicit_relres: 1.0, explicit_relres: Some(1.0), phase: Precision::Fp32 },
            ResidualRecord { iteration: 1, implicit_relres: 0.1 / 3.0, explicit_relres: None, phase: Precision::Fp32 },
            ResidualRecord { iteration: 2, implicit_relres: 1e-300, explicit_relres: Some(2.5e-11), phase: Precision::Fp64 },
        ];
        let mut buf = Vec::new();
        write_convergence_to(&hist, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,implicit_relres,explicit_relres,phase\n"));
        assert_eq!(read_convergence_from(buf.as_slice()).unwrap(), hist);
    }

    #[test]
    fn precond_spec_parse() {
        assert_eq!("poly:40".parse::<PrecondSpec>().unwrap(), PrecondSpec::Poly(40));
        assert_eq!("jacobi:42".parse::<PrecondSpec>().unwrap(), PrecondSpec::Jacobi(42));
        assert_eq!("none".parse::<PrecondSpec>().unwrap(), PrecondSpec::None);
        assert!("jacobi:0".parse::<PrecondSpec>().is_err());
        assert!("ilu:1".parse::<PrecondSpec>().is_err());
    }

    #[test]
    fn config_requires_solver() {
        let err = parse_run_config("gen=laplace2d:10 solver=").unwrap_err();
        assert!(err.to_string().contains("solver required"), "{err}");
        assert!(parse_run_config("gen=laplace2d:10").unwrap_err().to_string().contains("solver required"));
    }

    #[test]
    fn config_fd_multiple_of_m() {
        let err = parse_run_config("gen=laplace2d:10 solver=fd m=50 switch_iter=75").unwrap_err();
        assert!(err.to_string().contains("not a multiple of m"), "{err}");
        assert!(parse_run_config("gen=laplace2d:10 solver=fd m=50 switch_iter=100").is_ok());
    }

    #[test]
    fn config_defaults_and_rejections() {
        let c = parse_run_config("gen=laplace2d:10 solver=ir").unwrap();
        assert_eq!(c.m, 50);
        assert_eq!(c.rtol, 1e-10);
        assert!(parse_run_config("gen=laplace2d:10 solver=ir colour=blue").is_err());
        assert!(parse_run_config("gen=laplace2d:10 solver=single").is_err());
        assert!(parse_run_config("gen=laplace2d:10 solver=single tol=1e-5").is_ok());
        assert!(parse_run_config("gen=laplace2d:10 solver=single allow_low_tol=true").is_ok());
        assert!(parse_run_config("gen=laplace2d:10 solver=fd switch_iter=50 precond=poly:5").is_err());
    }

    #[test]
    fn config_echo() {
        let text = "gen=bentpipe2d:100:50\nsolver=fd\nm=25\ntol=1e-9\nmax_iters=5000\nprecond=none\n\
                    rcm=true\nrhs=normal\nseed=7\nswitch_iter=75\nout=results\n";
        let c = parse_run_config(text).unwrap();
        assert_eq!(c.rhs, RhsSpec::normal(7));
        assert_eq!(c.to_text(), text);
        assert_eq!(parse_run_config(&c.to_text()).unwrap(), c);
        let c2 = parse_run_config("matrix=data/a.mtx solver=ir precond=poly:40 rhs=file:b.txt").unwrap();
        assert_eq!(parse_run_config(&c2.to_text()).unwrap(), c2);
        assert_eq!(c2.matrix.name(), "a");
    }
}
