//! Finite-difference test matrices and right-hand side generators.
//!
//! Grids are indexed lexicographically with x fastest and use homogeneous
//! Dirichlet boundaries (out-of-grid neighbours are dropped). All stencils
//! are scaled by h^2, so the Laplacians have small integer entries.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::precision::DenseVector;

pub const DEFAULT_CONVECTION: f64 = 50.0;
pub const DEFAULT_STRETCH: f64 = 1e4;

/// Velocity field of a convection-diffusion problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvectionField {
    /// (c, 0) on the unit square.
    Uniform,
    /// c * (2y(1 - x^2), -2x(1 - y^2)) on [-1, 1]^2.
    BentPipe,
    /// c * (4x(x - 1)(1 - 2y), -4y(y - 1)(1 - 2x)) on the unit square.
    Recirculating,
}

impl ConvectionField {
    fn domain(self) -> (f64, f64) {
        match self {
            ConvectionField::BentPipe => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    fn velocity(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            ConvectionField::Uniform => (1.0, 0.0),
            ConvectionField::BentPipe => (2.0 * y * (1.0 - x * x), -2.0 * x * (1.0 - y * y)),
            ConvectionField::Recirculating => (
                4.0 * x * (x - 1.0) * (1.0 - 2.0 * y),
                -4.0 * y * (y - 1.0) * (1.0 - 2.0 * x),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StencilKind {
    Laplace2D,
    Laplace3D,
    ConvDiff2D {
        field: ConvectionField,
        magnitude: f64,
    },
    /// 5-point Laplacian with y couplings scaled by `ratio`.
    Stretched2D { ratio: f64 },
    /// 13-point discrete biharmonic.
    Biharmonic2D,
    /// 9-point box stencil.
    Star2D,
    Recirc2D { magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilSpec {
    pub kind: StencilKind,
    /// Grid points per dimension.
    pub nx: usize,
}

impl StencilSpec {
    pub fn new(kind: StencilKind, nx: usize) -> Self {
        Self { kind, nx }
    }

    pub fn laplace2d(nx: usize) -> Self {
        Self::new(StencilKind::Laplace2D, nx)
    }

    pub fn laplace3d(nx: usize) -> Self {
        Self::new(StencilKind::Laplace3D, nx)
    }

    pub fn conv_diff2d(nx: usize, field: ConvectionField, magnitude: f64) -> Self {
        Self::new(StencilKind::ConvDiff2D { field, magnitude }, nx)
    }

    pub fn uni_flow2d(nx: usize) -> Self {
        Self::conv_diff2d(nx, ConvectionField::Uniform, DEFAULT_CONVECTION)
    }

    pub fn bent_pipe2d(nx: usize) -> Self {
        Self::conv_diff2d(nx, ConvectionField::BentPipe, DEFAULT_CONVECTION)
    }

    pub fn recirc2d(nx: usize) -> Self {
        Self::new(
            StencilKind::Recirc2D {
                magnitude: DEFAULT_CONVECTION,
            },
            nx,
        )
    }

    pub fn stretched2d(nx: usize) -> Self {
        Self::new(
            StencilKind::Stretched2D {
                ratio: DEFAULT_STRETCH,
            },
            nx,
        )
    }

    pub fn biharmonic2d(nx: usize) -> Self {
        Self::new(StencilKind::Biharmonic2D, nx)
    }

    pub fn star2d(nx: usize) -> Self {
        Self::new(StencilKind::Star2D, nx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points per dimension, got {}",
                self.nx
            )));
        }
        let rows = match self.kind {
            StencilKind::Laplace3D => self.nx.checked_pow(3),
            _ => self.nx.checked_pow(2),
        };
        if rows.is_none_or(|n| n > crate::csr::MAX_INDEX) {
            return Err(Error::InvalidArgument(format!(
                "grid size {} exceeds the 32-bit index range",
                self.nx
            )));
        }
        match self.kind {
            StencilKind::ConvDiff2D { magnitude, .. } | StencilKind::Recirc2D { magnitude }
                if !magnitude.is_finite() =>
            {
                Err(Error::InvalidArgument("convection magnitude must be finite".into()))
            }
            StencilKind::Stretched2D { ratio } if !(ratio > 0.0 && ratio.is_finite()) => Err(
                Error::InvalidArgument("stretch ratio must be positive and finite".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Rows and stored nonzeros, computed without building the matrix.
    pub fn dimensions(&self) -> (usize, usize) {
        let nx = self.nx;
        match self.kind {
            StencilKind::Laplace3D => (nx.pow(3), 7 * nx.pow(3) - 6 * nx.pow(2)),
            StencilKind::Star2D => (nx * nx, (3 * nx - 2).pow(2)),
            StencilKind::Biharmonic2D => (nx * nx, (3 * nx - 2).pow(2) + 4 * nx * (nx - 2)),
            _ => (nx * nx, 5 * nx * nx - 4 * nx),
        }
    }

    pub fn is_symmetric_kind(&self) -> bool {
        match self.kind {
            StencilKind::ConvDiff2D { magnitude, .. } | StencilKind::Recirc2D { magnitude } => {
                magnitude == 0.0
            }
            _ => true,
        }
    }
}

impl fmt::Display for StencilSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nx = self.nx;
        match self.kind {
            StencilKind::Laplace2D => write!(f, "laplace2d:{nx}"),
            StencilKind::Laplace3D => write!(f, "laplace3d:{nx}"),
            StencilKind::ConvDiff2D { field, magnitude } => {
                let name = match field {
                    ConvectionField::Uniform => "uniflow2d",
                    ConvectionField::BentPipe => "bentpipe2d",
                    ConvectionField::Recirculating => "convdiff2d",
                };
                write!(f, "{name}:{nx}:{magnitude}")
            }
            StencilKind::Stretched2D { ratio } => write!(f, "stretched2d:{nx}:{ratio}"),
            StencilKind::Biharmonic2D => write!(f, "biharmonic2d:{nx}"),
            StencilKind::Star2D => write!(f, "star2d:{nx}"),
            StencilKind::Recirc2D { magnitude } => write!(f, "recirc2d:{nx}:{magnitude}"),
        }
    }
}

impl FromStr for StencilSpec {
    type Err = Error;

    /// Parses `kind:nx[:param]`, e.g. `laplace2d:50` or `bentpipe2d:100:200`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(m);
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let nx: usize = parts
            .next()
            .ok_or_else(|| bad(format!("generator '{s}' missing grid size")))?
            .parse()
            .map_err(|_| bad(format!("generator '{s}' has invalid grid size")))?;
        let param = parts
            .next()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| bad(format!("generator '{s}' has invalid parameter '{p}'")))
            })
            .transpose()?;
        if parts.next().is_some() {
            return Err(bad(format!("generator '{s}' has too many fields")));
        }
        let conv = param.unwrap_or(DEFAULT_CONVECTION);
        let kind = match name.as_str() {
            "laplace2d" => StencilKind::Laplace2D,
            "laplace3d" => StencilKind::Laplace3D,
            "convdiff2d" => StencilKind::ConvDiff2D {
                field: ConvectionField::Recirculating,
                magnitude: conv,
            },
            "uniflow2d" => StencilKind::ConvDiff2D {
                field: ConvectionField::Uniform,
                magnitude: conv,
            },
            "bentpipe2d" => StencilKind::ConvDiff2D {
                field: ConvectionField::BentPipe,
                magnitude: conv,
            },
            "recirc2d" => StencilKind::Recirc2D { magnitude: conv },
            "stretched2d" => StencilKind::Stretched2D {
                ratio: param.unwrap_or(DEFAULT_STRETCH),
            },
            "biharmonic2d" => StencilKind::Biharmonic2D,
            "star2d" => StencilKind::Star2D,
            other => return Err(bad(format!("unknown generator '{other}'"))),
        };
        if param.is_some()
            && matches!(
                kind,
                StencilKind::Laplace2D
                    | StencilKind::Laplace3D
                    | StencilKind::Biharmonic2D
                    | StencilKind::Star2D
            )
        {
            return Err(bad(format!("generator '{name}' takes no parameter")));
        }
        let spec = StencilSpec::new(kind, nx);
        spec.validate()?;
        Ok(spec)
    }
}

type Coef<'a> = dyn Fn(usize, usize, usize) -> f64 + 'a;

/// Assemble a constant-offset stencil; `coef(k, i, j)` gives the value of
/// offset `k` at node `(i, j)`.
fn assemble_2d(nx: usize, offsets: &[(isize, isize)], coef: &Coef<'_>) -> CsrMatrix<f64> {
    let n = nx * nx;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(offsets.len());
    for j in 0..nx {
        for i in 0..nx {
            row.clear();
            for (k, &(di, dj)) in offsets.iter().enumerate() {
                let (ii, jj) = (i as isize + di, j as isize + dj);
                if ii < 0 || jj < 0 || ii >= nx as isize || jj >= nx as isize {
                    continue;
                }
                row.push(((jj as usize * nx + ii as usize) as u32, coef(k, i, j)));
            }
            row.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::new(n, n, row_ptr, col_idx, values).expect("stencil assembly is canonical")
}

const FIVE_POINT: [(isize, isize); 5] = [(0, -1), (-1, 0), (0, 0), (1, 0), (0, 1)];

fn conv_diff(nx: usize, field: ConvectionField, magnitude: f64) -> CsrMatrix<f64> {
    let (lo, hi) = field.domain();
    let h = (hi - lo) / (nx as f64 + 1.0);
    let coord = |i: usize| lo + (i as f64 + 1.0) * h;
    assemble_2d(nx, &FIVE_POINT, &|k, i, j| {
        let (vx, vy) = field.velocity(coord(i), coord(j));
        let (cx, cy) = (magnitude * vx * h / 2.0, magnitude * vy * h / 2.0);
        match k {
            0 => -1.0 - cy,
            1 => -1.0 - cx,
            2 => 4.0,
            3 => -1.0 + cx,
            _ => -1.0 + cy,
        }
    })
}

/// Build the sparse matrix described by `spec`.
pub fn generate(spec: &StencilSpec) -> Result<CsrMatrix<f64>> {
    spec.validate()?;
    let nx = spec.nx;
    let a = match spec.kind {
        StencilKind::Laplace2D => conv_diff(nx, ConvectionField::Uniform, 0.0),
        StencilKind::ConvDiff2D { field, magnitude } => conv_diff(nx, field, magnitude),
        StencilKind::Recirc2D { magnitude } => {
            conv_diff(nx, ConvectionField::Recirculating, magnitude)
        }
        StencilKind::Stretched2D { ratio } => {
            assemble_2d(nx, &FIVE_POINT, &|k, _, _| match k {
                0 | 4 => -ratio,
                2 => 2.0 + 2.0 * ratio,
                _ => -1.0,
            })
        }
        StencilKind::Star2D => {
            let offsets: Vec<(isize, isize)> = (-1..=1)
                .flat_map(|dj| (-1..=1).map(move |di| (di, dj)))
                .collect();
            assemble_2d(nx, &offsets, &|k, _, _| if k == 4 { 8.0 } else { -1.0 })
        }
        StencilKind::Biharmonic2D => {
            let mut offsets: Vec<(isize, isize)> = (-1..=1)
                .flat_map(|dj| (-1..=1).map(move |di| (di, dj)))
                .collect();
            offsets.extend([(0, -2), (-2, 0), (2, 0), (0, 2)]);
            assemble_2d(nx, &offsets, &|k, _, _| match k {
                4 => 20.0,
                1 | 3 | 5 | 7 => -8.0,
                0 | 2 | 6 | 8 => 2.0,
                _ => 1.0,
            })
        }
        StencilKind::Laplace3D => laplace3d(nx),
    };
    Ok(a)
}

fn laplace3d(nx: usize) -> CsrMatrix<f64> {
    let n = nx * nx * nx;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(7 * n);
    let mut values = Vec::with_capacity(7 * n);
    row_ptr.push(0);
    let plane = nx * nx;
    for k in 0..nx {
        for j in 0..nx {
            for i in 0..nx {
                let p = k * plane + j * nx + i;
                let mut push = |c: usize, v: f64| {
                    col_idx.push(c as u32);
                    values.push(v);
                };
                if k > 0 {
                    push(p - plane, -1.0);
                }
                if j > 0 {
                    push(p - nx, -1.0);
                }
                if i > 0 {
                    push(p - 1, -1.0);
                }
                push(p, 6.0);
                if i + 1 < nx {
                    push(p + 1, -1.0);
                }
                if j + 1 < nx {
                    push(p + nx, -1.0);
                }
                if k + 1 < nx {
                    push(p + plane, -1.0);
                }
                row_ptr.push(col_idx.len());
            }
        }
    }
    CsrMatrix::new(n, n, row_ptr, col_idx, values).expect("stencil assembly is canonical")
}

/// Constant-coefficient tridiagonal matrix.
pub fn tridiagonal(n: usize, lower: f64, diag: f64, upper: f64) -> CsrMatrix<f64> {
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            trip.push((i, i - 1, lower));
        }
        trip.push((i, i, diag));
        if i + 1 < n {
            trip.push((i, i + 1, upper));
        }
    }
    CsrMatrix::from_triplets(n, n, trip).expect("tridiagonal is in range")
}

/// Random nonsymmetric sparse matrix with `per_row` off-diagonal standard
/// normal entries per row and a diagonal shifted by `shift`.
pub fn random_sparse(n: usize, per_row: usize, shift: f64, seed: u64) -> CsrMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip = Vec::with_capacity(n * (per_row + 1));
    for i in 0..n {
        trip.push((i, i, shift + rng.sample::<f64, _>(StandardNormal)));
        for _ in 0..per_row {
            let j = rng.random_range(0..n);
            trip.push((i, j, rng.sample::<f64, _>(StandardNormal)));
        }
    }
    CsrMatrix::from_triplets(n, n, trip).expect("random entries are in range")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsKind {
    Ones,
    FromFile(PathBuf),
    RandomUniform01,
    RandomNormal,
}

/// Right-hand side description; random kinds are reproducible from `seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhsSpec {
    pub kind: RhsKind,
    pub seed: u64,
}

impl RhsSpec {
    pub fn ones() -> Self {
        Self {
            kind: RhsKind::Ones,
            seed: 0,
        }
    }

    pub fn uniform(seed: u64) -> Self {
        Self {
            kind: RhsKind::RandomUniform01,
            seed,
        }
    }

    pub fn normal(seed: u64) -> Self {
        Self {
            kind: RhsKind::RandomNormal,
            seed,
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: RhsKind::FromFile(path.into()),
            seed: 0,
        }
    }

    /// Parse `ones`, `uniform`, `normal` or `file:PATH`.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        let kind = match s {
            "ones" => RhsKind::Ones,
            "uniform" => RhsKind::RandomUniform01,
            "normal" => RhsKind::RandomNormal,
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => RhsKind::FromFile(PathBuf::from(p)),
                _ => return Err(Error::InvalidArgument(format!("unknown rhs kind '{s}'"))),
            },
        };
        Ok(Self { kind, seed })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            RhsKind::Ones => "ones".into(),
            RhsKind::RandomUniform01 => "uniform".into(),
            RhsKind::RandomNormal => "normal".into(),
            RhsKind::FromFile(p) => format!("file:{}", p.display()),
        }
    }
}

/// Generate a right-hand side of length `n` in fp64.
pub fn make_rhs(spec: &RhsSpec, n: usize) -> Result<DenseVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = match &spec.kind {
        RhsKind::Ones => DenseVector::filled(n, 1.0),
        RhsKind::RandomUniform01 => (0..n)
            .map(|_| loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            })
            .collect(),
        RhsKind::RandomNormal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        RhsKind::FromFile(path) => {
            let v = crate::io::load_vector(path)?;
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "rhs file",
                    expected: n,
                    found: v.len(),
                });
            }
            v
        }
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_sums(a: &CsrMatrix<f64>) -> Vec<f64> {
        (0..a.n_rows()).map(|r| a.row(r).1.iter().sum()).collect()
    }

    #[test]
    fn tiny_laplacians() {
        let a = generate(&StencilSpec::laplace2d(2)).unwrap();
        assert_eq!((a.n_rows(), a.nnz()), (4, 12));
        assert!(a.diagonal().iter().all(|&d| d == 4.0));
        assert!(row_sums(&a).iter().all(|&s| s == 2.0));

        let a = generate(&StencilSpec::laplace3d(2)).unwrap();
        assert_eq!(a.n_rows(), 8);
        assert!(a.diagonal().iter().all(|&d| d == 6.0));
        assert!(row_sums(&a).iter().all(|&s| s == 3.0));
    }

    #[test]
    fn bent_pipe_dimensions_without_building() {
        let spec = StencilSpec::bent_pipe2d(1500);
        assert_eq!(spec.dimensions(), (2_250_000, 11_244_000));
        assert!(!spec.is_symmetric_kind());
    }

    #[test]
    fn dimensions_match_generated() {
        for nx in [2, 3, 5, 9] {
            for spec in [
                StencilSpec::laplace2d(nx),
                StencilSpec::laplace3d(nx),
                StencilSpec::bent_pipe2d(nx),
                StencilSpec::recirc2d(nx),
                StencilSpec::stretched2d(nx),
                StencilSpec::star2d(nx),
                StencilSpec::biharmonic2d(nx),
            ] {
                let a = generate(&spec).unwrap();
                assert_eq!(spec.dimensions(), (a.n_rows(), a.nnz()), "{spec}");
            }
        }
    }

    #[test]
    fn symmetry_by_kind() {
        assert!(generate(&StencilSpec::laplace2d(6)).unwrap().is_symmetric());
        assert!(generate(&StencilSpec::laplace3d(4)).unwrap().is_symmetric());
        assert!(generate(&StencilSpec::biharmonic2d(6)).unwrap().is_symmetric());
        assert!(!generate(&StencilSpec::bent_pipe2d(6)).unwrap().is_symmetric());
        assert!(!generate(&StencilSpec::uni_flow2d(6)).unwrap().is_symmetric());
        assert!(!generate(&StencilSpec::recirc2d(6)).unwrap().is_symmetric());
    }

    #[test]
    fn zero_convection_is_laplace_bitwise() {
        let lap = generate(&StencilSpec::laplace2d(7)).unwrap();
        for field in [
            ConvectionField::Uniform,
            ConvectionField::BentPipe,
            ConvectionField::Recirculating,
        ] {
            let cd = generate(&StencilSpec::conv_diff2d(7, field, 0.0)).unwrap();
            assert_eq!(cd, lap);
        }
    }

    #[test]
    fn laplace_row_sums_nonnegative() {
        for a in [
            generate(&StencilSpec::laplace2d(9)).unwrap(),
            generate(&StencilSpec::laplace3d(5)).unwrap(),
        ] {
            assert!(row_sums(&a).iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["laplace2d:50", "bentpipe2d:100:200", "stretched2d:30:10000", "star2d:8"] {
            let spec: StencilSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<StencilSpec>().unwrap(), spec);
        }
        assert!("laplace2d:1".parse::<StencilSpec>().is_err());
        assert!("laplace2d:10:3".parse::<StencilSpec>().is_err());
        assert!("mystery:10".parse::<StencilSpec>().is_err());
    }

    #[test]
    fn rhs_ones() {
        assert_eq!(make_rhs(&RhsSpec::ones(), 5).unwrap().as_slice(), &[1.0; 5]);
    }

    #[test]
    fn rhs_uniform_statistics() {
        let v = make_rhs(&RhsSpec::uniform(42), 10_000).unwrap();
        assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() <= 0.02);
        assert_eq!(v, make_rhs(&RhsSpec::uniform(42), 10_000).unwrap());
        assert_ne!(v, make_rhs(&RhsSpec::uniform(43), 10_000).unwrap());
    }

    #[test]
    fn rhs_normal_statistics() {
        let v = make_rhs(&RhsSpec::normal(7), 10_000).unwrap();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 0.05);
        assert!((std - 1.0).abs() <= 0.05);
    }

    #[test]
    fn rhs_labels_parse_back() {
        for s in ["ones", "uniform", "normal", "file:/tmp/b.mtx"] {
            assert_eq!(RhsSpec::parse(s, 3).unwrap().label(), s);
        }
        assert!(RhsSpec::parse("file:", 0).is_err());
    }
}
