//! Mixed-precision restarted GMRES for sparse linear systems.
//!
//! Kernels and solvers are generic over [`Scalar`] (`f32` or `f64`), so the
//! precision of every vector and matrix is part of its type. Casting between
//! precisions is explicit through [`convert_slice`] and [`convert_matrix`].
//!
//! ```
//! use mpgmres::{gen, solvers};
//!
//! let a = gen::generate(&gen::StencilSpec::laplace2d(20)).unwrap();
//! let b = vec![1.0; a.n_rows()];
//! let crit = solvers::StopCriteria::default();
//! let rep = solvers::gmres_ir(&a, &b, &vec![0.0; a.n_rows()], &crit, None).unwrap();
//! assert!(rep.converged && rep.final_relres <= 1e-10);
//! ```

pub mod bench;
pub mod csr;
pub mod dense;
pub mod error;
pub mod gen;
pub mod io;
pub mod krylov;
pub mod precision;
pub mod precond;
pub mod solvers;
pub mod spmv;
pub mod timing;

pub use csr::{convert_matrix, CsrMatrix};
pub use error::{Error, Result};
pub use precision::{convert_slice, convert_vector, DenseVector, Precision, Scalar};
pub use solvers::{
    gmres_fd, gmres_ir, gmres_restarted, SolveReport, SolverKind, StopCriteria,
};
pub use timing::{Kernel, KernelTimes};
