//! Working precisions and the scalar abstraction shared by every kernel.
//!
//! Precision is carried in the type system: a `DenseVector<f32>` and a
//! `DenseVector<f64>` cannot be mixed in a kernel call, so every change of
//! precision goes through [`convert_vector`] or [`crate::csr::convert_matrix`].

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating point working precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Precision {
    Fp32,
    Fp64,
}

impl Precision {
    /// Unit roundoff: 2^-24 for fp32, 2^-53 for fp64.
    pub fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Fp32 => 2f64.powi(-24),
            Precision::Fp64 => 2f64.powi(-53),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Fp32 => "fp32",
            Precision::Fp64 => "fp64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" | "single" | "float" => Ok(Precision::Fp32),
            "fp64" | "double" => Ok(Precision::Fp64),
            other => Err(Error::InvalidArgument(format!("unknown precision '{other}'"))),
        }
    }
}

/// Real scalar type usable as a working precision.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    const PRECISION: Precision;

    /// Round an f64 to the nearest value of this type.
    fn from_f64(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn unit_roundoff() -> Self {
        Self::from_f64(Self::PRECISION.unit_roundoff())
    }
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::Fp32;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::Fp64;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Round a single value into another precision, reporting overflow.
#[inline]
pub(crate) fn cast_scalar<S: Scalar, T: Scalar>(x: S) -> Option<T> {
    let y = T::from_f64(x.as_f64());
    if x.is_finite() && !y.is_finite() {
        None
    } else {
        Some(y)
    }
}

/// Convert a slice into another precision, naming the first overflowing entry.
pub fn convert_slice<S: Scalar, T: Scalar>(x: &[S]) -> Result<Vec<T>> {
    x.iter()
        .enumerate()
        .map(|(index, &v)| cast_scalar(v).ok_or(Error::Overflow { index }))
        .collect()
}

/// Dense vector of fixed length in a single working precision.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> DenseVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn filled(n: usize, value: T) -> Self {
        Self {
            values: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> From<Vec<T>> for DenseVector<T> {
    fn from(values: Vec<T>) -> Self {
        Self { values }
    }
}

impl<T: Scalar> FromIterator<T> for DenseVector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

impl<T> std::ops::Index<usize> for DenseVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// Round every entry of `x` to the nearest value in precision `T`.
///
/// Widening (fp32 to fp64) is an exact embedding. Narrowing reports
/// [`Error::Overflow`] with the index of the first entry outside the target
/// range.
pub fn convert_vector<S: Scalar, T: Scalar>(x: &DenseVector<S>) -> Result<DenseVector<T>> {
    convert_slice(x.as_slice()).map(DenseVector::from)
}
