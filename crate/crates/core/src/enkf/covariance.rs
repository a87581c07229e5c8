use rand::Rng;
use rand_distr::StandardNormal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, Matrix};
use crate::scalar::Real;

/// Shape of a process-noise covariance `scale * S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseShape {
    /// `S = J`, the matrix of ones: one common draw shifts every coordinate.
    #[default]
    Ones,
    /// `S = I`.
    Diagonal,
}

/// Symmetric positive semi-definite covariance with cheap sampling for the
/// structured cases the filter uses (diagonal, `c * J + diag`).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance<T> {
    repr: Repr<T>,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr<T> {
    Diagonal(Vec<T>),
    /// `ones * J + diag(diag)`, `J` the matrix of ones.
    OnesPlusDiagonal { ones: T, diag: Vec<T> },
    Dense { matrix: Matrix<T>, factor: Matrix<T> },
}

fn check_nonneg<T: Real>(values: &[T], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
        return Err(Error::config(format!("{what} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

impl<T: Real> Covariance<T> {
    pub fn shaped(shape: NoiseShape, dim: usize, scale: T) -> Result<Self> {
        match shape {
            NoiseShape::Ones => Self::scaled_ones(dim, scale),
            NoiseShape::Diagonal => Self::scaled_identity(dim, scale),
        }
    }

    pub fn diagonal(diag: Vec<T>) -> Result<Self> {
        check_nonneg(&diag, "diagonal covariance entries")?;
        Ok(Self {
            repr: Repr::Diagonal(diag),
        })
    }

    pub fn scaled_identity(dim: usize, variance: T) -> Result<Self> {
        Self::diagonal(vec![variance; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            repr: Repr::Diagonal(vec![T::zero(); dim]),
        }
    }

    /// `scale * J`, the rank-one matrix with every entry equal to `scale`.
    pub fn scaled_ones(dim: usize, scale: T) -> Result<Self> {
        Self::ones_plus_diagonal(scale, vec![T::zero(); dim])
    }

    pub fn ones_plus_diagonal(ones: T, diag: Vec<T>) -> Result<Self> {
        check_nonneg(&[ones], "ones-matrix scale")?;
        check_nonneg(&diag, "diagonal covariance entries")?;
        Ok(Self {
            repr: Repr::OnesPlusDiagonal { ones, diag },
        })
    }

    /// General dense covariance; factorized once here.
    pub fn dense(matrix: Matrix<T>) -> Result<Self> {
        let factor = psd_factor(&matrix)?;
        Ok(Self {
            repr: Repr::Dense { matrix, factor },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Diagonal(d) => d.len(),
            Repr::OnesPlusDiagonal { diag, .. } => diag.len(),
            Repr::Dense { matrix, .. } => matrix.rows(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        match &self.repr {
            Repr::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    T::zero()
                }
            }
            Repr::OnesPlusDiagonal { ones, diag } => *ones + if i == j { diag[i] } else { T::zero() },
            Repr::Dense { matrix, .. } => matrix[(i, j)],
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Diagonal(_))
    }

    /// Adds `self` restricted to `rows x rows` onto `target`.
    pub(crate) fn add_restricted_to(&self, rows: &[usize], target: &mut Matrix<T>) {
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in rows.iter().enumerate() {
                target[(a, b)] += self.entry(i, j);
            }
        }
    }

    /// Sub-covariance of the listed coordinates.
    pub fn restrict(&self, rows: &[usize]) -> Result<Self> {
        if rows.iter().any(|&i| i >= self.dim()) {
            return Err(Error::config("covariance restriction index out of range"));
        }
        match &self.repr {
            Repr::Diagonal(d) => Self::diagonal(rows.iter().map(|&i| d[i]).collect()),
            Repr::OnesPlusDiagonal { ones, diag } => {
                Self::ones_plus_diagonal(*ones, rows.iter().map(|&i| diag[i]).collect())
            }
            Repr::Dense { matrix, .. } => {
                Self::dense(Matrix::from_fn(rows.len(), rows.len(), |a, b| matrix[(rows[a], rows[b])]))
            }
        }
    }

    /// Writes one draw from `N(0, self)` into `out`.
    ///
    /// Standard normals are consumed in a fixed order determined only by the
    /// covariance structure, which keeps seeded streams reproducible.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut normal = || T::lit(rng.sample::<f64, _>(StandardNormal));
        match &self.repr {
            Repr::Diagonal(d) => {
                for (o, &v) in out.iter_mut().zip(d) {
                    *o = if v > T::zero() { v.sqrt() * normal() } else { T::zero() };
                }
            }
            Repr::OnesPlusDiagonal { ones, diag } => {
                let common = if *ones > T::zero() { ones.sqrt() * normal() } else { T::zero() };
                for (o, &v) in out.iter_mut().zip(diag) {
                    *o = common + if v > T::zero() { v.sqrt() * normal() } else { T::zero() };
                }
            }
            Repr::Dense { factor, .. } => {
                let xi: Vec<T> = (0..factor.cols()).map(|_| normal()).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = crate::linalg::dot(factor.row(i), &xi);
                }
            }
        }
    }

    /// Adds one draw from `N(0, self)` onto `out`.
    pub fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T], scratch: &mut Vec<T>) {
        scratch.resize(out.len(), T::zero());
        self.sample_into(rng, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += *s;
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().all(|v| *v == T::zero()),
            Repr::OnesPlusDiagonal { ones, diag } => *ones == T::zero() && diag.iter().all(|v| *v == T::zero()),
            Repr::Dense { factor, .. } => factor.cols() == 0,
        }
    }
}
