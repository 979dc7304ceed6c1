//! l1-norm coherence, the full dephasing map and qubit Bloch geometry.
//!
//! Qubit Bloch components are read in the eigenframe of the reference
//! observable, ordered with the higher level first:
//!
//! ```text
//! rho = 1/2 [[1 - a_z, a_x - i a_y],
//!            [a_x + i a_y, 1 + a_z]]
//! ```
//!
//! so `a_z > 0` means the lower level is more populated (thermal states at
//! positive temperature), and `a_x + i a_y = C e^{i chi}` with `C` the l1
//! coherence.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::qmath::{c, max_abs_diff, modulus, ComplexMatrix, DensityMatrix, HermitianObservable};
use crate::scalar::Real;

/// Orthonormal basis (columns) in which coherence is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceBasis<T: Real> {
    vectors: ComplexMatrix<T>,
    label: BasisLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    Computational,
    /// Eigenbasis of a nondegenerate observable.
    Eigenbasis,
    /// Sorted eigenvectors chosen by the eigensolver inside degenerate levels.
    ChosenEigenvectors,
    Custom,
}

impl BasisLabel {
    pub fn describe(self) -> &'static str {
        match self {
            BasisLabel::Computational => "computational basis",
            BasisLabel::Eigenbasis => "eigenbasis of a nondegenerate reference observable",
            BasisLabel::ChosenEigenvectors => {
                "sorted eigenvectors of the reference observable (explicit choice inside degenerate levels)"
            }
            BasisLabel::Custom => "user-supplied orthonormal basis",
        }
    }
}

impl<T: Real> CoherenceBasis<T> {
    /// Eigenbasis of `h`; rejected when `h` is degenerate because the basis is then not unique.
    pub fn of(h: &HermitianObservable<T>) -> Result<Self> {
        if h.is_degenerate() {
            return Err(Error::AmbiguousBasis);
        }
        Ok(Self {
            vectors: h.eigenvectors().clone(),
            label: BasisLabel::Eigenbasis,
        })
    }

    /// The sorted eigenvectors of `h`, accepted as an explicit choice even when degenerate.
    pub fn eigenvectors_of(h: &HermitianObservable<T>) -> Self {
        Self {
            vectors: h.eigenvectors().clone(),
            label: if h.is_degenerate() {
                BasisLabel::ChosenEigenvectors
            } else {
                BasisLabel::Eigenbasis
            },
        }
    }

    pub fn computational(dim: usize) -> Self {
        Self {
            vectors: ComplexMatrix::identity(dim, dim),
            label: BasisLabel::Computational,
        }
    }

    pub fn from_vectors(vectors: ComplexMatrix<T>) -> Result<Self> {
        let d = vectors.nrows();
        if vectors.ncols() != d {
            return Err(Error::NotSquare {
                rows: d,
                cols: vectors.ncols(),
            });
        }
        let deviation = max_abs_diff(&(vectors.adjoint() * &vectors), &ComplexMatrix::identity(d, d));
        if deviation > T::lit(T::default_policy().unitary_tol) {
            return Err(Error::NotUnitary {
                deviation: deviation.to_f64_lossy(),
            });
        }
        Ok(Self {
            vectors,
            label: BasisLabel::Custom,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &ComplexMatrix<T> {
        &self.vectors
    }

    pub fn label(&self) -> BasisLabel {
        self.label
    }
}

/// Sum of |rho_ij| over i != j, with rho written in `basis`.
pub fn l1_coherence<T: Real>(rho: &DensityMatrix<T>, basis: &CoherenceBasis<T>) -> Result<T> {
    rho.check_dim(basis.dim())?;
    Ok(off_diagonal_l1(&rho.in_basis(basis.vectors())))
}

pub(crate) fn off_diagonal_l1<T: Real>(m: &ComplexMatrix<T>) -> T {
    let d = m.nrows();
    let mut sum = T::zero();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                sum += modulus(m[(i, j)]);
            }
        }
    }
    sum
}

/// Sum_n Pi_n rho Pi_n over the (grouped) levels of `h`.
pub fn dephase<T: Real>(rho: &DensityMatrix<T>, h: &HermitianObservable<T>) -> Result<DensityMatrix<T>> {
    rho.check_dim(h.dim())?;
    Ok(DensityMatrix::trusted(dephase_matrix(rho.matrix(), h)))
}

pub(crate) fn dephase_matrix<T: Real>(m: &ComplexMatrix<T>, h: &HermitianObservable<T>) -> ComplexMatrix<T> {
    let d = h.dim();
    h.levels().iter().fold(ComplexMatrix::zeros(d, d), |acc, l| {
        acc + &l.projector * m * &l.projector
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDescriptor<T: Real> {
    pub a_x: T,
    pub a_y: T,
    pub a_z: T,
    /// l1 coherence, equal to the length of (a_x, a_y).
    pub coherence: T,
    /// Equatorial angle in (-pi, pi]; zero for incoherent states.
    pub chi: T,
}

impl<T: Real> BlochDescriptor<T> {
    pub fn norm(&self) -> T {
        (self.a_x * self.a_x + self.a_y * self.a_y + self.a_z * self.a_z).sqrt()
    }
}

/// Bloch components of a qubit state in the eigenframe `basis`.
pub fn bloch<T: Real>(rho: &DensityMatrix<T>, basis: &CoherenceBasis<T>) -> Result<BlochDescriptor<T>> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    rho.check_dim(basis.dim())?;
    let m = rho.in_basis(basis.vectors());
    let two = T::lit(2.0);
    let a_x = two * m[(1, 0)].re;
    let a_y = two * m[(1, 0)].im;
    let a_z = m[(1, 1)].re - m[(0, 0)].re;
    let coherence = off_diagonal_l1(&m);
    let chi = if coherence == T::zero() {
        T::zero()
    } else {
        let chi = a_y.atan2(a_x);
        if chi <= -T::pi() {
            T::pi()
        } else {
            chi
        }
    };
    Ok(BlochDescriptor {
        a_x,
        a_y,
        a_z,
        coherence,
        chi,
    })
}

/// Qubit state with the given Bloch components (eigenframe convention above),
/// expressed in the frame itself.
pub fn qubit_state<T: Real>(a_x: T, a_y: T, a_z: T) -> Result<DensityMatrix<T>> {
    let half = T::lit(0.5);
    let m = ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            c(half * (T::one() - a_z)),
            Complex::new(half * a_x, -half * a_y),
            Complex::new(half * a_x, half * a_y),
            c(half * (T::one() + a_z)),
        ],
    );
    DensityMatrix::new(m)
}
