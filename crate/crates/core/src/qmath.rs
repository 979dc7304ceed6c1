//! Dense complex linear algebra: Hermitian observables with grouped spectra,
//! density matrices, Gibbs states and unitary propagators.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::policy::NumericPolicy;
use crate::scalar::Real;

/// Square complex matrix, row-major in its JSON form.
pub type ComplexMatrix<T> = DMatrix<Complex<T>>;

const EIGEN_MAX_ITER: usize = 10_000;

#[inline]
pub(crate) fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn modulus<T: Real>(z: Complex<T>) -> T {
    ComplexField::modulus(z)
}

/// e^{i theta}
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

pub fn identity<T: Real>(dim: usize) -> ComplexMatrix<T> {
    ComplexMatrix::identity(dim, dim)
}

pub fn diagonal<T: Real>(values: &[T]) -> ComplexMatrix<T> {
    let d = values.len();
    ComplexMatrix::from_fn(d, d, |i, j| if i == j { c(values[i]) } else { Complex::new(T::zero(), T::zero()) })
}

pub fn pauli_x<T: Real>() -> ComplexMatrix<T> {
    ComplexMatrix::from_row_slice(2, 2, &[c(T::zero()), c(T::one()), c(T::one()), c(T::zero())])
}

pub fn pauli_y<T: Real>() -> ComplexMatrix<T> {
    let i = Complex::new(T::zero(), T::one());
    ComplexMatrix::from_row_slice(2, 2, &[c(T::zero()), -i, i, c(T::zero())])
}

pub fn pauli_z<T: Real>() -> ComplexMatrix<T> {
    diagonal(&[T::one(), -T::one()])
}

/// Largest entry modulus.
pub fn max_abs<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(modulus(*z)))
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max(modulus(*x - *y)))
}

pub fn max_asymmetry<T: Real>(m: &ComplexMatrix<T>) -> T {
    max_abs_diff(m, &m.adjoint())
}

pub fn commutator<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a * b - b * a
}

pub fn anticommutator<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a * b + b * a
}

/// Tr[AB] without forming the product.
pub fn trace_product<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Complex<T> {
    let d = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn matrix_power<T: Real>(m: &ComplexMatrix<T>, k: usize) -> ComplexMatrix<T> {
    let mut out = identity(m.nrows());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

fn check_square<T: Real>(m: &ComplexMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn hermitize<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    (m + m.adjoint()).map(|z| z * c(T::lit(0.5)))
}

fn is_diagonal<T: Real>(m: &ComplexMatrix<T>) -> bool {
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == Complex::new(T::zero(), T::zero())))
}

/// Eigenvalues (descending) and matching unit eigenvectors (columns) of a
/// Hermitian matrix. Each eigenvector's largest component is made real positive.
pub(crate) fn hermitian_eigen<T: Real>(m: &ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    let d = m.nrows();
    let (values, vectors) = if is_diagonal(m) {
        ((0..d).map(|i| m[(i, i)].re).collect::<Vec<_>>(), identity::<T>(d))
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), T::default_epsilon(), EIGEN_MAX_ITER)
            .ok_or(Error::NoConvergence)?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut sorted = ComplexMatrix::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        let v = vectors.column(src);
        let pivot = (0..d)
            .max_by(|&a, &b| {
                modulus(v[a])
                    .partial_cmp(&modulus(v[b]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        let p = v[pivot];
        let norm = modulus(p);
        let fix = if norm > T::zero() { p.conj() / c(norm) } else { c(T::one()) };
        for row in 0..d {
            sorted[(row, col)] = v[row] * fix;
        }
    }
    Ok((order.iter().map(|&i| values[i]).collect(), sorted))
}

/// One distinct energy with the projector onto its (possibly degenerate) eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLevel<T: Real> {
    pub energy: T,
    pub projector: ComplexMatrix<T>,
    pub multiplicity: usize,
}

/// Hermitian operator with its spectral decomposition, eigenvalues sorted
/// descending and near-equal eigenvalues merged into a single level.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable<T: Real> {
    matrix: ComplexMatrix<T>,
    levels: Vec<EnergyLevel<T>>,
    eigenvalues: Vec<T>,
    eigenvectors: ComplexMatrix<T>,
    level_of: Vec<usize>,
    grouping_tol: T,
}

/// Decomposes `h` into grouped spectral projectors.
pub fn spectral_decompose<T: Real>(h: &ComplexMatrix<T>, grouping_tol: T) -> Result<HermitianObservable<T>> {
    HermitianObservable::with_tolerance(h, grouping_tol, &T::default_policy())
}

impl<T: Real> HermitianObservable<T> {
    /// Decomposes with the default grouping tolerance `1e-8 * max|H_ij|`.
    pub fn new(h: &ComplexMatrix<T>) -> Result<Self> {
        let policy = T::default_policy();
        check_square(h)?;
        let scale = max_abs(h);
        let scale = if scale > T::zero() { scale } else { T::one() };
        Self::with_tolerance(h, scale * T::lit(policy.grouping_rel_tol), &policy)
    }

    pub fn diagonal(energies: &[T]) -> Result<Self> {
        Self::new(&diagonal(energies))
    }

    pub fn with_tolerance(h: &ComplexMatrix<T>, grouping_tol: T, policy: &NumericPolicy) -> Result<Self> {
        check_square(h)?;
        if !(grouping_tol > T::zero()) {
            return Err(Error::param("grouping_tol", "must be positive"));
        }
        let asym = max_asymmetry(h);
        if asym > T::lit(policy.hermitian_tol) {
            return Err(Error::NotHermitian {
                max_asymmetry: asym.to_f64_lossy(),
            });
        }
        let matrix = hermitize(h);
        let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix)?;
        let d = matrix.nrows();

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, &e) in eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if eigenvalues[*g.last().unwrap()] - e <= grouping_tol => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let mut level_of = vec![0; d];
        let levels = groups
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let mut projector = ComplexMatrix::zeros(d, d);
                let mut sum = T::zero();
                for &i in g {
                    level_of[i] = k;
                    let v = eigenvectors.column(i);
                    projector += &v * v.adjoint();
                    sum += eigenvalues[i];
                }
                EnergyLevel {
                    energy: sum / T::from_usize(g.len()).unwrap(),
                    projector,
                    multiplicity: g.len(),
                }
            })
            .collect();
        Ok(Self {
            matrix,
            levels,
            eigenvalues,
            eigenvectors,
            level_of,
            grouping_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn levels(&self) -> &[EnergyLevel<T>] {
        &self.levels
    }

    /// Distinct energies, descending.
    pub fn energies(&self) -> Vec<T> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// All eigenvalues with multiplicity, descending.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, ordered like [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &ComplexMatrix<T> {
        &self.eigenvectors
    }

    /// Level index each eigenvector belongs to.
    pub fn level_index(&self) -> &[usize] {
        &self.level_of
    }

    pub fn grouping_tol(&self) -> T {
        self.grouping_tol
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels.len() < self.dim()
    }

    /// Tr|H| = sum over levels of multiplicity * |h_k|.
    pub fn trace_abs(&self) -> T {
        self.levels
            .iter()
            .fold(T::zero(), |acc, l| acc + T::from_usize(l.multiplicity).unwrap() * l.energy.abs())
    }

    /// Tr H^2.
    pub fn trace_sq(&self) -> T {
        self.eigenvalues.iter().fold(T::zero(), |acc, &e| acc + e * e)
    }

    pub fn max_abs_energy(&self) -> T {
        self.levels.iter().fold(T::zero(), |acc, l| acc.max(l.energy.abs()))
    }

    /// Sum_k h_k Pi_k.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let d = self.dim();
        self.levels
            .iter()
            .fold(ComplexMatrix::zeros(d, d), |acc, l| acc + &l.projector * c(l.energy))
    }

    /// f(H) = sum_k f(h_k) Pi_k.
    pub fn apply_fn(&self, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
        let d = self.dim();
        self.levels
            .iter()
            .fold(ComplexMatrix::zeros(d, d), |acc, l| acc + &l.projector * c(f(l.energy)))
    }

    /// H^k built from the spectrum.
    pub fn power(&self, k: i32) -> ComplexMatrix<T> {
        self.apply_fn(|e| e.powi(k))
    }

    /// ln Tr e^{-beta H}, evaluated with a max-exponent shift.
    pub fn log_partition_function(&self, beta: T) -> T {
        let shift = self
            .levels
            .iter()
            .fold(T::min_value().unwrap_or(-T::one()), |acc, l| acc.max(-beta * l.energy));
        let sum = self.levels.iter().fold(T::zero(), |acc, l| {
            acc + T::from_usize(l.multiplicity).unwrap() * (-beta * l.energy - shift).exp()
        });
        shift + sum.ln()
    }
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(m: ComplexMatrix<T>) -> Result<Self> {
        Self::with_policy(m, &T::default_policy())
    }

    pub fn with_policy(m: ComplexMatrix<T>, policy: &NumericPolicy) -> Result<Self> {
        check_square(&m)?;
        let asym = max_asymmetry(&m);
        if asym > T::lit(policy.hermitian_tol) {
            return Err(Error::NotHermitian {
                max_asymmetry: asym.to_f64_lossy(),
            });
        }
        let m = hermitize(&m);
        let tr = m.trace().re;
        if (tr - T::one()).abs() > T::lit(policy.trace_tol) {
            return Err(Error::InvalidState {
                reason: format!("trace = {tr}"),
            });
        }
        let (eigs, _) = hermitian_eigen(&m)?;
        let min = eigs.last().copied().unwrap_or(T::zero());
        if min < -T::lit(policy.psd_tol) {
            return Err(Error::InvalidState {
                reason: format!("negative eigenvalue {min}"),
            });
        }
        Ok(Self { matrix: m })
    }

    /// For matrices valid by construction.
    pub(crate) fn trusted(m: ComplexMatrix<T>) -> Self {
        Self { matrix: hermitize(&m) }
    }

    /// |psi><psi| for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex<T>]) -> Result<Self> {
        let norm2 = psi.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        if !(norm2 > T::zero()) {
            return Err(Error::param("psi", "zero vector"));
        }
        let d = psi.len();
        Ok(Self::trusted(ComplexMatrix::from_fn(d, d, |i, j| {
            psi[i] * psi[j].conj() / c(norm2)
        })))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity::<T>(dim) / c(T::from_usize(dim).unwrap()),
        }
    }

    /// Diagonal state with the given populations (must sum to one).
    pub fn diagonal(populations: &[T]) -> Result<Self> {
        Self::new(diagonal(populations))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    /// rho expressed in the orthonormal basis given by the columns of `basis`.
    pub fn in_basis(&self, basis: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        basis.adjoint() * &self.matrix * basis
    }

    /// Tr[Pi_k rho] for every level of `h`.
    pub fn level_populations(&self, h: &HermitianObservable<T>) -> Vec<T> {
        h.levels()
            .iter()
            .map(|l| trace_product(&l.projector, &self.matrix).re)
            .collect()
    }

    /// Tr[rho A] (real part).
    pub fn expectation(&self, a: &ComplexMatrix<T>) -> T {
        trace_product(&self.matrix, a).re
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Gibbs state e^{-beta H}/Z together with its partition function.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState<T: Real> {
    pub state: DensityMatrix<T>,
    pub log_partition_function: T,
}

impl<T: Real> GibbsState<T> {
    /// Z itself; may overflow to infinity where `log_partition_function` does not.
    pub fn partition_function(&self) -> T {
        self.log_partition_function.exp()
    }
}

pub fn gibbs_state<T: Real>(h: &HermitianObservable<T>, beta: T) -> Result<GibbsState<T>> {
    if !beta.is_finite() || beta < T::zero() {
        return Err(Error::param("beta", format!("must be finite and >= 0, got {beta}")));
    }
    let log_z = h.log_partition_function(beta);
    let d = h.dim();
    let matrix = h
        .levels()
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, l| {
            acc + &l.projector * c((-beta * l.energy - log_z).exp())
        });
    Ok(GibbsState {
        state: DensityMatrix::trusted(matrix),
        log_partition_function: log_z,
    })
}

/// Angles of the two-level parametrization
/// `e^{i phase/2} [[e^{i phi1} cos tau, e^{i phi2} sin tau], [-e^{-i phi2} sin tau, e^{-i phi1} cos tau]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitAngles<T: Real> {
    pub tau: T,
    pub phi1: T,
    pub phi2: T,
    pub phase: T,
}

/// Unitary time-evolution operator, optionally remembering its qubit angles.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryPropagator<T: Real> {
    matrix: ComplexMatrix<T>,
    qubit: Option<QubitAngles<T>>,
}

/// Wraps an angle into (-pi, pi].
fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut y = x - two_pi * (x / two_pi).round();
    if y <= -T::pi() {
        y += two_pi;
    }
    y
}

pub fn qubit_unitary<T: Real>(tau: T, phi1: T, phi2: T, phase: T) -> UnitaryPropagator<T> {
    let (s, co) = (tau.sin(), tau.cos());
    let g = cis(phase * T::lit(0.5));
    let matrix = ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            g * cis(phi1) * c(co),
            g * cis(phi2) * c(s),
            -g * cis(-phi2) * c(s),
            g * cis(-phi1) * c(co),
        ],
    );
    UnitaryPropagator {
        matrix,
        qubit: Some(QubitAngles {
            tau: wrap_angle(tau),
            phi1: wrap_angle(phi1),
            phi2: wrap_angle(phi2),
            phase: wrap_angle(phase),
        }),
    }
}

impl<T: Real> UnitaryPropagator<T> {
    pub fn new(m: ComplexMatrix<T>) -> Result<Self> {
        Self::with_policy(m, &T::default_policy())
    }

    pub fn with_policy(m: ComplexMatrix<T>, policy: &NumericPolicy) -> Result<Self> {
        check_square(&m)?;
        let deviation = max_abs_diff(&(m.adjoint() * &m), &identity(m.nrows()));
        if deviation > T::lit(policy.unitary_tol) {
            return Err(Error::NotUnitary {
                deviation: deviation.to_f64_lossy(),
            });
        }
        Ok(Self { matrix: m, qubit: None })
    }

    pub(crate) fn trusted(m: ComplexMatrix<T>) -> Self {
        Self { matrix: m, qubit: None }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: identity(dim),
            qubit: None,
        }
    }

    /// The real rotation [[cos tau, sin tau], [-sin tau, cos tau]].
    pub fn real_rotation(tau: T) -> Self {
        qubit_unitary(tau, T::zero(), T::zero(), T::zero())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn qubit_angles(&self) -> Option<QubitAngles<T>> {
        self.qubit
    }

    /// U^dag A U.
    pub fn heisenberg(&self, a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.matrix.adjoint() * a * &self.matrix
    }

    /// U A U^dag.
    pub fn conjugate(&self, a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        &self.matrix * a * self.matrix.adjoint()
    }

    /// max |U^dag U - 1|.
    pub fn unitarity_defect(&self) -> T {
        max_abs_diff(&(self.matrix.adjoint() * &self.matrix), &identity(self.dim()))
    }
}
