//! Coherence bounds on the TPM/MH moment gaps for cyclic processes, the exact
//! qubit gap formulas, and the sign classification of the qubit variance gap.
//!
//! All gaps are signed, `MH - TPM`. Qubit closed forms use `h0 > h1` for the
//! two eigenvalues and read Bloch components in the eigenframe (see
//! [`crate::coherence`] for the convention).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coherence::{bloch, l1_coherence, BlochDescriptor, CoherenceBasis};
use crate::error::{Error, Result};
use crate::qmath::{identity, max_abs_diff, qubit_unitary, DensityMatrix, HermitianObservable, UnitaryPropagator};
use crate::scalar::Real;
use crate::workstats::{analytic_moment_mh, analytic_moment_tpm, Protocol};

/// Half-width of the band around a variance-gap root classified as equal.
pub const ORDERING_BOUNDARY_TOL: f64 = 1e-12;

/// Coherence of `rho` in the sorted eigenbasis of `h` (explicit choice when degenerate).
fn reference_coherence<T: Real>(h: &HermitianObservable<T>, rho: &DensityMatrix<T>) -> Result<T> {
    l1_coherence(rho, &CoherenceBasis::eigenvectors_of(h))
}

/// (Tr|H| / 2) C_l1(rho): bound on |<w>_MH - <w>_TPM| for a cyclic process.
pub fn first_moment_bound<T: Real>(h: &HermitianObservable<T>, rho: &DensityMatrix<T>) -> Result<T> {
    Ok(h.trace_abs() * T::lit(0.5) * reference_coherence(h, rho)?)
}

/// (C_l1 / 2)(Tr H^2 + 2 max|h_k| Tr|H|): bound on |<w^2>_MH - <w^2>_TPM| for a cyclic process.
pub fn second_moment_bound<T: Real>(h: &HermitianObservable<T>, rho: &DensityMatrix<T>) -> Result<T> {
    let spectral = h.trace_sq() + T::lit(2.0) * h.max_abs_energy() * h.trace_abs();
    Ok(reference_coherence(h, rho)? * T::lit(0.5) * spectral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport<T> {
    pub gap_first: T,
    pub gap_second: T,
    pub gap_variance: T,
    pub bound_first: T,
    pub bound_second: T,
}

impl<T: Real> GapReport<T> {
    pub fn within_bounds(&self, tol: T) -> bool {
        self.gap_first.abs() <= self.bound_first + tol && self.gap_second.abs() <= self.bound_second + tol
    }
}

/// Moment gaps and their coherence bounds for the cyclic process (`h`, `u`).
pub fn gap_report<T: Real>(
    rho: &DensityMatrix<T>,
    h: &HermitianObservable<T>,
    u: &UnitaryPropagator<T>,
) -> Result<GapReport<T>> {
    let protocol = Protocol::cyclic(h.clone(), u.clone())?;
    let mh1 = analytic_moment_mh(rho, &protocol, 1)?;
    let mh2 = analytic_moment_mh(rho, &protocol, 2)?;
    let tpm1 = analytic_moment_tpm(rho, &protocol, 1)?;
    let tpm2 = analytic_moment_tpm(rho, &protocol, 2)?;
    Ok(GapReport {
        gap_first: mh1 - tpm1,
        gap_second: mh2 - tpm2,
        gap_variance: (mh2 - mh1 * mh1) - (tpm2 - tpm1 * tpm1),
        bound_first: first_moment_bound(h, rho)?,
        bound_second: second_moment_bound(h, rho)?,
    })
}

/// Qubit eigenvalues (h0 > h1) and the Bloch descriptor, requiring `h` to be
/// diagonal with its larger eigenvalue first, so that the computational frame
/// used by the qubit parametrization is the eigenframe.
fn qubit_frame<T: Real>(rho: &DensityMatrix<T>, h: &HermitianObservable<T>) -> Result<(T, T, BlochDescriptor<T>)> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: h.dim(),
        });
    }
    if h.is_degenerate() {
        return Err(Error::param("h", "qubit closed forms need two distinct levels"));
    }
    if max_abs_diff(h.eigenvectors(), &identity(2)) > T::lit(1e-12) {
        return Err(Error::param(
            "h",
            "qubit closed forms need H diagonal with the larger eigenvalue first",
        ));
    }
    let e = h.eigenvalues();
    let b = bloch(rho, &CoherenceBasis::eigenvectors_of(h))?;
    Ok((e[0], e[1], b))
}

/// Signed first-moment gap for a qubit unitary given by its angles:
/// `(h0 - h1)/2 * sin(2 tau) * C * cos(chi + phi2 - phi1)`.
pub fn qubit_first_moment_gap<T: Real>(
    rho: &DensityMatrix<T>,
    h: &HermitianObservable<T>,
    u: &UnitaryPropagator<T>,
) -> Result<T> {
    let angles = u
        .qubit_angles()
        .ok_or_else(|| Error::param("u", "qubit angles are required"))?;
    let (h0, h1, b) = qubit_frame(rho, h)?;
    let two = T::lit(2.0);
    Ok((h0 - h1) / two * (two * angles.tau).sin() * b.coherence * (b.chi + angles.phi2 - angles.phi1).cos())
}

/// The qubit unitary maximizing the first-moment gap: tau = pi/4, phi2 - phi1 = -chi.
pub fn optimal_qubit_unitary<T: Real>(rho: &DensityMatrix<T>, h: &HermitianObservable<T>) -> Result<UnitaryPropagator<T>> {
    let (_, _, b) = qubit_frame(rho, h)?;
    Ok(qubit_unitary(T::frac_pi_4(), T::zero(), -b.chi, T::zero()))
}

/// Exact maximum over all qubit unitaries of |<w>_MH - <w>_TPM|: |h0 - h1| C / 2.
/// Equals the first-moment bound when the eigenvalues have opposite signs.
pub fn qubit_max_first_moment_gap<T: Real>(rho: &DensityMatrix<T>, h: &HermitianObservable<T>) -> Result<T> {
    let (h0, h1, b) = qubit_frame(rho, h)?;
    Ok((h0 - h1) * b.coherence * T::lit(0.5))
}

/// `-f (f + 2 sin^2(tau) a_z (h0 - h1))` with `f = (h0 - h1) a_x sin(2 tau) / 2`.
pub fn variance_gap_closed_form<T: Real>(a_x: T, a_z: T, level_spacing: T, tau: T) -> T {
    let two = T::lit(2.0);
    let f = level_spacing * a_x * (two * tau).sin() / two;
    let s = tau.sin();
    -f * (f + two * s * s * a_z * level_spacing)
}

/// (Delta w)^2_MH - (Delta w)^2_TPM for a qubit under the real rotation by `tau`.
pub fn qubit_variance_gap<T: Real>(rho: &DensityMatrix<T>, h: &HermitianObservable<T>, tau: T) -> Result<T> {
    let (h0, h1, b) = qubit_frame(rho, h)?;
    Ok(variance_gap_closed_form(b.coherence * b.chi.cos(), b.a_z, h0 - h1, tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarianceOrdering {
    /// (Delta w)^2_MH <= (Delta w)^2_TPM
    #[serde(rename = "MH<=TPM")]
    MhBelow,
    /// (Delta w)^2_MH >= (Delta w)^2_TPM
    #[serde(rename = "MH>=TPM")]
    MhAbove,
    #[serde(rename = "equal")]
    Equal,
}

impl fmt::Display for VarianceOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceOrdering::MhBelow => "MH<=TPM",
            VarianceOrdering::MhAbove => "MH>=TPM",
            VarianceOrdering::Equal => "equal",
        })
    }
}

/// Variance ordering for a pure real qubit (a_y = 0, a_x^2 + a_z^2 = 1) under
/// the real rotation by `tau`.
///
/// The gap has roots at `a_x = 0` and `a_x = -2 a_z tan(tau)`; it is positive
/// strictly between them and negative outside. Points within
/// [`ORDERING_BOUNDARY_TOL`] of a root, and rotations with `sin(2 tau) = 0`,
/// are `Equal`.
pub fn variance_ordering<T: Real>(a_x: T, a_z: T, tau: T) -> Result<VarianceOrdering> {
    let norm = a_x * a_x + a_z * a_z;
    if (norm - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::param(
            "a_x, a_z",
            format!("not a pure real qubit: a_x^2 + a_z^2 = {norm}"),
        ));
    }
    let tol = T::lit(ORDERING_BOUNDARY_TOL);
    if (T::lit(2.0) * tau).sin().abs() <= tol {
        return Ok(VarianceOrdering::Equal);
    }
    let root = -T::lit(2.0) * a_z * tau.tan();
    if a_x.abs() <= tol || (a_x - root).abs() <= tol {
        return Ok(VarianceOrdering::Equal);
    }
    let same_sign = a_z != T::zero() && (a_z > T::zero()) == (tau.tan() > T::zero());
    let ordering = if same_sign {
        // root < 0: [-1, root] below, [root, 0] above, [0, 1] below
        if a_x < root || a_x > T::zero() {
            VarianceOrdering::MhBelow
        } else {
            VarianceOrdering::MhAbove
        }
    } else {
        // root >= 0: [-1, 0] below, [0, root] above, [root, 1] below
        if a_x < T::zero() || a_x > root {
            VarianceOrdering::MhBelow
        } else {
            VarianceOrdering::MhAbove
        }
    };
    Ok(ordering)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::qubit_state;
    use crate::qmath::{c, pauli_z};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sz() -> HermitianObservable<f64> {
        HermitianObservable::new(&pauli_z()).unwrap()
    }

    #[test]
    fn incoherent_state_has_zero_bounds() {
        let rho = DensityMatrix::diagonal(&[0.4, 0.6]).unwrap();
        assert_eq!(first_moment_bound(&sz(), &rho).unwrap(), 0.0);
        assert_eq!(second_moment_bound(&sz(), &rho).unwrap(), 0.0);
    }

    #[test]
    fn plus_state_bounds() {
        let rho = DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap();
        assert_abs_diff_eq!(first_moment_bound(&sz(), &rho).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(second_moment_bound(&sz(), &rho).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn qutrit_bound_arithmetic() {
        let s = 1.0 / 3f64.sqrt();
        let h = HermitianObservable::diagonal(&[s, s, -2.0 * s]).unwrap();
        // coherence 0.6 from a single real off-diagonal pair 0.3
        let rho = DensityMatrix::new(crate::qmath::ComplexMatrix::from_row_slice(
            3,
            3,
            &[c(0.4), c(0.0), c(0.3), c(0.0), c(0.2), c(0.0), c(0.3), c(0.0), c(0.4)],
        ))
        .unwrap();
        assert_abs_diff_eq!(first_moment_bound(&h, &rho).unwrap(), 0.4 * 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(first_moment_bound(&h, &rho).unwrap(), 0.69282032302755, epsilon = 1e-12);
    }

    #[test]
    fn optimal_unitary_saturates_the_bound() {
        let rho = qubit_state(0.3, -0.5, 0.2).unwrap();
        let u = optimal_qubit_unitary(&rho, &sz()).unwrap();
        let report = gap_report(&rho, &sz(), &u).unwrap();
        assert_abs_diff_eq!(report.gap_first.abs(), report.bound_first, epsilon = 1e-14);
        assert_abs_diff_eq!(qubit_first_moment_gap(&rho, &sz(), &u).unwrap(), report.gap_first, epsilon = 1e-14);
    }

    #[test]
    fn sudden_quench_closes_the_gap() {
        let rho = qubit_state(0.6, 0.0, 0.8).unwrap();
        let u = qubit_unitary(0.0, 0.0, 0.0, 0.0);
        assert_eq!(qubit_first_moment_gap(&rho, &sz(), &u).unwrap(), 0.0);
        assert_abs_diff_eq!(gap_report(&rho, &sz(), &u).unwrap().gap_first, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn first_moment_gap_at_pi_over_eight() {
        let rho = qubit_state(0.5, 0.0, 0.1).unwrap();
        let u = UnitaryPropagator::real_rotation(PI / 8.0);
        let closed = qubit_first_moment_gap(&rho, &sz(), &u).unwrap();
        assert_abs_diff_eq!(closed.abs(), 0.5 * (PI / 4.0).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(closed.abs(), 0.35355339059327373, epsilon = 1e-15);
        assert_abs_diff_eq!(gap_report(&rho, &sz(), &u).unwrap().gap_first, closed, epsilon = 1e-14);
    }

    #[test]
    fn closed_forms_require_qubit_angles_and_frame() {
        let rho = qubit_state(0.5, 0.0, 0.1).unwrap();
        let plain = UnitaryPropagator::new(crate::qmath::identity(2)).unwrap();
        assert!(qubit_first_moment_gap(&rho, &sz(), &plain).is_err());
        let flipped = HermitianObservable::diagonal(&[-1.0, 1.0]).unwrap();
        assert!(qubit_variance_gap(&rho, &flipped, 0.3).is_err());
    }

    #[test]
    fn second_moment_bound_is_slack_for_qubits() {
        let rho = qubit_state(0.5, 0.2, -0.3).unwrap();
        let r = gap_report(&rho, &sz(), &qubit_unitary(0.4, 0.9, -0.2, 0.1)).unwrap();
        assert_abs_diff_eq!(r.gap_second, 0.0, epsilon = 1e-14);
        assert!(r.bound_second > 0.0);
    }

    #[test]
    fn variance_gap_roots_and_endpoints() {
        let tau = 0.7;
        assert_eq!(variance_gap_closed_form(0.0, 0.4, 2.0, tau), 0.0);
        let az = 0.3;
        let root = -2.0 * az * f64::tan(tau);
        assert_abs_diff_eq!(variance_gap_closed_form(root, az, 2.0, tau), 0.0, epsilon = 1e-15);
        let expected = -4.0 * tau.cos().powi(2) * tau.sin().powi(2);
        assert_abs_diff_eq!(variance_gap_closed_form(1.0, 0.0, 2.0, tau), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(variance_gap_closed_form(-1.0, 0.0, 2.0, tau), expected, epsilon = 1e-15);
    }

    #[test]
    fn variance_gap_matches_moments() {
        for &(ax, az, tau) in &[(0.6, 0.8, 0.1), (-0.6, 0.8, PI / 5.0), (0.28, -0.96, 3.0 * PI / 4.0)] {
            let rho = qubit_state(ax, 0.0, az).unwrap();
            let u = UnitaryPropagator::real_rotation(tau);
            let direct = gap_report(&rho, &sz(), &u).unwrap().gap_variance;
            assert_abs_diff_eq!(qubit_variance_gap(&rho, &sz(), tau).unwrap(), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn ordering_table_cases() {
        let tau = 0.4; // tan > 0
        let az = (1.0f64 - 0.3 * 0.3).sqrt();
        // same sign, a_x in (0, 1]
        assert_eq!(variance_ordering(0.3, az, tau).unwrap(), VarianceOrdering::MhBelow);
        // same sign, a_x in (root, 0)
        let ax = -0.2;
        let az = (1.0f64 - ax * ax).sqrt();
        assert!(-2.0 * az * f64::tan(tau) < ax);
        assert_eq!(variance_ordering(ax, az, tau).unwrap(), VarianceOrdering::MhAbove);
        // opposite sign, a_x in (0, root)
        let ax = 0.2;
        let az = -(1.0f64 - ax * ax).sqrt();
        assert!(ax < -2.0 * az * f64::tan(tau));
        assert_eq!(variance_ordering(ax, az, tau).unwrap(), VarianceOrdering::MhAbove);
        // roots
        assert_eq!(variance_ordering(0.0, 1.0, tau).unwrap(), VarianceOrdering::Equal);
        assert_eq!(variance_ordering(1.0, 0.0, PI / 2.0).unwrap(), VarianceOrdering::Equal);
    }

    #[test]
    fn ordering_rejects_mixed_states() {
        assert!(variance_ordering(0.3, 0.3, 0.4).is_err());
    }
}
