//! Joint energy-outcome tables, work distributions and their moments for the
//! two-point-measurement (TPM) and Margenau-Hill (MH) schemes.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::coherence::dephase_matrix;
use crate::error::{Error, Result};
use crate::qmath::{anticommutator, c, cis, trace_product, ComplexMatrix, DensityMatrix, HermitianObservable, UnitaryPropagator};
use crate::scalar::Real;

/// Highest moment / cumulant order computed from a distribution.
pub const MAX_MOMENT_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "TPM")]
    Tpm,
    #[serde(rename = "MH")]
    Mh,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Tpm => "TPM",
            Scheme::Mh => "MH",
        })
    }
}

/// Initial Hamiltonian, final Hamiltonian and the propagator connecting them.
#[derive(Debug, Clone)]
pub struct Protocol<T: Real> {
    initial: HermitianObservable<T>,
    final_: HermitianObservable<T>,
    evolution: UnitaryPropagator<T>,
    evolved_final: ComplexMatrix<T>,
}

impl<T: Real> Protocol<T> {
    pub fn new(
        initial: HermitianObservable<T>,
        final_: HermitianObservable<T>,
        evolution: UnitaryPropagator<T>,
    ) -> Result<Self> {
        let d = initial.dim();
        for found in [final_.dim(), evolution.dim()] {
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        let evolved_final = evolution.heisenberg(final_.matrix());
        Ok(Self {
            initial,
            final_,
            evolution,
            evolved_final,
        })
    }

    /// H_0 = H_tau = `h`.
    pub fn cyclic(h: HermitianObservable<T>, evolution: UnitaryPropagator<T>) -> Result<Self> {
        Self::new(h.clone(), h, evolution)
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn initial(&self) -> &HermitianObservable<T> {
        &self.initial
    }

    pub fn final_hamiltonian(&self) -> &HermitianObservable<T> {
        &self.final_
    }

    pub fn evolution(&self) -> &UnitaryPropagator<T> {
        &self.evolution
    }

    /// U^dag H_tau U.
    pub fn evolved_final(&self) -> &ComplexMatrix<T> {
        &self.evolved_final
    }
}

/// P[m, n] over final outcome m and initial outcome n.
#[derive(Debug, Clone, PartialEq)]
pub struct JointWorkTable<T: Real> {
    pub scheme: Scheme,
    /// Rows: final levels, columns: initial levels.
    pub probabilities: DMatrix<T>,
    pub initial_energies: Vec<T>,
    pub final_energies: Vec<T>,
}

impl<T: Real> JointWorkTable<T> {
    pub fn total(&self) -> T {
        self.probabilities.iter().fold(T::zero(), |a, &p| a + p)
    }

    /// Sum over final outcomes for each initial level.
    pub fn initial_marginal(&self) -> Vec<T> {
        self.probabilities
            .column_iter()
            .map(|col| col.iter().fold(T::zero(), |a, &p| a + p))
            .collect()
    }

    pub fn min_entry(&self) -> T {
        self.probabilities.iter().fold(T::max_value().unwrap(), |a, &p| a.min(p))
    }

    pub fn max_entry(&self) -> T {
        self.probabilities.iter().fold(T::min_value().unwrap(), |a, &p| a.max(p))
    }

    /// Largest absolute energy among both level sets.
    pub fn energy_scale(&self) -> T {
        self.initial_energies
            .iter()
            .chain(self.final_energies.iter())
            .fold(T::zero(), |a, e| a.max(e.abs()))
    }

    /// Work distribution binned with the default tolerance `1e-9 * max|E|`.
    pub fn work_distribution(&self) -> WorkDistribution<T> {
        let scale = self.energy_scale();
        let scale = if scale > T::zero() { scale } else { T::one() };
        work_distribution(self, scale * T::lit(T::default_policy().binning_rel_tol))
    }
}

/// TPM joint probabilities Tr[Pi^tau_m U Pi^0_n rho Pi^0_n U^dag Pi^tau_m].
pub fn tpm_joint<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>) -> Result<JointWorkTable<T>> {
    rho.check_dim(protocol.dim())?;
    let initial = protocol.initial().levels();
    let final_ = protocol.final_hamiltonian().levels();
    let collapsed: Vec<ComplexMatrix<T>> = initial
        .iter()
        .map(|l| protocol.evolution().conjugate(&(&l.projector * rho.matrix() * &l.projector)))
        .collect();
    let probabilities = DMatrix::from_fn(final_.len(), initial.len(), |m, n| {
        trace_product(&final_[m].projector, &collapsed[n]).re
    });
    Ok(JointWorkTable {
        scheme: Scheme::Tpm,
        probabilities,
        initial_energies: protocol.initial().energies(),
        final_energies: protocol.final_hamiltonian().energies(),
    })
}

/// MH quasiprobabilities Re Tr[U^dag Pi^tau_m U Pi^0_n rho].
pub fn mh_joint<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>) -> Result<JointWorkTable<T>> {
    rho.check_dim(protocol.dim())?;
    let initial = protocol.initial().levels();
    let final_ = protocol.final_hamiltonian().levels();
    let prepared: Vec<ComplexMatrix<T>> = initial.iter().map(|l| &l.projector * rho.matrix()).collect();
    let evolved: Vec<ComplexMatrix<T>> = final_
        .iter()
        .map(|l| protocol.evolution().heisenberg(&l.projector))
        .collect();
    let probabilities = DMatrix::from_fn(final_.len(), initial.len(), |m, n| {
        trace_product(&evolved[m], &prepared[n]).re
    });
    Ok(JointWorkTable {
        scheme: Scheme::Mh,
        probabilities,
        initial_energies: protocol.initial().energies(),
        final_energies: protocol.final_hamiltonian().energies(),
    })
}

pub fn joint<T: Real>(scheme: Scheme, rho: &DensityMatrix<T>, protocol: &Protocol<T>) -> Result<JointWorkTable<T>> {
    match scheme {
        Scheme::Tpm => tpm_joint(rho, protocol),
        Scheme::Mh => mh_joint(rho, protocol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkPoint<T> {
    pub w: T,
    pub p: T,
}

/// Discrete work distribution: support points ascending in w.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution<T: Real> {
    pub scheme: Scheme,
    pub points: Vec<WorkPoint<T>>,
    pub bin_tol: T,
}

/// Accumulates P[m, n] onto w = E^tau_m - E^0_n. Work values within `bin_tol`
/// of a bin's first value share that bin; zero-weight bins are kept.
pub fn work_distribution<T: Real>(table: &JointWorkTable<T>, bin_tol: T) -> WorkDistribution<T> {
    let mut raw: Vec<WorkPoint<T>> = Vec::with_capacity(table.probabilities.len());
    for (m, &ef) in table.final_energies.iter().enumerate() {
        for (n, &ei) in table.initial_energies.iter().enumerate() {
            raw.push(WorkPoint {
                w: ef - ei,
                p: table.probabilities[(m, n)],
            });
        }
    }
    raw.sort_by(|a, b| a.w.partial_cmp(&b.w).unwrap_or(std::cmp::Ordering::Equal));
    let mut points: Vec<WorkPoint<T>> = Vec::new();
    for pt in raw {
        match points.last_mut() {
            Some(bin) if pt.w - bin.w <= bin_tol => bin.p += pt.p,
            _ => points.push(pt),
        }
    }
    WorkDistribution {
        scheme: table.scheme,
        points,
        bin_tol,
    }
}

impl<T: Real> WorkDistribution<T> {
    /// A distribution given directly by its points (sorted on construction).
    pub fn from_points(scheme: Scheme, mut points: Vec<WorkPoint<T>>, bin_tol: T) -> Self {
        points.sort_by(|a, b| a.w.partial_cmp(&b.w).unwrap_or(std::cmp::Ordering::Equal));
        Self { scheme, points, bin_tol }
    }

    pub fn total(&self) -> T {
        self.points.iter().fold(T::zero(), |a, pt| a + pt.p)
    }

    /// Sum_k p_k f(w_k).
    pub fn expectation(&self, f: impl Fn(T) -> T) -> T {
        self.points.iter().fold(T::zero(), |a, pt| a + pt.p * f(pt.w))
    }

    pub fn mean(&self) -> T {
        self.expectation(|w| w)
    }

    pub fn moments(&self, max_order: usize) -> Result<MomentSet<T>> {
        moments_from_distribution(self, max_order)
    }
}

/// Raw moments and cumulants of a work distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet<T: Real> {
    pub scheme: Scheme,
    /// `raw[k]` = <w^k>, k = 0..=order.
    raw: Vec<T>,
    /// `cumulants[k]` = kappa^(k), k = 1..=order (index 0 unused).
    cumulants: Vec<T>,
}

impl<T: Real> MomentSet<T> {
    pub fn order(&self) -> usize {
        self.raw.len() - 1
    }

    pub fn mean(&self) -> T {
        self.raw[1]
    }

    pub fn second(&self) -> T {
        self.raw[2]
    }

    pub fn variance(&self) -> T {
        self.raw[2] - self.raw[1] * self.raw[1]
    }

    pub fn moment(&self, k: usize) -> Option<T> {
        self.raw.get(k).copied()
    }

    pub fn cumulant(&self, k: usize) -> Option<T> {
        if k == 0 {
            return None;
        }
        self.cumulants.get(k).copied()
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// <w^k> = sum_k p_k w_k^k and cumulants by the moment-cumulant recursion.
pub fn moments_from_distribution<T: Real>(dist: &WorkDistribution<T>, max_order: usize) -> Result<MomentSet<T>> {
    if !(2..=MAX_MOMENT_ORDER).contains(&max_order) {
        return Err(Error::param(
            "max_order",
            format!("must be in 2..={MAX_MOMENT_ORDER}, got {max_order}"),
        ));
    }
    let raw: Vec<T> = (0..=max_order)
        .map(|k| dist.expectation(|w| w.powi(k as i32)))
        .collect();
    let mut cumulants = vec![T::zero(); max_order + 1];
    for n in 1..=max_order {
        let mut kappa = raw[n];
        for k in 1..n {
            kappa -= T::lit(binomial(n - 1, k - 1) as f64) * cumulants[k] * raw[n - k];
        }
        cumulants[n] = kappa;
    }
    Ok(MomentSet {
        scheme: dist.scheme,
        raw,
        cumulants,
    })
}

fn powers<T: Real>(m: &ComplexMatrix<T>, up_to: usize) -> Vec<ComplexMatrix<T>> {
    let mut out = Vec::with_capacity(up_to + 1);
    out.push(ComplexMatrix::identity(m.nrows(), m.nrows()));
    for k in 1..=up_to {
        let next = &out[k - 1] * m;
        out.push(next);
    }
    out
}

fn check_order(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::param("m", "moment order must be >= 1"));
    }
    Ok(())
}

/// TPM moment sum_l C(m,l) Tr[H~^l (-H_0)^(m-l) Delta(rho)] with H~ = U^dag H_tau U.
///
/// Equal to Tr[Delta(rho) (H~ - H_0)^m] for m <= 2; for higher m the two
/// operators no longer commute under the trace and only this ordering
/// reproduces the moments of the TPM distribution.
pub fn analytic_moment_tpm<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, m: usize) -> Result<T> {
    check_order(m)?;
    rho.check_dim(protocol.dim())?;
    let dephased = dephase_matrix(rho.matrix(), protocol.initial());
    let evolved = powers(protocol.evolved_final(), m);
    let initial = powers(&-protocol.initial().matrix(), m);
    let mut acc = T::zero();
    for l in 0..=m {
        let weight = T::lit(binomial(m, l) as f64);
        acc += weight * trace_product(&(&evolved[l] * &initial[m - l]), &dephased).re;
    }
    Ok(acc)
}

/// MH moment (1/2) sum_l C(m,l) Tr[{H~^l, (-H_0)^(m-l)} rho] with H~ = U^dag H_tau U.
pub fn analytic_moment_mh<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, m: usize) -> Result<T> {
    check_order(m)?;
    rho.check_dim(protocol.dim())?;
    let evolved = powers(protocol.evolved_final(), m);
    let initial = powers(&-protocol.initial().matrix(), m);
    let mut acc = T::zero();
    for l in 0..=m {
        let weight = T::lit(binomial(m, l) as f64);
        acc += weight * trace_product(&anticommutator(&evolved[l], &initial[m - l]), rho.matrix()).re;
    }
    Ok(acc * T::lit(0.5))
}

pub fn analytic_moment<T: Real>(scheme: Scheme, rho: &DensityMatrix<T>, protocol: &Protocol<T>, m: usize) -> Result<T> {
    match scheme {
        Scheme::Tpm => analytic_moment_tpm(rho, protocol, m),
        Scheme::Mh => analytic_moment_mh(rho, protocol, m),
    }
}

/// G(eta) = sum_k p_k e^{i eta w_k}.
pub fn characteristic_function<T: Real>(dist: &WorkDistribution<T>, eta: T) -> Complex<T> {
    dist.points
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, pt| acc + cis(eta * pt.w) * c(pt.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{gibbs_state, pauli_z};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sz() -> HermitianObservable<f64> {
        HermitianObservable::new(&pauli_z()).unwrap()
    }

    fn plus() -> DensityMatrix<f64> {
        DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap()
    }

    fn table(p: [[f64; 2]; 2]) -> JointWorkTable<f64> {
        JointWorkTable {
            scheme: Scheme::Tpm,
            probabilities: DMatrix::from_row_slice(2, 2, &[p[0][0], p[0][1], p[1][0], p[1][1]]),
            initial_energies: vec![1.0, -1.0],
            final_energies: vec![1.0, -1.0],
        }
    }

    #[test]
    fn identity_protocol_keeps_populations() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let p = Protocol::cyclic(sz(), UnitaryPropagator::identity(2)).unwrap();
        let t = tpm_joint(&rho, &p).unwrap();
        assert_eq!(t.probabilities, DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.7]));
    }

    #[test]
    fn tpm_plus_state_loses_coherence() {
        let p = Protocol::cyclic(sz(), UnitaryPropagator::identity(2)).unwrap();
        let t = tpm_joint(&plus(), &p).unwrap();
        assert!((t.probabilities.clone() - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])).amax() < 1e-15);
    }

    #[test]
    fn tpm_gibbs_rotation_matches_explicit_products() {
        let h = sz();
        let g = gibbs_state(&h, 0.2).unwrap();
        let tau = PI / 5.0;
        let p = Protocol::cyclic(h, UnitaryPropagator::real_rotation(tau)).unwrap();
        let t = tpm_joint(&g.state, &p).unwrap();
        // TPM on a diagonal state: P[m,n] = |U_mn|^2 p_n
        let z = 2.0 * 0.2f64.cosh();
        let pops = [(-0.2f64).exp() / z, 0.2f64.exp() / z];
        let (co, s) = (tau.cos(), tau.sin());
        let u2 = [[co * co, s * s], [s * s, co * co]];
        for m in 0..2 {
            for n in 0..2 {
                assert_abs_diff_eq!(t.probabilities[(m, n)], u2[m][n] * pops[n], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn mh_reduces_to_tpm_for_incoherent_states() {
        let rho = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        let p = Protocol::cyclic(sz(), crate::qmath::qubit_unitary(0.7, 0.2, -1.1, 0.4)).unwrap();
        let a = tpm_joint(&rho, &p).unwrap();
        let b = mh_joint(&rho, &p).unwrap();
        assert!((a.probabilities - b.probabilities).amax() < 1e-12);
    }

    #[test]
    fn mh_goes_negative_for_coherent_plus_state() {
        let p = Protocol::cyclic(sz(), UnitaryPropagator::real_rotation(3.0 * PI / 4.0)).unwrap();
        let t = mh_joint(&plus(), &p).unwrap();
        // brute force 2x2: Re[(U^dag Pi_m U)_{..}] with Pi_n rho
        let (co, s) = ((3.0 * PI / 4.0).cos(), (3.0 * PI / 4.0).sin());
        let u = [[co, s], [-s, co]];
        for m in 0..2 {
            for n in 0..2 {
                // (U^dag Pi_m U)_{jn} = u[m][j] u[m][n]; (Pi_n rho)_{n j} = 1/2
                let expected: f64 = (0..2).map(|j| u[m][n] * u[m][j] * 0.5).sum();
                assert_abs_diff_eq!(t.probabilities[(m, n)], expected, epsilon = 1e-15);
            }
        }
        assert!(t.min_entry() < 0.0);
        assert!(t.min_entry() >= -0.125 - 1e-12);
        assert_abs_diff_eq!(t.total(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = Protocol::cyclic(sz(), UnitaryPropagator::identity(2)).unwrap();
        let rho = DensityMatrix::<f64>::maximally_mixed(3);
        assert!(matches!(tpm_joint(&rho, &p), Err(Error::DimensionMismatch { expected: 2, found: 3 })));
        assert!(Protocol::cyclic(sz(), UnitaryPropagator::identity(3)).is_err());
    }

    #[test]
    fn hand_accumulated_distribution() {
        let d = table([[0.4, 0.1], [0.2, 0.3]]).work_distribution();
        let pts: Vec<(f64, f64)> = d.points.iter().map(|p| (p.w, p.p)).collect();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0], (-2.0, 0.2));
        assert_eq!(pts[1].0, 0.0);
        assert_abs_diff_eq!(pts[1].1, 0.7, epsilon = 1e-15);
        assert_eq!(pts[2], (2.0, 0.1));
    }

    #[test]
    fn cyclic_identity_puts_all_mass_at_zero() {
        let p = Protocol::cyclic(sz(), UnitaryPropagator::identity(2)).unwrap();
        let d = tpm_joint(&plus(), &p).unwrap().work_distribution();
        let ws: Vec<f64> = d.points.iter().map(|p| p.w).collect();
        assert_eq!(ws, vec![-2.0, 0.0, 2.0]);
        assert_eq!(d.points[0].p, 0.0);
        assert_eq!(d.points[2].p, 0.0);
        assert_abs_diff_eq!(d.points[1].p, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn near_equal_work_values_merge() {
        let t = JointWorkTable {
            scheme: Scheme::Mh,
            probabilities: DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            initial_energies: vec![1.0, 1.0 - 1e-12],
            final_energies: vec![0.0],
        };
        let d = t.work_distribution();
        assert_eq!(d.points.len(), 1);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn moments_by_hand() {
        let d = table([[0.4, 0.1], [0.2, 0.3]]).work_distribution();
        let m = moments_from_distribution(&d, 4).unwrap();
        assert_abs_diff_eq!(m.mean(), -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.second(), 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.variance(), 1.16, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cumulant(2).unwrap(), m.variance(), epsilon = 1e-15);
        // third central moment = kappa_3
        let central3: f64 = d.points.iter().map(|p| p.p * (p.w + 0.2).powi(3)).sum();
        assert_abs_diff_eq!(m.cumulant(3).unwrap(), central3, epsilon = 1e-14);
    }

    #[test]
    fn point_mass_at_zero_has_vanishing_moments() {
        let d = WorkDistribution::from_points(Scheme::Tpm, vec![WorkPoint { w: 0.0, p: 1.0 }], 1e-9);
        let m = moments_from_distribution(&d, 6).unwrap();
        for k in 1..=6 {
            assert_eq!(m.moment(k).unwrap(), 0.0);
            assert_eq!(m.cumulant(k).unwrap(), 0.0);
        }
        assert!(moments_from_distribution(&d, 7).is_err());
    }

    #[test]
    fn gibbs_state_schemes_have_equal_moments() {
        let h = sz();
        let g = gibbs_state(&h, 0.7).unwrap();
        let p = Protocol::new(h, HermitianObservable::diagonal(&[0.3, -0.5]).unwrap(), crate::qmath::qubit_unitary(0.4, 0.3, 0.2, 0.0)).unwrap();
        let a = tpm_joint(&g.state, &p).unwrap().work_distribution().moments(6).unwrap();
        let b = mh_joint(&g.state, &p).unwrap().work_distribution().moments(6).unwrap();
        for k in 1..=6 {
            assert_abs_diff_eq!(a.moment(k).unwrap(), b.moment(k).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn first_moment_vanishes_for_cyclic_identity() {
        let p = Protocol::cyclic(sz(), UnitaryPropagator::identity(2)).unwrap();
        assert_abs_diff_eq!(analytic_moment_tpm(&plus(), &p, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(analytic_moment_mh(&plus(), &p, 1).unwrap(), 0.0);
        assert!(analytic_moment_tpm(&plus(), &p, 0).is_err());
    }

    #[test]
    fn characteristic_function_basics() {
        let d = table([[0.4, 0.1], [0.2, 0.3]]).work_distribution();
        let g0 = characteristic_function(&d, 0.0);
        assert_abs_diff_eq!(g0.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g0.im, 0.0);
        let mass = WorkDistribution::from_points(Scheme::Tpm, vec![WorkPoint { w: 2.0, p: 1.0 }], 1e-9);
        let g = characteristic_function(&mass, PI / 2.0);
        assert_abs_diff_eq!(g.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn characteristic_function_derivative_gives_mean() {
        let d = table([[0.4, 0.1], [0.2, 0.3]]).work_distribution();
        let h = 1e-5;
        let deriv = (characteristic_function(&d, h) - characteristic_function(&d, -h)) / Complex::new(2.0 * h, 0.0);
        // G'(0) = i <w>
        assert_abs_diff_eq!(deriv.im, d.mean(), epsilon = 1e-6);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 5), 1);
    }
}
