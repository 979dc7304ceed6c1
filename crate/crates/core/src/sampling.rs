//! Seeded Haar unitaries, coherence-targeted random states and random-search
//! maximization of the MH/TPM moment gap over unitaries.
//!
//! Every random draw is taken from a ChaCha8 stream selected by `(seed, stream)`,
//! so sample `i` is the same no matter how many samples are requested or how
//! the work is scheduled across threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::optimal_qubit_unitary;
use crate::coherence::{l1_coherence, CoherenceBasis};
use crate::error::{Error, Result};
use crate::qmath::{c, modulus, ComplexMatrix, DensityMatrix, HermitianObservable, UnitaryPropagator};
use crate::scalar::Real;
use crate::workstats::{analytic_moment, Protocol, Scheme};
use num_complex::Complex;

/// Stream index used for state draws, kept apart from the per-sample unitary streams.
const STATE_STREAM_BASE: u64 = 1 << 62;
const MAX_STATE_ATTEMPTS: u64 = 50;
const COHERENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub seed: u64,
    pub dim: usize,
    pub n_samples: usize,
}

impl RandomSpec {
    pub fn new(seed: u64, dim: usize, n_samples: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", format!("must be >= 2, got {dim}")));
        }
        if n_samples == 0 {
            return Err(Error::param("n_samples", "must be >= 1"));
        }
        Ok(RandomSpec { seed, dim, n_samples })
    }
}

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for grid point `index` of a sweep seeded with `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_complex<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re), T::lit(im))
}

/// Haar unitary from QR of a complex Gaussian matrix, with the phases of R's
/// diagonal moved into Q.
pub fn haar_unitary_with<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> UnitaryPropagator<T> {
    let z: ComplexMatrix<T> = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let m = modulus(d);
        let ph = if m > T::zero() { d / c(m) } else { Complex::new(T::one(), T::zero()) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    UnitaryPropagator::trusted(q)
}

/// Haar unitary drawn from stream 0 of `spec.seed`.
pub fn haar_unitary<T: Real>(spec: &RandomSpec) -> UnitaryPropagator<T> {
    haar_unitary_with(&mut stream_rng(spec.seed, 0), spec.dim)
}

/// Haar-random pure state vector.
pub fn random_pure_vector<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Complex<T>> {
    loop {
        let v: Vec<Complex<T>> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
        if norm > T::zero() {
            return v.into_iter().map(|z| z / c(norm)).collect();
        }
    }
}

fn outer<T: Real>(psi: &[Complex<T>]) -> ComplexMatrix<T> {
    let d = psi.len();
    DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj())
}

/// Largest l1 coherence a state of dimension `dim` can carry.
pub fn max_coherence(dim: usize) -> f64 {
    dim as f64 - 1.0
}

fn coherence_of<T: Real>(m: &ComplexMatrix<T>) -> T {
    crate::coherence::off_diagonal_l1(m)
}

/// Pure state with the moduli of `psi` pulled toward the flat profile by `s` in [0, 1], phases kept.
fn flattened<T: Real>(psi: &[Complex<T>], s: T) -> Vec<Complex<T>> {
    let d = psi.len();
    let flat = T::one() / T::from_usize(d).unwrap().sqrt();
    let mut v: Vec<Complex<T>> = psi
        .iter()
        .map(|z| {
            let m = modulus(*z);
            let ph = if m > T::zero() { *z / c(m) } else { Complex::new(T::one(), T::zero()) };
            ph * c((T::one() - s) * m + s * flat)
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
    for z in v.iter_mut() {
        *z /= c(norm);
    }
    v
}

/// Coherence-targeted state in the eigenvectors of `basis` (eigenbasis coordinates).
///
/// A Haar pure state is drawn. If its coherence exceeds the target, its
/// off-diagonal part is scaled down, which mixes it with its dephased version
/// and so stays positive. Otherwise its moduli are bisected toward the flat
/// profile (coherence `dim - 1`) while keeping its phases.
fn targeted_in_eigenframe<T: Real>(psi: &[Complex<T>], target: T) -> Option<ComplexMatrix<T>> {
    let tol = T::lit(COHERENCE_TOL);
    let pure = outer(psi);
    let base = coherence_of(&pure);
    if base >= target {
        let t = if base > T::zero() { target / base } else { T::zero() };
        let mut m = pure;
        let d = m.nrows();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m[(i, j)] *= c(t);
                }
            }
        }
        return Some(m);
    }
    let top = outer(&flattened(psi, T::one()));
    if coherence_of(&top) <= target + tol {
        return Some(top);
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        let m = outer(&flattened(psi, mid));
        let cm = coherence_of(&m);
        if (cm - target).abs() <= tol {
            return Some(m);
        }
        if cm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}

/// Random state whose l1 coherence in the eigenbasis of `h` equals `target`.
///
/// Draws use the state streams of `spec.seed`; attempt `k` uses stream
/// `2^62 + k`. Fails with [`Error::Infeasible`] when `target > dim - 1` or no
/// attempt reaches the target.
pub fn random_state_with_coherence<T: Real>(
    dim: usize,
    target: T,
    h: &HermitianObservable<T>,
    spec: &RandomSpec,
) -> Result<DensityMatrix<T>> {
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: h.dim() });
    }
    if !target.is_finite() || target < T::zero() {
        return Err(Error::param("coherence target", format!("must be finite and >= 0, got {target}")));
    }
    let cap = max_coherence(dim);
    if target.to_f64_lossy() > cap + COHERENCE_TOL {
        return Err(Error::Infeasible {
            target: target.to_f64_lossy(),
            reason: format!("l1 coherence in dimension {dim} is at most {cap}"),
        });
    }
    let target = target.min(T::lit(cap));
    let basis = CoherenceBasis::eigenvectors_of(h);
    let v = basis.vectors();
    for attempt in 0..MAX_STATE_ATTEMPTS {
        let mut rng = stream_rng(spec.seed, STATE_STREAM_BASE + attempt);
        let psi = random_pure_vector::<T, _>(&mut rng, dim);
        let Some(local) = targeted_in_eigenframe(&psi, target) else { continue };
        let Ok(rho) = DensityMatrix::new(v * local * v.adjoint()) else { continue };
        let reached = l1_coherence(&rho, &basis)?;
        if (reached - target).abs() <= T::lit(1e-6) {
            return Ok(rho);
        }
    }
    Err(Error::Infeasible {
        target: target.to_f64_lossy(),
        reason: format!("no positive state found after {MAX_STATE_ATTEMPTS} attempts"),
    })
}

/// One-line description of the state ensemble, for output metadata.
pub const STATE_ENSEMBLE: &str = "Haar pure state; off-diagonals scaled down toward the target, \
or moduli bisected toward the flat profile with phases kept; coherence in the chosen eigenvectors of H";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentOrder {
    First,
    Second,
}

impl MomentOrder {
    pub fn power(self) -> usize {
        match self {
            MomentOrder::First => 1,
            MomentOrder::Second => 2,
        }
    }
}

/// |<w^m>_MH - <w^m>_TPM| for the cyclic process driven by `u`.
pub fn moment_gap<T: Real>(
    rho: &DensityMatrix<T>,
    h: &HermitianObservable<T>,
    u: &UnitaryPropagator<T>,
    order: MomentOrder,
) -> Result<T> {
    let p = Protocol::cyclic(h.clone(), u.clone())?;
    let m = order.power();
    Ok((analytic_moment(Scheme::Mh, rho, &p, m)? - analytic_moment(Scheme::Tpm, rho, &p, m)?).abs())
}

#[derive(Debug, Clone)]
pub struct MaxGap<T: Real> {
    pub best_gap: T,
    pub best_unitary: UnitaryPropagator<T>,
    /// Index of the winning sample, `None` when the qubit closed-form optimum won.
    pub best_sample: Option<usize>,
}

/// Random search for the largest moment gap over Haar unitaries.
///
/// Sample `i` uses stream `i` of `spec.seed`, so the result for `n` samples is
/// the maximum over a prefix of the result for any larger `n`. For qubits with
/// a nondegenerate `h` and `order = First` the closed-form optimal unitary is
/// also evaluated.
pub fn max_gap_over_unitaries<T: Real>(
    rho: &DensityMatrix<T>,
    h: &HermitianObservable<T>,
    order: MomentOrder,
    spec: &RandomSpec,
) -> Result<MaxGap<T>> {
    let dim = h.dim();
    rho.check_dim(dim)?;
    if spec.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: spec.dim });
    }
    let sampled: Vec<(usize, T)> = (0..spec.n_samples)
        .into_par_iter()
        .map(|i| {
            let u = haar_unitary_with::<T, _>(&mut stream_rng(spec.seed, i as u64), dim);
            moment_gap(rho, h, &u, order).map(|g| (i, g))
        })
        .collect::<Result<_>>()?;
    // first index wins ties
    let (best_i, mut best_gap) = sampled
        .into_iter()
        .fold((0, T::lit(-1.0)), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut best_unitary = haar_unitary_with::<T, _>(&mut stream_rng(spec.seed, best_i as u64), dim);
    let mut best_sample = Some(best_i);
    if dim == 2 && order == MomentOrder::First && !h.is_degenerate() {
        let u = qubit_optimum(rho, h)?;
        let g = moment_gap(rho, h, &u, order)?;
        if g > best_gap {
            best_gap = g;
            best_unitary = u;
            best_sample = None;
        }
    }
    Ok(MaxGap { best_gap, best_unitary, best_sample })
}

/// Closed-form first-moment optimum mapped back from the eigenframe of `h`.
fn qubit_optimum<T: Real>(rho: &DensityMatrix<T>, h: &HermitianObservable<T>) -> Result<UnitaryPropagator<T>> {
    let v = h.eigenvectors();
    let local_h = HermitianObservable::diagonal(h.eigenvalues())?;
    let local_rho = DensityMatrix::new(rho.in_basis(v))?;
    let u = optimal_qubit_unitary(&local_rho, &local_h)?;
    Ok(UnitaryPropagator::trusted(v * u.matrix() * v.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::first_moment_bound;
    use crate::qmath::{diagonal, pauli_x, pauli_z};
    use approx::assert_abs_diff_eq;

    fn spec(seed: u64, dim: usize, n: usize) -> RandomSpec {
        RandomSpec::new(seed, dim, n).unwrap()
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(42, 3), derive_seed(42, 3));
        assert_ne!(derive_seed(42, 3), derive_seed(43, 3));
    }

    #[test]
    fn haar_unitary_is_unitary() {
        for d in 2..6 {
            for seed in 0..5 {
                let u: UnitaryPropagator<f64> = haar_unitary(&spec(seed, d, 1));
                assert!(u.unitarity_defect() <= 1e-12);
                assert_abs_diff_eq!(u.matrix().determinant().norm(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn haar_unitary_is_deterministic() {
        let a: UnitaryPropagator<f64> = haar_unitary(&spec(7, 3, 1));
        let b: UnitaryPropagator<f64> = haar_unitary(&spec(7, 3, 1));
        assert_eq!(a.matrix(), b.matrix());
        let c2: UnitaryPropagator<f64> = haar_unitary(&spec(8, 3, 1));
        assert_ne!(a.matrix(), c2.matrix());
    }

    #[test]
    fn haar_second_moment() {
        // E|U_ij|^2 = 1/d for Haar unitaries
        let n = 100_000;
        let mean: f64 = (0..n)
            .into_par_iter()
            .map(|i| haar_unitary_with::<f64, _>(&mut stream_rng(3, i), 2).matrix()[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 5e-3);
    }

    #[test]
    fn zero_target_gives_incoherent_state() {
        let h = HermitianObservable::new(&pauli_z::<f64>()).unwrap();
        let rho = random_state_with_coherence(2, 0.0, &h, &spec(1, 2, 1)).unwrap();
        assert_eq!(rho.matrix()[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn unit_target_qubit_is_equatorial() {
        let h = HermitianObservable::new(&pauli_z::<f64>()).unwrap();
        let rho = random_state_with_coherence(2, 1.0, &h, &spec(1, 2, 1)).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 1)].norm(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn qutrit_target_is_met() {
        let h = HermitianObservable::new(&diagonal(&[0.3, -0.1, -0.2])).unwrap();
        for seed in 0..20 {
            for target in [0.1f64, 0.6, 1.3, 1.9, 2.0] {
                let rho = random_state_with_coherence(3, target, &h, &spec(seed, 3, 1)).unwrap();
                let got = l1_coherence(&rho, &CoherenceBasis::eigenvectors_of(&h)).unwrap();
                assert!((got - target).abs() <= 1e-6, "seed {seed} target {target} got {got}");
            }
        }
    }

    #[test]
    fn target_in_rotated_basis() {
        let h = HermitianObservable::new(&pauli_x::<f64>()).unwrap();
        let rho = random_state_with_coherence(2, 0.4, &h, &spec(2, 2, 1)).unwrap();
        let got = l1_coherence(&rho, &CoherenceBasis::eigenvectors_of(&h)).unwrap();
        assert_abs_diff_eq!(got, 0.4, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_target() {
        let h = HermitianObservable::new(&pauli_z::<f64>()).unwrap();
        assert!(matches!(
            random_state_with_coherence(2, 1.5, &h, &spec(1, 2, 1)),
            Err(Error::Infeasible { .. })
        ));
        assert!(random_state_with_coherence(2, -0.1, &h, &spec(1, 2, 1)).is_err());
    }

    #[test]
    fn qubit_search_hits_bound() {
        let h = HermitianObservable::new(&pauli_z::<f64>()).unwrap();
        let rho = random_state_with_coherence(2, 0.7, &h, &spec(4, 2, 1)).unwrap();
        let best = max_gap_over_unitaries(&rho, &h, MomentOrder::First, &spec(4, 2, 50)).unwrap();
        assert_abs_diff_eq!(best.best_gap, first_moment_bound(&h, &rho).unwrap(), epsilon = 1e-8);
        assert_eq!(best.best_sample, None);
    }

    #[test]
    fn qubit_optimum_in_rotated_frame() {
        let h = HermitianObservable::new(&pauli_x::<f64>()).unwrap();
        let rho = random_state_with_coherence(2, 0.5, &h, &spec(5, 2, 1)).unwrap();
        let best = max_gap_over_unitaries(&rho, &h, MomentOrder::First, &spec(5, 2, 1)).unwrap();
        assert_abs_diff_eq!(best.best_gap, first_moment_bound(&h, &rho).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn search_is_monotone_in_samples() {
        let h = HermitianObservable::new(&diagonal(&[1.0, 1.0, -2.0].map(|x: f64| x / 3f64.sqrt()))).unwrap();
        let rho = random_state_with_coherence(3, 1.0, &h, &spec(9, 3, 1)).unwrap();
        let mut prev = 0.0;
        for n in [1, 10, 100, 1000] {
            let g = max_gap_over_unitaries(&rho, &h, MomentOrder::First, &spec(9, 3, n)).unwrap().best_gap;
            assert!(g >= prev);
            prev = g;
        }
        let again = max_gap_over_unitaries(&rho, &h, MomentOrder::First, &spec(9, 3, 1000)).unwrap();
        assert_eq!(again.best_gap, prev);
        assert!(prev < first_moment_bound(&h, &rho).unwrap());
    }

    #[test]
    fn winning_unitary_reproduces_gap() {
        let h = HermitianObservable::new(&diagonal(&[0.5, 0.0, -0.5])).unwrap();
        let rho = random_state_with_coherence(3, 0.8, &h, &spec(11, 3, 1)).unwrap();
        let best = max_gap_over_unitaries(&rho, &h, MomentOrder::Second, &spec(11, 3, 200)).unwrap();
        let g = moment_gap(&rho, &h, &best.best_unitary, MomentOrder::Second).unwrap();
        assert_eq!(g, best.best_gap);
    }
}
