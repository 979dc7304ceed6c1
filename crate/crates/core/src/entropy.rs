//! Free energies, average entropy production in both schemes, the generalized
//! fluctuation factor xi and the small-beta (linear-response) expressions.

use serde::{Deserialize, Serialize};

use crate::coherence::{bloch, CoherenceBasis};
use crate::error::{Error, Result};
use crate::qmath::{c, commutator, gibbs_state, max_abs_diff, trace_product, ComplexMatrix, DensityMatrix, HermitianObservable};
use crate::scalar::Real;
use crate::workstats::{mh_joint, tpm_joint, Protocol, Scheme, WorkDistribution};

fn positive_beta<T: Real>(beta: T) -> Result<()> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::param("beta", format!("must be finite and > 0, got {beta}")));
    }
    Ok(())
}

/// Delta F = beta^{-1} ln(Z_0 / Z_tau).
pub fn free_energy_difference<T: Real>(
    initial: &HermitianObservable<T>,
    final_: &HermitianObservable<T>,
    beta: T,
) -> Result<T> {
    positive_beta(beta)?;
    Ok((initial.log_partition_function(beta) - final_.log_partition_function(beta)) / beta)
}

/// xi = Re Tr[U^dag G_tau U G_0^{-1} rho].
pub fn xi_factor<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, beta: T) -> Result<T> {
    if !beta.is_finite() || beta < T::zero() {
        return Err(Error::param("beta", format!("must be finite and >= 0, got {beta}")));
    }
    rho.check_dim(protocol.dim())?;
    let gamma = protocol
        .evolution()
        .heisenberg(gibbs_state(protocol.final_hamiltonian(), beta)?.state.matrix());
    let log_z0 = protocol.initial().log_partition_function(beta);
    let inverse_gibbs = protocol.initial().apply_fn(|e| (log_z0 + beta * e).exp());
    Ok(trace_product(&(gamma * inverse_gibbs), rho.matrix()).re)
}

/// Sum_k p_k e^{-beta (w_k - Delta F)}, with signed weights for MH.
pub fn exponential_average<T: Real>(dist: &WorkDistribution<T>, beta: T, delta_f: T) -> T {
    dist.expectation(|w| (-beta * (w - delta_f)).exp())
}

/// beta (<w> - Delta F) in the given scheme.
pub fn entropy_production<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, beta: T, scheme: Scheme) -> Result<T> {
    let delta_f = free_energy_difference(protocol.initial(), protocol.final_hamiltonian(), beta)?;
    let mean = mean_work(rho, protocol, scheme)?;
    Ok(beta * (mean - delta_f))
}

fn mean_work<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, scheme: Scheme) -> Result<T> {
    crate::workstats::analytic_moment(scheme, rho, protocol, 1)
}

/// beta <w>_MH - (beta^2/2) Re Tr(rho [H_0, U^dag H_tau U]) - (beta^2/4) Tr[H_0^2 - H_tau^2].
///
/// The commutator term is Re of the trace of an anti-Hermitian operator against
/// rho and therefore vanishes identically; it is kept so the expression stays
/// term-by-term comparable.
pub fn entropy_lr_mh<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, beta: T) -> Result<T> {
    let mean = mean_work(rho, protocol, Scheme::Mh)?;
    let comm = commutator(protocol.initial().matrix(), protocol.evolved_final());
    let comm_term = trace_product(rho.matrix(), &comm).re;
    let trace_term = protocol.initial().trace_sq() - protocol.final_hamiltonian().trace_sq();
    let b2 = beta * beta;
    Ok(beta * mean - b2 * T::lit(0.5) * comm_term - b2 * T::lit(0.25) * trace_term)
}

/// beta^2 (Delta w)^2_TPM / 2.
pub fn entropy_lr_tpm<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, beta: T) -> Result<T> {
    let moments = tpm_joint(rho, protocol)?.work_distribution().moments(2)?;
    Ok(beta * beta * moments.variance() * T::lit(0.5))
}

/// Second-order cumulant estimate of the entropy production with the size of
/// the first neglected (third-order) term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate<T> {
    pub value: T,
    pub truncation_error: T,
}

/// (beta^2/2) kappa_2 - ln xi, plus |kappa_3| beta^3 / 6 as the truncation estimate.
pub fn entropy_lr_cumulant<T: Real>(dist: &WorkDistribution<T>, beta: T, xi: T) -> Result<CumulantEstimate<T>> {
    if !(xi > T::zero()) {
        return Err(Error::LogUndefined { xi: xi.to_f64_lossy() });
    }
    let moments = dist.moments(3)?;
    let kappa2 = moments.cumulant(2).unwrap();
    let kappa3 = moments.cumulant(3).unwrap();
    let b2 = beta * beta;
    Ok(CumulantEstimate {
        value: b2 * T::lit(0.5) * kappa2 - xi.ln(),
        truncation_error: (kappa3 * b2 * beta).abs() / T::lit(6.0),
    })
}

/// Most negative MH quasiprobability (min over m, n of the MH table).
pub fn mh_negativity<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>) -> Result<T> {
    Ok(mh_joint(rho, protocol)?.min_entry())
}

/// Small-beta qubit formula for the MH entropy production with H_0 = sigma_z,
/// H_tau = k sigma_z, a real rotation by `tau` and Gibbs populations:
/// `beta k sin(2 tau) cos(chi) C - 2 beta^2 k cos^2(tau) + beta^2 k^2/2 + beta^2 k + beta^2/2`.
pub fn qubit_lr_closed_form<T: Real>(beta: T, k: T, tau: T, chi: T, coherence: T) -> T {
    let b2 = beta * beta;
    let co = tau.cos();
    let half = T::lit(0.5);
    beta * k * (T::lit(2.0) * tau).sin() * chi.cos() * coherence - T::lit(2.0) * b2 * k * co * co
        + b2 * k * k * half
        + b2 * k
        + b2 * half
}

/// Coherence at which [`qubit_lr_closed_form`] changes sign, if it depends on coherence at all.
pub fn qubit_lr_zero_crossing<T: Real>(beta: T, k: T, tau: T, chi: T) -> Option<T> {
    let slope = beta * k * (T::lit(2.0) * tau).sin() * chi.cos();
    if slope == T::zero() {
        return None;
    }
    Some(-qubit_lr_closed_form(beta, k, tau, chi, T::zero()) / slope)
}

/// Linear-response MH minus TPM entropy production for the qubit setup
/// H_0 = sigma_z, H_tau = k sigma_z, real rotation: `beta k sin(2 tau) cos(chi) C`.
///
/// Only valid for initial states with Gibbs populations at `beta`; other
/// states are rejected.
pub fn qubit_lr_gap<T: Real>(rho: &DensityMatrix<T>, k: T, tau: T, beta: T) -> Result<T> {
    positive_beta(beta)?;
    let h0 = HermitianObservable::diagonal(&[T::one(), -T::one()])?;
    let b = bloch(rho, &CoherenceBasis::of(&h0)?)?;
    let thermal = T::lit(0.5) * (T::one() - b.a_z);
    let expected = (-beta).exp() / (T::lit(2.0) * beta.cosh());
    if (thermal - expected).abs() > T::lit(1e-9) {
        return Err(Error::param(
            "rho",
            format!("populations are not thermal at beta = {beta}: upper level {thermal}, expected {expected}"),
        ));
    }
    Ok(beta * k * (T::lit(2.0) * tau).sin() * b.chi.cos() * b.coherence)
}

/// Qubit state with thermal populations of sigma_z at `beta` and a real
/// coherence scaled by `omega` in [0, 1]:
/// `[[1 - a^2, omega a sqrt(1 - a^2)], [omega a sqrt(1 - a^2), a^2]]`, `a^2 = e^beta / Tr e^{-beta sigma_z}`.
pub fn thermal_coherent_qubit<T: Real>(beta: T, omega: T) -> Result<DensityMatrix<T>> {
    if !beta.is_finite() || beta < T::zero() {
        return Err(Error::param("beta", format!("must be finite and >= 0, got {beta}")));
    }
    if !(omega >= T::zero() && omega <= T::one()) {
        return Err(Error::param("omega", format!("must lie in [0, 1], got {omega}")));
    }
    // a^2 = e^b / (2 cosh b) = 1 / (1 + e^{-2b}), stable for large b
    let alpha2 = T::one() / (T::one() + (-T::lit(2.0) * beta).exp());
    let upper = (-T::lit(2.0) * beta).exp() * alpha2;
    let off = omega * (alpha2 * upper).sqrt();
    DensityMatrix::new(ComplexMatrix::from_row_slice(2, 2, &[c(upper), c(off), c(off), c(alpha2)]))
}

/// All entropy-production quantities for one (state, protocol, beta) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport<T> {
    pub beta: T,
    pub delta_f: T,
    pub mean_work_tpm: T,
    pub mean_work_mh: T,
    pub sigma_tpm: T,
    pub sigma_mh: T,
    pub xi: T,
    /// -ln xi, absent when xi <= 0.
    pub neg_log_xi: Option<T>,
    pub exp_avg_tpm: T,
    pub exp_avg_mh: T,
    /// <e^{-beta w}>_MH.
    pub exp_work_mh: T,
    pub mh_negativity: T,
    pub sigma_lr_mh: T,
    pub sigma_lr_tpm: T,
}

pub fn entropy_report<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, beta: T) -> Result<EntropyReport<T>> {
    let delta_f = free_energy_difference(protocol.initial(), protocol.final_hamiltonian(), beta)?;
    let tpm = tpm_joint(rho, protocol)?;
    let mh = mh_joint(rho, protocol)?;
    let tpm_dist = tpm.work_distribution();
    let mh_dist = mh.work_distribution();
    let tpm_moments = tpm_dist.moments(2)?;
    let mean_work_tpm = tpm_moments.mean();
    let mean_work_mh = mh_dist.mean();
    let xi = xi_factor(rho, protocol, beta)?;
    Ok(EntropyReport {
        beta,
        delta_f,
        mean_work_tpm,
        mean_work_mh,
        sigma_tpm: beta * (mean_work_tpm - delta_f),
        sigma_mh: beta * (mean_work_mh - delta_f),
        xi,
        neg_log_xi: if xi > T::zero() { Some(-xi.ln()) } else { None },
        exp_avg_tpm: exponential_average(&tpm_dist, beta, delta_f),
        exp_avg_mh: exponential_average(&mh_dist, beta, delta_f),
        exp_work_mh: mh_dist.expectation(|w| (-beta * w).exp()),
        mh_negativity: mh.min_entry(),
        sigma_lr_mh: entropy_lr_mh(rho, protocol, beta)?,
        sigma_lr_tpm: beta * beta * tpm_moments.variance() * T::lit(0.5),
    })
}

/// True when `rho` equals the Gibbs state of the initial Hamiltonian at `beta`.
pub fn is_initial_gibbs<T: Real>(rho: &DensityMatrix<T>, protocol: &Protocol<T>, beta: T, tol: T) -> Result<bool> {
    let g = gibbs_state(protocol.initial(), beta)?;
    Ok(max_abs_diff(rho.matrix(), g.state.matrix()) <= tol)
}
