use proptest::prelude::*;
use qwork::coherence::{bloch, dephase, l1_coherence, CoherenceBasis};
use qwork::bounds::{first_moment_bound, gap_report, optimal_qubit_unitary, qubit_variance_gap};
use qwork::entropy::{entropy_production, exponential_average, free_energy_difference, xi_factor};
use qwork::qmath::{commutator, gibbs_state, max_abs, max_abs_diff, qubit_unitary};
use qwork::sampling::{haar_unitary_with, max_gap_over_unitaries, random_state_with_coherence, stream_rng, MomentOrder, RandomSpec};
use qwork::workstats::{analytic_moment, characteristic_function, mh_joint, tpm_joint, Scheme};
use qwork::{Complex, ComplexMatrix, DensityMatrix, HermitianObservable, Protocol, UnitaryPropagator};

fn complex_matrix(d: usize, re: &[f64], im: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| Complex::new(re[i * d + j], im[i * d + j]))
}

fn hermitian(d: usize, re: &[f64], im: &[f64]) -> HermitianObservable {
    let a = complex_matrix(d, re, im);
    HermitianObservable::new(&((&a + a.adjoint()) * Complex::new(0.5, 0.0))).unwrap()
}

fn state(d: usize, re: &[f64], im: &[f64]) -> DensityMatrix {
    let b = complex_matrix(d, re, im);
    let m = &b * b.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / Complex::new(tr, 0.0)).unwrap()
}

fn unitary(d: usize, seed: u64) -> UnitaryPropagator {
    haar_unitary_with(&mut stream_rng(seed, 0), d)
}

/// Populations of the Gibbs state of `h`, coherences of a pure state scaled by `omega`.
fn gibbs_populations_with_coherence(h: &HermitianObservable, beta: f64, phases: &[f64], omega: f64) -> DensityMatrix {
    let g = gibbs_state(h, beta).unwrap();
    let pops: Vec<f64> = (0..h.dim()).map(|k| g.state.in_basis(h.eigenvectors())[(k, k)].re).collect();
    let d = h.dim();
    let local = ComplexMatrix::from_fn(d, d, |i, j| {
        let amp = (pops[i] * pops[j]).sqrt();
        if i == j {
            Complex::new(pops[i], 0.0)
        } else {
            Complex::from_polar(omega * amp, phases[i] - phases[j])
        }
    });
    let v = h.eigenvectors();
    DensityMatrix::new(v * local * v.adjoint()).unwrap()
}

#[derive(Debug, Clone)]
struct Instance {
    d: usize,
    h: HermitianObservable,
    h_final: HermitianObservable,
    rho: DensityMatrix,
    u: UnitaryPropagator,
}

fn instance(max_dim: usize) -> impl Strategy<Value = Instance> {
    (2..=max_dim).prop_flat_map(|d| {
        let n = d * d;
        (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            any::<u64>(),
        )
            .prop_map(move |(hr, hi, fr, fi, sr, si, seed)| Instance {
                d,
                h: hermitian(d, &hr, &hi),
                h_final: hermitian(d, &fr, &fi),
                rho: state(d, &sr, &si),
                u: unitary(d, seed),
            })
    })
}

impl Instance {
    fn protocol(&self) -> Protocol {
        Protocol::new(self.h.clone(), self.h_final.clone(), self.u.clone()).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spectral_reconstruction(inst in instance(5)) {
        let err = max_abs_diff(&inst.h.reconstruct(), inst.h.matrix());
        prop_assert!(err <= 10.0 * inst.h.grouping_tol());
    }

    #[test]
    fn gibbs_commutes_and_is_normalized(inst in instance(5), beta in 0.0..5.0f64) {
        let g = gibbs_state(&inst.h, beta).unwrap();
        prop_assert!(max_abs(&commutator(g.state.matrix(), inst.h.matrix())) <= 1e-10);
        prop_assert!((g.state.matrix().trace().re - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn qubit_family_is_unitary(t in -10.0..10.0f64, p1 in -10.0..10.0f64, p2 in -10.0..10.0f64, ph in -10.0..10.0f64) {
        let u = qubit_unitary(t, p1, p2, ph);
        prop_assert!(u.unitarity_defect() <= 1e-12);
    }

    #[test]
    fn dephasing_is_idempotent_and_removes_coherence(inst in instance(5)) {
        let once = dephase(&inst.rho, &inst.h).unwrap();
        let twice = dephase(&once, &inst.h).unwrap();
        prop_assert!(max_abs_diff(once.matrix(), twice.matrix()) <= 1e-12);
        if !inst.h.is_degenerate() {
            let c = l1_coherence(&once, &CoherenceBasis::of(&inst.h).unwrap()).unwrap();
            prop_assert!(c <= 1e-12);
        }
    }

    #[test]
    fn coherence_is_phase_invariant(inst in instance(5), phases in prop::collection::vec(-3.0..3.0f64, 5)) {
        let basis = CoherenceBasis::eigenvectors_of(&inst.h);
        let v = basis.vectors();
        let dphase = ComplexMatrix::from_fn(inst.d, inst.d, |i, j| {
            if i == j { Complex::from_polar(1.0, phases[i]) } else { Complex::new(0.0, 0.0) }
        });
        let rotated = DensityMatrix::new(v * &dphase * inst.rho.in_basis(v) * dphase.adjoint() * v.adjoint()).unwrap();
        let before = l1_coherence(&inst.rho, &basis).unwrap();
        let after = l1_coherence(&rotated, &basis).unwrap();
        prop_assert!((before - after).abs() <= 1e-10);
    }

    #[test]
    fn qubit_coherence_matches_bloch(inst in instance(2)) {
        let basis = CoherenceBasis::computational(2);
        let b = bloch(&inst.rho, &basis).unwrap();
        let c = l1_coherence(&inst.rho, &basis).unwrap();
        prop_assert!((c - (b.a_x * b.a_x + b.a_y * b.a_y).sqrt()).abs() <= 1e-10);
    }

    #[test]
    fn marginals_match_initial_populations(inst in instance(5)) {
        let p = inst.protocol();
        let pops = inst.rho.level_populations(&inst.h);
        for table in [tpm_joint(&inst.rho, &p).unwrap(), mh_joint(&inst.rho, &p).unwrap()] {
            for (got, want) in table.initial_marginal().iter().zip(&pops) {
                prop_assert!((got - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn schemes_agree_for_incoherent_states(inst in instance(5), pops in prop::collection::vec(0.01..1.0f64, 5)) {
        let d = inst.d;
        let total: f64 = pops[..d].iter().sum();
        let v = inst.h.eigenvectors();
        let diag = ComplexMatrix::from_fn(d, d, |i, j| if i == j { Complex::new(pops[i] / total, 0.0) } else { Complex::new(0.0, 0.0) });
        let rho = DensityMatrix::new(v * diag * v.adjoint()).unwrap();
        let p = inst.protocol();
        let diff = (tpm_joint(&rho, &p).unwrap().probabilities - mh_joint(&rho, &p).unwrap().probabilities).abs().max();
        prop_assert!(diff <= 1e-12);
    }

    #[test]
    fn analytic_moments_match_distribution(inst in instance(4)) {
        let p = inst.protocol();
        for scheme in [Scheme::Tpm, Scheme::Mh] {
            let moments = qwork::workstats::joint(scheme, &inst.rho, &p).unwrap().work_distribution().moments(4).unwrap();
            for m in 1..=4 {
                let analytic = analytic_moment(scheme, &inst.rho, &p, m).unwrap();
                let dist = moments.moment(m).unwrap();
                prop_assert!((analytic - dist).abs() <= 1e-9, "{scheme} m={m}: {analytic} vs {dist}");
            }
        }
    }

    #[test]
    fn mh_entries_in_range(inst in instance(5)) {
        let t = mh_joint(&inst.rho, &inst.protocol()).unwrap();
        prop_assert!(t.min_entry() >= -0.125 - 1e-10);
        prop_assert!(t.max_entry() <= 1.0 + 1e-10);
    }

    #[test]
    fn characteristic_function_derivatives(inst in instance(4)) {
        let dist = tpm_joint(&inst.rho, &inst.protocol()).unwrap().work_distribution();
        let moments = dist.moments(2).unwrap();
        let e = 1e-4;
        let plus = characteristic_function(&dist, e);
        let minus = characteristic_function(&dist, -e);
        let zero = characteristic_function(&dist, 0.0);
        let first = ((plus - minus) / Complex::new(0.0, 2.0 * e)).re;
        let second = -((plus - zero * 2.0 + minus) / (e * e)).re;
        let tol = |x: f64| 1e-5 * x.abs().max(1.0);
        prop_assert!((first - moments.mean()).abs() <= tol(moments.mean()));
        prop_assert!((second - moments.second()).abs() <= tol(moments.second()));
    }

    #[test]
    fn gaps_within_bounds(inst in instance(5)) {
        let r = gap_report(&inst.rho, &inst.h, &inst.u).unwrap();
        prop_assert!(r.gap_first.abs() <= r.bound_first + 1e-9);
        prop_assert!(r.gap_second.abs() <= r.bound_second + 1e-9);
        if inst.d == 2 {
            prop_assert!(r.gap_second.abs() <= 1e-10);
        }
    }

    #[test]
    fn variance_gap_closed_form_matches(inst in instance(2), h0 in 0.1..2.0f64, h1 in -2.0..0.0f64, tau in -3.2..3.2f64) {
        let h = HermitianObservable::diagonal(&[h0, h1]).unwrap();
        let u = UnitaryPropagator::real_rotation(tau);
        let closed = qubit_variance_gap(&inst.rho, &h, tau).unwrap();
        let p = Protocol::cyclic(h.clone(), u).unwrap();
        let var = |s| qwork::workstats::joint(s, &inst.rho, &p).unwrap().work_distribution().moments(2).unwrap().variance();
        prop_assert!((closed - (var(Scheme::Mh) - var(Scheme::Tpm))).abs() <= 1e-10);
    }

    #[test]
    fn qubit_optimum_saturates_bound(inst in instance(2), h0 in 0.1..2.0f64, h1 in -2.0..0.0f64) {
        let h = HermitianObservable::diagonal(&[h0, h1]).unwrap();
        let u = optimal_qubit_unitary(&inst.rho, &h).unwrap();
        let gap = gap_report(&inst.rho, &h, &u).unwrap().gap_first.abs();
        prop_assert!((gap - first_moment_bound(&h, &inst.rho).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn jarzynski_for_gibbs_start(inst in instance(5), beta in 0.1..2.0f64) {
        let p = inst.protocol();
        let g = gibbs_state(&inst.h, beta).unwrap();
        let df = free_energy_difference(&inst.h, &inst.h_final, beta).unwrap();
        let dist = tpm_joint(&g.state, &p).unwrap().work_distribution();
        prop_assert!((exponential_average(&dist, beta, df) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn mh_exponential_average_is_xi(inst in instance(5), beta in 0.1..2.0f64) {
        let p = inst.protocol();
        let df = free_energy_difference(&inst.h, &inst.h_final, beta).unwrap();
        let dist = mh_joint(&inst.rho, &p).unwrap().work_distribution();
        let xi = xi_factor(&inst.rho, &p, beta).unwrap();
        prop_assert!((exponential_average(&dist, beta, df) - xi).abs() <= 1e-9);
    }

    // Jensen's inequality needs nonnegative weights, so the bound is only
    // checked where the MH table is a genuine distribution.
    #[test]
    fn entropy_bounded_by_log_xi_for_nonnegative_tables(inst in instance(5), beta in 0.1..2.0f64) {
        let p = inst.protocol();
        prop_assume!(mh_joint(&inst.rho, &p).unwrap().min_entry() >= 0.0);
        let xi = xi_factor(&inst.rho, &p, beta).unwrap();
        let sigma = entropy_production(&inst.rho, &p, beta, Scheme::Mh).unwrap();
        prop_assert!(xi > 0.0);
        prop_assert!(sigma >= -xi.ln() - 1e-9);
    }

    #[test]
    fn tpm_second_law_with_thermal_populations(
        inst in instance(5),
        beta in 0.1..3.0f64,
        omega in 0.0..1.0f64,
        phases in prop::collection::vec(-3.0..3.0f64, 5),
    ) {
        let rho = gibbs_populations_with_coherence(&inst.h, beta, &phases, omega);
        let sigma = entropy_production(&rho, &inst.protocol(), beta, Scheme::Tpm).unwrap();
        prop_assert!(sigma >= -1e-9);
    }

    #[test]
    fn sampled_states_hit_target(seed in any::<u64>(), d in 2..=5usize, frac in 0.0..=1.0f64) {
        let h = HermitianObservable::diagonal(&(0..d).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
        let target = frac * (d as f64 - 1.0);
        let spec = RandomSpec::new(seed, d, 1).unwrap();
        let rho = random_state_with_coherence(d, target, &h, &spec).unwrap();
        let again = random_state_with_coherence(d, target, &h, &spec).unwrap();
        prop_assert_eq!(rho.matrix(), again.matrix());
        let c = l1_coherence(&rho, &CoherenceBasis::eigenvectors_of(&h)).unwrap();
        prop_assert!((c - target).abs() <= 1e-6);
    }

    #[test]
    fn sampled_unitaries_are_unitary(seed in any::<u64>(), d in 2..=6usize) {
        prop_assert!(unitary(d, seed).unitarity_defect() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn qutrit_search_stays_below_bounds(seed in any::<u64>(), frac in 0.0..=1.0f64) {
        let s = 1.0 / 3f64.sqrt();
        let h = HermitianObservable::diagonal(&[s, s, -2.0 * s]).unwrap();
        let rho = random_state_with_coherence(3, 2.0 * frac, &h, &RandomSpec::new(seed, 3, 1).unwrap()).unwrap();
        let spec = RandomSpec::new(seed, 3, 200).unwrap();
        let first = max_gap_over_unitaries(&rho, &h, MomentOrder::First, &spec).unwrap();
        let second = max_gap_over_unitaries(&rho, &h, MomentOrder::Second, &spec).unwrap();
        let r = gap_report(&rho, &h, &first.best_unitary).unwrap();
        prop_assert!(first.best_gap <= r.bound_first + 1e-9);
        prop_assert!(second.best_gap <= r.bound_second + 1e-9);
    }
}
