mod common;

use common::*;
use proptest::prelude::*;
use udisc_core::epm::{epm_optimality_lp, Verdict};
use udisc_core::linalg::{self, c64, real, CMatrix};
use udisc_core::solver::{build_sdp, solve, verify_certificate, SolveReport, SolverOptions};
use udisc_core::{compute_epm, reciprocal_states, StateEnsemble};

fn optimum(e: &StateEnsemble) -> SolveReport {
    let rs = reciprocal_states(e).unwrap();
    solve(&build_sdp(e, &rs).unwrap(), &SolverOptions::default()).unwrap()
}

/// Random instance from a seed: dimension, count and whether amplitudes are complex.
fn instance(seed: u64, r: usize, m: usize, complex: bool) -> StateEnsemble {
    let mut rng = rng(seed);
    let states = random_states(&mut rng, r, m, complex, 0.1);
    StateEnsemble::new(states, random_priors(&mut rng, m)).unwrap()
}

/// Two-state optimum for overlap modulus `overlap` and priors `(η, 1 − η)` (Jaeger–Shimony).
fn two_state_optimum(overlap: f64, eta: f64) -> f64 {
    let (lo, hi) = (eta.min(1.0 - eta), eta.max(1.0 - eta));
    if overlap <= (lo / hi).sqrt() {
        1.0 - 2.0 * (eta * (1.0 - eta)).sqrt() * overlap
    } else {
        hi * (1.0 - overlap * overlap)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_states_closed_form(theta in 0.15f64..1.45, phase in -3.0f64..3.0, eta in 0.1f64..0.9) {
        let s = CMatrix::from_row_slice(2, 2, &[
            real(1.0), c64(phase.cos(), phase.sin()) * real(theta.cos()),
            real(0.0), real(theta.sin()),
        ]);
        let e = StateEnsemble::new(s, vec![eta, 1.0 - eta]).unwrap();
        let rep = optimum(&e);
        let want = two_state_optimum(theta.cos(), eta);
        prop_assert!((rep.detection_probability() - want).abs() < 1e-6,
            "θ={theta} η={eta}: {} vs {want}", rep.detection_probability());
    }

    #[test]
    fn optimum_certified_and_bounded(seed in any::<u64>(), r in 2usize..5, extra in 0usize..2, complex in any::<bool>()) {
        let m = r.saturating_sub(extra).max(2);
        let e = instance(seed, r, m, complex);
        let rs = reciprocal_states(&e).unwrap();
        let rep = optimum(&e);
        let check = verify_certificate(&e, &rs, &rep.p, &rep.certificate);
        prop_assert!(check.pass, "{:?}", check.failures());
        let pd = rep.detection_probability();
        // The EPM is feasible and P_D ≤ 1.
        prop_assert!(pd >= rs.smallest_singular_value().powi(2) - 1e-8);
        prop_assert!(pd <= 1.0 + 1e-9);
        for p in &rep.p {
            prop_assert!(*p >= -1e-9 && *p <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn reciprocal_states_are_biorthogonal(seed in any::<u64>(), r in 2usize..6, complex in any::<bool>()) {
        let e = instance(seed, r, r - 1, complex);
        let rs = reciprocal_states(&e).unwrap();
        let overlaps = rs.reciprocals().adjoint() * e.states();
        let id = linalg::identity(r - 1);
        prop_assert!(linalg::max_abs(&(overlaps - id)) < 1e-9);
    }

    #[test]
    fn invariant_under_unitaries_and_phases(seed in any::<u64>(), complex in any::<bool>()) {
        let e = instance(seed, 3, 3, complex);
        let mut rng = rng(seed ^ 0x9e37);
        let u = random_unitary(&mut rng, 3);
        let mut moved = &u * e.states();
        for (j, mut col) in moved.column_iter_mut().enumerate() {
            let a = j as f64 * 0.7;
            col *= c64(a.cos(), a.sin());
        }
        let f = StateEnsemble::new(moved, e.priors().to_vec()).unwrap();
        let (a, b) = (optimum(&e), optimum(&f));
        prop_assert!((a.detection_probability() - b.detection_probability()).abs() < 1e-7);
    }

    #[test]
    fn permutation_covariant(seed in any::<u64>()) {
        let e = instance(seed, 3, 3, true);
        let perm = [2usize, 0, 1];
        let states = CMatrix::from_fn(3, 3, |i, j| e.states()[(i, perm[j])]);
        let priors = perm.iter().map(|&j| e.priors()[j]).collect();
        let f = StateEnsemble::new(states, priors).unwrap();
        let (a, b) = (optimum(&e), optimum(&f));
        prop_assert!((a.detection_probability() - b.detection_probability()).abs() < 1e-7);
    }

    #[test]
    fn epm_verdict_consistent_with_solver(seed in any::<u64>(), r in 2usize..5) {
        let e = instance(seed, r, r, seed % 2 == 0);
        let rs = reciprocal_states(&e).unwrap();
        let epm = compute_epm(&e, &rs).unwrap();
        let pd_epm: f64 = epm.p()[0];
        let rep = optimum(&e);
        match epm_optimality_lp(&e, &rs).verdict {
            Verdict::Optimal => prop_assert!((rep.detection_probability() - pd_epm).abs() < 1e-6),
            Verdict::NotOptimal => prop_assert!(rep.detection_probability() > pd_epm - 1e-9),
            Verdict::SufficientTestInconclusive => {}
        }
    }
}

#[test]
fn orthonormal_states_are_perfectly_distinguishable() {
    let e = StateEnsemble::with_uniform_priors(linalg::identity(4)).unwrap();
    let rep = optimum(&e);
    assert!((rep.detection_probability() - 1.0).abs() < 1e-8);
}

#[test]
fn grid_oracle_three_states() {
    for seed in 0..6 {
        let e = instance(500 + seed, 3, 3, false);
        let rep = optimum(&e);
        let grid = grid_oracle(&e, 300);
        assert!(grid <= rep.detection_probability() + 1e-9);
        assert!(rep.detection_probability() - grid < 1e-2, "seed {seed}: {} vs {grid}", rep.detection_probability());
    }
}
