//! Worked three-state example with hand-derived values.

mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use udisc_core::epm::{self, epm_optimality_lp, epm_optimality_s1, priors_for_epm, Verdict};
use udisc_core::linalg::{self, real, CMatrix, CVector};
use udisc_core::solver::{build_sdp, solve, verify_certificate, SolveStatus, SolverOptions};
use udisc_core::{compute_epm, gram_operators, reciprocal_states, StateEnsemble};

fn uniform() -> StateEnsemble {
    StateEnsemble::with_uniform_priors(three_states()).unwrap()
}

/// Eigenvalues of the real Gram matrix, ascending, from a symmetric solver.
fn gram_spectrum() -> Vec<f64> {
    let a = (2.0f64 / 3.0).sqrt();
    let g = DMatrix::from_row_slice(3, 3, &[1.0, a, a, a, 1.0, 0.5, a, 0.5, 1.0]);
    let mut v: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn gram_operators_are_integer_matrices() {
    let e = uniform();
    let rs = reciprocal_states(&e).unwrap();
    let q = gram_operators(&rs);
    let expected = [
        [3.0, -3.0, 3.0, -3.0, 3.0, -3.0, 3.0, -3.0, 3.0],
        [0.0, 0.0, 0.0, 0.0, 2.0, -2.0, 0.0, -2.0, 2.0],
        [2.0, -2.0, 0.0, -2.0, 2.0, 0.0, 0.0, 0.0, 0.0],
    ];
    for (qi, want) in q.iter().zip(expected) {
        let want = CMatrix::from_row_slice(3, 3, &want.map(real));
        assert!(linalg::max_abs(&(qi - want)) < 1e-12);
    }
}

#[test]
fn singular_values_match_gram_spectrum() {
    let rs = reciprocal_states(&uniform()).unwrap();
    let sv = rs.singular_values();
    let lam = gram_spectrum();
    for (k, l) in lam.iter().rev().enumerate() {
        assert!((sv[k] * sv[k] - l).abs() < 1e-12);
    }
    // The printed value rounds to two digits.
    assert!((lam[0] - 0.07).abs() < 5e-3);
}

#[test]
fn uniform_priors_optimum() {
    let e = uniform();
    let rs = reciprocal_states(&e).unwrap();
    let prob = build_sdp(&e, &rs).unwrap();
    let rep = solve(&prob, &SolverOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    for (p, want) in rep.p.iter().zip([0.0, 1.0 / 6.0, 1.0 / 6.0]) {
        assert!((p - want).abs() < 1e-6, "{:?}", rep.p);
    }
    assert!((rep.detection_probability() - 1.0 / 9.0).abs() < 1e-8);

    // Null vector of T = I − Σ p_i Q_i at the exact optimum, and X = u u*/9.
    let u = CVector::from_iterator(3, [1.0, -2.0, 1.0].iter().map(|&x| real(x / 6f64.sqrt())));
    let x = linalg::outer(&u, &u) * real(1.0 / 9.0);
    assert!(linalg::max_abs(&(&rep.certificate.x - &x)) < 1e-5);
    let traces = prob.q_traces(&rep.certificate.x);
    assert!((traces[0] - 8.0 / 9.0).abs() < 1e-5);
    assert!((traces[1] - 1.0 / 3.0).abs() < 1e-7);
    assert!((traces[2] - 1.0 / 3.0).abs() < 1e-7);

    let exact = verify_certificate(&e, &rs, &[0.0, 1.0 / 6.0, 1.0 / 6.0], &udisc_core::DualCertificate { x, z: vec![5.0 / 9.0, 0.0, 0.0] });
    assert!(exact.pass, "{:?}", exact.failures());
}

#[test]
fn epm_is_not_optimal_for_uniform_priors() {
    let e = uniform();
    let rs = reciprocal_states(&e).unwrap();
    assert_eq!(epm_optimality_s1(&e, &rs).unwrap().verdict, Verdict::NotOptimal);
    assert_eq!(epm_optimality_lp(&e, &rs).verdict, Verdict::NotOptimal);
}

#[test]
fn last_row_priors_make_epm_optimal() {
    let rs = reciprocal_states(&uniform()).unwrap();
    let an = epm::analyze(&rs);
    assert_eq!(an.s, 1);
    let eta = an.last_row();
    // Rounded to one digit these are 0.6, 0.2, 0.2.
    for (x, want) in eta.iter().zip([0.6, 0.2, 0.2]) {
        assert!((x - want).abs() < 1e-2, "{eta:?}");
    }
    assert!((eta[1] - eta[2]).abs() < 1e-12);
    assert_eq!(priors_for_epm(&rs, &[1.0]).unwrap(), eta);

    let e = uniform().with_priors(eta).unwrap();
    let rs = reciprocal_states(&e).unwrap();
    let res = epm_optimality_s1(&e, &rs).unwrap();
    assert_eq!(res.verdict, Verdict::Optimal);
    let meas = compute_epm(&e, &rs).unwrap();
    let cert = res.certificate.unwrap();
    assert!(verify_certificate(&e, &rs, meas.p(), &cert).pass);

    let rep = solve(&build_sdp(&e, &rs).unwrap(), &SolverOptions::default()).unwrap();
    assert!((rep.detection_probability() - gram_spectrum()[0]).abs() < 1e-8);
}

#[test]
fn rounded_priors_are_not_exactly_epm_optimal() {
    let e = uniform().with_priors(vec![0.6, 0.2, 0.2]).unwrap();
    let rs = reciprocal_states(&e).unwrap();
    assert_eq!(epm_optimality_s1(&e, &rs).unwrap().verdict, Verdict::NotOptimal);
    let p = gram_spectrum()[0];
    let rep = solve(&build_sdp(&e, &rs).unwrap(), &SolverOptions::default()).unwrap();
    // The true optimum beats the EPM, but only slightly.
    assert!(rep.detection_probability() > p);
    assert!(rep.detection_probability() - p < 1e-2);
}

#[test]
fn two_state_grid_agrees_with_solver() {
    let s = CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.6), real(0.0), real(0.8)]);
    for priors in [vec![0.5, 0.5], vec![0.7, 0.3], vec![0.9, 0.1]] {
        let e = StateEnsemble::new(s.clone(), priors).unwrap();
        let rs = reciprocal_states(&e).unwrap();
        let rep = solve(&build_sdp(&e, &rs).unwrap(), &SolverOptions::default()).unwrap();
        let grid = grid_oracle(&e, 2000);
        assert!(grid <= rep.detection_probability() + 1e-9);
        assert!(rep.detection_probability() - grid < 2e-3);
    }
}
