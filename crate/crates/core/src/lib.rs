//! Optimal unambiguous discrimination of linearly independent pure states.
//!
//! The crate computes the measurement that minimizes the probability of an
//! inconclusive outcome, certifies it, and analyzes when the equal-probability
//! measurement is optimal:
//!
//! - [`ensemble`]: state ensembles, reciprocal states, measurements.
//! - [`solver`]: the semidefinite program, a structured primal-dual interior-point
//!   solver, and certificate verification.
//! - [`epm`]: the equal-probability measurement and its optimality tests.
//! - [`symmetry`]: geometrically uniform and compound geometrically uniform sets.
//! - [`simulate`]: seeded Monte-Carlo sampling of measurement outcomes.
//!
//! ```
//! use udisc_core::{ensemble, solver};
//! use udisc_core::linalg::{real, CMatrix};
//!
//! let (a, b) = (0.8f64, 0.6f64);
//! let states = CMatrix::from_row_slice(2, 2, &[real(1.0), real(a), real(0.0), real(b)]);
//! let e = ensemble::StateEnsemble::with_uniform_priors(states).unwrap();
//! let rs = ensemble::reciprocal_states(&e).unwrap();
//! let prob = solver::build_sdp(&e, &rs).unwrap();
//! let report = solver::solve(&prob, &solver::SolverOptions::default()).unwrap();
//! assert!((report.detection_probability() - 0.2).abs() < 1e-6);
//! ```

pub mod ensemble;
pub mod epm;
pub mod error;
pub mod format;
pub mod linalg;
pub mod simulate;
pub mod solver;
pub mod symmetry;

pub use ensemble::{
    detection_probability, gram_operators, load_ensemble, reciprocal_states, DetectionSummary, Measurement,
    ReciprocalSet, StateEnsemble,
};
pub use error::{Error, Result};
pub use solver::{
    build_sdp, solve, verify_certificate, weak_duality_gap, DualCertificate, SdpProblem, SolveReport,
    SolveStatus, SolverOptions, VerificationReport,
};
pub use epm::{
    compute_epm, epm_optimality_lp, epm_optimality_s1, epm_report, priors_for_epm, spectral_condition_check,
    EpmAnalysis, EpmOptimalityResult, EpmReport, EpmWitness, Verdict,
};
pub use simulate::{simulate, SimulationResult};
pub use symmetry::{
    check_commute_phase, expand, solve_cgu, solve_gu, verify_group, GroupReport, PhaseTable, SymmetrySolution,
    SymmetrySpec, UnitaryGroup,
};
