//! The equal-probability measurement (EPM) and its optimality tests.
//!
//! The EPM detects every state with the same probability `p = σ_m²`, the largest value
//! for which `I − p Σ Q_i ⪰ 0`. Whether it is optimal depends on the priors:
//!
//! - [`epm_optimality_s1`]: exact test when `σ_m` is simple, `|v_i(m)|² = η_i`.
//! - [`epm_optimality_lp`]: sufficient test for any multiplicity `s`, nonnegative `b`
//!   with `Σ_k b_k |v_i(m−k+1)|² = η_i`.
//! - [`spectral_condition_check`]: sufficient test through the moments
//!   `⟨φ_i|(ΦΦ*)^{t/2−1}|φ_i⟩ = η_i a_t`, `t = 1..q`.
//!
//! Every `Optimal` verdict carries a dual certificate that can be checked with
//! [`verify_certificate`](crate::solver::verify_certificate).

pub mod feasibility;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ensemble::{Measurement, ReciprocalSet, StateEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::solver::DualCertificate;

pub use feasibility::LpFeasibility;

/// Singular values closer than this fraction of `σ_1` are treated as equal.
pub const MULTIPLICITY_TOL: f64 = 1e-6;
/// Gaps between distinct values below this fraction of `σ_1` are reported as borderline.
pub const BORDERLINE_TOL: f64 = 1e-4;
/// Tolerance of the `s = 1` comparison `|v_i(m)|² = η_i`.
pub const LAST_ROW_TOL: f64 = 1e-8;
/// Phase-I optimum below which the coefficient system counts as feasible.
pub const LP_FEASIBILITY_TOL: f64 = 1e-8;
/// Relative spread allowed in `M_{t,i} / η_i` across states.
pub const MOMENT_TOL: f64 = 1e-8;
/// Tolerance on the `b` simplex constraint of [`priors_for_epm`].
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Two adjacent distinct singular values that lie close to the grouping threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorderlineGap {
    /// Index of the larger of the two distinct values.
    pub index: usize,
    pub gap: f64,
}

/// Spectral data of the EPM.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpmAnalysis {
    /// `σ_m²`.
    pub p: f64,
    /// Multiplicity of `σ_m`.
    pub s: usize,
    /// Number of distinct singular values.
    pub q: usize,
    /// `λ_1 > … > λ_q`. The first equals `σ_1` and the last equals `σ_m`.
    pub distinct_values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// `s × m`, entry `(k, i)` is `|v_i(m−k)|²` with zero-based `k`.
    #[serde(serialize_with = "serialize_rows")]
    pub last_rows: DMatrix<f64>,
    pub borderline: Vec<BorderlineGap>,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl EpmAnalysis {
    /// The matrix of the coefficient system, `m × s`, entry `(i, k)` is `|v_i(m−k)|²`.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        self.last_rows.transpose()
    }

    /// `|v_i(m)|²` for every state.
    pub fn last_row(&self) -> Vec<f64> {
        self.last_rows.row(0).iter().copied().collect()
    }
}

/// Groups the singular values of `Φ` and extracts the trailing rows of `V*`.
pub fn analyze(rs: &ReciprocalSet) -> EpmAnalysis {
    let sigma = rs.singular_values();
    let m = rs.num_states();
    let thresh = MULTIPLICITY_TOL * sigma[0];

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for j in 1..=m {
        if j == m || sigma[j - 1] - sigma[j] > thresh {
            groups.push((start, j));
            start = j;
        }
    }
    let q = groups.len();
    let distinct_values: Vec<f64> = groups
        .iter()
        .enumerate()
        .map(|(g, &(a, b))| if g + 1 == q { sigma[b - 1] } else { sigma[a] })
        .collect();
    let multiplicities: Vec<usize> = groups.iter().map(|&(a, b)| b - a).collect();
    let borderline = groups
        .windows(2)
        .enumerate()
        .filter_map(|(g, w)| {
            let gap = sigma[w[0].1 - 1] - sigma[w[1].0];
            (gap <= BORDERLINE_TOL * sigma[0]).then_some(BorderlineGap { index: g, gap })
        })
        .collect();

    let s = multiplicities[q - 1];
    let last_rows = DMatrix::from_fn(s, m, |k, i| rs.v_weight(i, m - 1 - k));
    EpmAnalysis {
        p: sigma[m - 1] * sigma[m - 1],
        s,
        q,
        distinct_values,
        multiplicities,
        last_rows,
        borderline,
    }
}

/// `Π_i = σ_m² Q_i`.
pub fn compute_epm(_e: &StateEnsemble, rs: &ReciprocalSet) -> Result<Measurement> {
    let sm = rs.smallest_singular_value();
    Measurement::new(rs, vec![sm * sm; rs.num_states()])
}

/// Dual certificate of the EPM built from coefficients `b` on the trailing left
/// singular vectors: `X = σ_m² Σ_k b_k |u_{m−k}⟩⟨u_{m−k}|`, `z = 0`.
pub fn epm_certificate(rs: &ReciprocalSet, b: &[f64]) -> DualCertificate {
    let m = rs.num_states();
    let r = rs.dim();
    let p = rs.smallest_singular_value().powi(2);
    let mut x = CMatrix::zeros(r, r);
    for (k, &bk) in b.iter().enumerate() {
        let u = rs.left_vector(m - 1 - k);
        x += linalg::outer(&u, &u) * linalg::real(p * bk);
    }
    DualCertificate { x: linalg::hermitian_part(&x), z: vec![0.0; m] }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Optimal,
    NotOptimal,
    SufficientTestInconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Optimal => "optimal",
            Verdict::NotOptimal => "not optimal",
            Verdict::SufficientTestInconclusive => "inconclusive",
        })
    }
}

/// Evidence behind a verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EpmWitness {
    /// `|v_i(m)|²` next to the priors.
    LastRow { weights: Vec<f64>, priors: Vec<f64>, max_deviation: f64 },
    /// Coefficients of the trailing rows of `V*`.
    Coefficients {
        b: Option<Vec<f64>>,
        /// Phase-I optimum, `min ‖Mb − η‖_∞` over `b ≥ 0` (upper bound).
        residual: f64,
        /// Whether the phase-I problem alone declared the system feasible.
        lp_feasible: bool,
    },
    /// Moment ratios `a_t`, `t = 1..q`, and their relative spread over states.
    Moments { a: Vec<f64>, spread: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpmOptimalityResult {
    pub verdict: Verdict,
    pub witness: EpmWitness,
    /// Present when the verdict is `Optimal`.
    #[serde(skip)]
    pub certificate: Option<DualCertificate>,
}

/// Exact optimality test for a simple smallest singular value.
pub fn epm_optimality_s1(e: &StateEnsemble, rs: &ReciprocalSet) -> Result<EpmOptimalityResult> {
    let an = analyze(rs);
    if an.s != 1 {
        return Err(Error::DegenerateSmallestValue { multiplicity: an.s });
    }
    Ok(last_row_test(e, rs, &an))
}

fn last_row_test(e: &StateEnsemble, rs: &ReciprocalSet, an: &EpmAnalysis) -> EpmOptimalityResult {
    let weights = an.last_row();
    let priors = e.priors().to_vec();
    let max_deviation = weights.iter().zip(&priors).map(|(w, p)| (w - p).abs()).fold(0.0, f64::max);
    let optimal = max_deviation <= LAST_ROW_TOL;
    EpmOptimalityResult {
        verdict: if optimal { Verdict::Optimal } else { Verdict::NotOptimal },
        certificate: optimal.then(|| epm_certificate(rs, &[1.0])),
        witness: EpmWitness::LastRow { weights, priors, max_deviation },
    }
}

/// Coefficient test: looks for `b ≥ 0` with `Σ_k b_k |v_i(m−k+1)|² = η_i`.
///
/// For `s = 1` the verdict is that of [`epm_optimality_s1`]; the coefficient system is
/// still solved and reported. For `s > 1` an infeasible system is inconclusive.
pub fn epm_optimality_lp(e: &StateEnsemble, rs: &ReciprocalSet) -> EpmOptimalityResult {
    let an = analyze(rs);
    let a = an.coefficient_matrix();
    let eta = DVector::from_row_slice(e.priors());
    let lp = feasibility::nonnegative_solution(&a, &eta, LP_FEASIBILITY_TOL);
    let lp_feasible = lp.feasible();

    if an.s == 1 {
        let exact = last_row_test(e, rs, &an);
        let b = lp_feasible.then(|| vec![1.0]);
        return EpmOptimalityResult {
            verdict: exact.verdict,
            certificate: exact.certificate,
            witness: EpmWitness::Coefficients { b, residual: lp.residual, lp_feasible },
        };
    }
    let certificate = lp.solution.as_ref().map(|b| epm_certificate(rs, b));
    EpmOptimalityResult {
        verdict: if lp_feasible { Verdict::Optimal } else { Verdict::SufficientTestInconclusive },
        certificate,
        witness: EpmWitness::Coefficients { b: lp.solution, residual: lp.residual, lp_feasible },
    }
}

/// Priors `η_i = Σ_k b_k |v_i(m−k+1)|²` under which the EPM is optimal.
pub fn priors_for_epm(rs: &ReciprocalSet, b: &[f64]) -> Result<Vec<f64>> {
    let an = analyze(rs);
    if b.len() != an.s {
        return Err(Error::InvalidWeights(format!("expected {} weights, got {}", an.s, b.len())));
    }
    if let Some(v) = b.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidWeights(format!("weight {v} is negative or not finite")));
    }
    let sum: f64 = b.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
    }
    let eta = an.coefficient_matrix() * DVector::from_row_slice(b);
    Ok(eta.iter().map(|v| v.max(0.0)).collect())
}

/// `M_{t,i} = ⟨φ_i|(ΦΦ*)^{t/2−1}|φ_i⟩` for `t = 1..=q`, as a `q × m` matrix.
pub fn moment_matrix(e: &StateEnsemble, rs: &ReciprocalSet, q: usize) -> DMatrix<f64> {
    let m = e.num_states();
    let mut out = DMatrix::zeros(q, m);
    for t in 1..=q {
        let power = rs.support_power(t as f64 / 2.0 - 1.0);
        for i in 0..m {
            out[(t - 1, i)] = linalg::quad_form(&power, &e.state(i));
        }
    }
    out
}

/// Sufficient test: each row of `M_{t,i} / η_i` constant over `i`.
pub fn spectral_condition_check(e: &StateEnsemble, rs: &ReciprocalSet) -> EpmOptimalityResult {
    let an = analyze(rs);
    let moments = moment_matrix(e, rs, an.q);
    let eta = e.priors();
    let m = e.num_states();
    let mut a = Vec::with_capacity(an.q);
    let mut spread = Vec::with_capacity(an.q);
    for t in 0..an.q {
        let ratios: Vec<f64> = (0..m).map(|i| moments[(t, i)] / eta[i]).collect();
        let mean = ratios.iter().sum::<f64>() / m as f64;
        let dev = ratios.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        a.push(mean);
        spread.push(dev / mean.abs().max(f64::MIN_POSITIVE));
    }
    let optimal = spread.iter().all(|&d| d <= MOMENT_TOL);
    let certificate = optimal.then(|| epm_certificate(rs, &vec![1.0 / an.s as f64; an.s]));
    EpmOptimalityResult {
        verdict: if optimal { Verdict::Optimal } else { Verdict::SufficientTestInconclusive },
        certificate,
        witness: EpmWitness::Moments { a, spread },
    }
}

/// All tests together.
#[derive(Debug, Clone, Serialize)]
pub struct EpmReport {
    pub analysis: EpmAnalysis,
    /// Only run when `s = 1`.
    pub last_row: Option<EpmOptimalityResult>,
    pub coefficients: EpmOptimalityResult,
    pub spectral: EpmOptimalityResult,
}

impl EpmReport {
    /// `Optimal` if any test proves it, `NotOptimal` if the exact test refutes it.
    pub fn verdict(&self) -> Verdict {
        let all = [self.last_row.as_ref(), Some(&self.coefficients), Some(&self.spectral)];
        if all.iter().flatten().any(|r| r.verdict == Verdict::Optimal) {
            Verdict::Optimal
        } else if all.iter().flatten().any(|r| r.verdict == Verdict::NotOptimal) {
            Verdict::NotOptimal
        } else {
            Verdict::SufficientTestInconclusive
        }
    }

    /// A certificate from whichever test succeeded first.
    pub fn certificate(&self) -> Option<&DualCertificate> {
        [self.last_row.as_ref(), Some(&self.coefficients), Some(&self.spectral)]
            .into_iter()
            .flatten()
            .find_map(|r| r.certificate.as_ref())
    }
}

pub fn epm_report(e: &StateEnsemble, rs: &ReciprocalSet) -> EpmReport {
    let analysis = analyze(rs);
    let last_row = (analysis.s == 1).then(|| last_row_test(e, rs, &analysis));
    EpmReport {
        coefficients: epm_optimality_lp(e, rs),
        spectral: spectral_condition_check(e, rs),
        last_row,
        analysis,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::reciprocal_states;
    use crate::linalg::{real, CMatrix};
    use crate::solver::verify_certificate;

    fn three_states(priors: Option<Vec<f64>>) -> StateEnsemble {
        let (t, s) = (1.0 / 3f64.sqrt(), 1.0 / 2f64.sqrt());
        let states = CMatrix::from_row_slice(
            3,
            3,
            &[real(t), real(s), real(0.0), real(t), real(s), real(s), real(t), real(0.0), real(s)],
        );
        match priors {
            Some(p) => StateEnsemble::new(states, p).unwrap(),
            None => StateEnsemble::with_uniform_priors(states).unwrap(),
        }
    }

    #[test]
    fn analysis_groups_equal_values() {
        let e = StateEnsemble::with_uniform_priors(linalg::identity(3)).unwrap();
        let an = analyze(&reciprocal_states(&e).unwrap());
        assert_eq!((an.s, an.q), (3, 1));
        assert_eq!(an.multiplicities, vec![3]);
        assert!((an.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analysis_invariants() {
        let e = three_states(None);
        let rs = reciprocal_states(&e).unwrap();
        let an = analyze(&rs);
        assert_eq!(an.multiplicities.iter().sum::<usize>(), 3);
        assert_eq!(an.distinct_values[0], rs.singular_values()[0]);
        assert_eq!(*an.distinct_values.last().unwrap(), rs.smallest_singular_value());
        for col in an.last_rows.column_iter() {
            assert!(col.sum() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn epm_detects_every_state_equally() {
        let e = three_states(None);
        let rs = reciprocal_states(&e).unwrap();
        let meas = compute_epm(&e, &rs).unwrap();
        let table = meas.outcome_table(&e).unwrap();
        let p = rs.smallest_singular_value().powi(2);
        for i in 0..3 {
            assert!((table[(i, i)] - p).abs() < 1e-10);
        }
        let sum: CMatrix = meas.operators().iter().sum();
        assert!((linalg::lambda_max(&sum) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn last_row_priors_make_epm_optimal() {
        let e = three_states(None);
        let rs = reciprocal_states(&e).unwrap();
        let eta = priors_for_epm(&rs, &[1.0]).unwrap();
        let e2 = e.with_priors(eta).unwrap();
        let res = epm_optimality_s1(&e2, &rs).unwrap();
        assert_eq!(res.verdict, Verdict::Optimal);
        let p = vec![rs.smallest_singular_value().powi(2); 3];
        assert!(verify_certificate(&e2, &rs, &p, res.certificate.as_ref().unwrap()).pass);
    }

    #[test]
    fn uniform_priors_not_optimal_for_three_states() {
        let e = three_states(None);
        let rs = reciprocal_states(&e).unwrap();
        assert_eq!(epm_optimality_s1(&e, &rs).unwrap().verdict, Verdict::NotOptimal);
        let lp = epm_optimality_lp(&e, &rs);
        assert_eq!(lp.verdict, Verdict::NotOptimal);
        assert!(matches!(lp.witness, EpmWitness::Coefficients { lp_feasible: false, .. }));
    }

    #[test]
    fn s1_test_rejects_degenerate_value() {
        let e = StateEnsemble::with_uniform_priors(linalg::identity(2)).unwrap();
        let rs = reciprocal_states(&e).unwrap();
        assert!(matches!(epm_optimality_s1(&e, &rs), Err(Error::DegenerateSmallestValue { multiplicity: 2 })));
    }

    #[test]
    fn priors_for_epm_validates_weights() {
        let e = StateEnsemble::with_uniform_priors(linalg::identity(2)).unwrap();
        let rs = reciprocal_states(&e).unwrap();
        assert!(priors_for_epm(&rs, &[1.0]).is_err());
        assert!(priors_for_epm(&rs, &[1.5, -0.5]).is_err());
        assert!(priors_for_epm(&rs, &[0.5, 0.6]).is_err());
        let eta = priors_for_epm(&rs, &[0.3, 0.7]).unwrap();
        assert!((eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_moment_is_state_norm() {
        let e = three_states(None);
        let rs = reciprocal_states(&e).unwrap();
        let mm = moment_matrix(&e, &rs, 3);
        for i in 0..3 {
            assert!((mm[(1, i)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_set_passes_every_test() {
        let e = StateEnsemble::with_uniform_priors(linalg::identity(3)).unwrap();
        let rs = reciprocal_states(&e).unwrap();
        let rep = epm_report(&e, &rs);
        assert!(rep.last_row.is_none());
        assert_eq!(rep.coefficients.verdict, Verdict::Optimal);
        assert_eq!(rep.spectral.verdict, Verdict::Optimal);
        assert_eq!(rep.verdict(), Verdict::Optimal);
    }
}
