//! Optimality certificates for the discrimination SDP.
//!
//! `p` is optimal iff it is primal feasible and some `(X, z)` satisfies
//! `X ⪰ 0`, `z ≥ 0`, `Tr(Q_i X) − z_i = η_i`, `X(I − Σ p_i Q_i) = 0` and `z_i p_i = 0`.
//! [`verify_certificate`] evaluates every one of these conditions plus the duality gap.

use nalgebra::DVector;

use super::cone::{Block, BlockDiag};
use super::discrimination::SdpProblem;
use crate::ensemble::{ReciprocalSet, StateEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Dual pair `(X, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub x: CMatrix,
    pub z: Vec<f64>,
}

impl DualCertificate {
    /// Projects onto the dual cone: eigenvalues of `X` and entries of `z` clipped at 0.
    pub fn projected(x: &CMatrix, z: &[f64]) -> Self {
        DualCertificate { x: linalg::project_psd(x), z: z.iter().map(|v| v.max(0.0)).collect() }
    }

    /// `D(X) = −Tr X`.
    pub fn dual_value(&self) -> f64 {
        -self.x.trace().re
    }

    /// `Z = diag(X, z)`.
    pub fn as_blocks(&self) -> BlockDiag {
        BlockDiag::new(vec![Block::Hermitian(self.x.clone()), Block::Diagonal(DVector::from_row_slice(&self.z))])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationTolerances {
    /// For matrix-valued conditions.
    pub operator: f64,
    /// For scalar conditions.
    pub scalar: f64,
}

impl Default for VerificationTolerances {
    fn default() -> Self {
        VerificationTolerances { operator: 1e-6, scalar: 1e-7 }
    }
}

/// A single condition: `value` is the size of the violation (0 when exactly satisfied).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionResidual {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ConditionResidual {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        ConditionResidual { name, value, tolerance, pass: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `max(0, −min p_i)`.
    pub primal_nonnegativity: ConditionResidual,
    /// `max(0, λ_max(Σ p_i Q_i) − 1)`.
    pub primal_operator: ConditionResidual,
    /// `max(0, −λ_min(X))`.
    pub dual_psd: ConditionResidual,
    /// `max(0, −min z_i)`.
    pub dual_slack_nonnegativity: ConditionResidual,
    /// `max |Tr(Q_i X) − z_i − η_i|`.
    pub dual_equality: ConditionResidual,
    /// `‖X(I − Σ p_i Q_i)‖_F`.
    pub slackness_operator: ConditionResidual,
    /// `max |z_i p_i|`.
    pub slackness_scalar: ConditionResidual,
    /// `|P(p) − D(X)|`.
    pub duality_gap: ConditionResidual,
    /// `Tr(Q_i X)` for each state.
    pub traces: Vec<f64>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn conditions(&self) -> [&ConditionResidual; 8] {
        [
            &self.primal_nonnegativity,
            &self.primal_operator,
            &self.dual_psd,
            &self.dual_slack_nonnegativity,
            &self.dual_equality,
            &self.slackness_operator,
            &self.slackness_scalar,
            &self.duality_gap,
        ]
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.conditions().iter().filter(|c| !c.pass).map(|c| c.name).collect()
    }

    pub fn primal_feasible(&self) -> bool {
        self.primal_nonnegativity.pass && self.primal_operator.pass
    }

    pub fn dual_feasible(&self) -> bool {
        self.dual_psd.pass && self.dual_slack_nonnegativity.pass && self.dual_equality.pass
    }

    pub fn slackness(&self) -> bool {
        self.slackness_operator.pass && self.slackness_scalar.pass
    }

    fn all_failed(tol: VerificationTolerances) -> Self {
        let f = |name, t| ConditionResidual::new(name, f64::INFINITY, t);
        VerificationReport {
            primal_nonnegativity: f("primal p >= 0", tol.scalar),
            primal_operator: f("primal sum p_i Q_i <= I", tol.operator),
            dual_psd: f("dual X >= 0", tol.operator),
            dual_slack_nonnegativity: f("dual z >= 0", tol.scalar),
            dual_equality: f("dual Tr(Q_i X) - z_i = eta_i", tol.scalar),
            slackness_operator: f("slackness X(I - sum p_i Q_i) = 0", tol.operator),
            slackness_scalar: f("slackness z_i p_i = 0", tol.scalar),
            duality_gap: f("duality gap", tol.scalar),
            traces: Vec::new(),
            pass: false,
        }
    }
}

pub fn verify_certificate(
    e: &StateEnsemble,
    rs: &ReciprocalSet,
    p: &[f64],
    cert: &DualCertificate,
) -> VerificationReport {
    verify_certificate_with(e, rs, p, cert, VerificationTolerances::default())
}

/// Evaluates every optimality condition. Inconsistent shapes give a report in which
/// every condition fails.
pub fn verify_certificate_with(
    e: &StateEnsemble,
    rs: &ReciprocalSet,
    p: &[f64],
    cert: &DualCertificate,
    tol: VerificationTolerances,
) -> VerificationReport {
    let (r, m) = (e.dim(), e.num_states());
    if rs.dim() != r || rs.num_states() != m || p.len() != m || cert.z.len() != m || cert.x.shape() != (r, r) {
        return VerificationReport::all_failed(tol);
    }
    let eta = e.priors();
    let q_sum = {
        let d = DVector::from_iterator(m, p.iter().map(|&v| linalg::real(v)));
        let scaled = rs.reciprocals() * CMatrix::from_diagonal(&d);
        linalg::hermitian_part(&(scaled * rs.reciprocals().adjoint()))
    };
    let traces: Vec<f64> = (0..m).map(|i| linalg::quad_form(&cert.x, &rs.reciprocal(i))).collect();
    let t = linalg::identity(r) - &q_sum;

    let min_p = p.iter().copied().fold(f64::INFINITY, f64::min);
    let min_z = cert.z.iter().copied().fold(f64::INFINITY, f64::min);
    let equality = (0..m).map(|i| (traces[i] - cert.z[i] - eta[i]).abs()).fold(0.0, f64::max);
    let scalar_slack = p.iter().zip(&cert.z).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
    let primal: f64 = -eta.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    let gap = primal - cert.dual_value();

    let report = VerificationReport {
        primal_nonnegativity: ConditionResidual::new("primal p >= 0", (-min_p).max(0.0), tol.scalar),
        primal_operator: ConditionResidual::new(
            "primal sum p_i Q_i <= I",
            (linalg::lambda_max(&q_sum) - 1.0).max(0.0),
            tol.operator,
        ),
        dual_psd: ConditionResidual::new("dual X >= 0", (-linalg::lambda_min(&cert.x)).max(0.0), tol.operator),
        dual_slack_nonnegativity: ConditionResidual::new("dual z >= 0", (-min_z).max(0.0), tol.scalar),
        dual_equality: ConditionResidual::new("dual Tr(Q_i X) - z_i = eta_i", equality, tol.scalar),
        slackness_operator: ConditionResidual::new(
            "slackness X(I - sum p_i Q_i) = 0",
            linalg::frobenius_norm(&(&cert.x * &t)),
            tol.operator,
        ),
        slackness_scalar: ConditionResidual::new("slackness z_i p_i = 0", scalar_slack, tol.scalar),
        duality_gap: ConditionResidual::new("duality gap", gap.abs(), tol.scalar),
        traces,
        pass: false,
    };
    let pass = report.conditions().iter().all(|c| c.pass);
    VerificationReport { pass, ..report }
}

/// Tolerances used to decide that inputs to [`weak_duality_gap`] are feasible.
const FEASIBILITY_OPERATOR_TOL: f64 = 1e-8;
const FEASIBILITY_SCALAR_TOL: f64 = 1e-7;

/// `P(p) − D(X) = −Σ η_i p_i + Tr X`, non-negative for every feasible pair.
pub fn weak_duality_gap(prob: &SdpProblem, p: &[f64], cert: &DualCertificate) -> Result<f64> {
    let m = prob.num_states();
    if p.len() != m || cert.z.len() != m || cert.x.shape() != (prob.dim(), prob.dim()) {
        return Err(Error::DimensionMismatch("certificate does not match problem".into()));
    }
    if !prob.is_feasible(p, FEASIBILITY_OPERATOR_TOL) {
        return Err(Error::Infeasible("p is not primal feasible".into()));
    }
    if linalg::lambda_min(&cert.x) < -FEASIBILITY_OPERATOR_TOL
        || cert.z.iter().any(|&v| v < -FEASIBILITY_SCALAR_TOL)
    {
        return Err(Error::Infeasible("certificate is outside the dual cone".into()));
    }
    let eta = prob.priors();
    for (i, trace) in prob.q_traces(&cert.x).into_iter().enumerate() {
        if (trace - cert.z[i] - eta[i]).abs() > FEASIBILITY_SCALAR_TOL {
            return Err(Error::Infeasible(format!("dual equality {i} violated")));
        }
    }
    Ok(prob.primal_value(p) - cert.dual_value())
}

/// `Tr(F(p) Z)` with `Z = diag(X, z)`; equals the gap for dual-feasible certificates.
pub fn block_gap(prob: &SdpProblem, p: &[f64], cert: &DualCertificate) -> f64 {
    prob.evaluate(p).inner(&cert.as_blocks())
}
