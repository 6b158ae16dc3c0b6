//! The unambiguous-discrimination SDP.
//!
//! Variables are the detection probabilities `p`. The constraint matrix is
//! `F(p) = diag(I_r − Σ p_i Q_i, p_1, …, p_m)`, so `F(p) ⪰ 0` is exactly
//! `Σ p_i Q_i ⪯ I_r` together with `p ≥ 0`, and the cost is `c = −η`.

use nalgebra::{DMatrix, DVector};

use super::certificate::DualCertificate;
use super::cone::{solve_cone, Block, BlockDiag, ConeProgram, IpmOptions, IterateRecord, SolveStatus};
use crate::ensemble::{ReciprocalSet, StateEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix};

#[derive(Debug, Clone)]
pub struct SdpProblem {
    cost: DVector<f64>,
    reciprocals: CMatrix,
}

pub fn build_sdp(e: &StateEnsemble, rs: &ReciprocalSet) -> Result<SdpProblem> {
    if e.dim() != rs.dim() || e.num_states() != rs.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble is {}×{} but reciprocal set is {}×{}",
            e.dim(),
            e.num_states(),
            rs.dim(),
            rs.num_states()
        )));
    }
    Ok(SdpProblem {
        cost: DVector::from_iterator(e.num_states(), e.priors().iter().map(|eta| -eta)),
        reciprocals: rs.reciprocals().clone(),
    })
}

impl SdpProblem {
    /// `c_i = −η_i`.
    pub fn cost(&self) -> &DVector<f64> {
        &self.cost
    }

    pub fn priors(&self) -> Vec<f64> {
        self.cost.iter().map(|c| -c).collect()
    }

    pub fn dim(&self) -> usize {
        self.reciprocals.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.reciprocals.ncols()
    }

    /// `Σ p_i Q_i = Φ̃ diag(p) Φ̃*`.
    pub fn weighted_sum(&self, p: &[f64]) -> CMatrix {
        let d = DVector::from_iterator(p.len(), p.iter().map(|&v| real(v)));
        let scaled = &self.reciprocals * CMatrix::from_diagonal(&d);
        linalg::hermitian_part(&(scaled * self.reciprocals.adjoint()))
    }

    /// `F(p)` as blocks.
    pub fn evaluate(&self, p: &[f64]) -> BlockDiag {
        BlockDiag::new(vec![
            Block::Hermitian(linalg::identity(self.dim()) - self.weighted_sum(p)),
            Block::Diagonal(DVector::from_row_slice(p)),
        ])
    }

    /// `F_0 = I_{r+m}`.
    pub fn offset(&self) -> BlockDiag {
        BlockDiag::new(vec![
            Block::Hermitian(linalg::identity(self.dim())),
            Block::Diagonal(DVector::zeros(self.num_states())),
        ])
    }

    /// `F_i = diag(−Q_i, e_i)`.
    pub fn generator(&self, i: usize) -> BlockDiag {
        let v = self.reciprocals.column(i).into_owned();
        let mut e = DVector::zeros(self.num_states());
        e[i] = 1.0;
        BlockDiag::new(vec![Block::Hermitian(-linalg::outer(&v, &v)), Block::Diagonal(e)])
    }

    /// `Tr(Q_i X)` for every `i`.
    pub fn q_traces(&self, x: &CMatrix) -> Vec<f64> {
        self.reciprocals.column_iter().map(|v| linalg::quad_form(x, &v.into_owned())).collect()
    }

    /// `P(p) = ⟨c|p⟩ = −Σ η_i p_i`.
    pub fn primal_value(&self, p: &[f64]) -> f64 {
        self.cost.iter().zip(p).map(|(c, p)| c * p).sum()
    }

    /// `p ≥ −tol` and `λ_max(Σ p_i Q_i) ≤ 1 + tol`.
    pub fn is_feasible(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.num_states()
            && p.iter().all(|&v| v >= -tol)
            && linalg::lambda_max(&self.weighted_sum(p)) <= 1.0 + tol
    }
}

/// Scaled formulation used internally: `p_i = y_i / ‖φ̃_i‖²`, so every rank-one
/// generator has unit norm.
struct ScaledProgram {
    cost: DVector<f64>,
    /// Normalized reciprocal states.
    w: CMatrix,
    /// `p_i = scale_i · y_i`.
    scale: Vec<f64>,
    priors: Vec<f64>,
}

impl ScaledProgram {
    fn new(prob: &SdpProblem) -> Self {
        let m = prob.num_states();
        let mut w = prob.reciprocals.clone();
        let mut scale = Vec::with_capacity(m);
        for mut col in w.column_iter_mut() {
            let norm_sq = col.norm_squared();
            col.unscale_mut(norm_sq.sqrt());
            scale.push(1.0 / norm_sq);
        }
        let priors = prob.priors();
        let cost = DVector::from_iterator(m, priors.iter().zip(&scale).map(|(eta, d)| -eta * d));
        ScaledProgram { cost, w, scale, priors }
    }

    fn psd_block(z: &BlockDiag) -> (&CMatrix, &DVector<f64>) {
        match (&z.blocks[0], &z.blocks[1]) {
            (Block::Hermitian(x), Block::Diagonal(d)) => (x, d),
            _ => unreachable!("discrimination program has one PSD and one diagonal block"),
        }
    }
}

impl ConeProgram for ScaledProgram {
    fn num_vars(&self) -> usize {
        self.w.ncols()
    }

    fn cost(&self) -> DVector<f64> {
        self.cost.clone()
    }

    fn offset(&self) -> BlockDiag {
        BlockDiag::new(vec![
            Block::Hermitian(linalg::identity(self.w.nrows())),
            Block::Diagonal(DVector::zeros(self.w.ncols())),
        ])
    }

    fn apply(&self, dy: &DVector<f64>) -> BlockDiag {
        let d = dy.map(real);
        let scaled = &self.w * CMatrix::from_diagonal(&d);
        BlockDiag::new(vec![
            Block::Hermitian(-linalg::hermitian_part(&(scaled * self.w.adjoint()))),
            Block::Diagonal(dy.clone()),
        ])
    }

    fn adjoint(&self, z: &BlockDiag) -> DVector<f64> {
        let (x, zs) = Self::psd_block(z);
        let xw = x * &self.w;
        DVector::from_iterator(
            self.w.ncols(),
            (0..self.w.ncols()).map(|i| zs[i] - self.w.column(i).dotc(&xw.column(i)).re),
        )
    }

    /// `H_ij = Re[(w_i* S⁻¹ w_j)(w_j* X w_i)] + δ_ij z_i / y_i`.
    fn schur(&self, s_inv: &BlockDiag, z: &BlockDiag) -> DMatrix<f64> {
        let (s_inv_psd, y_inv) = Self::psd_block(s_inv);
        let (x, zs) = Self::psd_block(z);
        let wa = self.w.adjoint();
        let a = &wa * s_inv_psd * &self.w;
        let b = &wa * x * &self.w;
        let m = self.w.ncols();
        let mut h = DMatrix::from_fn(m, m, |i, j| (a[(i, j)] * b[(j, i)]).re);
        for i in 0..m {
            h[(i, i)] += zs[i] * y_inv[i];
        }
        (&h + h.transpose()) * 0.5
    }

    fn initial_point(&self) -> (DVector<f64>, BlockDiag) {
        let m = self.w.ncols();
        let recip_norms: Vec<f64> = self.scale.iter().map(|d| 1.0 / d).collect();
        let sum_q: CMatrix = {
            let d = DVector::from_iterator(m, recip_norms.iter().map(|&n| real(n)));
            let scaled = &self.w * CMatrix::from_diagonal(&d);
            scaled * self.w.adjoint()
        };
        let p0 = 1.0 / (2.0 * linalg::lambda_max(&sum_q));
        let y = DVector::from_iterator(m, self.scale.iter().map(|d| p0 / d));

        let eta_max = self.priors.iter().copied().fold(0.0, f64::max);
        let min_norm = recip_norms.iter().copied().fold(f64::INFINITY, f64::min);
        let alpha = 2.0 * eta_max / min_norm;
        // Scaled dual slack: z'_i = Tr(w_i w_i* X) − η_i d_i = α − η_i d_i.
        let zs = DVector::from_iterator(m, self.priors.iter().zip(&self.scale).map(|(eta, d)| alpha - eta * d));
        let x = linalg::identity(self.w.nrows()) * real(alpha);
        (y, BlockDiag::new(vec![Block::Hermitian(x), Block::Diagonal(zs)]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
    /// Target for the slackness residual `‖X(I − Σ p_i Q_i)‖_F` (plus `|z_i p_i|`),
    /// pursued for a few extra iterations after the gap test passes.
    pub tol_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_gap: 1e-8, tol_feas: 1e-9, max_iters: 100, tol_slack: 1e-7 }
    }
}

impl SolverOptions {
    /// Tolerances must lie in `(0, 1e-2]`, iterations in `1..=10000`.
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t.is_finite() && t > 0.0 && t <= 1e-2;
        if !ok(self.tol_gap) {
            return Err(Error::InvalidOptions(format!("tol_gap = {} outside (0, 1e-2]", self.tol_gap)));
        }
        if !ok(self.tol_feas) {
            return Err(Error::InvalidOptions(format!("tol_feas = {} outside (0, 1e-2]", self.tol_feas)));
        }
        if !ok(self.tol_slack) {
            return Err(Error::InvalidOptions(format!("tol_slack = {} outside (0, 1e-2]", self.tol_slack)));
        }
        if !(1..=10_000).contains(&self.max_iters) {
            return Err(Error::InvalidOptions(format!("max_iters = {} outside 1..=10000", self.max_iters)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub p: Vec<f64>,
    pub certificate: DualCertificate,
    /// `−P_D`.
    pub primal_value: f64,
    /// `−Tr X`.
    pub dual_value: f64,
    /// `primal_value − dual_value`.
    pub gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Objective values of every iterate; objectives are in original units.
    pub history: Vec<IterateRecord>,
}

impl SolveReport {
    pub fn detection_probability(&self) -> f64 {
        -self.primal_value
    }

    pub fn relative_gap(&self) -> f64 {
        self.gap.abs() / (1.0 + self.primal_value.abs())
    }
}

/// Solves the discrimination SDP. Only invalid options produce an error; convergence
/// trouble is reported through [`SolveReport::status`] with the last iterate.
pub fn solve(prob: &SdpProblem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let program = ScaledProgram::new(prob);
    let ipm = IpmOptions {
        tol_gap: opts.tol_gap,
        tol_feas: opts.tol_feas,
        max_iters: opts.max_iters,
        tol_compl: opts.tol_slack,
        ..IpmOptions::default()
    };
    let sol = solve_cone(&program, &ipm);

    let p: Vec<f64> = sol.x.iter().zip(&program.scale).map(|(y, d)| y * d).collect();
    let (x, zs) = ScaledProgram::psd_block(&sol.dual);
    let z: Vec<f64> = zs.iter().zip(&program.scale).map(|(zi, d)| zi / d).collect();
    let certificate = DualCertificate::projected(x, &z);

    let primal_value = prob.primal_value(&p);
    let dual_value = -certificate.x.trace().re;
    Ok(SolveReport {
        p,
        certificate,
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        iterations: sol.iterations,
        status: sol.status,
        history: sol.history,
    })
}

/// Unscaled form of the problem for the generic engine; reference only.
pub fn dense_program(prob: &SdpProblem) -> super::cone::DenseBlockProgram {
    let m = prob.num_states();
    let lam = linalg::lambda_max(&prob.weighted_sum(&vec![1.0; m]));
    super::cone::DenseBlockProgram {
        cost: prob.cost.clone(),
        offset: prob.offset(),
        generators: (0..m).map(|i| prob.generator(i)).collect(),
        start: DVector::from_element(m, 1.0 / (2.0 * lam)),
        dual_start: None,
    }
}
