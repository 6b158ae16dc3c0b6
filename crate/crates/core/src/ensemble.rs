//! State ensembles, reciprocal states and unambiguous measurements.
//!
//! An ensemble is an `r × m` matrix `Φ` of unit-norm, linearly independent state
//! columns together with strictly positive priors. The reciprocal states `Φ̃` are the
//! dual basis of the columns inside their span (`Φ̃*Φ = I_m`) and every unambiguous
//! measurement on the span is `Π_i = p_i |φ̃_i⟩⟨φ̃_i|` with `Π_0 = I − Σ Π_i`.

use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::format::{decode_vector, encode_vector, EnsembleDocument};
use crate::linalg::{self, real, CMatrix, CVector, Svd};

/// Tolerance on `‖φ_i‖ − 1` for a validated ensemble.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Columns closer than this to unit norm are silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// States are independent when `σ_m > INDEPENDENCE_RATIO · σ_1`.
pub const INDEPENDENCE_RATIO: f64 = 1e-10;
/// Tolerance on `Σ η_i − 1`.
pub const PRIOR_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StateEnsemble {
    states: CMatrix,
    priors: Vec<f64>,
}

impl StateEnsemble {
    /// Validates and normalizes. Columns within [`RENORMALIZE_TOL`] of unit norm are rescaled.
    pub fn new(mut states: CMatrix, priors: Vec<f64>) -> Result<Self> {
        let (r, m) = states.shape();
        if m == 0 || r == 0 {
            return Err(Error::DimensionMismatch("ensemble must contain at least one state".into()));
        }
        if m > r {
            return Err(Error::LinearlyDependent { ratio: 0.0 });
        }
        if priors.len() != m {
            return Err(Error::DimensionMismatch(format!("{} priors for {m} states", priors.len())));
        }
        if states.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Malformed("non-finite amplitude".into()));
        }
        for (index, mut col) in states.column_iter_mut().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::NonUnitState { index, norm });
            }
            col.unscale_mut(norm);
        }
        validate_priors(&priors)?;

        let sv = states.singular_values();
        let largest = sv.iter().copied().fold(0.0, f64::max);
        let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smallest <= INDEPENDENCE_RATIO * largest {
            return Err(Error::LinearlyDependent { ratio: smallest / largest });
        }
        Ok(StateEnsemble { states, priors })
    }

    pub fn with_uniform_priors(states: CMatrix) -> Result<Self> {
        let m = states.ncols();
        Self::new(states, vec![1.0 / m as f64; m])
    }

    /// Same states, different priors.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        if priors.len() != self.num_states() {
            return Err(Error::DimensionMismatch(format!(
                "{} priors for {} states",
                priors.len(),
                self.num_states()
            )));
        }
        validate_priors(&priors)?;
        Ok(StateEnsemble { states: self.states.clone(), priors })
    }

    /// Hilbert space dimension `r`.
    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    /// Number of states `m` (also the dimension of their span).
    pub fn num_states(&self) -> usize {
        self.states.ncols()
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn state(&self, i: usize) -> CVector {
        self.states.column(i).into_owned()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn to_document(&self) -> EnsembleDocument {
        EnsembleDocument {
            r: self.dim(),
            m: self.num_states(),
            states: self.states.column_iter().map(|c| encode_vector(&c.into_owned())).collect(),
            priors: Some(self.priors.clone()),
        }
    }

    pub fn from_document(doc: &EnsembleDocument) -> Result<Self> {
        if doc.states.len() != doc.m {
            return Err(Error::DimensionMismatch(format!(
                "declared m = {} but {} state columns given",
                doc.m,
                doc.states.len()
            )));
        }
        let mut states = CMatrix::zeros(doc.r, doc.m);
        for (j, col) in doc.states.iter().enumerate() {
            if col.len() != doc.r {
                return Err(Error::DimensionMismatch(format!(
                    "state {j} has {} entries, expected r = {}",
                    col.len(),
                    doc.r
                )));
            }
            states.set_column(j, &decode_vector(col)?);
        }
        match &doc.priors {
            Some(p) => Self::new(states, p.clone()),
            None => Self::with_uniform_priors(states),
        }
    }
}

fn validate_priors(priors: &[f64]) -> Result<()> {
    if let Some((i, v)) = priors.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidPriors(format!("prior {i} = {v} is not strictly positive")));
    }
    let sum: f64 = priors.iter().sum();
    if (sum - 1.0).abs() > PRIOR_SUM_TOL {
        return Err(Error::InvalidPriors(format!("priors sum to {sum}, not 1")));
    }
    Ok(())
}

/// Parses and validates an ensemble document (JSON).
pub fn load_ensemble(source: &str) -> Result<StateEnsemble> {
    let doc: EnsembleDocument =
        serde_json::from_str(source).map_err(|e| Error::Malformed(e.to_string()))?;
    StateEnsemble::from_document(&doc)
}

pub fn load_ensemble_file(path: impl AsRef<Path>) -> Result<StateEnsemble> {
    load_ensemble(&std::fs::read_to_string(path)?)
}

/// Reciprocal states with the SVD they were computed from.
#[derive(Debug, Clone)]
pub struct ReciprocalSet {
    reciprocals: CMatrix,
    svd: Svd,
    gram_pinv: CMatrix,
}

impl ReciprocalSet {
    /// `Φ̃`, column `i` is `|φ̃_i⟩`.
    pub fn reciprocals(&self) -> &CMatrix {
        &self.reciprocals
    }

    pub fn reciprocal(&self, i: usize) -> CVector {
        self.reciprocals.column(i).into_owned()
    }

    pub fn svd(&self) -> &Svd {
        &self.svd
    }

    /// `σ_1 ≥ … ≥ σ_m`.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.svd.singular_values
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.svd.singular_values[self.num_states() - 1]
    }

    /// `(ΦΦ*)†`.
    pub fn gram_pinv(&self) -> &CMatrix {
        &self.gram_pinv
    }

    pub fn dim(&self) -> usize {
        self.reciprocals.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.reciprocals.ncols()
    }

    /// `|v_i(k)|²`: squared modulus of entry `k` of column `i` of `V*` (zero-based).
    pub fn v_weight(&self, i: usize, k: usize) -> f64 {
        self.svd.v_adjoint[(k, i)].norm_sqr()
    }

    /// Left singular vector `|u_k⟩` (zero-based).
    pub fn left_vector(&self, k: usize) -> CVector {
        self.svd.u.column(k).into_owned()
    }

    /// `(ΦΦ*)^a` restricted to the span of the states, `U diag(σ^{2a}) U*`.
    /// Negative exponents invert on the support only.
    pub fn support_power(&self, a: f64) -> CMatrix {
        let m = self.num_states();
        let u = self.svd.u.columns(0, m);
        let d = DVector::from_iterator(m, self.svd.singular_values.iter().map(|s| real(s.powf(2.0 * a))));
        let scaled = u * CMatrix::from_diagonal(&d);
        linalg::hermitian_part(&(scaled * u.adjoint()))
    }
}

/// Computes `Φ̃ = U (Σ†)* V*` from the SVD of the state matrix.
pub fn reciprocal_states(e: &StateEnsemble) -> Result<ReciprocalSet> {
    let svd = Svd::new(e.states());
    let m = e.num_states();
    let sigma = &svd.singular_values;
    if sigma[m - 1] <= INDEPENDENCE_RATIO * sigma[0] {
        return Err(Error::RankDeficient(format!(
            "σ_m / σ_1 = {:.3e}",
            sigma[m - 1] / sigma[0]
        )));
    }
    let u = svd.u.columns(0, m);
    let inv = DVector::from_iterator(m, sigma.iter().map(|s| real(1.0 / s)));
    let inv_sq = DVector::from_iterator(m, sigma.iter().map(|s| real(1.0 / (s * s))));
    let reciprocals = u * CMatrix::from_diagonal(&inv) * &svd.v_adjoint;
    let gram_pinv = linalg::hermitian_part(&(u * CMatrix::from_diagonal(&inv_sq) * u.adjoint()));
    Ok(ReciprocalSet { reciprocals, svd, gram_pinv })
}

/// `Q_i = |φ̃_i⟩⟨φ̃_i|` for every state.
pub fn gram_operators(rs: &ReciprocalSet) -> Vec<CMatrix> {
    (0..rs.num_states())
        .map(|i| {
            let v = rs.reciprocal(i);
            linalg::outer(&v, &v)
        })
        .collect()
}

/// Largest allowed negative eigenvalue of `Π_0`.
pub const INCONCLUSIVE_PSD_TOL: f64 = 1e-8;
/// Tolerance on `⟨φ_i|Π_k|φ_i⟩ = p_i δ_ik`.
pub const DETECTION_TOL: f64 = 1e-8;

/// Unambiguous measurement on the span of the states.
#[derive(Debug, Clone)]
pub struct Measurement {
    p: Vec<f64>,
    operators: Vec<CMatrix>,
    inconclusive: CMatrix,
}

impl Measurement {
    /// `Π_i = p_i Q_i`. Rejects `p_i` outside `[0, 1]` beyond round-off.
    pub fn new(rs: &ReciprocalSet, p: Vec<f64>) -> Result<Self> {
        if p.len() != rs.num_states() {
            return Err(Error::DimensionMismatch(format!(
                "{} detection probabilities for {} states",
                p.len(),
                rs.num_states()
            )));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= -1e-10 && **v <= 1.0 + 1e-10)) {
            return Err(Error::InvalidMeasurement(format!("p_{i} = {v} is not a probability")));
        }
        let operators: Vec<CMatrix> =
            gram_operators(rs).into_iter().zip(&p).map(|(q, &pi)| q * real(pi)).collect();
        let mut inconclusive = linalg::identity(rs.dim());
        for op in &operators {
            inconclusive -= op;
        }
        Ok(Measurement { p, operators, inconclusive })
    }

    /// Measurement from explicit operators `Π_i`; `p_i` are their claimed detection
    /// probabilities. Use [`Measurement::check`] to confirm they match an ensemble.
    pub fn from_operators(p: Vec<f64>, operators: Vec<CMatrix>) -> Result<Self> {
        if p.len() != operators.len() || operators.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} detection probabilities for {} operators",
                p.len(),
                operators.len()
            )));
        }
        let r = operators[0].nrows();
        if operators.iter().any(|op| op.shape() != (r, r)) {
            return Err(Error::DimensionMismatch("operators differ in shape".into()));
        }
        let mut inconclusive = linalg::identity(r);
        for op in &operators {
            inconclusive -= op;
        }
        Ok(Measurement { p, operators, inconclusive })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// `Π_1 … Π_m`.
    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// `Π_0`.
    pub fn inconclusive(&self) -> &CMatrix {
        &self.inconclusive
    }

    /// Outcome probabilities `⟨φ_i|Π_k|φ_i⟩`; row `i` is the prepared state, column
    /// `k < m` the conclusive outcome `k`, column `m` the inconclusive outcome.
    pub fn outcome_table(&self, e: &StateEnsemble) -> Result<nalgebra::DMatrix<f64>> {
        self.check_shape(e)?;
        let m = e.num_states();
        let mut table = nalgebra::DMatrix::zeros(m, m + 1);
        for i in 0..m {
            let phi = e.state(i);
            for (k, op) in self.operators.iter().enumerate() {
                table[(i, k)] = linalg::quad_form(op, &phi);
            }
            table[(i, m)] = linalg::quad_form(&self.inconclusive, &phi);
        }
        Ok(table)
    }

    /// Residuals of the measurement invariants against `e`.
    pub fn check(&self, e: &StateEnsemble) -> Result<MeasurementCheck> {
        let table = self.outcome_table(e)?;
        let m = e.num_states();
        let mut detection_residual = 0.0f64;
        let mut inconclusive_residual = 0.0f64;
        for i in 0..m {
            for k in 0..m {
                let expected = if i == k { self.p[i] } else { 0.0 };
                detection_residual = detection_residual.max((table[(i, k)] - expected).abs());
            }
            inconclusive_residual = inconclusive_residual.max((table[(i, m)] - (1.0 - self.p[i])).abs());
        }
        let min_inconclusive_eigenvalue = linalg::lambda_min(&self.inconclusive);
        let valid = min_inconclusive_eigenvalue >= -INCONCLUSIVE_PSD_TOL
            && detection_residual <= DETECTION_TOL
            && inconclusive_residual <= DETECTION_TOL
            && self.p.iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v));
        Ok(MeasurementCheck { min_inconclusive_eigenvalue, detection_residual, inconclusive_residual, valid })
    }

    fn check_shape(&self, e: &StateEnsemble) -> Result<()> {
        let r = self.inconclusive.nrows();
        if r != e.dim() || self.p.len() != e.num_states() {
            return Err(Error::DimensionMismatch(format!(
                "measurement is for r = {r}, m = {} but ensemble has r = {}, m = {}",
                self.p.len(),
                e.dim(),
                e.num_states()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementCheck {
    pub min_inconclusive_eigenvalue: f64,
    /// `max |⟨φ_i|Π_k|φ_i⟩ − p_i δ_ik|`.
    pub detection_residual: f64,
    /// `max |⟨φ_i|Π_0|φ_i⟩ − (1 − p_i)|`.
    pub inconclusive_residual: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSummary {
    /// `P_D = Σ η_i p_i`.
    pub total: f64,
    pub per_state: Vec<f64>,
    /// `1 − P_D`.
    pub inconclusive: f64,
}

pub fn detection_probability(e: &StateEnsemble, meas: &Measurement) -> Result<DetectionSummary> {
    meas.check_shape(e)?;
    let total: f64 = e.priors().iter().zip(meas.p()).map(|(eta, p)| eta * p).sum();
    Ok(DetectionSummary { total, per_state: meas.p().to_vec(), inconclusive: 1.0 - total })
}
