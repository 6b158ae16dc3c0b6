//! Geometrically uniform (GU) and compound geometrically uniform (CGU) state sets.
//!
//! A GU set is the orbit `{U_i|φ⟩}` of one vector under a finite unitary group; a CGU
//! set is the union of the orbits of several generators `|φ_k⟩`. The Gram operator
//! `ΦΦ*` commutes with the group, so the reciprocal states are the orbits of
//! `(ΦΦ*)†|φ_k⟩` and only the generators need to be handled explicitly.
//!
//! For GU sets the equal-probability measurement with `p` the smallest nonzero
//! eigenvalue of `ΦΦ*` is always optimal. For CGU sets it is optimal when the moments
//! `⟨φ_k|(ΦΦ*)^{t/2−1}|φ_k⟩` agree across generators, or when the generators are
//! themselves an orbit of a group `Q = {V_k}` that commutes with `G` up to phases.
//! Some statements of the moment condition use `Φ*Φ` instead of `ΦΦ*`; the two share
//! their nonzero spectrum, and this module uses `ΦΦ*` throughout.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ensemble::{reciprocal_states, Measurement, ReciprocalSet, StateEnsemble, RENORMALIZE_TOL};
use crate::epm::{self, Verdict};
use crate::error::{Error, Result};
use crate::format::{decode_matrix, decode_vector, encode_matrix, encode_vector, SymmetryDocument};
use crate::linalg::{self, c64, real, CMatrix, CVector, HermitianEigen};
use crate::solver::{self, DualCertificate, SolveReport, SolverOptions, VerificationReport};

/// Largest allowed `‖U*U − I‖` for a group element.
pub const UNITARY_TOL: f64 = 1e-10;
/// Products and inverses must match a group element to this accuracy.
pub const GROUP_MATCH_TOL: f64 = 1e-8;
/// Residual allowed in `U_i V_k = e^{jθ} V_k U_i`.
pub const PHASE_TOL: f64 = 1e-8;
/// Allowed mismatch between a declared generator and `V_k|φ⟩`.
pub const GENERATOR_MATCH_TOL: f64 = 1e-8;
/// Relative spread allowed in generator moments.
pub const MOMENT_TOL: f64 = 1e-8;

/// A finite group of unitary matrices, stored with the identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGroup {
    elements: Vec<CMatrix>,
}

impl UnitaryGroup {
    /// Wraps elements after shape checks only; see [`verify_group`] for the group axioms.
    pub fn from_elements(elements: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidSymmetry("group has no elements".into()));
        };
        let d = first.nrows();
        if let Some(i) = elements.iter().position(|u| u.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!("group element {i} is not {d}×{d}")));
        }
        Ok(UnitaryGroup { elements })
    }

    /// Wraps elements and requires every group axiom to hold.
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let g = Self::from_elements(elements)?;
        let report = verify_group(&g);
        if !report.pass {
            return Err(Error::InvalidSymmetry(format!("not a unitary group: {}", report.summary())));
        }
        Ok(g)
    }

    /// Closes a set of unitary generators under multiplication. Fails if more than
    /// `max_order` elements appear.
    pub fn generate(generators: &[CMatrix], max_order: usize) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::InvalidSymmetry("no generators".into()));
        };
        let d = first.nrows();
        let mut elements = vec![linalg::identity(d)];
        let mut frontier = 0;
        while frontier < elements.len() {
            let current = elements[frontier].clone();
            for g in generators {
                let prod = g * &current;
                if !elements.iter().any(|e| linalg::max_abs(&(e - &prod)) <= GROUP_MATCH_TOL) {
                    if elements.len() == max_order {
                        return Err(Error::InvalidSymmetry(format!("group order exceeds {max_order}")));
                    }
                    elements.push(prod);
                }
            }
            frontier += 1;
        }
        Self::new(elements)
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    /// Index of the element within [`GROUP_MATCH_TOL`] of `a`, with the residual.
    pub fn nearest(&self, a: &CMatrix) -> (usize, f64) {
        self.elements
            .iter()
            .enumerate()
            .map(|(k, u)| (k, linalg::max_abs(&(u - a))))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("group is nonempty")
    }
}

/// Group-axiom residuals (entrywise maximum norms).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub order: usize,
    pub dim: usize,
    /// `‖U_1 − I‖`.
    pub identity_residual: f64,
    /// `max_i ‖U_i* U_i − I‖`.
    pub unitarity_residual: f64,
    /// `max_{i,j} min_k ‖U_i U_j − U_k‖`.
    pub closure_residual: f64,
    /// `max_i min_k ‖U_i* − U_k‖`.
    pub inverse_residual: f64,
    /// Pairs `(i, j)` whose product is not in the set.
    pub closure_failures: Vec<(usize, usize)>,
    pub pass: bool,
}

impl GroupReport {
    pub fn summary(&self) -> String {
        format!(
            "identity {:.2e}, unitarity {:.2e}, closure {:.2e}, inverse {:.2e}",
            self.identity_residual, self.unitarity_residual, self.closure_residual, self.inverse_residual
        )
    }
}

pub fn verify_group(g: &UnitaryGroup) -> GroupReport {
    let d = g.dim();
    let id = linalg::identity(d);
    let identity_residual = linalg::max_abs(&(g.element(0) - &id));
    let unitarity_residual = g.elements().iter().map(linalg::unitarity_residual).fold(0.0, f64::max);
    let mut closure_residual = 0.0f64;
    let mut closure_failures = Vec::new();
    for (i, a) in g.elements().iter().enumerate() {
        for (j, b) in g.elements().iter().enumerate() {
            let (_, res) = g.nearest(&(a * b));
            closure_residual = closure_residual.max(res);
            if res > GROUP_MATCH_TOL {
                closure_failures.push((i, j));
            }
        }
    }
    let inverse_residual = g.elements().iter().map(|u| g.nearest(&u.adjoint()).1).fold(0.0, f64::max);
    let pass = identity_residual <= GROUP_MATCH_TOL
        && unitarity_residual <= UNITARY_TOL
        && closure_residual <= GROUP_MATCH_TOL
        && inverse_residual <= GROUP_MATCH_TOL;
    GroupReport {
        order: g.order(),
        dim: d,
        identity_residual,
        unitarity_residual,
        closure_residual,
        inverse_residual,
        closure_failures,
        pass,
    }
}

/// Phases `θ(i, k)` with `U_i V_k ≈ e^{jθ} V_k U_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTable {
    /// `l × r_g`, in `(−π, π]`.
    #[serde(serialize_with = "serialize_real_rows")]
    pub theta: DMatrix<f64>,
    /// Frobenius norms `‖U_i V_k − e^{jθ} V_k U_i‖`.
    #[serde(serialize_with = "serialize_real_rows")]
    pub residuals: DMatrix<f64>,
    pub max_residual: f64,
    pub success: bool,
    /// All phases vanish: the groups commute.
    pub commuting: bool,
}

fn serialize_real_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

/// Finds the best phase for every pair through `arg Tr((V_k U_i)* U_i V_k) / d`.
pub fn check_commute_phase(g: &UnitaryGroup, q: &UnitaryGroup) -> Result<PhaseTable> {
    if g.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!("groups act on dimensions {} and {}", g.dim(), q.dim())));
    }
    let d = g.dim() as f64;
    let (l, rg) = (g.order(), q.order());
    let mut theta = DMatrix::zeros(l, rg);
    let mut residuals = DMatrix::zeros(l, rg);
    for (i, u) in g.elements().iter().enumerate() {
        for (k, v) in q.elements().iter().enumerate() {
            let uv = u * v;
            let vu = v * u;
            let overlap = (vu.adjoint() * &uv).trace() / real(d);
            let th = overlap.arg();
            theta[(i, k)] = th;
            residuals[(i, k)] = linalg::frobenius_norm(&(uv - vu * c64(th.cos(), th.sin())));
        }
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let success = max_residual <= PHASE_TOL;
    let commuting = success && theta.iter().all(|t| t.abs() <= PHASE_TOL);
    Ok(PhaseTable { theta, residuals, max_residual, success, commuting })
}

/// `{U_i V_k}` in the k-major order used by [`expand`].
pub fn product_elements(g: &UnitaryGroup, q: &UnitaryGroup) -> Vec<CMatrix> {
    q.elements().iter().flat_map(|v| g.elements().iter().map(move |u| u * v)).collect()
}

/// Group plus generating vectors.
#[derive(Debug, Clone)]
pub struct SymmetrySpec {
    pub group: UnitaryGroup,
    pub generators: Vec<CVector>,
    /// `Q = {V_k}` with `|φ_k⟩ = V_k|φ_1⟩`.
    pub generator_group: Option<UnitaryGroup>,
    /// Present when `G` and `Q` commute up to phases.
    pub phase_table: Option<PhaseTable>,
}

impl SymmetrySpec {
    /// Validates the group(s) and generators. Generators within [`RENORMALIZE_TOL`] of
    /// unit norm are renormalized.
    pub fn new(group: UnitaryGroup, generators: Vec<CVector>, generator_group: Option<UnitaryGroup>) -> Result<Self> {
        let report = verify_group(&group);
        if !report.pass {
            return Err(Error::InvalidSymmetry(format!("group fails verification: {}", report.summary())));
        }
        if generators.is_empty() {
            return Err(Error::InvalidSymmetry("no generators".into()));
        }
        let d = group.dim();
        let mut gens = Vec::with_capacity(generators.len());
        for (k, v) in generators.into_iter().enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch(format!("generator {k} has length {}, group dimension is {d}", v.len())));
            }
            let n = v.norm();
            if (n - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::NonUnitState { index: k, norm: n });
            }
            gens.push(v.unscale(n));
        }
        let mut phase_table = None;
        if let Some(q) = &generator_group {
            let report = verify_group(q);
            if !report.pass {
                return Err(Error::InvalidSymmetry(format!("generator group fails verification: {}", report.summary())));
            }
            if q.dim() != d {
                return Err(Error::DimensionMismatch(format!("generator group dimension {} differs from {d}", q.dim())));
            }
            if q.order() != gens.len() {
                return Err(Error::InvalidSymmetry(format!(
                    "generator group has {} elements but {} generators are given",
                    q.order(),
                    gens.len()
                )));
            }
            for (k, v) in q.elements().iter().enumerate() {
                let res = linalg::vector_max_abs(&(v * &gens[0] - &gens[k]));
                if res > GENERATOR_MATCH_TOL {
                    return Err(Error::InvalidSymmetry(format!("generator {k} differs from V_k|φ⟩ by {res:.3e}")));
                }
            }
            let table = check_commute_phase(&group, q)?;
            phase_table = table.success.then_some(table);
        }
        Ok(SymmetrySpec { group, generators: gens, generator_group, phase_table })
    }

    pub fn gu(group: UnitaryGroup, generator: CVector) -> Result<Self> {
        Self::new(group, vec![generator], None)
    }

    pub fn is_gu(&self) -> bool {
        self.generators.len() == 1
    }

    /// `l · r_g`.
    pub fn num_states(&self) -> usize {
        self.group.order() * self.generators.len()
    }

    pub fn from_document(doc: &SymmetryDocument) -> Result<Self> {
        let decode_group = |mats: &[Vec<Vec<[f64; 2]>>]| -> Result<UnitaryGroup> {
            UnitaryGroup::from_elements(mats.iter().map(|m| decode_matrix(m)).collect::<Result<_>>()?)
        };
        let group = decode_group(&doc.group)?;
        let generators = doc.generators.iter().map(|v| decode_vector(v)).collect::<Result<_>>()?;
        let generator_group = doc.generator_group.as_deref().map(decode_group).transpose()?;
        Self::new(group, generators, generator_group)
    }

    pub fn to_document(&self) -> SymmetryDocument {
        let enc = |g: &UnitaryGroup| g.elements().iter().map(encode_matrix).collect();
        SymmetryDocument {
            group: enc(&self.group),
            generators: self.generators.iter().map(encode_vector).collect(),
            generator_group: self.generator_group.as_ref().map(enc),
        }
    }
}

/// Parses and validates a symmetry document (JSON).
pub fn load_symmetry(source: &str) -> Result<SymmetrySpec> {
    let doc: SymmetryDocument = serde_json::from_str(source).map_err(|e| Error::Malformed(e.to_string()))?;
    SymmetrySpec::from_document(&doc)
}

pub fn load_symmetry_file(path: impl AsRef<Path>) -> Result<SymmetrySpec> {
    load_symmetry(&std::fs::read_to_string(path)?)
}

/// The states `U_i|φ_k⟩`, k-major, with uniform priors.
pub fn expand(spec: &SymmetrySpec) -> Result<StateEnsemble> {
    let (l, d) = (spec.group.order(), spec.group.dim());
    let mut states = CMatrix::zeros(d, spec.num_states());
    for (k, phi) in spec.generators.iter().enumerate() {
        for (i, u) in spec.group.elements().iter().enumerate() {
            states.set_column(k * l + i, &(u * phi));
        }
    }
    StateEnsemble::with_uniform_priors(states)
}

/// Eigen-decomposition of `ΦΦ*`; the top `m` eigenvalues are the nonzero ones.
struct GramSpectrum {
    eig: HermitianEigen,
    m: usize,
}

impl GramSpectrum {
    fn new(e: &StateEnsemble) -> Self {
        let phi = e.states();
        GramSpectrum { eig: linalg::hermitian_eigen(&(phi * phi.adjoint())), m: e.num_states() }
    }

    fn first_nonzero(&self) -> usize {
        self.eig.values.len() - self.m
    }

    /// Smallest nonzero eigenvalue, `σ_m²`.
    fn smallest_nonzero(&self) -> f64 {
        self.eig.values[self.first_nonzero()]
    }

    /// `(ΦΦ*)†`, inverse on the top `m` eigenvectors.
    fn pinv(&self) -> CMatrix {
        let r = self.eig.values.len();
        let mut out = CMatrix::zeros(r, r);
        for j in self.first_nonzero()..r {
            let w = self.eig.vectors.column(j).into_owned();
            out += linalg::outer(&w, &w) * real(1.0 / self.eig.values[j]);
        }
        linalg::hermitian_part(&out)
    }

    /// Projector onto the eigenvectors of the `s` smallest nonzero eigenvalues.
    fn bottom_projector(&self, s: usize) -> CMatrix {
        let r = self.eig.values.len();
        let mut out = CMatrix::zeros(r, r);
        let start = self.first_nonzero();
        for j in start..start + s {
            let w = self.eig.vectors.column(j).into_owned();
            out += linalg::outer(&w, &w);
        }
        linalg::hermitian_part(&out)
    }
}

/// `|φ̃⟩ = (ΦΦ*)†|φ⟩` for a GU set.
pub fn gu_reciprocal_generator(spec: &SymmetrySpec, e: &StateEnsemble) -> Result<CVector> {
    if !spec.is_gu() {
        return Err(Error::InvalidSymmetry(format!("expected one generator, found {}", spec.generators.len())));
    }
    Ok(cgu_reciprocal_generators(spec, e)?.remove(0))
}

/// `|φ̃_k⟩ = (ΦΦ*)†|φ_k⟩`; the reciprocal states are `U_i|φ̃_k⟩`.
pub fn cgu_reciprocal_generators(spec: &SymmetrySpec, e: &StateEnsemble) -> Result<Vec<CVector>> {
    if e.dim() != spec.group.dim() || e.num_states() != spec.num_states() {
        return Err(Error::DimensionMismatch("ensemble does not match the symmetry description".into()));
    }
    let pinv = GramSpectrum::new(e).pinv();
    Ok(spec.generators.iter().map(|phi| &pinv * phi).collect())
}

/// Analytic solution of a GU or CGU set.
#[derive(Debug, Clone)]
pub struct SymmetrySolution {
    pub ensemble: StateEnsemble,
    pub reciprocals: ReciprocalSet,
    pub reciprocal_generators: Vec<CVector>,
    /// Smallest nonzero eigenvalue of `ΦΦ*`.
    pub p: f64,
    pub measurement: Measurement,
    pub verdict: Verdict,
    /// `⟨φ_k|(ΦΦ*)^{t/2−1}|φ_k⟩` for `t = 1..q` (rows) and every generator (columns).
    pub generator_moments: DMatrix<f64>,
    pub generator_condition: bool,
    pub phase_table: Option<PhaseTable>,
    /// Dual certificate for the equal-probability measurement when it is optimal.
    pub certificate: Option<DualCertificate>,
    pub verification: Option<VerificationReport>,
    /// Interior-point solution, computed when the analytic tests are inconclusive.
    pub fallback: Option<SolveReport>,
}

impl SymmetrySolution {
    /// Detection probability of the reported optimum (fallback if present).
    pub fn detection_probability(&self) -> f64 {
        match &self.fallback {
            Some(rep) => rep.detection_probability(),
            None => self.p,
        }
    }
}

fn analytic(spec: &SymmetrySpec) -> Result<(StateEnsemble, ReciprocalSet, GramSpectrum, Vec<CVector>, Measurement)> {
    let e = expand(spec)?;
    let rs = reciprocal_states(&e)?;
    let spectrum = GramSpectrum::new(&e);
    let pinv = spectrum.pinv();
    let gens: Vec<CVector> = spec.generators.iter().map(|phi| &pinv * phi).collect();
    let p = spectrum.smallest_nonzero();
    let operators = gens
        .iter()
        .flat_map(|g| {
            spec.group.elements().iter().map(move |u| {
                let v = u * g;
                linalg::outer(&v, &v) * real(p)
            })
        })
        .collect();
    let meas = Measurement::from_operators(vec![p; e.num_states()], operators)?;
    Ok((e, rs, spectrum, gens, meas))
}

/// Equal-probability certificate `X = (p/s) P`, with `P` the projector onto the
/// eigenvectors of the smallest nonzero eigenvalue of `ΦΦ*` and `s` its multiplicity.
fn uniform_certificate(spectrum: &GramSpectrum, s: usize, m: usize) -> DualCertificate {
    let p = spectrum.smallest_nonzero();
    let x = spectrum.bottom_projector(s) * real(p / s as f64);
    DualCertificate { x, z: vec![0.0; m] }
}

fn generator_moments(spec: &SymmetrySpec, rs: &ReciprocalSet, q: usize) -> (DMatrix<f64>, bool) {
    let rg = spec.generators.len();
    let mut moments = DMatrix::zeros(q, rg);
    for t in 1..=q {
        let power = rs.support_power(t as f64 / 2.0 - 1.0);
        for (k, phi) in spec.generators.iter().enumerate() {
            moments[(t - 1, k)] = linalg::quad_form(&power, phi);
        }
    }
    let ok = moments.row_iter().all(|row| {
        let mean = row.mean();
        row.iter().all(|v| (v - mean).abs() <= MOMENT_TOL * mean.abs().max(f64::MIN_POSITIVE))
    });
    (moments, ok)
}

/// Closed-form solution of a GU set: the equal-probability measurement is optimal.
pub fn solve_gu(spec: &SymmetrySpec) -> Result<SymmetrySolution> {
    if !spec.is_gu() {
        return Err(Error::InvalidSymmetry(format!("expected one generator, found {}", spec.generators.len())));
    }
    let (e, rs, spectrum, gens, meas) = analytic(spec)?;
    let an = epm::analyze(&rs);
    let (generator_moments, _) = generator_moments(spec, &rs, an.q);
    let cert = uniform_certificate(&spectrum, an.s, e.num_states());
    let verification = solver::verify_certificate(&e, &rs, meas.p(), &cert);
    Ok(SymmetrySolution {
        p: spectrum.smallest_nonzero(),
        verdict: Verdict::Optimal,
        generator_moments,
        generator_condition: true,
        phase_table: None,
        certificate: Some(cert),
        verification: Some(verification),
        fallback: None,
        reciprocal_generators: gens,
        measurement: meas,
        reciprocals: rs,
        ensemble: e,
    })
}

/// Solution of a CGU set. The equal-probability measurement is declared optimal when
/// the generator moments agree or when the generators form a group orbit that commutes
/// with `G` up to phases; otherwise the interior-point solver is run.
pub fn solve_cgu(spec: &SymmetrySpec, opts: &SolverOptions) -> Result<SymmetrySolution> {
    let (e, rs, spectrum, gens, meas) = analytic(spec)?;
    let an = epm::analyze(&rs);
    let (generator_moments, generator_condition) = generator_moments(spec, &rs, an.q);
    let phase_ok = spec.generator_group.is_some() && spec.phase_table.is_some();
    let optimal = generator_condition || phase_ok;

    let (certificate, verification, fallback) = if optimal {
        let cert = uniform_certificate(&spectrum, an.s, e.num_states());
        let report = solver::verify_certificate(&e, &rs, meas.p(), &cert);
        (Some(cert), Some(report), None)
    } else {
        let prob = solver::build_sdp(&e, &rs)?;
        let rep = solver::solve(&prob, opts)?;
        let report = solver::verify_certificate(&e, &rs, &rep.p, &rep.certificate);
        (None, Some(report), Some(rep))
    };
    Ok(SymmetrySolution {
        p: spectrum.smallest_nonzero(),
        verdict: if optimal { Verdict::Optimal } else { Verdict::SufficientTestInconclusive },
        generator_moments,
        generator_condition,
        phase_table: spec.phase_table.clone(),
        certificate,
        verification,
        fallback,
        reciprocal_generators: gens,
        measurement: meas,
        reciprocals: rs,
        ensemble: e,
    })
}
