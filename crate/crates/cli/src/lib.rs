//! Command implementations behind the `udisc` binary.
//!
//! Every pipeline command returns a [`RunReport`]; `group-verify` returns a
//! [`GroupVerifyReport`]. Both render as a plain table or as JSON, and map to a
//! process exit code through [`Output::exit_code`].

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use udisc_core::ensemble::load_ensemble;
use udisc_core::epm::{self, EpmReport, Verdict};
use udisc_core::format::encode_vector;
use udisc_core::simulate::binomial_standard_error;
use udisc_core::solver::{self, SolveStatus, SolverOptions, VerificationReport, VerificationTolerances};
use udisc_core::symmetry::{self, check_commute_phase, load_symmetry, PhaseTable, SymmetrySolution};
use udisc_core::{
    compute_epm, detection_probability, reciprocal_states, verify_group, Error, GroupReport, Measurement,
    ReciprocalSet, StateEnsemble,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;

/// Failure before a report could be produced.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Io(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: err.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Flags shared by the pipeline commands.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Flags {
    pub solver: SolverOptions,
    pub seed: u64,
    /// Run the simulator with this many trials after solving.
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Sdp,
    Epm,
    Gu,
    Cgu,
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pipeline::Sdp => "sdp",
            Pipeline::Epm => "epm",
            Pipeline::Gu => "gu",
            Pipeline::Cgu => "cgu",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub path: String,
    pub r: usize,
    pub m: usize,
    pub priors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub tol_slack: f64,
    pub max_iters: usize,
    pub verify_operator: f64,
    pub verify_scalar: f64,
    pub multiplicity: f64,
}

impl Tolerances {
    fn new(opts: &SolverOptions) -> Self {
        let v = VerificationTolerances::default();
        Tolerances {
            tol_gap: opts.tol_gap,
            tol_feas: opts.tol_feas,
            tol_slack: opts.tol_slack,
            max_iters: opts.max_iters,
            verify_operator: v.operator,
            verify_scalar: v.scalar,
            multiplicity: epm::MULTIPLICITY_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurementSummary {
    pub p: Vec<f64>,
    /// `Σ η_i p_i`.
    pub detection_probability: f64,
    pub inconclusive_probability: f64,
}

impl MeasurementSummary {
    fn new(e: &StateEnsemble, meas: &Measurement) -> CliResult<Self> {
        let d = detection_probability(e, meas)?;
        Ok(MeasurementSummary { p: d.per_state, detection_probability: d.total, inconclusive_probability: d.inconclusive })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub status: String,
    pub converged: bool,
    pub iterations: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

impl SolveSummary {
    fn new(rep: &solver::SolveReport) -> Self {
        SolveSummary {
            status: rep.status.to_string(),
            converged: rep.status == SolveStatus::Optimal,
            iterations: rep.iterations,
            primal_value: rep.primal_value,
            dual_value: rep.dual_value,
            gap: rep.gap,
            relative_gap: rep.relative_gap(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRow {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationSummary {
    pub pass: bool,
    pub conditions: Vec<ConditionRow>,
    /// `Tr(Q_i X)`.
    pub traces: Vec<f64>,
}

impl From<&VerificationReport> for VerificationSummary {
    fn from(rep: &VerificationReport) -> Self {
        let conditions = rep
            .conditions()
            .iter()
            .map(|c| ConditionRow { name: c.name, value: c.value, tolerance: c.tolerance, pass: c.pass })
            .collect();
        VerificationSummary { pass: rep.pass, conditions, traces: rep.traces.clone() }
    }
}

/// EPM against the interior-point optimum.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub epm_detection: f64,
    pub optimal_detection: f64,
    pub difference: f64,
    pub solver_status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetrySummary {
    pub group_order: usize,
    pub generators: usize,
    /// `(ΦΦ*)†|φ_k⟩` as `[re, im]` pairs.
    pub reciprocal_generators: Vec<Vec<[f64; 2]>>,
    /// Rows `t = 1..q`, one column per generator.
    pub generator_moments: Vec<Vec<f64>>,
    pub generator_condition: bool,
    pub phase_table: Option<PhaseTable>,
}

impl SymmetrySummary {
    fn new(sol: &SymmetrySolution, group_order: usize) -> Self {
        SymmetrySummary {
            group_order,
            generators: sol.reciprocal_generators.len(),
            reciprocal_generators: sol.reciprocal_generators.iter().map(encode_vector).collect(),
            generator_moments: sol.generator_moments.row_iter().map(|r| r.iter().copied().collect()).collect(),
            generator_condition: sol.generator_condition,
            phase_table: sol.phase_table.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub seed: u64,
    /// `counts[i][k]`, last column inconclusive.
    pub counts: Vec<Vec<u64>>,
    pub success_frequency: f64,
    pub analytic: f64,
    pub standard_error: f64,
    /// `(empirical − analytic) / standard error`.
    pub z_score: f64,
    pub per_state_frequency: Vec<f64>,
    pub misidentifications: u64,
}

fn run_simulation(e: &StateEnsemble, meas: &Measurement, trials: u64, seed: u64) -> CliResult<SimulationSummary> {
    let res = udisc_core::simulate(e, meas, trials, seed)?;
    let analytic = detection_probability(e, meas)?.total;
    let se = binomial_standard_error(analytic, trials);
    let freq = res.success_frequency();
    Ok(SimulationSummary {
        trials,
        seed,
        success_frequency: freq,
        analytic,
        standard_error: se,
        z_score: if se > 0.0 { (freq - analytic) / se } else { 0.0 },
        per_state_frequency: (0..e.num_states()).map(|i| res.state_success_frequency(i)).collect(),
        misidentifications: res.misidentifications(),
        counts: res.counts,
    })
}

/// Result of a pipeline command.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub input: InputSummary,
    pub pipeline: Pipeline,
    pub measurement: MeasurementSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epm: Option<EpmReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_priors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetrySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    pub tolerances: Tolerances,
}

/// Structured output with a table rendering and an exit code.
pub trait Output: Serialize {
    fn table(&self) -> String;
    fn exit_code(&self) -> i32;

    fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

impl Output for RunReport {
    fn exit_code(&self) -> i32 {
        if self.solve.as_ref().is_some_and(|s| !s.converged) {
            EXIT_NOT_CONVERGED
        } else if self.verification.as_ref().is_some_and(|v| !v.pass) {
            EXIT_CERTIFICATE
        } else {
            EXIT_OK
        }
    }

    fn table(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "input        {} (r = {}, m = {})", self.input.path, self.input.r, self.input.m);
        let _ = writeln!(w, "priors       {}", fmt_vec(&self.input.priors));
        let _ = writeln!(w, "pipeline     {}", self.pipeline);
        if let Some(p) = &self.generated_priors {
            let _ = writeln!(w, "new priors   {}", fmt_vec(p));
        }
        if let Some(s) = &self.solve {
            let _ = writeln!(
                w,
                "solver       {} after {} iterations, gap {:.3e} (relative {:.3e})",
                s.status, s.iterations, s.gap, s.relative_gap
            );
        }
        if let Some(sym) = &self.symmetry {
            let _ = writeln!(w, "group        order {}, {} generator(s)", sym.group_order, sym.generators);
            let _ = writeln!(w, "moments      {}", if sym.generator_condition { "equal" } else { "unequal" });
            if let Some(t) = &sym.phase_table {
                let _ = writeln!(w, "phases       max residual {:.3e}, commuting {}", t.max_residual, t.commuting);
            }
        }
        if let Some(epm) = &self.epm {
            let a = &epm.analysis;
            let _ = writeln!(w, "sigma_m^2    {:.10} (multiplicity {}, {} distinct values)", a.p, a.s, a.q);
            if let Some(r) = &epm.last_row {
                let _ = writeln!(w, "last-row     {}", r.verdict);
            }
            let _ = writeln!(w, "coefficient  {}", epm.coefficients.verdict);
            let _ = writeln!(w, "spectral     {}", epm.spectral.verdict);
            for gap in &a.borderline {
                let _ = writeln!(w, "warning      gap {:.3e} between distinct values {} and {}", gap.gap, gap.index, gap.index + 1);
            }
        }
        if let Some(v) = self.verdict {
            let _ = writeln!(w, "verdict      {v}");
        }
        let _ = writeln!(w, "p            {}", fmt_vec(&self.measurement.p));
        let _ = writeln!(w, "P_D          {:.10}", self.measurement.detection_probability);
        let _ = writeln!(w, "P_?          {:.10}", self.measurement.inconclusive_probability);
        if let Some(c) = &self.comparison {
            let _ = writeln!(
                w,
                "comparison   EPM {:.10} vs optimum {:.10} (difference {:.3e}, solver {})",
                c.epm_detection, c.optimal_detection, c.difference, c.solver_status
            );
        }
        if let Some(v) = &self.verification {
            let _ = writeln!(w, "certificate  {}", if v.pass { "pass" } else { "FAIL" });
            for c in &v.conditions {
                let _ = writeln!(
                    w,
                    "  {:<4} {:<36} {:.3e} (tol {:.0e})",
                    if c.pass { "ok" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
            let _ = writeln!(w, "  Tr(Q_i X)   {}", fmt_vec(&v.traces));
        }
        if let Some(s) = &self.simulation {
            let _ = writeln!(w, "simulation   {} trials, seed {}", s.trials, s.seed);
            let _ = writeln!(
                w,
                "  P_D        {:.6} empirical vs {:.6} analytic ({:+.2} standard errors)",
                s.success_frequency, s.analytic, s.z_score
            );
            let _ = writeln!(w, "  per state  {}", fmt_vec(&s.per_state_frequency));
            let _ = writeln!(w, "  misidentifications {}", s.misidentifications);
        }
        let t = &self.tolerances;
        let _ = writeln!(
            w,
            "tolerances   gap {:.0e}, feasibility {:.0e}, slackness {:.0e}, verify {:.0e}/{:.0e}",
            t.tol_gap, t.tol_feas, t.tol_slack, t.verify_operator, t.verify_scalar
        );
        out
    }
}

struct Loaded {
    path: String,
    ensemble: StateEnsemble,
    reciprocals: ReciprocalSet,
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|err| CliError { code: EXIT_IO, message: format!("cannot read {}: {err}", path.display()) })
}

fn load(path: &Path) -> CliResult<Loaded> {
    let ensemble = load_ensemble(&read(path)?)?;
    let reciprocals = reciprocal_states(&ensemble)?;
    Ok(Loaded { path: path.display().to_string(), ensemble, reciprocals })
}

fn input_summary(path: String, e: &StateEnsemble) -> InputSummary {
    InputSummary { path, r: e.dim(), m: e.num_states(), priors: e.priors().to_vec() }
}

fn base_report(path: String, pipeline: Pipeline, e: &StateEnsemble, meas: &Measurement, flags: &Flags) -> CliResult<RunReport> {
    Ok(RunReport {
        input: input_summary(path, e),
        pipeline,
        measurement: MeasurementSummary::new(e, meas)?,
        solve: None,
        verdict: None,
        epm: None,
        generated_priors: None,
        symmetry: None,
        comparison: None,
        verification: None,
        simulation: None,
        tolerances: Tolerances::new(&flags.solver),
    })
}

fn attach_simulation(report: &mut RunReport, e: &StateEnsemble, meas: &Measurement, flags: &Flags) -> CliResult<()> {
    if let Some(trials) = flags.trials {
        report.simulation = Some(run_simulation(e, meas, trials, flags.seed)?);
    }
    Ok(())
}

/// Optimal measurement by the interior-point method, with certificate verification.
pub fn cmd_solve(path: &Path, flags: &Flags) -> CliResult<RunReport> {
    flags.solver.validate()?;
    let l = load(path)?;
    let (e, rs) = (&l.ensemble, &l.reciprocals);
    let prob = solver::build_sdp(e, rs)?;
    let rep = solver::solve(&prob, &flags.solver)?;
    let meas = Measurement::new(rs, rep.p.clone())?;
    let check = solver::verify_certificate(e, rs, &rep.p, &rep.certificate);
    let mut report = base_report(l.path, Pipeline::Sdp, e, &meas, flags)?;
    report.solve = Some(SolveSummary::new(&rep));
    report.verification = Some((&check).into());
    if report.exit_code() == EXIT_OK {
        attach_simulation(&mut report, e, &meas, flags)?;
    }
    Ok(report)
}

/// Equal-probability measurement and its optimality tests. With `make_priors`, the
/// ensemble's priors are first replaced by those for which the EPM is optimal with
/// coefficients `b`.
pub fn cmd_epm(path: &Path, make_priors: Option<&[f64]>, flags: &Flags) -> CliResult<RunReport> {
    flags.solver.validate()?;
    let l = load(path)?;
    let (mut e, mut rs) = (l.ensemble, l.reciprocals);
    let mut generated = None;
    if let Some(b) = make_priors {
        let priors = epm::priors_for_epm(&rs, b)?;
        e = e.with_priors(priors.clone())?;
        rs = reciprocal_states(&e)?;
        generated = Some(priors);
    }
    let meas = compute_epm(&e, &rs)?;
    let analysis = epm::epm_report(&e, &rs);
    let verdict = analysis.verdict();
    let mut report = base_report(l.path, Pipeline::Epm, &e, &meas, flags)?;
    report.generated_priors = generated;
    if let Some(cert) = analysis.certificate() {
        report.verification = Some((&solver::verify_certificate(&e, &rs, meas.p(), cert)).into());
    } else {
        let prob = solver::build_sdp(&e, &rs)?;
        let rep = solver::solve(&prob, &flags.solver)?;
        report.comparison = Some(Comparison {
            epm_detection: report.measurement.detection_probability,
            optimal_detection: rep.detection_probability(),
            difference: rep.detection_probability() - report.measurement.detection_probability,
            solver_status: rep.status.to_string(),
        });
    }
    report.verdict = Some(verdict);
    report.epm = Some(analysis);
    if report.exit_code() == EXIT_OK {
        attach_simulation(&mut report, &e, &meas, flags)?;
    }
    Ok(report)
}

fn symmetry_report(path: &Path, pipeline: Pipeline, sol: SymmetrySolution, order: usize, flags: &Flags) -> CliResult<RunReport> {
    let e = &sol.ensemble;
    let optimal_measurement;
    let meas = match &sol.fallback {
        Some(rep) => {
            optimal_measurement = Measurement::new(&sol.reciprocals, rep.p.clone())?;
            &optimal_measurement
        }
        None => &sol.measurement,
    };
    let mut report = base_report(path.display().to_string(), pipeline, e, meas, flags)?;
    report.verdict = Some(sol.verdict);
    report.symmetry = Some(SymmetrySummary::new(&sol, order));
    report.verification = sol.verification.as_ref().map(Into::into);
    if let Some(rep) = &sol.fallback {
        report.solve = Some(SolveSummary::new(rep));
        report.comparison = Some(Comparison {
            epm_detection: sol.p,
            optimal_detection: rep.detection_probability(),
            difference: rep.detection_probability() - sol.p,
            solver_status: rep.status.to_string(),
        });
    }
    if report.exit_code() == EXIT_OK {
        attach_simulation(&mut report, e, meas, flags)?;
    }
    Ok(report)
}

/// Closed-form solution of a GU set.
pub fn cmd_gu(path: &Path, flags: &Flags) -> CliResult<RunReport> {
    let spec = load_symmetry(&read(path)?)?;
    let order = spec.group.order();
    let sol = symmetry::solve_gu(&spec)?;
    symmetry_report(path, Pipeline::Gu, sol, order, flags)
}

/// Solution of a CGU set, falling back to the interior-point method when the
/// sufficient conditions fail.
pub fn cmd_cgu(path: &Path, flags: &Flags) -> CliResult<RunReport> {
    flags.solver.validate()?;
    let spec = load_symmetry(&read(path)?)?;
    let order = spec.group.order();
    let sol = symmetry::solve_cgu(&spec, &flags.solver)?;
    symmetry_report(path, Pipeline::Cgu, sol, order, flags)
}

/// Solves with the chosen pipeline and simulates the resulting measurement. The
/// simulation is skipped when the solve or its certificate fails.
pub fn cmd_simulate(path: &Path, pipeline: Pipeline, flags: &Flags) -> CliResult<RunReport> {
    let flags = Flags { trials: Some(flags.trials.unwrap_or(DEFAULT_TRIALS)), ..*flags };
    match pipeline {
        Pipeline::Sdp => cmd_solve(path, &flags),
        Pipeline::Epm => cmd_epm(path, None, &flags),
        Pipeline::Gu => cmd_gu(path, &flags),
        Pipeline::Cgu => cmd_cgu(path, &flags),
    }
}

pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// Group axioms of `G` (and `Q`, if declared) and the phase table between them.
#[derive(Debug, Clone, Serialize)]
pub struct GroupVerifyReport {
    pub path: String,
    pub group: GroupReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_group: Option<GroupReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_table: Option<PhaseTable>,
    pub pass: bool,
}

impl Output for GroupVerifyReport {
    fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_VALIDATION
        }
    }

    fn table(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "input        {}", self.path);
        let line = |w: &mut String, name: &str, g: &GroupReport| {
            let _ = writeln!(
                w,
                "{name:<12} order {}, dimension {}: {} ({})",
                g.order,
                g.dim,
                if g.pass { "pass" } else { "FAIL" },
                g.summary()
            );
        };
        line(w, "group", &self.group);
        if let Some(q) = &self.generator_group {
            line(w, "generators", q);
        }
        if let Some(t) = &self.phase_table {
            let _ = writeln!(
                w,
                "phases       {} (max residual {:.3e}, commuting {})",
                if t.success { "pass" } else { "FAIL" },
                t.max_residual,
                t.commuting
            );
            for row in t.theta.row_iter() {
                let v: Vec<f64> = row.iter().copied().collect();
                let _ = writeln!(w, "  {}", fmt_vec(&v));
            }
        }
        let _ = writeln!(w, "result       {}", if self.pass { "pass" } else { "FAIL" });
        out
    }
}

/// Checks the group file without requiring it to describe a valid state set.
pub fn cmd_group_verify(path: &Path) -> CliResult<GroupVerifyReport> {
    let source = read(path)?;
    let doc: udisc_core::format::SymmetryDocument =
        serde_json::from_str(&source).map_err(|e| Error::Malformed(e.to_string()))?;
    let decode = |mats: &[Vec<Vec<[f64; 2]>>]| -> CliResult<udisc_core::UnitaryGroup> {
        let elements = mats.iter().map(|m| udisc_core::format::decode_matrix(m)).collect::<Result<Vec<_>, _>>()?;
        Ok(udisc_core::UnitaryGroup::from_elements(elements)?)
    };
    let g = decode(&doc.group)?;
    let group = verify_group(&g);
    let (generator_group, phase_table) = match &doc.generator_group {
        Some(mats) => {
            let q = decode(mats)?;
            let report = verify_group(&q);
            let table = check_commute_phase(&g, &q)?;
            (Some(report), Some(table))
        }
        None => (None, None),
    };
    let pass = group.pass
        && generator_group.as_ref().is_none_or(|q| q.pass)
        && phase_table.as_ref().is_none_or(|t| t.success);
    Ok(GroupVerifyReport { path: path.display().to_string(), group, generator_group, phase_table, pass })
}
