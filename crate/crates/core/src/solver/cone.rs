//! Primal-dual path-following interior-point method for block-diagonal cone programs
//! in inequality form:
//!
//! ```text
//! primal:  min ⟨c|x⟩        s.t.  F(x) = F_0 + Σ x_i F_i ⪰ 0
//! dual:    max −Tr(F_0 Z)   s.t.  Tr(F_i Z) = c_i,  Z ⪰ 0
//! ```
//!
//! The cone is a product of Hermitian PSD blocks and nonnegative orthants. Directions
//! are HKM (`ΔZ = σμS⁻¹ − Z − sym(S⁻¹ΔS Z)`) with a Mehrotra predictor-corrector. The
//! primal iterate is kept strictly feasible (`S = F(x)` is recomputed every step); the
//! dual may start infeasible, its residual is driven to zero by the Newton system.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, real, CMatrix};

/// One block of a block-diagonal Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Hermitian(CMatrix),
    /// Real diagonal block, i.e. a nonnegative orthant when used as a cone.
    Diagonal(DVector<f64>),
}

impl Block {
    fn order(&self) -> usize {
        match self {
            Block::Hermitian(a) => a.nrows(),
            Block::Diagonal(d) => d.len(),
        }
    }
}

/// Block-diagonal Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag {
    pub blocks: Vec<Block>,
}

impl BlockDiag {
    pub fn new(blocks: Vec<Block>) -> Self {
        BlockDiag { blocks }
    }

    /// Total order `Σ n_b`.
    pub fn order(&self) -> usize {
        self.blocks.iter().map(Block::order).sum()
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|a| a.map(|_| real(0.0)), |d| DVector::zeros(d.len()))
    }

    pub fn identity_like(&self) -> Self {
        self.map(|a| linalg::identity(a.nrows()), |d| DVector::from_element(d.len(), 1.0))
    }

    fn map(&self, fh: impl Fn(&CMatrix) -> CMatrix, fd: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        BlockDiag {
            blocks: self
                .blocks
                .iter()
                .map(|b| match b {
                    Block::Hermitian(a) => Block::Hermitian(fh(a)),
                    Block::Diagonal(d) => Block::Diagonal(fd(d)),
                })
                .collect(),
        }
    }

    fn zip_map(
        &self,
        other: &Self,
        fh: impl Fn(&CMatrix, &CMatrix) -> CMatrix,
        fd: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
    ) -> Self {
        assert_eq!(self.blocks.len(), other.blocks.len(), "block structure mismatch");
        BlockDiag {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|pair| match pair {
                    (Block::Hermitian(a), Block::Hermitian(b)) => Block::Hermitian(fh(a, b)),
                    (Block::Diagonal(a), Block::Diagonal(b)) => Block::Diagonal(fd(a, b)),
                    _ => panic!("block kind mismatch"),
                })
                .collect(),
        }
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b * real(alpha), |a, b| a + b * alpha)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|a| a * real(alpha), |d| d * alpha)
    }

    /// `Re Tr(self · other)`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.blocks.len(), other.blocks.len(), "block structure mismatch");
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|pair| match pair {
                (Block::Hermitian(a), Block::Hermitian(b)) => linalg::trace_product(a, b),
                (Block::Diagonal(a), Block::Diagonal(b)) => a.dot(b),
                _ => panic!("block kind mismatch"),
            })
            .sum()
    }

    /// `(abc + (abc)*) / 2`, blockwise.
    pub fn sym_product(a: &Self, b: &Self, c: &Self) -> Self {
        a.zip_map(b, |x, y| x * y, |x, y| x.component_mul(y))
            .zip_map(c, |xy, z| linalg::hermitian_part(&(xy * z)), |xy, z| xy.component_mul(z))
    }

    pub fn hermitian_part(&self) -> Self {
        self.map(linalg::hermitian_part, Clone::clone)
    }

    /// Inverse of a positive definite block matrix, `None` if any block is not PD.
    pub fn inverse_pd(&self) -> Option<Self> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            blocks.push(match b {
                Block::Hermitian(a) => {
                    let chol = linalg::hermitian_part(a).cholesky()?;
                    Block::Hermitian(linalg::hermitian_part(&chol.inverse()))
                }
                Block::Diagonal(d) => {
                    if d.iter().any(|&v| v.is_nan() || v <= 0.0) {
                        return None;
                    }
                    Block::Diagonal(d.map(|v| 1.0 / v))
                }
            });
        }
        Some(BlockDiag { blocks })
    }

    /// Largest `α` with `self + α·dir ⪰ 0`; `+∞` if unbounded. `None` if `self` is not PD.
    pub fn max_step(&self, dir: &Self) -> Option<f64> {
        let mut alpha = f64::INFINITY;
        for pair in self.blocks.iter().zip(&dir.blocks) {
            match pair {
                (Block::Hermitian(s), Block::Hermitian(d)) => {
                    let chol = linalg::hermitian_part(s).cholesky()?;
                    let l = chol.l();
                    let n = l.nrows();
                    let linv = l.solve_lower_triangular(&linalg::identity(n))?;
                    let m = &linv * d * linv.adjoint();
                    let lmin = linalg::lambda_min(&m);
                    if lmin < 0.0 {
                        alpha = alpha.min(-1.0 / lmin);
                    }
                }
                (Block::Diagonal(s), Block::Diagonal(d)) => {
                    for (&si, &di) in s.iter().zip(d.iter()) {
                        if si <= 0.0 {
                            return None;
                        }
                        if di < 0.0 {
                            alpha = alpha.min(-si / di);
                        }
                    }
                }
                _ => panic!("block kind mismatch"),
            }
        }
        Some(alpha)
    }

    /// Smallest eigenvalue over all blocks.
    /// `‖A B‖_F` for conformal block-diagonal `A`, `B`.
    pub fn product_norm(a: &Self, b: &Self) -> f64 {
        a.blocks
            .iter()
            .zip(&b.blocks)
            .map(|pair| match pair {
                (Block::Hermitian(x), Block::Hermitian(y)) => (x * y).norm_squared(),
                (Block::Diagonal(x), Block::Diagonal(y)) => x.component_mul(y).norm_squared(),
                _ => panic!("block layouts differ"),
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Hermitian(a) => linalg::lambda_min(a),
                Block::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Dense matrix with the blocks along the diagonal.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.order();
        let mut out = CMatrix::zeros(n, n);
        let mut at = 0;
        for b in &self.blocks {
            match b {
                Block::Hermitian(a) => {
                    out.view_mut((at, at), a.shape()).copy_from(a);
                }
                Block::Diagonal(d) => {
                    for (k, &v) in d.iter().enumerate() {
                        out[(at + k, at + k)] = real(v);
                    }
                }
            }
            at += b.order();
        }
        out
    }
}

/// A cone program `min ⟨c|x⟩ s.t. F_0 + Σ x_i F_i ⪰ 0` seen through the operations the
/// interior-point method needs.
pub trait ConeProgram {
    fn num_vars(&self) -> usize;

    fn cost(&self) -> DVector<f64>;

    /// `F_0`.
    fn offset(&self) -> BlockDiag;

    /// `Σ dx_i F_i`.
    fn apply(&self, dx: &DVector<f64>) -> BlockDiag;

    /// `(Tr(F_i Z))_i`.
    fn adjoint(&self, z: &BlockDiag) -> DVector<f64>;

    /// Schur complement `H_ij = Re Tr(F_i S⁻¹ F_j Z)`. The default builds it column by
    /// column from [`apply`](Self::apply) and [`adjoint`](Self::adjoint).
    fn schur(&self, s_inv: &BlockDiag, z: &BlockDiag) -> DMatrix<f64> {
        let n = self.num_vars();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            let fj = self.apply(&e);
            h.set_column(j, &self.adjoint(&BlockDiag::sym_product(s_inv, &fj, z)));
        }
        (&h + h.transpose()) * 0.5
    }

    /// Strictly feasible primal point and a positive definite dual point.
    fn initial_point(&self) -> (DVector<f64>, BlockDiag);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Stop when `|P − D| ≤ tol_gap · (1 + |P|)` …
    pub tol_gap: f64,
    /// … and `‖c − A*(Z)‖_∞ ≤ tol_feas · (1 + ‖c‖_∞)`.
    pub tol_feas: f64,
    pub max_iters: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Once the gap and feasibility tests hold, keep iterating until `‖S Z‖_F` drops
    /// below this value. The gap only bounds `Tr(S Z)`, which is quadratic in the
    /// misalignment of low-rank `S` and `Z`, while `‖S Z‖_F` is linear in it.
    pub tol_compl: f64,
    /// Extra iterations allowed for the complementarity test. If it still fails, the
    /// converged iterate with the smallest `‖S Z‖_F` is returned.
    pub max_polish: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol_gap: 1e-8,
            tol_feas: 1e-9,
            max_iters: 100,
            step_fraction: 0.98,
            tol_compl: f64::INFINITY,
            max_polish: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::NumericalFailure => "numerical-failure",
        })
    }
}

/// Objective values and residuals at the start of an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    /// `primal − dual`.
    pub gap: f64,
    pub mu: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub x: DVector<f64>,
    /// `S = F(x)`.
    pub slack: BlockDiag,
    pub dual: BlockDiag,
    pub primal_value: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub history: Vec<IterateRecord>,
}

struct Direction {
    dx: DVector<f64>,
    ds: BlockDiag,
    dz: BlockDiag,
}

fn newton_direction<P: ConeProgram + ?Sized>(
    prog: &P,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    s_inv: &BlockDiag,
    z: &BlockDiag,
    target: &BlockDiag,
    dual_residual: &DVector<f64>,
) -> Direction {
    let rhs = prog.adjoint(target) - dual_residual;
    let dx = chol.solve(&rhs);
    let ds = prog.apply(&dx);
    let dz = target.add_scaled(-1.0, &BlockDiag::sym_product(s_inv, &ds, z));
    Direction { dx, ds, dz }
}

fn factor_schur(h: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = h.clone().cholesky() {
        return Some(c);
    }
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    [1e-14, 1e-12, 1e-10].into_iter().find_map(|eps| {
        let mut reg = h.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += eps * scale;
        }
        reg.cholesky()
    })
}

/// Runs the predictor-corrector method from the program's initial point.
pub fn solve_cone<P: ConeProgram + ?Sized>(prog: &P, opts: &IpmOptions) -> ConeSolution {
    let c = prog.cost();
    let f0 = prog.offset();
    let nu = f0.order() as f64;
    let (mut x, mut z) = prog.initial_point();
    let mut s = f0.add_scaled(1.0, &prog.apply(&x));
    let mut history = Vec::new();

    let finish = |x: DVector<f64>, s: BlockDiag, z: BlockDiag, it: usize, status, history| {
        let primal_value = c.dot(&x);
        let dual_value = -f0.inner(&z);
        ConeSolution { x, slack: s, dual: z, primal_value, dual_value, iterations: it, status, history }
    };

    let c_scale = 1.0 + c.amax();
    // Best converged iterate and its complementarity residual.
    let mut converged: Option<(DVector<f64>, BlockDiag, BlockDiag, usize, f64)> = None;
    let mut polish = 0;
    macro_rules! bail {
        ($status:expr, $it:expr) => {{
            return match converged {
                Some((x, s, z, it, _)) => finish(x, s, z, it, SolveStatus::Optimal, history),
                None => finish(x, s, z, $it, $status, history),
            };
        }};
    }
    for it in 0..=opts.max_iters {
        let rd = &c - prog.adjoint(&z);
        let primal = c.dot(&x);
        let dual = -f0.inner(&z);
        let gap = primal - dual;
        let mu = s.inner(&z) / nu;
        let feas = rd.amax() / c_scale;
        history.push(IterateRecord { iteration: it, primal, dual, gap, mu, dual_residual: feas });

        if gap.abs() <= opts.tol_gap * (1.0 + primal.abs()) && feas <= opts.tol_feas {
            let compl = BlockDiag::product_norm(&s, &z);
            if compl <= opts.tol_compl {
                return finish(x, s, z, it, SolveStatus::Optimal, history);
            }
            if converged.as_ref().is_none_or(|c| compl < c.4) {
                converged = Some((x.clone(), s.clone(), z.clone(), it, compl));
            }
            polish += 1;
            if polish > opts.max_polish {
                bail!(SolveStatus::Optimal, it);
            }
        }
        if it == opts.max_iters {
            break;
        }

        let Some(s_inv) = s.inverse_pd() else {
            bail!(SolveStatus::NumericalFailure, it);
        };
        let Some(chol) = factor_schur(prog.schur(&s_inv, &z)) else {
            bail!(SolveStatus::NumericalFailure, it);
        };

        // Predictor: pure Newton step towards μ = 0.
        let affine = newton_direction(prog, &chol, &s_inv, &z, &z.scaled(-1.0), &rd);
        let (Some(ap), Some(ad)) = (s.max_step(&affine.ds), z.max_step(&affine.dz)) else {
            bail!(SolveStatus::NumericalFailure, it);
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = s.add_scaled(ap, &affine.ds).inner(&z.add_scaled(ad, &affine.dz)) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector with second-order term.
        let target = s_inv
            .scaled(sigma * mu)
            .add_scaled(-1.0, &z)
            .add_scaled(-1.0, &BlockDiag::sym_product(&s_inv, &affine.ds, &affine.dz));
        let dir = newton_direction(prog, &chol, &s_inv, &z, &target, &rd);
        let (Some(ap), Some(ad)) = (s.max_step(&dir.ds), z.max_step(&dir.dz)) else {
            bail!(SolveStatus::NumericalFailure, it);
        };
        let mut ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);

        let mut accepted = None;
        for _ in 0..30 {
            let x_new = &x + &dir.dx * ap;
            let s_new = f0.add_scaled(1.0, &prog.apply(&x_new));
            if s_new.inverse_pd().is_some() {
                accepted = Some((x_new, s_new));
                break;
            }
            ap *= 0.5;
        }
        let Some((x_new, s_new)) = accepted else {
            bail!(SolveStatus::NumericalFailure, it);
        };
        x = x_new;
        s = s_new;
        z = z.add_scaled(ad, &dir.dz).hermitian_part();
    }
    let it = opts.max_iters;
    bail!(SolveStatus::MaxIterations, it)
}

/// Program given by explicit block matrices `F_0 … F_n`; used for small linear programs
/// and as a structure-free reference.
#[derive(Debug, Clone)]
pub struct DenseBlockProgram {
    pub cost: DVector<f64>,
    pub offset: BlockDiag,
    pub generators: Vec<BlockDiag>,
    pub start: DVector<f64>,
    /// Dual start; the identity when absent.
    pub dual_start: Option<BlockDiag>,
}

impl ConeProgram for DenseBlockProgram {
    fn num_vars(&self) -> usize {
        self.generators.len()
    }

    fn cost(&self) -> DVector<f64> {
        self.cost.clone()
    }

    fn offset(&self) -> BlockDiag {
        self.offset.clone()
    }

    fn apply(&self, dx: &DVector<f64>) -> BlockDiag {
        self.generators
            .iter()
            .zip(dx.iter())
            .fold(self.offset.zeros_like(), |acc, (f, &w)| acc.add_scaled(w, f))
    }

    fn adjoint(&self, z: &BlockDiag) -> DVector<f64> {
        DVector::from_iterator(self.generators.len(), self.generators.iter().map(|f| f.inner(z)))
    }

    fn initial_point(&self) -> (DVector<f64>, BlockDiag) {
        (self.start.clone(), self.dual_start.clone().unwrap_or_else(|| self.offset.identity_like()))
    }
}
