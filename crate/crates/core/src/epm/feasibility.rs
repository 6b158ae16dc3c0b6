//! Nonnegative solutions of `A b = y`.
//!
//! Feasibility is decided by a phase-I linear program, `min t` subject to `b ≥ 0` and
//! `|A b − y| ≤ t` componentwise, solved with the same interior-point engine as the
//! discrimination SDP (diagonal blocks only). Among feasible points the minimum-norm
//! one is returned; it is found as a least-distance problem reduced to NNLS.

use nalgebra::{DMatrix, DVector};

use crate::solver::cone::{solve_cone, Block, BlockDiag, DenseBlockProgram, IpmOptions, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct LpFeasibility {
    /// Phase-I objective at the final iterate: an upper bound on `min ‖Ab − y‖_∞`.
    pub residual: f64,
    /// Dual objective: a lower bound on `min ‖Ab − y‖_∞`.
    pub lower_bound: f64,
    pub status: SolveStatus,
    /// Minimum-norm nonnegative solution when `residual ≤ tol`.
    pub solution: Option<Vec<f64>>,
}

impl LpFeasibility {
    pub fn feasible(&self) -> bool {
        self.solution.is_some()
    }
}

fn phase_one(a: &DMatrix<f64>, y: &DVector<f64>) -> (f64, f64, SolveStatus, DVector<f64>) {
    let (m, s) = a.shape();
    let diag = |v: DVector<f64>| Block::Diagonal(v);
    let offset = BlockDiag::new(vec![diag(DVector::zeros(s)), diag(y.clone()), diag(-y)]);
    let mut generators = Vec::with_capacity(s + 1);
    for k in 0..s {
        let mut e = DVector::zeros(s);
        e[k] = 1.0;
        let col = a.column(k).into_owned();
        generators.push(BlockDiag::new(vec![diag(e), diag(-&col), diag(col)]));
    }
    generators.push(BlockDiag::new(vec![
        diag(DVector::zeros(s)),
        diag(DVector::from_element(m, 1.0)),
        diag(DVector::from_element(m, 1.0)),
    ]));
    let b0 = DVector::from_element(s, 1.0 / s as f64);
    let t0 = (a * &b0 - y).amax() + 1.0;
    let mut start = b0.insert_row(s, t0);
    start[s] = t0;
    let mut cost = DVector::zeros(s + 1);
    cost[s] = 1.0;
    let program = DenseBlockProgram { cost, offset, generators, start, dual_start: None };
    let opts = IpmOptions { tol_gap: 1e-12, tol_feas: 1e-12, max_iters: 200, ..IpmOptions::default() };
    let sol = solve_cone(&program, &opts);
    (sol.primal_value, sol.dual_value, sol.status, sol.x.rows(0, s).into_owned())
}

/// Decides whether `A b = y` has a solution `b ≥ 0` with `‖Ab − y‖_∞ ≤ tol`.
pub fn nonnegative_solution(a: &DMatrix<f64>, y: &DVector<f64>, tol: f64) -> LpFeasibility {
    let (residual, lower_bound, status, b_ipm) = phase_one(a, y);
    let solution = if residual <= tol {
        min_norm_nonnegative(a, y, tol).or_else(|| {
            let b: Vec<f64> = b_ipm.iter().map(|v| v.max(0.0)).collect();
            let r = (a * DVector::from_row_slice(&b) - y).amax();
            (r <= tol).then_some(b)
        })
    } else {
        None
    };
    LpFeasibility { residual, lower_bound, status, solution }
}

/// Minimum-norm `b ≥ 0` with `Ab = y`, if one exists within `tol`.
pub fn min_norm_nonnegative(a: &DMatrix<f64>, y: &DVector<f64>, tol: f64) -> Option<Vec<f64>> {
    let s = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    let cutoff = 1e-12 * smax.max(1.0);
    let pinv = svd.pseudo_inverse(cutoff).ok()?;
    let particular = &pinv * y;

    // Null space basis from the full right singular vectors.
    let full = a.transpose() * a;
    let eig = full.symmetric_eigen();
    let null_cols: Vec<DVector<f64>> = (0..s)
        .filter(|&k| eig.eigenvalues[k].abs() <= cutoff * smax.max(1.0))
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();

    let b = if null_cols.is_empty() {
        particular
    } else {
        let null = DMatrix::from_columns(&null_cols);
        // min ‖w‖ s.t. N w ≥ −b₀; b₀ is orthogonal to null(A) so ‖b₀ + Nw‖² = ‖b₀‖² + ‖w‖².
        let w = least_distance(&null, &(-&particular))?;
        &particular + null * w
    };
    let b: Vec<f64> = b.iter().map(|&v| if v < 0.0 && v > -tol { 0.0 } else { v }).collect();
    if b.iter().any(|&v| v < 0.0) {
        return None;
    }
    let r = (a * DVector::from_row_slice(&b) - y).amax();
    (r <= tol).then_some(b)
}

/// `min ‖w‖ s.t. G w ≥ h` through NNLS on `[Gᵀ; hᵀ] u ≈ e_{n+1}`.
pub fn least_distance(g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let (rows, n) = g.shape();
    let mut e = DMatrix::zeros(n + 1, rows);
    e.view_mut((0, 0), (n, rows)).copy_from(&g.transpose());
    e.row_mut(n).copy_from(&h.transpose());
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * u - f;
    if r.norm() <= 1e-12 || r[n].abs() <= 1e-14 {
        return None;
    }
    Some(DVector::from_iterator(n, (0..n).map(|j| -r[j] / r[n])))
}

/// Lawson-Hanson active-set NNLS: `min ‖Ax − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 10.0 * f64::EPSILON * a.amax().max(1.0) * (a.nrows().max(n) as f64);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |i, k| a[(i, idx[k])]);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-13)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut z = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };

    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > tol) {
                x = z;
                break;
            }
            let alpha = (0..n)
                .filter(|&k| passive[k] && z[k] <= tol)
                .map(|k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (z - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= tol {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
