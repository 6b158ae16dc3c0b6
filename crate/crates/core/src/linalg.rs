//! Dense complex linear algebra shared by every module.
//!
//! Everything here works on small dense matrices (a few hundred rows at most), so
//! all decompositions are plain nalgebra calls with the orderings fixed up: Hermitian
//! eigenvalues come back ascending, singular values descending.

use nalgebra::{Complex, DMatrix, DVector};

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `(a + a*) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// `|u⟩⟨v|`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// Real part of `⟨x|A|x⟩`.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    (x.adjoint() * a * x)[(0, 0)].re
}

/// Real part of `Tr(AB)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max_k |v_k|`.
pub fn vector_max_abs(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(a: &CMatrix) -> HermitianEigen {
    let n = a.nrows();
    if n == 0 {
        return HermitianEigen { values: DVector::zeros(0), vectors: CMatrix::zeros(0, 0) };
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigenvalues(a: &CMatrix) -> DVector<f64> {
    let n = a.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let mut v: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

pub fn lambda_max(a: &CMatrix) -> f64 {
    eigenvalues(a).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn lambda_min(a: &CMatrix) -> f64 {
    eigenvalues(a).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Clips negative eigenvalues of a Hermitian matrix to zero.
pub fn project_psd(a: &CMatrix) -> CMatrix {
    let eig = hermitian_eigen(a);
    if eig.values.iter().all(|&v| v >= 0.0) {
        return hermitian_part(a);
    }
    let clipped = eig.values.map(|v| real(v.max(0.0)));
    let scaled = &eig.vectors * CMatrix::from_diagonal(&clipped);
    hermitian_part(&(scaled * eig.vectors.adjoint()))
}

/// Full singular value decomposition `A = U Σ V*` with `σ_1 ≥ … ≥ σ_k`, `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Square unitary of size `rows`.
    pub u: CMatrix,
    pub singular_values: DVector<f64>,
    /// `V*`, square unitary of size `cols`.
    pub v_adjoint: CMatrix,
}

impl Svd {
    pub fn new(a: &CMatrix) -> Svd {
        let (rows, cols) = a.shape();
        let k = rows.min(cols);
        let svd = a.clone().svd(true, true);
        let thin_u = svd.u.expect("left singular vectors requested");
        let thin_vt = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

        let singular_values = DVector::from_iterator(k, order.iter().map(|&i| svd.singular_values[i]));
        let mut u_k = CMatrix::zeros(rows, k);
        let mut vt_k = CMatrix::zeros(k, cols);
        for (dst, &src) in order.iter().enumerate() {
            u_k.set_column(dst, &thin_u.column(src));
            vt_k.set_row(dst, &thin_vt.row(src));
        }
        Svd { u: complete_unitary(&u_k), singular_values, v_adjoint: complete_unitary(&vt_k.adjoint()).adjoint() }
    }

    pub fn rank_count(&self) -> usize {
        self.singular_values.len()
    }
}

/// Extends orthonormal columns to a square unitary by Gram-Schmidt over the standard basis.
pub fn complete_unitary(cols: &CMatrix) -> CMatrix {
    let n = cols.nrows();
    let mut basis: Vec<CVector> = cols.column_iter().map(|c| c.into_owned()).collect();
    while basis.len() < n {
        let mut best: Option<(f64, CVector)> = None;
        for j in 0..n {
            let mut v = CVector::zeros(n);
            v[j] = real(1.0);
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&v);
                    v -= b * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        basis.push(v.unscale(norm));
    }
    CMatrix::from_columns(&basis)
}

/// Residual `‖A*A − I‖_F`.
pub fn unitarity_residual(a: &CMatrix) -> f64 {
    frobenius_norm(&(a.adjoint() * a - identity(a.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMatrix {
        CMatrix::from_row_slice(
            3,
            2,
            &[c64(1.0, 0.5), c64(0.0, -1.0), c64(2.0, 0.0), c64(0.3, 0.3), c64(-1.0, 0.2), c64(0.5, 0.0)],
        )
    }

    #[test]
    fn svd_reconstructs_and_is_sorted() {
        let a = sample();
        let svd = Svd::new(&a);
        assert!(svd.singular_values[0] >= svd.singular_values[1]);
        assert!(unitarity_residual(&svd.u) < 1e-12);
        assert!(unitarity_residual(&svd.v_adjoint) < 1e-12);
        let mut sigma = CMatrix::zeros(3, 2);
        for k in 0..2 {
            sigma[(k, k)] = real(svd.singular_values[k]);
        }
        let rebuilt = &svd.u * sigma * &svd.v_adjoint;
        assert!(max_abs(&(rebuilt - a)) < 1e-12);
    }

    #[test]
    fn eigen_ascending_and_reconstructs() {
        let a = sample();
        let h = &a * a.adjoint();
        let eig = hermitian_eigen(&h);
        assert!(eig.values[0] <= eig.values[1] && eig.values[1] <= eig.values[2]);
        let d = CMatrix::from_diagonal(&eig.values.map(real));
        let rebuilt = &eig.vectors * d * eig.vectors.adjoint();
        assert!(max_abs(&(rebuilt - &h)) < 1e-12);
        // rank two
        assert!(eig.values[0].abs() < 1e-12);
    }

    #[test]
    fn psd_projection_clips() {
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![real(-1.0), real(2.0)]));
        let p = project_psd(&a);
        assert!((p[(0, 0)].re).abs() < 1e-15);
        assert!((p[(1, 1)].re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trace_product_matches_product_trace() {
        let a = sample();
        let b = a.adjoint();
        assert!((trace_product(&a, &b) - (&a * &b).trace().re).abs() < 1e-12);
    }
}
