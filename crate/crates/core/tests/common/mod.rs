//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udisc_core::linalg::{self, c64, real, CMatrix, CVector, Complex64};
use udisc_core::{StateEnsemble, SymmetrySpec, UnitaryGroup};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry<R: Rng>(rng: &mut R, complex: bool) -> Complex64 {
    let re = rng.random_range(-1.0..1.0);
    let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
    c64(re, im)
}

pub fn random_vector<R: Rng>(rng: &mut R, d: usize, complex: bool) -> CVector {
    let v = CVector::from_fn(d, |_, _| entry(rng, complex));
    let n = v.norm();
    v.unscale(n)
}

/// Unit-norm columns with `σ_m / σ_1 ≥ min_ratio`.
pub fn random_states<R: Rng>(rng: &mut R, r: usize, m: usize, complex: bool, min_ratio: f64) -> CMatrix {
    loop {
        let mut a = CMatrix::from_fn(r, m, |_, _| entry(rng, complex));
        for mut col in a.column_iter_mut() {
            let n = col.norm();
            col.unscale_mut(n);
        }
        let sv = a.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo >= min_ratio * hi {
            return a;
        }
    }
}

/// Strictly positive priors bounded away from zero.
pub fn random_priors<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn random_ensemble<R: Rng>(rng: &mut R, r: usize, m: usize) -> StateEnsemble {
    let states = random_states(rng, r, m, true, 0.05);
    let priors = random_priors(rng, m);
    StateEnsemble::new(states, priors).unwrap()
}

/// Unitary from the QR factorization of a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| entry(rng, true));
    a.qr().q()
}

/// States `(1,1,1)/√3`, `(1,1,0)/√2`, `(0,1,1)/√2`.
pub fn three_states() -> CMatrix {
    let (t, s) = (1.0 / 3f64.sqrt(), 1.0 / 2f64.sqrt());
    CMatrix::from_row_slice(3, 3, &[real(t), real(s), real(0.0), real(t), real(s), real(s), real(t), real(0.0), real(s)])
}

fn diag(entries: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(entries.len(), entries.iter().map(|&x| real(x))))
}

/// Four diagonal sign matrices acting on `(2,2,1,3)/(3√2)`.
pub fn sign_group_spec() -> SymmetrySpec {
    let group = UnitaryGroup::new(vec![
        diag(&[1.0, 1.0, 1.0, 1.0]),
        diag(&[1.0, -1.0, 1.0, -1.0]),
        diag(&[-1.0, 1.0, 1.0, -1.0]),
        diag(&[-1.0, -1.0, 1.0, 1.0]),
    ])
    .unwrap();
    let c = 1.0 / (3.0 * 2f64.sqrt());
    let phi = CVector::from_iterator(4, [2.0, 2.0, 1.0, 3.0].iter().map(|&x| real(c * x)));
    SymmetrySpec::gu(group, phi).unwrap()
}

/// Cyclic shift `|j⟩ → |j+1⟩`.
pub fn shift(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| if i == (j + 1) % n { real(1.0) } else { real(0.0) })
}

pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    CMatrix::from_fn(n, n, |i, j| if perm[j] == i { real(1.0) } else { real(0.0) })
}

/// Left regular representation of a finite matrix group: `L_g|h⟩ = |gh⟩`.
pub fn regular_representation(g: &UnitaryGroup) -> UnitaryGroup {
    let mats = g
        .elements()
        .iter()
        .map(|a| {
            let perm: Vec<usize> = g.elements().iter().map(|b| g.nearest(&(a * b)).0).collect();
            permutation_matrix(&perm)
        })
        .collect();
    UnitaryGroup::new(mats).unwrap()
}

/// Abstract groups of order ≤ 8, each given by a faithful matrix representation.
pub fn small_groups() -> Vec<(&'static str, UnitaryGroup)> {
    let kron = |a: &CMatrix, b: &CMatrix| a.kronecker(b);
    let i2 = linalg::identity(2);
    let i4 = linalg::identity(4);
    let mut out = Vec::new();
    for n in 2..=8 {
        out.push((["Z2", "Z3", "Z4", "Z5", "Z6", "Z7", "Z8"][n - 2], UnitaryGroup::generate(&[shift(n)], n).unwrap()));
    }
    out.push(("Z2xZ2", UnitaryGroup::generate(&[kron(&shift(2), &i2), kron(&i2, &shift(2))], 4).unwrap()));
    out.push(("Z2xZ4", UnitaryGroup::generate(&[kron(&shift(2), &i4), kron(&i2, &shift(4))], 8).unwrap()));
    out.push((
        "S3",
        UnitaryGroup::generate(&[permutation_matrix(&[1, 0, 2]), permutation_matrix(&[1, 2, 0])], 6).unwrap(),
    ));
    out.push((
        "D4",
        UnitaryGroup::generate(&[permutation_matrix(&[1, 2, 3, 0]), permutation_matrix(&[0, 3, 2, 1])], 8).unwrap(),
    ));
    let qi = CMatrix::from_row_slice(2, 2, &[c64(0.0, 1.0), real(0.0), real(0.0), c64(0.0, -1.0)]);
    let qj = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(-1.0), real(0.0)]);
    out.push(("Q8", UnitaryGroup::generate(&[qi, qj], 8).unwrap()));
    out.into_iter().map(|(name, g)| (name, regular_representation(&g))).collect()
}

/// `W (L ⊕ I_extra) W*`.
pub fn conjugated<R: Rng>(rng: &mut R, g: &UnitaryGroup, extra: usize) -> UnitaryGroup {
    let d = g.dim() + extra;
    let w = random_unitary(rng, d);
    let mats = g
        .elements()
        .iter()
        .map(|u| {
            let mut big = linalg::identity(d);
            big.view_mut((0, 0), (g.dim(), g.dim())).copy_from(u);
            &w * big * w.adjoint()
        })
        .collect();
    UnitaryGroup::new(mats).unwrap()
}

/// A random GU instance over one of the small groups; `index` selects the group.
pub fn random_gu<R: Rng>(rng: &mut R, index: usize) -> (&'static str, SymmetrySpec) {
    let groups = small_groups();
    let (name, g) = groups[index % groups.len()].clone();
    let extra = if g.order() < 8 { rng.random_range(0..=(8 - g.order()).min(2)) } else { 0 };
    let g = conjugated(rng, &g, extra);
    loop {
        let phi = random_vector(rng, g.dim(), true);
        let spec = SymmetrySpec::gu(g.clone(), phi).unwrap();
        if let Ok(e) = udisc_core::expand(&spec) {
            let sv = e.states().singular_values();
            if sv.min() > 0.05 * sv.max() {
                return (name, spec);
            }
        }
    }
}

/// `(Φ*Φ)⁻¹` by direct inversion.
pub fn inverse_gram(states: &CMatrix) -> CMatrix {
    (states.adjoint() * states).try_inverse().expect("independent states")
}

/// Whether `I − D G D ⪰ 0` for `D = diag(√p)`, tested through all principal minors
/// (`m ≤ 3`). Equivalent to `λ_max(Σ p_i Q_i) ≤ 1`.
pub fn grid_feasible(g: &CMatrix, p: &[f64]) -> bool {
    let m = p.len();
    let sq: Vec<f64> = p.iter().map(|x| x.sqrt()).collect();
    let a = |i: usize, j: usize| -> Complex64 {
        let id = if i == j { 1.0 } else { 0.0 };
        real(id) - g[(i, j)] * real(sq[i] * sq[j])
    };
    let tol = -1e-12;
    for i in 0..m {
        if a(i, i).re < tol {
            return false;
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            if (a(i, i) * a(j, j) - a(i, j) * a(j, i)).re < tol {
                return false;
            }
        }
    }
    if m == 3 {
        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        if det.re < tol {
            return false;
        }
    }
    true
}

/// Best `Σ η_i p_i` over the feasible points of a grid with `n` steps per coordinate.
/// The feasible set is down-closed, so for `m = 3` the largest feasible last coordinate
/// decreases along the second coordinate and a staircase walk suffices.
pub fn grid_oracle(e: &StateEnsemble, n: usize) -> f64 {
    let g = inverse_gram(e.states());
    let eta = e.priors();
    let h = 1.0 / n as f64;
    let x = |k: usize| k as f64 * h;
    match e.num_states() {
        1 => 1.0,
        2 => {
            let mut best = 0.0f64;
            let mut k2 = n;
            for k1 in 0..=n {
                while !grid_feasible(&g, &[x(k1), x(k2)]) {
                    if k2 == 0 {
                        return best;
                    }
                    k2 -= 1;
                }
                best = best.max(eta[0] * x(k1) + eta[1] * x(k2));
            }
            best
        }
        3 => {
            let mut best = 0.0f64;
            for k1 in 0..=n {
                if !grid_feasible(&g, &[x(k1), 0.0, 0.0]) {
                    break;
                }
                let mut k3 = n;
                for k2 in 0..=n {
                    if !grid_feasible(&g, &[x(k1), x(k2), 0.0]) {
                        break;
                    }
                    while !grid_feasible(&g, &[x(k1), x(k2), x(k3)]) {
                        k3 -= 1;
                    }
                    best = best.max(eta[0] * x(k1) + eta[1] * x(k2) + eta[2] * x(k3));
                }
            }
            best
        }
        m => panic!("grid oracle supports m ≤ 3, got {m}"),
    }
}

/// Real symmetric matrix of squared moduli `|A_ij|²`.
pub fn squared_moduli(a: &CMatrix) -> DMatrix<f64> {
    a.map(|z| z.norm_sqr())
}
