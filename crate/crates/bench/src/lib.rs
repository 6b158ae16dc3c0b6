//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udisc_core::linalg::{c64, real, CMatrix};
use udisc_core::{StateEnsemble, SymmetrySpec, UnitaryGroup};

fn unit_columns(mut a: CMatrix) -> CMatrix {
    for mut col in a.column_iter_mut() {
        let n = col.norm();
        col.unscale_mut(n);
    }
    a
}

/// Seeded random ensemble of `m` complex states in dimension `r`, uniform priors.
pub fn ensemble(r: usize, m: usize, seed: u64) -> StateEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = CMatrix::from_fn(r, m, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    StateEnsemble::with_uniform_priors(unit_columns(states)).expect("random states are independent")
}

/// Cyclic group of order `n` acting by shifts on `C^n`, with a random generator.
pub fn cyclic_gu(n: usize, seed: u64) -> SymmetrySpec {
    let shift = CMatrix::from_fn(n, n, |i, j| if i == (j + 1) % n { real(1.0) } else { real(0.0) });
    let group = UnitaryGroup::generate(&[shift], n).expect("shift generates a cyclic group");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = unit_columns(CMatrix::from_fn(n, 1, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
    SymmetrySpec::gu(group, phi.column(0).into_owned()).expect("valid GU set")
}
