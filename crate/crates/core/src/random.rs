//! Seeded random test ensembles.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, HermitianMatrix, C64};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut TestRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Gaussian matrix with independent `N(0,1/2) + i N(0,1/2)` entries.
pub fn complex_gaussian(rng: &mut TestRng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(normal(rng) * s, normal(rng) * s)
    })
}

/// GUE-type Hermitian matrix `(G + G^*)/2` times `scale`.
pub fn hermitian(rng: &mut TestRng, d: usize, scale: f64) -> HermitianMatrix {
    let g = complex_gaussian(rng, d, d);
    let h = (&g + g.adjoint()) * C64::new(0.5 * scale, 0.0);
    HermitianMatrix::new(h).expect("square")
}

/// Real symmetric matrix with standard normal entries, times `scale`.
pub fn real_symmetric(rng: &mut TestRng, d: usize, scale: f64) -> HermitianMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| normal(rng));
    let s = (&g + g.transpose()) * (0.5 * scale);
    HermitianMatrix::new(s.map(|x| C64::new(x, 0.0))).expect("square")
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix.
pub fn unitary(rng: &mut TestRng, d: usize) -> ComplexMatrix {
    let g = complex_gaussian(rng, d, d);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix the phases so the distribution is Haar
    let mut q = q;
    for j in 0..d {
        let p = r[(j, j)];
        let ph = if p.norm() > 0.0 {
            p / p.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// `U diag(values) U^*` with Haar `U`.
pub fn with_spectrum(rng: &mut TestRng, values: &[f64]) -> HermitianMatrix {
    let d = values.len();
    let u = unitary(rng, d);
    let mut ud = u.clone();
    for j in 0..d {
        for i in 0..d {
            ud[(i, j)] *= values[j];
        }
    }
    HermitianMatrix::new(ud * u.adjoint()).expect("square")
}

/// Hermitian matrix of dimension `d >= 2` whose spectrum has one eigenvalue of
/// multiplicity `min(d, 2 + d/3)` (exact up to rounding of the conjugation).
pub fn with_repeated_eigenvalue(rng: &mut TestRng, d: usize, scale: f64) -> HermitianMatrix {
    let mult = (2 + d / 3).min(d);
    let repeated = normal(rng) * scale;
    let mut values: Vec<f64> = vec![repeated; mult];
    values.extend((mult..d).map(|_| normal(rng) * scale));
    with_spectrum(rng, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigendecompose_default;

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(3);
        let u = unitary(&mut r, 5);
        assert!((u.adjoint() * &u - ComplexMatrix::identity(5, 5)).norm() < 1e-13);
    }

    #[test]
    fn repeated_eigenvalue_clusters() {
        let mut r = rng(11);
        let h = with_repeated_eigenvalue(&mut r, 6, 1.0);
        let s = eigendecompose_default(&h).unwrap();
        assert_eq!(s.cluster_count(), 6 - 4 + 1);
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = hermitian(&mut rng(5), 4, 1.0);
        let b = hermitian(&mut rng(5), 4, 1.0);
        assert_eq!(a, b);
    }
}
