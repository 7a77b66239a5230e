#![allow(dead_code)]

use opfun_core::linalg::{ComplexMatrix, HermitianMatrix, C64};
use opfun_core::random::{self, TestRng};
use opfun_core::scalar::{FunctionKind, PoleTerm, ScalarFunction};

/// Two rationals, a Gaussian and a product.
pub fn catalog() -> Vec<ScalarFunction> {
    let r2 = ScalarFunction::new(FunctionKind::Rational {
        constant: C64::new(0.0, 0.0),
        terms: vec![
            PoleTerm {
                pole: C64::new(0.5, 1.5),
                order: 2,
                coeff: C64::new(1.0, -0.5),
            },
            PoleTerm {
                pole: C64::new(-1.0, -2.0),
                order: 1,
                coeff: C64::new(0.7, 0.0),
            },
        ],
    })
    .unwrap();
    vec![
        ScalarFunction::pole(C64::new(0.0, 2.0), 5),
        r2,
        ScalarFunction::gaussian(0.4, 0.3),
        ScalarFunction::product(vec![
            ScalarFunction::gaussian(0.3, 0.0),
            ScalarFunction::pole(C64::new(0.2, -1.0), 1),
        ]),
    ]
}

/// Random Hermitian `H`; every third draw has a repeated eigenvalue.
pub fn operator(rng: &mut TestRng, d: usize, k: usize) -> HermitianMatrix {
    if d >= 2 && k % 3 == 1 {
        random::with_repeated_eigenvalue(rng, d, 1.0)
    } else {
        random::hermitian(rng, d, 1.0)
    }
}

pub fn perturbation(rng: &mut TestRng, d: usize) -> HermitianMatrix {
    random::hermitian(rng, d, 0.5)
}

pub fn argument(rng: &mut TestRng, d: usize) -> ComplexMatrix {
    random::complex_gaussian(rng, d, d) * C64::new(0.5, 0.0)
}

pub const DIMS: [usize; 5] = [1, 2, 3, 4, 6];
