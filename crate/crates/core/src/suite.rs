//! Seeded randomized cases shared by the command-line driver and the
//! acceptance harness.

use crate::error::Result;
use crate::identities::*;
use crate::linalg::{eigendecompose_default, op_norm, ComplexMatrix, HermitianMatrix, C64};
use crate::moi::{moi_spectral, MoiRequest};
use crate::random::{self, TestRng};
use crate::relbound::{certify, hypothesis_report, shift_bound_check};
use crate::scalar::{FunctionKind, PoleTerm, ScalarFunction};

/// Two rationals, a Gaussian and a Gaussian-rational product.
pub fn catalog() -> Vec<ScalarFunction> {
    let two_poles = ScalarFunction::new(FunctionKind::Rational {
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
    .expect("valid rational");
    vec![
        ScalarFunction::pole(C64::new(0.0, 2.0), 5),
        two_poles,
        ScalarFunction::gaussian(0.4, 0.3),
        ScalarFunction::product(vec![
            ScalarFunction::gaussian(0.3, 0.0),
            ScalarFunction::pole(C64::new(0.2, -1.0), 1),
        ]),
    ]
}

/// Random Hermitian matrix; every third index draws a repeated eigenvalue.
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

/// An inequality `lhs <= rhs` with its margin.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub name: String,
    pub dim: usize,
    pub seed: u64,
    pub param: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundRow {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// Up to relative rounding `1e-9`.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteCase {
    pub reports: Vec<IdentityReport>,
    pub bounds: Vec<BoundRow>,
}

/// Every exact identity and a-priori inequality on one seeded draw. The chain
/// length `n` cycles through 1..=3 with the seed.
pub fn identity_case(f: &ScalarFunction, seed: u64, d: usize) -> Result<SuiteCase> {
    let n = 1 + (seed as usize % 3);
    let mut rng = random::rng(seed);
    let hs: Vec<HermitianMatrix> = (0..=n)
        .map(|k| operator(&mut rng, d, k + seed as usize))
        .collect();
    let vs: Vec<ComplexMatrix> = (0..n).map(|_| argument(&mut rng, d)).collect();
    let ws: Vec<HermitianMatrix> = (0..n).map(|_| perturbation(&mut rng, d)).collect();
    let j = seed as usize % (n + 1);
    let jset: Vec<usize> = (1..=n).filter(|k| (seed >> k) & 1 == 1).collect();
    let mut out = SuiteCase::default();
    let mut push = |r: IdentityReport| out.reports.push(r.with_seed(seed));

    push(check_cov(f, &hs, &vs, j, &jset)?);
    push(check_expansion(f, &hs, &vs)?);
    let hermitian_args: Vec<ComplexMatrix> = ws.iter().map(|w| w.matrix().clone()).collect();
    push(check_superscript_difference(
        f,
        &hs,
        &hermitian_args,
        1 + seed as usize % n,
        0.3,
    )?);
    push(check_superscript_difference_general(
        f, &hs, &vs, j, &ws[0], &jset,
    )?);
    for r in check_weight_independence(f, &hs, &vs)? {
        push(r);
    }
    let (h, v) = (&hs[0], &ws[0]);
    push(check_difference_formula(f, h, v)?);
    push(check_first_derivative_formula(f, h, v)?);
    push(check_second_resolvent(
        h,
        v,
        C64::new(0.3 - (seed % 50) as f64 * 0.01, 0.5 + d as f64 * 0.2),
    )?);
    push(check_duhamel(
        h,
        v,
        -4.0 + 8.0 * ((seed % 17) as f64 / 16.0),
        DUHAMEL_NODES,
    )?);
    for r in check_divexp(f, h, v, 1, 2)? {
        push(r);
    }
    let k = check_krein_decomposition(f, h, v, 0.7, 2, None)?;
    push(k.identity.clone());

    let row = |name: &str, param: f64, lhs: f64, rhs: f64| BoundRow {
        name: name.into(),
        dim: d,
        seed,
        param,
        lhs,
        rhs,
    };
    out.bounds.push(row(
        "krein-trace-bound-first",
        2.0,
        k.first.trace_abs,
        k.first.bound,
    ));
    out.bounds.push(row(
        "krein-trace-bound-second",
        2.0,
        k.second.trace_abs,
        k.second.bound,
    ));

    // a-priori operator-norm bound of the chain integral
    let ss = hs
        .iter()
        .map(eigendecompose_default)
        .collect::<Result<Vec<_>>>()?;
    let res = moi_spectral(&MoiRequest::new(f.clone(), ss, vs.clone())?)?;
    out.bounds.push(row(
        &format!("moi-apriori-{}", res.bound_source.label()),
        n as f64,
        op_norm(&res.value),
        res.apriori_bound,
    ));

    // shift bound along H + tV and the resolvent Schatten inequalities
    let cert = certify(h, v, 0.5)?;
    for r in shift_bound_check(h, v, &cert, &[-1.0, 0.0, 0.5, 1.0])? {
        out.bounds
            .push(row("shift-resolvent-bound", r.t, r.lhs, r.rhs));
    }
    let hyp = hypothesis_report(h, v, 2 + seed as usize % 2, 0.5)?;
    for r in &hyp.resolvent_bounds {
        out.bounds.push(row(
            &format!("resolvent-schatten-bound-p{}", r.p),
            r.t,
            r.lhs,
            r.rhs,
        ));
    }
    Ok(out)
}
