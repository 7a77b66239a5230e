mod common;

use common::{argument, catalog, operator, perturbation, DIMS};
use opfun_core::identities::*;
use opfun_core::linalg::{ComplexMatrix, HermitianMatrix, C64};
use opfun_core::random;
use proptest::prelude::*;

fn assert_pass(r: &IdentityReport) {
    assert!(
        r.pass,
        "{} failed: rel {:e} > {:e} ({:?})",
        r.name, r.relative_residual, r.tolerance, r.metadata
    );
}

fn chain(
    seed: u64,
    d: usize,
    n: usize,
) -> (
    Vec<HermitianMatrix>,
    Vec<ComplexMatrix>,
    Vec<HermitianMatrix>,
) {
    let mut rng = random::rng(seed);
    let hs = (0..=n)
        .map(|k| operator(&mut rng, d, k + seed as usize))
        .collect();
    let vs = (0..n).map(|_| argument(&mut rng, d)).collect();
    let ws = (0..n).map(|_| perturbation(&mut rng, d)).collect();
    (hs, vs, ws)
}

#[test]
fn exact_identities_on_seeded_suite() {
    let fs = catalog();
    for seed in 0..50u64 {
        for &d in &DIMS {
            let f = &fs[seed as usize % fs.len()];
            let n = 1 + (seed as usize % 3);
            let (hs, vs, ws) = chain(seed, d, n);
            let j = seed as usize % (n + 1);
            let jset: Vec<usize> = (1..=n).filter(|k| (seed >> k) & 1 == 1).collect();
            assert_pass(&check_cov(f, &hs, &vs, j, &jset).unwrap());
            assert_pass(&check_expansion(f, &hs, &vs).unwrap());
            let hermitian_args: Vec<ComplexMatrix> =
                ws.iter().map(|w| w.matrix().clone()).collect();
            let js = 1 + seed as usize % n;
            assert_pass(&check_superscript_difference(f, &hs, &hermitian_args, js, 0.3).unwrap());
            assert_pass(
                &check_superscript_difference_general(f, &hs, &vs, j, &ws[0], &jset).unwrap(),
            );
            for r in check_weight_independence(f, &hs, &vs).unwrap() {
                assert_pass(&r);
            }
            let (h, v) = (&hs[0], &ws[0]);
            assert_pass(&check_difference_formula(f, h, v).unwrap());
            assert_pass(&check_first_derivative_formula(f, h, v).unwrap());
            assert_pass(
                &check_second_resolvent(
                    h,
                    v,
                    C64::new(0.3 - seed as f64 * 0.01, 0.5 + d as f64 * 0.2),
                )
                .unwrap(),
            );
            for r in check_divexp(f, h, v, 1, 2).unwrap() {
                assert_pass(&r);
            }
            let k = check_krein_decomposition(f, h, v, 0.7, 2, None).unwrap();
            assert!(k.all_hold(), "{k:?}");
        }
    }
}

#[test]
fn divexp_higher_orders() {
    let fs = catalog();
    for seed in 0..10u64 {
        let mut rng = random::rng(100 + seed);
        let h = operator(&mut rng, 3, seed as usize);
        let v = perturbation(&mut rng, 3);
        for (k, n) in [(1, 3), (2, 3), (2, 4), (3, 4)] {
            for r in check_divexp(&fs[seed as usize % fs.len()], &h, &v, k, n).unwrap() {
                assert_pass(&r);
            }
        }
    }
}

#[test]
fn krein_split_pair() {
    let f = catalog().remove(0);
    let mut rng = random::rng(5);
    let h = random::hermitian(&mut rng, 5, 1.0);
    let v = perturbation(&mut rng, 5);
    let vp = perturbation(&mut rng, 5);
    for t in [0.0, 0.5, 1.0] {
        for n in 1..=3 {
            let c = check_krein_decomposition(&f, &h, &v, t, n, Some(&vp)).unwrap();
            assert!(c.all_hold(), "{c:?}");
            assert!(c.first.margin() >= 0.0 && c.second.margin() >= 0.0);
        }
    }
}

#[test]
fn duhamel_grid() {
    for seed in 0..20u64 {
        let mut rng = random::rng(200 + seed);
        let d = 1 + seed as usize % 6;
        let h = random::hermitian(&mut rng, d, 1.0);
        let v = perturbation(&mut rng, d);
        for x in [-4.0, -1.5, 0.0, 0.5, 2.0, 4.0] {
            let r = check_duhamel(&h, &v, x, DUHAMEL_NODES).unwrap();
            assert_pass(&r);
        }
    }
}

#[test]
fn zero_perturbations_give_zero_sides() {
    let f = &catalog()[2];
    let mut rng = random::rng(9);
    let h = random::hermitian(&mut rng, 3, 1.0);
    let z = HermitianMatrix::zeros(3);
    let zm = z.matrix().clone();
    let r = check_expansion(
        f,
        &[h.clone(), h.clone(), h.clone()],
        &[zm.clone(), zm.clone()],
    )
    .unwrap();
    assert_eq!((r.lhs_norm, r.rhs_norm), (0.0, 0.0));
    let r = check_cov(f, &[h.clone(), h.clone()], &[zm.clone()], 1, &[1]).unwrap();
    assert_eq!(r.residual_norm, 0.0);
    let r = check_difference_formula(f, &h, &z).unwrap();
    assert_eq!((r.lhs_norm, r.rhs_norm), (0.0, 0.0));
    for r in check_divexp(f, &h, &z, 1, 2).unwrap() {
        assert_eq!(r.residual_norm, 0.0);
    }
    let k = check_krein_decomposition(f, &h, &z, 0.5, 2, None).unwrap();
    assert_eq!((k.first.trace_abs, k.second.trace_abs), (0.0, 0.0));
    assert!(k.all_hold());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // doubling (H, V) rescales both sides alike, so the verdict is unchanged for
    // the bounded-argument identities with a homogeneous symbol
    #[test]
    fn pass_is_scale_invariant_for_polynomial_symbol(seed in any::<u64>(), d in 1usize..5) {
        let f = opfun_core::ScalarFunction::real_polynomial(&[0.5, -1.0, 0.3, 0.2]);
        let mut rng = random::rng(seed);
        let h = operator(&mut rng, d, seed as usize);
        let v = perturbation(&mut rng, d);
        let a = check_superscript_difference(&f, &[h.clone(), h.clone()], &[v.matrix().clone()], 1, 0.4).unwrap();
        let a2 = check_superscript_difference(&f, &[h.scale(2.0), h.scale(2.0)], &[v.matrix() * C64::new(2.0, 0.0)], 1, 0.4).unwrap();
        prop_assert_eq!(a.pass, a2.pass);
        prop_assert!(a.pass);
    }

    #[test]
    fn cov_holds_for_random_slot(seed in any::<u64>(), d in 1usize..5, n in 1usize..4) {
        let fs = catalog();
        let f = &fs[(seed % 4) as usize];
        let (hs, vs, _) = chain(seed, d, n);
        let j = (seed as usize >> 3) % (n + 1);
        let r = check_cov(f, &hs, &vs, j, &[n]).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn report_invariant(seed in any::<u64>(), tol in 1e-14f64..1e-6) {
        let mut rng = random::rng(seed);
        let h = random::hermitian(&mut rng, 3, 1.0);
        let v = perturbation(&mut rng, 3);
        let r = check_second_resolvent(&h, &v, C64::new(0.1, 1.0)).unwrap().with_tolerance(tol);
        prop_assert_eq!(r.pass, r.relative_residual <= tol);
        let m = r.lhs_norm.max(r.rhs_norm);
        prop_assert!((r.relative_residual - r.residual_norm / m).abs() <= 1e-15 * r.relative_residual.max(1e-300));
    }
}
