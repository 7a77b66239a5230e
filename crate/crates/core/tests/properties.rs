mod common;

use common::{argument, catalog, operator, perturbation};
use opfun_core::derivatives::{fd_derivative, gateaux_derivative, taylor_report};
use opfun_core::identities::{check_first_derivative_formula, check_second_resolvent};
use opfun_core::linalg::{
    eigendecompose_default, frobenius, matrix_function, op_norm, schatten_norm, ComplexMatrix,
    HermitianMatrix, C64,
};
use opfun_core::mmio;
use opfun_core::moi::quadrature::{moi_quadrature, QuadratureOptions};
use opfun_core::moi::{moi, moi_spectral, MoiRequest};
use opfun_core::piecewise::{apply_density, divided_difference_density};
use opfun_core::random::{self, rng};
use opfun_core::relbound::{certify, rel_norm};
use opfun_core::scalar::{divided_difference, ScalarFunction};
use proptest::prelude::*;
use rand::Rng;

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn dist(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    op_norm(&(a - b))
}

// linalg

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn real_function_gives_hermitian(seed in any::<u64>(), d in 1usize..8) {
        let mut r = rng(seed);
        let s = eigendecompose_default(&random::hermitian(&mut r, d, 2.0)).unwrap();
        for f in [ScalarFunction::gaussian(0.7, 0.0), ScalarFunction::real_polynomial(&[0.5, -1.0, 0.0, 2.0])] {
            let m = matrix_function(&s, &f).unwrap();
            prop_assert!(dist(&m, &m.adjoint()) <= 1e-12 * op_norm(&m).max(1.0));
        }
    }

    #[test]
    fn parseval(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut r = rng(seed);
        let a = random::complex_gaussian(&mut r, rows, cols);
        let s2 = schatten_norm(&a, 2.0).unwrap();
        let f = frobenius(&a);
        prop_assert!((s2 * s2 - f * f).abs() <= 1e-12 * f * f);
    }

    #[test]
    fn unitary_invariance(seed in any::<u64>(), d in 1usize..7, p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY])) {
        let mut r = rng(seed);
        let a = random::complex_gaussian(&mut r, d, d);
        let u = random::unitary(&mut r, d);
        let w = random::unitary(&mut r, d);
        let x = schatten_norm(&a, p).unwrap();
        let y = schatten_norm(&(&u * &a * &w), p).unwrap();
        prop_assert!((x - y).abs() <= 1e-10 * x);
    }

    #[test]
    fn spectral_mapping(seed in any::<u64>(), d in 1usize..8) {
        let mut r = rng(seed);
        let s = eigendecompose_default(&random::hermitian(&mut r, d, 1.0)).unwrap();
        let f = ScalarFunction::real_polynomial(&[0.1, 0.0, -1.0, 0.3]);
        let fh = HermitianMatrix::new(matrix_function(&s, &f).unwrap()).unwrap();
        let got = eigendecompose_default(&fh).unwrap().eigenvalues().to_vec();
        let mut want: Vec<f64> = s.eigenvalues().iter().map(|&x| f.eval(x).re).collect();
        want.sort_by(|a, b| a.total_cmp(b));
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10);
        }
    }
}

// divided differences and densities

#[test]
fn divided_difference_permutation_symmetry() {
    let mut r = rng(1);
    for f in catalog() {
        for n in 0..=5 {
            for _ in 0..20 {
                let mut nodes: Vec<f64> = (0..=n).map(|_| r.random_range(-2.0..2.0)).collect();
                if n >= 2 {
                    nodes[1] = nodes[0];
                }
                let base = divided_difference(&f, &nodes).unwrap();
                for _ in 0..6 {
                    let i = r.random_range(0..=n);
                    let j = r.random_range(0..=n);
                    nodes.swap(i, j);
                    assert_eq!(divided_difference(&f, &nodes).unwrap(), base);
                }
            }
        }
    }
}

#[test]
fn leibniz_step_for_weighted_symbols() {
    // (f u^p)^{(n+1)} = (f u^{p+1})^{(n+1)} / u - (n+1) (f u^p)^{(n)} / u
    let mut r = rng(2);
    for f in catalog() {
        for n in 0..=4usize {
            for p in 0..=n {
                let g = f.times_u_pow(p);
                let gu = f.times_u_pow(p + 1);
                for _ in 0..100 {
                    let x: f64 = r.random_range(-3.0..3.0);
                    let u = C64::new(x, -1.0);
                    let lhs = g.deriv(x, n + 1);
                    let rhs = (gu.deriv(x, n + 1) - g.deriv(x, n) * (n + 1) as f64) / u;
                    assert!(
                        (lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()).max(1e-12),
                        "{} n={n} p={p} x={x}",
                        f.describe()
                    );
                    // with coefficient n instead of n+1 the two sides differ by (f u^p)^{(n)}/u
                    let literal = (gu.deriv(x, n + 1) - g.deriv(x, n) * n as f64) / u;
                    let gap = g.deriv(x, n) / u;
                    assert!(
                        (literal - lhs - gap).norm()
                            <= 1e-8 * gap.norm().max(lhs.norm()).max(1e-12)
                    );
                }
            }
        }
    }
}

#[test]
fn mean_value_bound() {
    let mut r = rng(3);
    let fs = catalog();
    for t in 0..1000 {
        let f = &fs[t % fs.len()];
        let n = 1 + t % 4;
        let nodes: Vec<f64> = (0..=n).map(|_| r.random_range(-2.0..2.0)).collect();
        let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = 400;
        let step = (hi - lo) / m as f64;
        let (mut top, mut slope) = (0.0_f64, 0.0_f64);
        for i in 0..=m {
            let x = lo + step * i as f64;
            top = top.max(f.deriv(x, n).norm());
            slope = slope.max(f.deriv(x, n + 1).norm());
        }
        // sampled maximum plus the largest possible rise between samples
        let sup = top + 0.5 * step * slope * 1.01;
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let dd = divided_difference(f, &nodes).unwrap().norm();
        assert!(
            dd <= sup / fact * (1.0 + 1e-12),
            "{} nodes {nodes:?}: {dd} > {}",
            f.describe(),
            sup / fact
        );
    }
}

#[test]
fn density_reproduces_monomial_divided_differences() {
    let mut r = rng(4);
    for k in 1..=5usize {
        for _ in 0..200 {
            let mut nodes: Vec<f64> = (0..=k).map(|_| r.random_range(-1.5..1.5)).collect();
            if k >= 2 && r.random_bool(0.3) {
                nodes[2] = nodes[0];
            }
            let rho = divided_difference_density(&nodes);
            for m in 0..=3usize {
                let mut c = vec![0.0; k + m + 1];
                c[k + m] = 1.0;
                let f = ScalarFunction::real_polynomial(&c);
                let want = divided_difference(&f, &nodes).unwrap();
                let got = apply_density(&f, &rho, k);
                assert!(
                    rel(got, want) <= 1e-9 || (got - want).norm() <= 1e-12,
                    "k={k} m={m} {nodes:?}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn density_integrals_add() {
    let a = divided_difference_density(&[0.0, 0.5, 1.5]);
    let b = divided_difference_density(&[-1.0, 0.25, 0.25, 2.0]).scale(C64::new(0.0, 2.0));
    let sum = a.add(&b).total_integral();
    let parts = a.total_integral() + b.total_integral();
    assert!((sum - parts).norm() <= 4.0 * f64::EPSILON * parts.norm().max(1.0));
}

// relative bounds

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certificate_scales(seed in any::<u64>(), d in 1usize..6, z in -3.0f64..3.0, a in 0.0f64..0.9) {
        let mut r = rng(seed);
        let h = random::hermitian(&mut r, d, 2.0);
        let v = perturbation(&mut r, d);
        let base = certify(&h, &v, a).unwrap();
        let scaled = certify(&h, &v.scale(z), z.abs() * a).unwrap();
        prop_assert!((scaled.b - z.abs() * base.b).abs() <= 1e-12 * (z.abs() * base.b).max(1e-12), "{} vs {}", scaled.b, z.abs() * base.b);
        prop_assert!(base.is_valid() && scaled.is_valid());
    }

    #[test]
    fn rel_norm_below_a_plus_b(seed in any::<u64>(), d in 1usize..6, a in 0.0f64..2.0) {
        let mut r = rng(seed);
        let h = random::hermitian(&mut r, d, 2.0);
        let v = perturbation(&mut r, d);
        let c = certify(&h, &v, a).unwrap();
        prop_assert!(rel_norm(&h, &v).unwrap() <= (c.a + c.b) * (1.0 + 1e-12));
    }
}

#[test]
fn second_resolvent_identity_hundred_cases() {
    let mut r = rng(5);
    for case in 0..100 {
        let d = 1 + case % 6;
        let h = operator(&mut r, d, case);
        let v = perturbation(&mut r, d);
        let z = C64::new(
            r.random_range(-2.0..2.0),
            r.random_range(0.2..2.0) * if case % 2 == 0 { 1.0 } else { -1.0 },
        );
        let rep = check_second_resolvent(&h, &v, z).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.residual_norm <= 1e-11 * rep.lhs_norm.max(rep.rhs_norm).max(1.0));
    }
}

// multiple operator integrals

#[test]
fn moi_multilinear_adjoint_and_bounded() {
    let fs = catalog();
    for seed in 0..30u64 {
        let mut r = rng(100 + seed);
        let d = 1 + seed as usize % 4;
        let n = 1 + seed as usize % 3;
        let f = &fs[seed as usize % fs.len()];
        let ss: Vec<_> = (0..=n)
            .map(|k| eigendecompose_default(&operator(&mut r, d, k + seed as usize)).unwrap())
            .collect();
        let hs: Vec<_> = ss.iter().collect();
        let vs: Vec<ComplexMatrix> = (0..n).map(|_| argument(&mut r, d)).collect();
        let extra = argument(&mut r, d);
        let c = C64::new(0.3, -1.2);
        let j = seed as usize % n;
        let mut sum = vs.clone();
        sum[j] = &vs[j] + &extra * c;
        let mut alone = vs.clone();
        alone[j] = extra.clone();
        let val = |args: &[ComplexMatrix]| moi(f, &hs, &args.iter().collect::<Vec<_>>()).unwrap();
        let lhs = val(&sum);
        let rhs = val(&vs) + val(&alone) * c;
        assert!(
            dist(&lhs, &rhs) <= 1e-12 * op_norm(&lhs).max(op_norm(&rhs)).max(1e-300) * 10.0,
            "seed {seed}"
        );

        let req = MoiRequest::new(f.clone(), ss.clone(), vs.clone()).unwrap();
        let res = moi_spectral(&req).unwrap();
        assert!(
            res.within_bound(),
            "seed {seed}: {} > {}",
            op_norm(&res.value),
            res.apriori_bound
        );
    }

    // same H everywhere, Hermitian arguments, real symbol
    let f = ScalarFunction::gaussian(0.5, 0.0);
    for seed in 0..20u64 {
        let mut r = rng(200 + seed);
        let d = 1 + seed as usize % 5;
        let s = eigendecompose_default(&operator(&mut r, d, seed as usize)).unwrap();
        let v = perturbation(&mut r, d);
        for n in 1..=3 {
            let m = moi(&f, &vec![&s; n + 1], &vec![v.matrix(); n]).unwrap();
            assert!(dist(&m, &m.adjoint()) <= 1e-11 * op_norm(&m).max(1.0));
        }
    }
}

#[test]
fn spectral_and_quadrature_paths_agree() {
    let fs = [
        ScalarFunction::pole(C64::new(0.3, 1.5), 2),
        ScalarFunction::gaussian(0.6, 0.2),
    ];
    for seed in 0..3u64 {
        let mut r = rng(300 + seed);
        for n in 1..=2 {
            for d in 1..=3 {
                let f = &fs[seed as usize % 2];
                let ss: Vec<_> = (0..=n)
                    .map(|_| eigendecompose_default(&random::hermitian(&mut r, d, 1.0)).unwrap())
                    .collect();
                let vs: Vec<ComplexMatrix> = (0..n).map(|_| argument(&mut r, d)).collect();
                let req = MoiRequest::new(f.clone(), ss, vs).unwrap();
                let a = moi_spectral(&req).unwrap();
                let b = moi_quadrature(&req, &QuadratureOptions::default()).unwrap();
                let budget = 10.0 * b.error_estimate + 1e-8 * op_norm(&a.value).max(1.0);
                assert!(
                    dist(&a.value, &b.value) <= budget,
                    "seed {seed} n={n} d={d}: {} vs {budget}",
                    dist(&a.value, &b.value)
                );
            }
        }
    }
}

// derivatives and Taylor series

#[test]
fn derivative_oracles_agree() {
    for (i, f) in catalog().iter().enumerate() {
        for seed in 0..4u64 {
            let mut r = rng(400 + seed + 10 * i as u64);
            let d = 1 + (seed as usize * 2) % 6;
            let h = operator(&mut r, d, seed as usize);
            let v = perturbation(&mut r, d);
            for n in 1..=3 {
                let mut g = gateaux_derivative(f, &h, &v, n, 0.0).unwrap();
                let fd = fd_derivative(f, &h, &v, n, 0.0, None).unwrap();
                g.attach_fd(&fd);
                let (diff, tol) = g.fd_agreement().unwrap();
                assert!(diff <= tol, "{} d={d} n={n}: {diff} > {tol}", f.describe());
            }
            let rep = check_first_derivative_formula(f, &h, &v).unwrap();
            assert!(rep.relative_residual <= 1e-11, "{rep:?}");
        }
    }
}

#[test]
fn taylor_remainders_agree_and_respect_bound() {
    let f = ScalarFunction::pole(C64::new(0.5, 1.0), 1);
    let mut r = rng(500);
    let h = random::hermitian(&mut r, 4, 1.0);
    let v0 = perturbation(&mut r, 4);
    let reports = taylor_report(&f, &h, &v0, 6).unwrap();
    let target = 0.5 / reports[0].contraction;
    let v = v0.scale(target);
    let reports = taylor_report(&f, &h, &v, 60).unwrap();
    assert!((reports[0].contraction - 0.5).abs() < 1e-12);
    for rep in &reports {
        assert!(
            rep.within_bound(),
            "n={}: {} > {}",
            rep.order,
            rep.remainder_norm,
            rep.bound
        );
        if let Some(res) = rep.moi_residual_scaled() {
            assert!(res <= 1e-10, "n={}: {res}", rep.order);
        }
    }
    assert!(reports
        .iter()
        .any(|rep| rep.remainder_norm <= 1e-9 * rep.scale));
}

// Matrix Market

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_market_round_trip(seed in any::<u64>(), d in 1usize..9) {
        let mut r = rng(seed);
        let h = random::hermitian(&mut r, d, 3.0);
        let text = mmio::format_hermitian(&h);
        let back = HermitianMatrix::new(mmio::parse(&text).unwrap()).unwrap();
        prop_assert_eq!(back.matrix(), h.matrix());
        prop_assert_eq!(mmio::format_hermitian(&back), text);
        let a = random::complex_gaussian(&mut r, d, d);
        prop_assert_eq!(mmio::parse(&mmio::format_general(&a)).unwrap(), a);
    }
}
