//! Divided differences with a Hermite-type table for (nearly) coincident nodes.
//!
//! Nodes are sorted first, so the result does not depend on their order. A span
//! of sorted nodes whose width is at most `tau` is evaluated by expanding `f`
//! around the span mean:
//! `f[y_0..y_k] = sum_m f^{(k+m)}(c)/(k+m)! * h_m(y_0 - c, ..., y_k - c)`
//! with `h_m` the complete homogeneous symmetric polynomial. Wider spans use the
//! ordinary recursion.

use super::{factorial, ScalarFunction};
use crate::error::{OpError, Result};
use crate::linalg::C64;

/// Confluence threshold relative to the node scale `max(1, max |x|)`.
pub const TAU_CONF_REL: f64 = 1e-7;

/// Extra Taylor terms used for spans that are close but not identical.
const EXTRA_TERMS: usize = 4;

pub fn divided_difference(f: &ScalarFunction, nodes: &[f64]) -> Result<C64> {
    let scale = nodes.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    divided_difference_with_tau(f, nodes, TAU_CONF_REL * scale)
}

pub fn divided_difference_with_tau(f: &ScalarFunction, nodes: &[f64], tau: f64) -> Result<C64> {
    if nodes.is_empty() {
        return Err(OpError::Invalid(
            "divided difference needs at least one node".into(),
        ));
    }
    let n = nodes.len() - 1;
    if !f.has_derivatives(n) {
        return Err(OpError::DerivativeBudget {
            needed: n,
            available: f.max_deriv_order().unwrap_or(0),
        });
    }
    let mut x: Vec<f64> = nodes.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    if n == 0 {
        return Ok(f.eval(x[0]));
    }
    // all nodes identical: plain derivative
    if x[n] == x[0] {
        return Ok(f.deriv(x[0], n) / factorial(n));
    }
    let mut row: Vec<C64> = x.iter().map(|&xi| f.eval(xi)).collect();
    // row[i] holds f[x_i .. x_{i+k}] after step k
    for k in 1..=n {
        for i in 0..=(n - k) {
            let j = i + k;
            let w = x[j] - x[i];
            row[i] = if w <= tau {
                taylor_span(f, &x[i..=j])?
            } else {
                (row[i + 1] - row[i]) / w
            };
        }
    }
    Ok(row[0])
}

fn taylor_span(f: &ScalarFunction, y: &[f64]) -> Result<C64> {
    let k = y.len() - 1;
    let c = y.iter().sum::<f64>() / y.len() as f64;
    let shifted: Vec<f64> = y.iter().map(|&v| v - c).collect();
    let spread = shifted.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut extra = if spread == 0.0 { 0 } else { EXTRA_TERMS };
    if let Some(max) = f.max_deriv_order() {
        if k > max {
            return Err(OpError::DerivativeBudget {
                needed: k,
                available: max,
            });
        }
        extra = extra.min(max - k);
    }
    let d = f.derivs(c, k + extra);
    let h = complete_homogeneous(&shifted, extra);
    let mut s = C64::new(0.0, 0.0);
    for m in (0..=extra).rev() {
        s += d[k + m] * (h[m] / factorial(k + m));
    }
    Ok(s)
}

/// `[h_0, ..., h_mmax]` of the given variables.
pub fn complete_homogeneous(y: &[f64], mmax: usize) -> Vec<f64> {
    // h over first j variables, updated in place
    let mut h = vec![0.0; mmax + 1];
    h[0] = 1.0;
    for &v in y {
        for m in 1..=mmax {
            h[m] += v * h[m - 1];
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn square_on_two_nodes() {
        let f = ScalarFunction::real_polynomial(&[0.0, 0.0, 1.0]);
        assert!(close(
            divided_difference(&f, &[1.0, 3.0]).unwrap(),
            C64::new(4.0, 0.0),
            1e-15
        ));
    }

    #[test]
    fn cube_confluent() {
        let f = ScalarFunction::real_polynomial(&[0.0, 0.0, 0.0, 1.0]);
        assert!(close(
            divided_difference(&f, &[2.0, 2.0]).unwrap(),
            C64::new(12.0, 0.0),
            1e-15
        ));
    }

    #[test]
    fn resolvent_by_hand() {
        let w = C64::new(0.0, 2.0);
        let f = ScalarFunction::pole(w, 1);
        let expect = (C64::new(1.0, 0.0) - w).inv() - (-w).inv();
        assert!(close(
            divided_difference(&f, &[0.0, 1.0]).unwrap(),
            expect,
            1e-15
        ));
    }

    #[test]
    fn resolvent_product_formula() {
        // for 1/(x-w) the n-th divided difference is (-1)^n prod 1/(x_j - w)
        let w = C64::new(0.3, -1.1);
        let f = ScalarFunction::pole(w, 1);
        let nodes = [0.2, -1.0, 0.2 + 3e-8, 2.5, 0.2 - 1e-9];
        let mut expect = C64::new(1.0, 0.0);
        for &x in &nodes {
            expect /= C64::new(x, 0.0) - w;
        }
        expect *= if (nodes.len() - 1) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        assert!(close(
            divided_difference(&f, &nodes).unwrap(),
            expect,
            1e-12
        ));
    }

    #[test]
    fn near_confluent_matches_exact_confluent_limit() {
        let f = ScalarFunction::gaussian(1.0, 0.4);
        let a = divided_difference(&f, &[0.5, 0.5, 0.5]).unwrap();
        let b = divided_difference(&f, &[0.5, 0.5 + 1e-9, 0.5 - 2e-9]).unwrap();
        assert!(close(a, f.deriv(0.5, 2) / 2.0, 1e-14));
        assert!(close(a, b, 1e-8));
    }

    #[test]
    fn permutation_symmetry_is_exact() {
        let f = ScalarFunction::gaussian(0.8, 0.0);
        let a = divided_difference(&f, &[0.3, -1.2, 0.7, 0.3]).unwrap();
        let b = divided_difference(&f, &[0.7, 0.3, 0.3, -1.2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_enforced() {
        let f = ScalarFunction::bump(0.0, 1.0, 2);
        assert!(divided_difference(&f, &[0.0, 0.1, 0.2]).is_err());
        assert!(divided_difference(&f, &[0.0, 0.1]).is_ok());
    }

    #[test]
    fn homogeneous_polynomials() {
        let h = complete_homogeneous(&[1.0, 2.0], 3);
        // h1 = 3, h2 = 1 + 2 + 4 = 7, h3 = 1 + 2 + 4 + 8 = 15
        assert_eq!(h, vec![1.0, 3.0, 7.0, 15.0]);
    }
}
