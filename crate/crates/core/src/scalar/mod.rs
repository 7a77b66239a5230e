//! Scalar function catalog with closed-form derivatives.
//!
//! `u(x) = x - i` is available as a polynomial; products with powers of `u`
//! are formed with [`ScalarFunction::times_u_pow`].

mod classes;
mod divdiff;
mod fourier;

pub use classes::{
    class_membership, sup_norm, taylor_constants, ClassMembershipReport, ClassName,
    TaylorConstants, Verdict,
};
pub use divdiff::{
    complete_homogeneous, divided_difference, divided_difference_with_tau, TAU_CONF_REL,
};
pub use fourier::{
    fourier_norm, fourier_norm_derivative, fourier_norm_fft, rational_expansion, FourierMethod,
    FourierNormEstimate, FFT_SAMPLES,
};

use crate::linalg::C64;

/// One partial-fraction term `coeff * (x - pole)^{-order}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub pole: C64,
    pub order: u32,
    pub coeff: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `constant + sum_k coeff_k (x - pole_k)^{-order_k}`, no real poles.
    Rational {
        constant: C64,
        terms: Vec<PoleTerm>,
    },
    /// `exp(i xi x) exp(-c x^2)`.
    Gaussian {
        c: f64,
        xi: f64,
    },
    /// `(1 - ((x - center)/radius)^2)^order` on the support, zero outside.
    HermiteBump {
        center: f64,
        radius: f64,
        order: u32,
    },
    /// `sum_k coeffs[k] x^k`.
    Polynomial {
        coeffs: Vec<C64>,
    },
    Product(Vec<ScalarFunction>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFunction {
    kind: FunctionKind,
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, j| a * j as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |a, j| a * (n - j) as f64 / (j + 1) as f64)
}

/// Rising factorial `m (m+1) ... (m+l-1)`.
pub(crate) fn rising(m: u32, l: usize) -> f64 {
    (0..l).fold(1.0, |a, j| a * (m as f64 + j as f64))
}

impl ScalarFunction {
    pub fn new(kind: FunctionKind) -> Result<Self, String> {
        match &kind {
            FunctionKind::Rational { terms, .. } => {
                for t in terms {
                    if t.pole.im == 0.0 {
                        return Err(format!(
                            "rational function has a real pole at {}",
                            t.pole.re
                        ));
                    }
                    if t.order == 0 {
                        return Err("pole order must be at least 1".into());
                    }
                }
            }
            FunctionKind::Gaussian { c, xi } => {
                if !(*c > 0.0) || !xi.is_finite() {
                    return Err(format!("gaussian needs c > 0, got c={c}, xi={xi}"));
                }
            }
            FunctionKind::HermiteBump { radius, order, .. } => {
                if !(*radius > 0.0) || *order == 0 {
                    return Err("bump needs radius > 0 and order >= 1".into());
                }
            }
            FunctionKind::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err("polynomial needs at least one coefficient".into());
                }
            }
            FunctionKind::Product(fs) => {
                if fs.is_empty() {
                    return Err("product needs at least one factor".into());
                }
            }
        }
        Ok(Self { kind })
    }

    /// `(x - pole)^{-order}`.
    pub fn pole(pole: C64, order: u32) -> Self {
        Self::new(FunctionKind::Rational {
            constant: C64::new(0.0, 0.0),
            terms: vec![PoleTerm {
                pole,
                order,
                coeff: C64::new(1.0, 0.0),
            }],
        })
        .expect("valid pole")
    }

    pub fn gaussian(c: f64, xi: f64) -> Self {
        Self::new(FunctionKind::Gaussian { c, xi }).expect("valid gaussian")
    }

    pub fn bump(center: f64, radius: f64, order: u32) -> Self {
        Self::new(FunctionKind::HermiteBump {
            center,
            radius,
            order,
        })
        .expect("valid bump")
    }

    pub fn polynomial(coeffs: Vec<C64>) -> Self {
        Self::new(FunctionKind::Polynomial { coeffs }).expect("valid polynomial")
    }

    pub fn real_polynomial(coeffs: &[f64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn product(factors: Vec<ScalarFunction>) -> Self {
        Self::new(FunctionKind::Product(factors)).expect("valid product")
    }

    /// `u^p = (x - i)^p` as a polynomial.
    pub fn u_pow(p: usize) -> Self {
        let mi = C64::new(0.0, -1.0);
        let coeffs = (0..=p)
            .map(|j| mi.powi((p - j) as i32) * binomial(p, j))
            .collect();
        Self::polynomial(coeffs)
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    /// `f u^p`.
    pub fn times_u_pow(&self, p: usize) -> Self {
        if p == 0 {
            return self.clone();
        }
        let mut factors = match &self.kind {
            FunctionKind::Product(fs) => fs.clone(),
            _ => vec![self.clone()],
        };
        factors.push(Self::u_pow(p));
        Self {
            kind: FunctionKind::Product(factors),
        }
    }

    /// Highest derivative order with a continuous closed form, `None` for unlimited.
    pub fn max_deriv_order(&self) -> Option<usize> {
        match &self.kind {
            FunctionKind::HermiteBump { order, .. } => Some(*order as usize - 1),
            FunctionKind::Product(fs) => fs.iter().filter_map(|f| f.max_deriv_order()).min(),
            _ => None,
        }
    }

    pub fn has_derivatives(&self, n: usize) -> bool {
        self.max_deriv_order().map_or(true, |m| n <= m)
    }

    pub fn eval(&self, x: f64) -> C64 {
        self.derivs(x, 0)[0]
    }

    pub fn deriv(&self, x: f64, l: usize) -> C64 {
        self.derivs(x, l)[l]
    }

    /// `[f(x), f'(x), ..., f^{(l)}(x)]`.
    pub fn derivs(&self, x: f64, l: usize) -> Vec<C64> {
        let zero = C64::new(0.0, 0.0);
        match &self.kind {
            FunctionKind::Rational { constant, terms } => {
                let mut out = vec![zero; l + 1];
                out[0] = *constant;
                for t in terms {
                    let z = C64::new(x, 0.0) - t.pole;
                    let zi = z.inv();
                    let mut pw = zi.powi(t.order as i32);
                    for (k, slot) in out.iter_mut().enumerate() {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        *slot += t.coeff * pw * (sign * rising(t.order, k));
                        pw *= zi;
                    }
                }
                out
            }
            FunctionKind::Gaussian { c, xi } => {
                let sc = c.sqrt();
                let t = sc * x;
                let g = (-c * x * x).exp();
                // physicists' Hermite recurrence
                let mut h = Vec::with_capacity(l + 1);
                h.push(1.0);
                if l >= 1 {
                    h.push(2.0 * t);
                }
                for k in 1..l {
                    let next = 2.0 * t * h[k] - 2.0 * k as f64 * h[k - 1];
                    h.push(next);
                }
                let gd: Vec<f64> = (0..=l).map(|k| (-sc).powi(k as i32) * h[k] * g).collect();
                let phase = C64::new(0.0, xi * x).exp();
                let ixi = C64::new(0.0, *xi);
                (0..=l)
                    .map(|m| {
                        let mut s = zero;
                        for k in 0..=m {
                            s += ixi.powi((m - k) as i32) * (binomial(m, k) * gd[k]);
                        }
                        s * phase
                    })
                    .collect()
            }
            FunctionKind::HermiteBump {
                center,
                radius,
                order,
            } => {
                let t = (x - center) / radius;
                let mut out = vec![zero; l + 1];
                if t.abs() > 1.0 {
                    return out;
                }
                let s = *order as usize;
                // (1 - t^2)^s = sum_j C(s,j) (-1)^j t^{2j}
                let coeffs: Vec<f64> = (0..=2 * s)
                    .map(|d| {
                        if d % 2 == 1 {
                            0.0
                        } else {
                            let j = d / 2;
                            binomial(s, j) * if j % 2 == 0 { 1.0 } else { -1.0 }
                        }
                    })
                    .collect();
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = C64::new(poly_deriv_real(&coeffs, t, k) / radius.powi(k as i32), 0.0);
                }
                out
            }
            FunctionKind::Polynomial { coeffs } => {
                (0..=l).map(|k| poly_deriv(coeffs, x, k)).collect()
            }
            FunctionKind::Product(fs) => {
                let mut acc = fs[0].derivs(x, l);
                for f in &fs[1..] {
                    let g = f.derivs(x, l);
                    let mut next = vec![zero; l + 1];
                    for (m, slot) in next.iter_mut().enumerate() {
                        for k in 0..=m {
                            *slot += acc[k] * g[m - k] * binomial(m, k);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }

    /// Real-valued on the real line.
    pub fn is_real(&self) -> bool {
        match &self.kind {
            FunctionKind::Gaussian { xi, .. } => *xi == 0.0,
            FunctionKind::HermiteBump { .. } => true,
            FunctionKind::Polynomial { coeffs } => coeffs.iter().all(|a| a.im == 0.0),
            FunctionKind::Product(fs) => fs.iter().all(|f| f.is_real()),
            FunctionKind::Rational { .. } => {
                [-3.1, -0.7, 0.0, 0.4, 1.3, 2.9, 17.0].iter().all(|&x| {
                    let v = self.eval(x);
                    v.im.abs() <= 1e-14 * v.norm().max(1e-300)
                })
            }
        }
    }

    /// Typical length scale used to size quadrature windows.
    pub fn width_scale(&self) -> f64 {
        match &self.kind {
            FunctionKind::Rational { terms, .. } => {
                terms.iter().fold(0.0_f64, |m, t| m.max(t.pole.norm()))
            }
            FunctionKind::Gaussian { c, .. } => 1.0 / c.sqrt(),
            FunctionKind::HermiteBump { center, radius, .. } => center.abs() + radius,
            FunctionKind::Polynomial { .. } => 1.0,
            FunctionKind::Product(fs) => fs.iter().fold(0.0_f64, |m, f| m.max(f.width_scale())),
        }
    }

    /// Short human-readable descriptor used in reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            FunctionKind::Rational { constant, terms } => {
                let mut s = String::from("rational(");
                if constant.norm() > 0.0 {
                    s.push_str(&format!("{}{:+}i", constant.re, constant.im));
                }
                for t in terms {
                    s.push_str(&format!(
                        "[{}{:+}i]/(x-({}{:+}i))^{}",
                        t.coeff.re, t.coeff.im, t.pole.re, t.pole.im, t.order
                    ));
                }
                s.push(')');
                s
            }
            FunctionKind::Gaussian { c, xi } => format!("gaussian(c={c},xi={xi})"),
            FunctionKind::HermiteBump {
                center,
                radius,
                order,
            } => {
                format!("bump(center={center},radius={radius},order={order})")
            }
            FunctionKind::Polynomial { coeffs } => {
                let parts: Vec<String> = coeffs
                    .iter()
                    .map(|a| format!("{}{:+}i", a.re, a.im))
                    .collect();
                format!("poly[{}]", parts.join(","))
            }
            FunctionKind::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(|f| f.describe()).collect();
                format!("product({})", parts.join("*"))
            }
        }
    }
}

fn poly_deriv(coeffs: &[C64], x: f64, k: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for j in (k..coeffs.len()).rev() {
        let fac = (j - k + 1..=j).fold(1.0, |a, m| a * m as f64);
        s = s * x + coeffs[j] * fac;
    }
    s
}

fn poly_deriv_real(coeffs: &[f64], x: f64, k: usize) -> f64 {
    let mut s = 0.0;
    for j in (k..coeffs.len()).rev() {
        let fac = (j - k + 1..=j).fold(1.0, |a, m| a * m as f64);
        s = s * x + coeffs[j] * fac;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<ScalarFunction> {
        vec![
            ScalarFunction::pole(C64::new(0.0, 2.0), 1),
            ScalarFunction::pole(C64::new(0.5, -1.5), 3),
            ScalarFunction::gaussian(1.0, 0.0),
            ScalarFunction::gaussian(0.7, 1.3),
            ScalarFunction::bump(0.2, 2.0, 6),
            ScalarFunction::real_polynomial(&[1.0, -2.0, 0.5, 0.25]),
            ScalarFunction::product(vec![
                ScalarFunction::gaussian(0.5, 0.0),
                ScalarFunction::pole(C64::new(1.0, 1.0), 2),
            ]),
        ]
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-3;
        for f in catalog() {
            let lmax = f.max_deriv_order().unwrap_or(6).min(6);
            for k in 0..100 {
                let x = -2.3 + 0.047 * k as f64;
                let d = f.derivs(x, lmax);
                for l in 1..=lmax {
                    let g = |t: f64| f.deriv(t, l - 1);
                    let fd = (g(x - 2.0 * h) - g(x + 2.0 * h) + (g(x + h) - g(x - h)) * 8.0)
                        / (12.0 * h);
                    let scale = d[l].norm().max(d[l - 1].norm()).max(1e-3);
                    assert!(
                        (fd - d[l]).norm() <= 1e-6 * scale,
                        "{} l={l} x={x}: {} vs {}",
                        f.describe(),
                        fd,
                        d[l]
                    );
                }
            }
        }
    }

    #[test]
    fn u_power_coefficients() {
        let u3 = ScalarFunction::u_pow(3);
        for x in [-1.0, 0.0, 2.5] {
            let expect = C64::new(x, -1.0).powi(3);
            assert!((u3.eval(x) - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn times_u_flattens_products() {
        let f = ScalarFunction::gaussian(1.0, 0.0)
            .times_u_pow(2)
            .times_u_pow(1);
        for x in [-0.3, 1.7] {
            let expect = ScalarFunction::gaussian(1.0, 0.0).eval(x) * C64::new(x, -1.0).powi(3);
            assert!((f.eval(x) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn real_pole_rejected() {
        let bad = ScalarFunction::new(FunctionKind::Rational {
            constant: C64::new(0.0, 0.0),
            terms: vec![PoleTerm {
                pole: C64::new(1.0, 0.0),
                order: 1,
                coeff: C64::new(1.0, 0.0),
            }],
        });
        assert!(bad.is_err());
    }

    #[test]
    fn reality_flags() {
        assert!(ScalarFunction::gaussian(1.0, 0.0).is_real());
        assert!(!ScalarFunction::gaussian(1.0, 0.5).is_real());
        assert!(!ScalarFunction::pole(C64::new(0.0, 2.0), 1).is_real());
        let pair = ScalarFunction::new(FunctionKind::Rational {
            constant: C64::new(0.0, 0.0),
            terms: vec![
                PoleTerm {
                    pole: C64::new(0.0, 1.0),
                    order: 1,
                    coeff: C64::new(1.0, 0.0),
                },
                PoleTerm {
                    pole: C64::new(0.0, -1.0),
                    order: 1,
                    coeff: C64::new(1.0, 0.0),
                },
            ],
        })
        .unwrap();
        assert!(pair.is_real());
    }
}
