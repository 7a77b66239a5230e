//! Gateaux derivatives of `t -> f(H + tV)`, a finite-difference oracle, and
//! Taylor expansions with remainder bounds.

use crate::error::{OpError, Result};
use crate::linalg::{
    eigendecompose_default, matrix_function, op_norm, resolvent, resolvent_i, ComplexMatrix,
    HermitianMatrix, SpectralDecomposition, C64,
};
use crate::moi::{
    apriori_bound_with, moi_weighted, tuple_count, BoundNorms, EvalPath, MoiRequest, MoiResult,
};
use crate::scalar::{factorial, taylor_constants, FunctionKind, ScalarFunction, TaylorConstants};

/// Largest `d^{n+1}` for which a spectral sum is attempted inside Taylor reports.
pub const TAYLOR_TUPLE_BUDGET: f64 = 4e6;
/// Tuple budget for the operator-integral cross-check of each Taylor remainder.
pub const TAYLOR_MOI_CHECK_BUDGET: f64 = 1e5;
/// Finite-difference estimates with error above `FD_UNRELIABLE * scale` are flagged.
pub const FD_UNRELIABLE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct FdEstimate {
    pub value: ComplexMatrix,
    /// Extrapolation tail plus a rounding estimate.
    pub error: f64,
    pub reliable: bool,
    pub h0: f64,
}

#[derive(Debug, Clone)]
pub struct DerivativeResult {
    pub order: usize,
    pub at_point: f64,
    /// `d^n/dt^n f(H + tV)` at `t0`, i.e. `n!` times the integral.
    pub value: ComplexMatrix,
    pub moi_form: MoiResult,
    pub fd_value: Option<ComplexMatrix>,
    pub fd_error: Option<f64>,
    /// `max(||value||, ||V||^n)`.
    pub scale: f64,
}

impl DerivativeResult {
    pub fn attach_fd(&mut self, fd: &FdEstimate) {
        self.fd_value = Some(fd.value.clone());
        self.fd_error = Some(fd.error);
    }

    /// `(||value - fd||, max(1e-6 scale, 10 fdError))`, if an oracle is attached.
    pub fn fd_agreement(&self) -> Option<(f64, f64)> {
        self.fd_agreement_with(1e-6)
    }

    /// As [`fd_agreement`](Self::fd_agreement) with relative floor `floor`.
    pub fn fd_agreement_with(&self, floor: f64) -> Option<(f64, f64)> {
        let fd = self.fd_value.as_ref()?;
        let err = self.fd_error.unwrap_or(0.0);
        Some((
            op_norm(&(&self.value - fd)),
            (floor * self.scale).max(10.0 * err),
        ))
    }
}

fn dec(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    eigendecompose_default(h)
}

fn check_pair(h: &HermitianMatrix, v: &HermitianMatrix) -> Result<()> {
    if h.dim() != v.dim() {
        return Err(OpError::Dimension(format!(
            "H is {}x{}, V is {}x{}",
            h.dim(),
            h.dim(),
            v.dim(),
            v.dim()
        )));
    }
    Ok(())
}

/// `n! T^{H_t,..,H_t}_{f^[n]}(V,..,V)` with `H_t = H + t0 V`.
pub fn gateaux_derivative(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    n: usize,
    t0: f64,
) -> Result<DerivativeResult> {
    gateaux_derivative_with(&BoundNorms::compute(f, n, false), f, h, v, n, t0)
}

/// As [`gateaux_derivative`] with precomputed Fourier norms for the bound.
pub fn gateaux_derivative_with(
    norms: &BoundNorms,
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    n: usize,
    t0: f64,
) -> Result<DerivativeResult> {
    check_pair(h, v)?;
    let s = dec(&h.add_scaled(v, t0)?)?;
    let req = MoiRequest::new(f.clone(), vec![s; n + 1], vec![v.matrix().clone(); n])?;
    let hs: Vec<&SpectralDecomposition> = req.superscripts.iter().collect();
    let vs: Vec<&ComplexMatrix> = req.arguments.iter().collect();
    let t = moi_weighted(f, &hs, &vs, &vec![0; n])?;
    let bound = apriori_bound_with(norms, &req);
    let value = &t * C64::new(factorial(n), 0.0);
    let scale = op_norm(&value).max(v.norm().powi(n as i32));
    Ok(DerivativeResult {
        order: n,
        at_point: t0,
        value,
        moi_form: MoiResult {
            value: t,
            apriori_bound: bound.value,
            bound_source: bound.source,
            bound_reliable: bound.reliable,
            eval_path: EvalPath::Spectral,
            error_estimate: 0.0,
            converged: true,
        },
        fd_value: None,
        fd_error: None,
        scale,
    })
}

/// `(offset, coefficient)` of the second-order central stencil for `d^n/dt^n`, step 1.
fn stencil(n: usize) -> &'static [(f64, f64)] {
    match n {
        1 => &[(-1.0, -0.5), (1.0, 0.5)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        4 => &[
            (-2.0, 1.0),
            (-1.0, -4.0),
            (0.0, 6.0),
            (1.0, -4.0),
            (2.0, 1.0),
        ],
        _ => &[],
    }
}

pub fn default_step(h: &HermitianMatrix, v: &HermitianMatrix) -> f64 {
    1e-2 * (h.norm() + 1.0) / (v.norm() + 1.0)
}

/// Central differences of `t -> f(H + tV)` at `t0` with Richardson extrapolation
/// over the steps `h0, h0/2, h0/4`.
pub fn fd_derivative(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    n: usize,
    t0: f64,
    h0: Option<f64>,
) -> Result<FdEstimate> {
    check_pair(h, v)?;
    if n == 0 || n > 4 {
        return Err(OpError::Invalid(format!(
            "finite differences support 1 <= n <= 4, got {n}"
        )));
    }
    let h0 = h0.unwrap_or_else(|| default_step(h, v));
    if !(h0 > 0.0) {
        return Err(OpError::Invalid(format!("step must be positive, got {h0}")));
    }
    let st = stencil(n);
    let mut fmax = 0.0_f64;
    let mut diff = |step: f64| -> Result<ComplexMatrix> {
        let d = h.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for &(o, c) in st {
            let fm = matrix_function(&dec(&h.add_scaled(v, t0 + o * step)?)?, f)?;
            fmax = fmax.max(op_norm(&fm));
            acc += fm * C64::new(c, 0.0);
        }
        Ok(acc / C64::new(step.powi(n as i32), 0.0))
    };
    let d0 = diff(h0)?;
    let d1 = diff(h0 / 2.0)?;
    let d2 = diff(h0 / 4.0)?;
    let r1a = (&d1 * C64::new(4.0, 0.0) - &d0) / C64::new(3.0, 0.0);
    let r1b = (&d2 * C64::new(4.0, 0.0) - &d1) / C64::new(3.0, 0.0);
    let r2 = (&r1b * C64::new(16.0, 0.0) - &r1a) / C64::new(15.0, 0.0);
    let tail = op_norm(&(&r2 - &r1b));
    let weight: f64 = st.iter().map(|p| p.1.abs()).sum();
    let rounding = 2.0 * f64::EPSILON * fmax * weight * (4.0 / h0).powi(n as i32);
    let error = tail + rounding;
    let scale = op_norm(&r2).max(v.norm().powi(n as i32));
    Ok(FdEstimate {
        value: r2,
        error,
        reliable: error <= FD_UNRELIABLE * scale.max(f64::MIN_POSITIVE),
        h0,
    })
}

/// Coefficients `(1/k!) d^k/dt^k f(H + tV)|_0` for `k = 0..=k_max`. Rational and
/// polynomial `f` use resolvent and power series; other kinds use spectral sums
/// within [`TAYLOR_TUPLE_BUDGET`].
pub fn taylor_terms(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k_max: usize,
) -> Result<Vec<ComplexMatrix>> {
    check_pair(h, v)?;
    let s = dec(h)?;
    let d = h.dim();
    let zero = ComplexMatrix::zeros(d, d);
    match f.kind() {
        FunctionKind::Rational { constant, terms } => {
            let mut out = vec![zero; k_max + 1];
            out[0] += ComplexMatrix::identity(d, d) * *constant;
            for t in terms {
                let r = resolvent(&s, t.pole, 1)?;
                // (H + tV - z)^{-1} = sum_k (-t)^k R (V R)^k
                let vr = v.matrix() * &r;
                let mut g = Vec::with_capacity(k_max + 1);
                g.push(r.clone());
                for k in 1..=k_max {
                    let next = -(&g[k - 1] * &vr);
                    g.push(next);
                }
                let p = series_power(&g, t.order as usize, d);
                for k in 0..=k_max {
                    out[k] += &p[k] * t.coeff;
                }
            }
            Ok(out)
        }
        FunctionKind::Polynomial { coeffs } => {
            let mut out = vec![zero.clone(); k_max + 1];
            let mut base = vec![zero; k_max + 1];
            base[0] = h.matrix().clone();
            if k_max >= 1 {
                base[1] = v.matrix().clone();
            }
            let mut pow = vec![ComplexMatrix::zeros(d, d); k_max + 1];
            pow[0] = ComplexMatrix::identity(d, d);
            for (p, &a) in coeffs.iter().enumerate() {
                if p > 0 {
                    pow = series_mul(&pow, &base, d);
                }
                for k in 0..=k_max {
                    out[k] += &pow[k] * a;
                }
            }
            Ok(out)
        }
        _ => {
            if !f.has_derivatives(k_max) {
                return Err(OpError::DerivativeBudget {
                    needed: k_max,
                    available: f.max_deriv_order().unwrap_or(0),
                });
            }
            if tuple_count(d, k_max) > TAYLOR_TUPLE_BUDGET {
                return Err(OpError::Invalid(format!(
                    "order {k_max} at dimension {d} needs {:e} index tuples (budget {TAYLOR_TUPLE_BUDGET:e})",
                    tuple_count(d, k_max)
                )));
            }
            (0..=k_max)
                .map(|k| moi_weighted(f, &vec![&s; k + 1], &vec![v.matrix(); k], &vec![0; k]))
                .collect()
        }
    }
}

/// Highest `n_max` that [`taylor_report`] accepts at dimension `d`; `None` when unlimited.
pub fn taylor_order_cap(f: &ScalarFunction, d: usize) -> Option<usize> {
    match f.kind() {
        FunctionKind::Rational { .. } | FunctionKind::Polynomial { .. } => None,
        _ => {
            let mut k = 0;
            while tuple_count(d, k + 1) <= TAYLOR_TUPLE_BUDGET
                && f.has_derivatives(k + 1)
                && k < 200
            {
                k += 1;
            }
            // partial sums need order n_max - 1
            Some(k + 1)
        }
    }
}

/// Truncated Cauchy product of matrix power series.
fn series_mul(a: &[ComplexMatrix], b: &[ComplexMatrix], d: usize) -> Vec<ComplexMatrix> {
    let k_max = a.len() - 1;
    (0..=k_max)
        .map(|k| {
            let mut acc = ComplexMatrix::zeros(d, d);
            for i in 0..=k {
                acc += &a[i] * &b[k - i];
            }
            acc
        })
        .collect()
}

fn series_power(g: &[ComplexMatrix], m: usize, d: usize) -> Vec<ComplexMatrix> {
    let mut p = g.to_vec();
    for _ in 1..m {
        p = series_mul(&p, g, d);
    }
    p
}

#[derive(Debug, Clone)]
pub struct TaylorReport {
    pub order: usize,
    /// `sum_{k<n} (1/k!) d^k/dt^k f(H + tV)|_0`.
    pub partial_sum: ComplexMatrix,
    /// `f(H + V) - partial_sum`.
    pub remainder_direct: ComplexMatrix,
    /// `T^{H+V,H,..,H}_{f^[n]}(V,..,V)`, when within the tuple budget.
    pub remainder_moi: Option<ComplexMatrix>,
    /// `c_f (1 + C_f)^n ||V (H - i)^{-1}||^n`.
    pub bound: f64,
    /// `(1 + C_f) ||V (H - i)^{-1}||`.
    pub contraction: f64,
    pub remainder_norm: f64,
    /// `max(||f(H)||, ||f(H + V)||)`.
    pub scale: f64,
    /// Rounding allowance of `remainder_direct`: `8 (d + 1) eps (||f(H + V)|| + sum_{k<n} ||T_k||)`.
    pub floor: f64,
}

impl TaylorReport {
    /// `||remainder_direct - remainder_moi|| / max(both)`.
    pub fn moi_residual(&self) -> Option<f64> {
        let m = self.remainder_moi.as_ref()?;
        let den = op_norm(m).max(self.remainder_norm).max(1e-300);
        Some(op_norm(&(&self.remainder_direct - m)) / den)
    }

    /// `||remainder_direct - remainder_moi|| / scale`; the subtraction in
    /// `remainder_direct` costs about `eps * scale`, so this is the attainable measure.
    pub fn moi_residual_scaled(&self) -> Option<f64> {
        let m = self.remainder_moi.as_ref()?;
        Some(op_norm(&(&self.remainder_direct - m)) / self.scale.max(1e-300))
    }

    /// Size of the cancellation error in `remainder_direct`.
    pub fn rounding_floor(&self) -> f64 {
        self.floor
    }

    /// `remainder_norm <= bound`, up to the rounding floor.
    pub fn within_bound(&self) -> bool {
        self.remainder_norm <= self.bound * (1.0 + 1e-9) + self.rounding_floor()
    }
}

/// Taylor partial sums and remainders for `n = 1..=n_max`.
pub fn taylor_report(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    n_max: usize,
) -> Result<Vec<TaylorReport>> {
    let consts = taylor_constants(f, n_max.min(12));
    taylor_report_with(&consts, f, h, v, n_max)
}

pub fn taylor_report_with(
    consts: &TaylorConstants,
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    n_max: usize,
) -> Result<Vec<TaylorReport>> {
    check_pair(h, v)?;
    let terms = taylor_terms(f, h, v, n_max.saturating_sub(1))?;
    let s0 = dec(h)?;
    let s1 = dec(&h.add(v)?)?;
    let full = matrix_function(&s1, f)?;
    let scale = op_norm(&full)
        .max(op_norm(&terms[0]))
        .max(f64::MIN_POSITIVE);
    let rel = op_norm(&(v.matrix() * resolvent_i(&s0, 1)));
    let d = h.dim();
    let mut partial = ComplexMatrix::zeros(d, d);
    let mut mass = op_norm(&full);
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        partial += &terms[n - 1];
        mass += op_norm(&terms[n - 1]);
        let remainder_direct = &full - &partial;
        let remainder_moi = if f.has_derivatives(n) && tuple_count(d, n) <= TAYLOR_MOI_CHECK_BUDGET
        {
            let mut sup = vec![&s1];
            sup.extend(std::iter::repeat(&s0).take(n));
            Some(moi_weighted(f, &sup, &vec![v.matrix(); n], &vec![0; n])?)
        } else {
            None
        };
        out.push(TaylorReport {
            order: n,
            partial_sum: partial.clone(),
            remainder_norm: op_norm(&remainder_direct),
            remainder_direct,
            remainder_moi,
            bound: consts.remainder_bound(n, rel),
            contraction: (1.0 + consts.big_c_f) * rel,
            scale,
            floor: 8.0 * (d + 1) as f64 * f64::EPSILON * mass,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (HermitianMatrix, HermitianMatrix) {
        (
            HermitianMatrix::from_real(&[
                vec![1.0, 0.5, 0.0],
                vec![0.5, -0.7, 0.2],
                vec![0.0, 0.2, 0.3],
            ])
            .unwrap(),
            HermitianMatrix::from_real(&[
                vec![0.3, -0.2, 0.1],
                vec![-0.2, 0.9, 0.0],
                vec![0.1, 0.0, -0.4],
            ])
            .unwrap(),
        )
    }

    #[test]
    fn resolvent_derivative() {
        let (h, v) = pair();
        let z = C64::new(0.0, 2.0);
        let f = ScalarFunction::pole(z, 1);
        let r = resolvent(&dec(&h).unwrap(), z, 1).unwrap();
        let expect = -(&r * v.matrix() * &r);
        let g = gateaux_derivative(&f, &h, &v, 1, 0.0).unwrap();
        assert!(op_norm(&(g.value - expect)) < 1e-14);
    }

    #[test]
    fn square_first_derivative() {
        let (h, v) = pair();
        let f = ScalarFunction::real_polynomial(&[0.0, 0.0, 1.0]);
        let fd = fd_derivative(&f, &h, &v, 1, 0.0, None).unwrap();
        let expect = h.matrix() * v.matrix() + v.matrix() * h.matrix();
        assert!(op_norm(&(&fd.value - &expect)) < 1e-10);
        let g = gateaux_derivative(&f, &h, &v, 1, 0.0).unwrap();
        assert!(op_norm(&(&g.value - &expect)) < 1e-12);
    }

    #[test]
    fn cube_third_derivative() {
        // third divided difference of x^3 is 1, so d^3/dt^3 (H + tV)^3 = 6 V^3
        let (h, v) = pair();
        let f = ScalarFunction::real_polynomial(&[0.0, 0.0, 0.0, 1.0]);
        let g = gateaux_derivative(&f, &h, &v, 3, 0.4).unwrap();
        let v3 = v.matrix() * v.matrix() * v.matrix() * C64::new(6.0, 0.0);
        assert!(op_norm(&(&g.value - &v3)) < 1e-12);
    }

    #[test]
    fn gaussian_against_richardson() {
        let (h, v) = pair();
        let f = ScalarFunction::gaussian(0.4, 0.3);
        for n in 1..=3 {
            let mut g = gateaux_derivative(&f, &h, &v, n, 0.2).unwrap();
            let fd = fd_derivative(&f, &h, &v, n, 0.2, None).unwrap();
            assert!(fd.reliable);
            g.attach_fd(&fd);
            let (diff, allowed) = g.fd_agreement().unwrap();
            assert!(diff <= allowed, "n={n}: {diff:e} > {allowed:e}");
        }
    }

    #[test]
    fn series_terms_match_spectral_sums() {
        let (h, v) = pair();
        let f = ScalarFunction::pole(C64::new(0.5, -1.5), 3);
        let a = taylor_terms(&f, &h, &v, 4).unwrap();
        let s = dec(&h).unwrap();
        for k in 0..=4 {
            let b = moi_weighted(&f, &vec![&s; k + 1], &vec![v.matrix(); k], &vec![0; k]).unwrap();
            assert!(
                op_norm(&(&a[k] - &b)) <= 1e-12 * op_norm(&b).max(1.0),
                "k={k}"
            );
        }
    }

    #[test]
    fn scalar_taylor_remainder() {
        let f = ScalarFunction::pole(C64::new(0.0, 2.0), 1);
        let h = HermitianMatrix::diag(&[0.3]);
        let v = HermitianMatrix::diag(&[0.4]);
        let reps = taylor_report(&f, &h, &v, 5).unwrap();
        for r in &reps {
            let partial: C64 = (0..r.order)
                .map(|k| f.deriv(0.3, k) / factorial(k) * 0.4f64.powi(k as i32))
                .sum();
            let exact = f.eval(0.7) - partial;
            assert!((r.remainder_direct[(0, 0)] - exact).norm() < 1e-15);
            assert!(r.moi_residual().unwrap() < 1e-12);
            assert!(r.within_bound());
        }
    }

    #[test]
    fn zero_direction() {
        let (h, _) = pair();
        let z = HermitianMatrix::zeros(3);
        let f = ScalarFunction::gaussian(0.4, 0.0);
        for r in taylor_report(&f, &h, &z, 4).unwrap() {
            assert!(r.remainder_norm < 1e-15);
            assert_eq!(op_norm(r.remainder_moi.as_ref().unwrap()), 0.0);
        }
    }
}
