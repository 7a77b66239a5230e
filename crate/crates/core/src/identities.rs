//! Two-sided residual checks of the operator-integral identities.
//!
//! Every check evaluates both sides independently and compares them in
//! operator norm. Weight sets `J` are 1-based subsets of `{1..n}`; slot `k` in
//! `J` is evaluated in the resolvent-weighted form.

use crate::error::{OpError, Result};
use crate::linalg::{
    eigendecompose_default, matrix_function, op_norm, resolvent, resolvent_i, schatten_norm, trace,
    ComplexMatrix, HermitianMatrix, SpectralDecomposition, C64, I,
};
use crate::moi::moi_weighted;
use crate::quad::Rule;
use crate::scalar::{sup_norm, ScalarFunction};

/// Identities evaluated by closed-form spectral sums.
pub const EXACT_TOL: f64 = 1e-10;
/// Identities with one quadrature side.
pub const QUADRATURE_TOL: f64 = 1e-8;
pub const RESOLVENT_TOL: f64 = 1e-11;
pub const DUHAMEL_NODES: usize = 64;
const TINY: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub dim: usize,
    pub n: Option<usize>,
    pub j: Option<usize>,
    pub jset: Option<Vec<usize>>,
    pub t: Option<f64>,
    pub f: Option<String>,
    pub seed: Option<u64>,
    /// Check-specific numbers (quadrature error, trace bounds, ...).
    pub extra: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub residual_norm: f64,
    /// `residual / max(lhs, rhs, tiny)`.
    pub relative_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub metadata: Metadata,
}

impl IdentityReport {
    pub fn from_sides(
        name: &str,
        lhs: &ComplexMatrix,
        rhs: &ComplexMatrix,
        tolerance: f64,
        metadata: Metadata,
    ) -> Self {
        Self::from_sides_scaled(name, lhs, rhs, 0.0, tolerance, metadata)
    }

    /// As [`from_sides`](Self::from_sides), but the residual is relative to
    /// `max(||lhs||, ||rhs||, term_scale)`. Use when a side is a difference of
    /// terms of size `term_scale` that may cancel exactly.
    pub fn from_sides_scaled(
        name: &str,
        lhs: &ComplexMatrix,
        rhs: &ComplexMatrix,
        term_scale: f64,
        tolerance: f64,
        metadata: Metadata,
    ) -> Self {
        let lhs_norm = op_norm(lhs);
        let rhs_norm = op_norm(rhs);
        let residual_norm = op_norm(&(lhs - rhs));
        let relative_residual = residual_norm / lhs_norm.max(rhs_norm).max(term_scale).max(TINY);
        Self {
            name: name.to_string(),
            lhs_norm,
            rhs_norm,
            residual_norm,
            relative_residual,
            tolerance,
            pass: relative_residual <= tolerance,
            metadata,
        }
    }

    /// Scalar sides (traces, integrals).
    pub fn from_scalars(
        name: &str,
        lhs: C64,
        rhs: C64,
        tolerance: f64,
        metadata: Metadata,
    ) -> Self {
        let lhs_norm = lhs.norm();
        let rhs_norm = rhs.norm();
        let residual_norm = (lhs - rhs).norm();
        let relative_residual = residual_norm / lhs_norm.max(rhs_norm).max(TINY);
        Self {
            name: name.to_string(),
            lhs_norm,
            rhs_norm,
            residual_norm,
            relative_residual,
            tolerance,
            pass: relative_residual <= tolerance,
            metadata,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.relative_residual <= tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.metadata.seed = Some(seed);
        self
    }
}

fn dec(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    eigendecompose_default(h)
}

/// Decomposition of `H + V`, reusing `H`'s when `V` vanishes exactly.
fn dec_sum(
    h: &HermitianMatrix,
    s: &SpectralDecomposition,
    v: &HermitianMatrix,
) -> Result<SpectralDecomposition> {
    if v.max_abs_entry() == 0.0 {
        Ok(s.clone())
    } else {
        dec(&h.add(v)?)
    }
}

fn decs(hs: &[HermitianMatrix]) -> Result<Vec<SpectralDecomposition>> {
    hs.iter().map(dec).collect()
}

fn refs<T>(v: &[T]) -> Vec<&T> {
    v.iter().collect()
}

fn budget(f: &ScalarFunction, n: usize) -> Result<()> {
    if f.has_derivatives(n) {
        Ok(())
    } else {
        Err(OpError::DerivativeBudget {
            needed: n,
            available: f.max_deriv_order().unwrap_or(0),
        })
    }
}

fn check_chain(hs: &[HermitianMatrix], vs: &[ComplexMatrix]) -> Result<()> {
    if hs.len() != vs.len() + 1 {
        return Err(OpError::Dimension(format!(
            "{} operators for {} arguments",
            hs.len(),
            vs.len()
        )));
    }
    Ok(())
}

/// `alpha_k = 1` for `k in J` (1-based).
fn weights(n: usize, jset: &[usize]) -> Result<Vec<u32>> {
    let mut a = vec![0; n];
    for &k in jset {
        if k == 0 || k > n {
            return Err(OpError::Invalid(format!(
                "weight index {k} outside 1..={n}"
            )));
        }
        a[k - 1] = 1;
    }
    Ok(a)
}

fn hermitian_sum(h: &HermitianMatrix, w: &HermitianMatrix) -> Result<HermitianMatrix> {
    h.add(w)
}

fn hermitian_of(v: &ComplexMatrix) -> Result<HermitianMatrix> {
    HermitianMatrix::new(v.clone())
}

fn meta(dim: usize, f: &ScalarFunction) -> Metadata {
    Metadata {
        dim,
        f: Some(f.describe()),
        ..Default::default()
    }
}

/// Change of variables at slot `j in 0..=n` with weight set `J`:
/// `T_{f^[n],J}(V) = T_{(fu)^[n],J\{j}}(.., V_j R_j, ..) - T^{H without H_j}_{f^[n-1],p_j^{-1}(J)}(.., V_j R_j V_{j+1}, ..)`
/// with the boundary forms at `j = 0` and `j = n`.
pub fn check_cov(
    f: &ScalarFunction,
    hs: &[HermitianMatrix],
    vs: &[ComplexMatrix],
    j: usize,
    jset: &[usize],
) -> Result<IdentityReport> {
    check_chain(hs, vs)?;
    let n = vs.len();
    if n == 0 || j > n {
        return Err(OpError::Invalid(format!(
            "need n >= 1 and j <= n, got n={n}, j={j}"
        )));
    }
    budget(f, n)?;
    let alpha = weights(n, jset)?;
    let ds = decs(hs)?;
    let all = refs(&ds);
    let lhs = moi_weighted(f, &all, &refs(vs), &alpha)?;
    let fu = f.times_u_pow(1);

    let first = if j == 0 {
        let mut args = vs.to_vec();
        args[0] = resolvent_i(&ds[0], 1) * &vs[0];
        moi_weighted(&fu, &all, &refs(&args), &alpha)?
    } else {
        let mut args = vs.to_vec();
        args[j - 1] = &vs[j - 1] * resolvent_i(&ds[j], 1);
        let mut a = alpha.clone();
        a[j - 1] = 0;
        moi_weighted(&fu, &all, &refs(&args), &a)?
    };

    let second = if j == 0 {
        let a: Vec<u32> = alpha[1..].to_vec();
        let inner = moi_weighted(f, &all[1..], &refs(&vs[1..]), &a)?;
        resolvent_i(&ds[0], 1) * &vs[0] * inner
    } else if j == n {
        let a: Vec<u32> = alpha[..n - 1].to_vec();
        let inner = moi_weighted(f, &all[..n], &refs(&vs[..n - 1]), &a)?;
        inner * &vs[n - 1] * resolvent_i(&ds[n], 1)
    } else {
        let sup: Vec<&SpectralDecomposition> =
            (0..=n).filter(|&k| k != j).map(|k| &ds[k]).collect();
        let mut args: Vec<ComplexMatrix> = Vec::with_capacity(n - 1);
        args.extend(vs[..j - 1].iter().cloned());
        args.push(&vs[j - 1] * resolvent_i(&ds[j], 1) * &vs[j]);
        args.extend(vs[j + 1..].iter().cloned());
        // p_j skips j, so new slot i reads the weight of old slot i (i < j) or i + 1
        let a: Vec<u32> = (1..n)
            .map(|i| alpha[if i < j { i } else { i + 1 } - 1])
            .collect();
        moi_weighted(f, &sup, &refs(&args), &a)?
    };
    let rhs = first - second;
    let mut m = meta(hs[0].dim(), f);
    m.n = Some(n);
    m.j = Some(j);
    m.jset = Some(jset.to_vec());
    Ok(IdentityReport::from_sides(
        "change-of-variables",
        &lhs,
        &rhs,
        EXACT_TOL,
        m,
    ))
}

/// `V~_{a,b} = V_{a+1} R_{a+1} ... V_b R_b` (identity when `a = b`).
fn tilde_chain(tilde: &[ComplexMatrix], a: usize, b: usize, d: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(d, d);
    for t in &tilde[a..b] {
        out *= t;
    }
    out
}

/// Expansion of the weighted integral into bounded integrals over index chains
/// `0 < j_1 < ... < j_p <= n` with symbols `(f u^p)^[p]`.
pub fn check_expansion(
    f: &ScalarFunction,
    hs: &[HermitianMatrix],
    vs: &[ComplexMatrix],
) -> Result<IdentityReport> {
    check_chain(hs, vs)?;
    let n = vs.len();
    budget(f, n)?;
    let d = hs[0].dim();
    let ds = decs(hs)?;
    let all = refs(&ds);
    let lhs = moi_weighted(f, &all, &refs(vs), &vec![1; n])?;
    let tilde: Vec<ComplexMatrix> = (0..n)
        .map(|k| &vs[k] * resolvent_i(&ds[k + 1], 1))
        .collect();
    let mut rhs = ComplexMatrix::zeros(d, d);
    for mask in 0u32..(1 << n) {
        let js: Vec<usize> = (1..=n).filter(|&k| mask & (1 << (k - 1)) != 0).collect();
        let p = js.len();
        let mut sup = vec![&ds[0]];
        sup.extend(js.iter().map(|&k| &ds[k]));
        let mut args = Vec::with_capacity(p);
        let mut prev = 0;
        for &k in &js {
            args.push(tilde_chain(&tilde, prev, k, d));
            prev = k;
        }
        let term = moi_weighted(&f.times_u_pow(p), &sup, &refs(&args), &vec![0; p])?
            * tilde_chain(&tilde, prev, n, d);
        if (n - p) % 2 == 0 {
            rhs += term;
        } else {
            rhs -= term;
        }
    }
    let mut m = meta(d, f);
    m.n = Some(n);
    Ok(IdentityReport::from_sides(
        "expansion",
        &lhs,
        &rhs,
        EXACT_TOL,
        m,
    ))
}

/// Superscript difference with a general Hermitian `W` inserted at slot `j in 0..=n`:
/// `T^{.., H_j + W, ..}_{f^[n],J} - T^{..}_{f^[n],J} = T^{.., H_j + W, H_j, ..}_{f^[n+1], p_{j+1}(J) u {j+1}}(V_1..V_j, W, V_{j+1}..V_n)`.
pub fn check_superscript_difference_general(
    f: &ScalarFunction,
    hs: &[HermitianMatrix],
    vs: &[ComplexMatrix],
    j: usize,
    w: &HermitianMatrix,
    jset: &[usize],
) -> Result<IdentityReport> {
    check_chain(hs, vs)?;
    let n = vs.len();
    if j > n {
        return Err(OpError::Invalid(format!("slot {j} outside 0..={n}")));
    }
    budget(f, n + 1)?;
    let alpha = weights(n, jset)?;
    let ds = decs(hs)?;
    let moved = dec(&hermitian_sum(&hs[j], w)?)?;
    let mut shifted = refs(&ds);
    shifted[j] = &moved;
    let lhs = moi_weighted(f, &shifted, &refs(vs), &alpha)?
        - moi_weighted(f, &refs(&ds), &refs(vs), &alpha)?;

    let mut sup: Vec<&SpectralDecomposition> = Vec::with_capacity(n + 2);
    sup.extend(ds[..j].iter());
    sup.push(&moved);
    sup.extend(ds[j..].iter());
    let mut args: Vec<&ComplexMatrix> = Vec::with_capacity(n + 1);
    args.extend(vs[..j].iter());
    args.push(w.matrix());
    args.extend(vs[j..].iter());
    let mut a = vec![0u32; n + 1];
    for k in 1..=n {
        a[if k <= j { k } else { k + 1 } - 1] = alpha[k - 1];
    }
    a[j] = 1;
    let rhs = moi_weighted(f, &sup, &args, &a)?;
    let mut m = meta(hs[0].dim(), f);
    m.n = Some(n);
    m.j = Some(j);
    m.jset = Some(jset.to_vec());
    Ok(IdentityReport::from_sides(
        "superscript-difference",
        &lhs,
        &rhs,
        EXACT_TOL,
        m,
    ))
}

/// `W = t V_j` at `j in 1..=n`: the difference equals `t` times the integral with `V_j` duplicated.
pub fn check_superscript_difference(
    f: &ScalarFunction,
    hs: &[HermitianMatrix],
    vs: &[ComplexMatrix],
    j: usize,
    t: f64,
) -> Result<IdentityReport> {
    check_chain(hs, vs)?;
    let n = vs.len();
    if j == 0 || j > n {
        return Err(OpError::Invalid(format!("slot {j} outside 1..={n}")));
    }
    budget(f, n + 1)?;
    let ds = decs(hs)?;
    let vj = hermitian_of(&vs[j - 1])?;
    let moved = dec(&hs[j].add_scaled(&vj, t)?)?;
    let alpha = vec![1; n];
    let mut shifted = refs(&ds);
    shifted[j] = &moved;
    let lhs = moi_weighted(f, &shifted, &refs(vs), &alpha)?
        - moi_weighted(f, &refs(&ds), &refs(vs), &alpha)?;
    let mut sup: Vec<&SpectralDecomposition> = Vec::with_capacity(n + 2);
    sup.extend(ds[..j].iter());
    sup.push(&moved);
    sup.extend(ds[j..].iter());
    let mut args: Vec<&ComplexMatrix> = Vec::with_capacity(n + 1);
    args.extend(vs[..j].iter());
    args.push(&vs[j - 1]);
    args.extend(vs[j..].iter());
    let rhs = moi_weighted(f, &sup, &args, &vec![1; n + 1])? * C64::new(t, 0.0);
    let mut m = meta(hs[0].dim(), f);
    m.n = Some(n);
    m.j = Some(j);
    m.t = Some(t);
    Ok(IdentityReport::from_sides(
        "superscript-difference",
        &lhs,
        &rhs,
        EXACT_TOL,
        m,
    ))
}

/// `sum_s w_s e^{i s x (H+V)} V R e^{i (1-s) x H}` for the Gauss–Legendre rule with `nodes` points.
fn duhamel_integral(
    s0: &SpectralDecomposition,
    s1: &SpectralDecomposition,
    vr: &ComplexMatrix,
    x: f64,
    nodes: usize,
) -> ComplexMatrix {
    let d = s0.dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for (s, w) in Rule::new(nodes).on(0.0, 1.0) {
        let left = s1.map(|l| C64::from_polar(1.0, s * x * l));
        let right = s0.map(|l| C64::from_polar(1.0, (1.0 - s) * x * l));
        acc += left * vr * right * C64::new(w, 0.0);
    }
    acc * (I * x)
}

/// Weighted Duhamel formula
/// `e^{ix(H+V)} R - e^{ixH} R = ix int_0^1 e^{isx(H+V)} V R e^{i(1-s)xH} ds`, `R = (H - i)^{-1}`.
/// The quadrature error estimate compares `nodes` against `nodes / 2` points.
pub fn check_duhamel(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    x: f64,
    nodes: usize,
) -> Result<IdentityReport> {
    if nodes < 2 {
        return Err(OpError::Invalid(format!(
            "need at least 2 quadrature nodes, got {nodes}"
        )));
    }
    let s0 = dec(h)?;
    let s1 = dec_sum(h, &s0, v)?;
    let r = resolvent_i(&s0, 1);
    let e1 = s1.map(|l| C64::from_polar(1.0, x * l));
    let e0 = s0.map(|l| C64::from_polar(1.0, x * l));
    let lhs = (e1 - e0) * &r;
    let vr = v.matrix() * &r;
    let rhs = duhamel_integral(&s0, &s1, &vr, x, nodes);
    let coarse = duhamel_integral(&s0, &s1, &vr, x, nodes / 2);
    let mut m = Metadata {
        dim: h.dim(),
        t: Some(x),
        ..Default::default()
    };
    m.extra.push(("nodes".into(), nodes as f64));
    m.extra
        .push(("quadrature_error".into(), op_norm(&(&rhs - coarse))));
    // both exponential terms have norm ||R||; at x = 0 they cancel exactly
    Ok(IdentityReport::from_sides_scaled(
        "weighted-duhamel",
        &lhs,
        &rhs,
        op_norm(&r),
        QUADRATURE_TOL,
        m,
    ))
}

/// `f(H+V) - f(H) = T^{H+V,H}_{(fu)^[1]}(V R) - f(H+V) V R`.
pub fn check_difference_formula(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
) -> Result<IdentityReport> {
    budget(f, 1)?;
    let s0 = dec(h)?;
    let s1 = dec_sum(h, &s0, v)?;
    let fh = matrix_function(&s0, f)?;
    let fhv = matrix_function(&s1, f)?;
    let vr = v.matrix() * resolvent_i(&s0, 1);
    let lhs = &fhv - fh;
    let rhs = moi_weighted(&f.times_u_pow(1), &[&s1, &s0], &[&vr], &[0])? - fhv * &vr;
    Ok(IdentityReport::from_sides(
        "difference-formula",
        &lhs,
        &rhs,
        EXACT_TOL,
        meta(h.dim(), f),
    ))
}

/// First derivative `T^{H,H}_{f^[1]}(V)` against `T^{H,H}_{(fu)^[1]}(V R) - f(H) V R`.
pub fn check_first_derivative_formula(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
) -> Result<IdentityReport> {
    budget(f, 1)?;
    let s = dec(h)?;
    let lhs = moi_weighted(f, &[&s, &s], &[v.matrix()], &[0])?;
    let vr = v.matrix() * resolvent_i(&s, 1);
    let rhs =
        moi_weighted(&f.times_u_pow(1), &[&s, &s], &[&vr], &[0])? - matrix_function(&s, f)? * &vr;
    let mut m = meta(h.dim(), f);
    m.n = Some(1);
    Ok(IdentityReport::from_sides(
        "first-derivative-formula",
        &lhs,
        &rhs,
        EXACT_TOL,
        m,
    ))
}

/// `(H+V-z)^{-1} - (H-z)^{-1} = -(H+V-z)^{-1} V (H-z)^{-1}`.
pub fn check_second_resolvent(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    z: C64,
) -> Result<IdentityReport> {
    let s0 = dec(h)?;
    let s1 = dec_sum(h, &s0, v)?;
    let r0 = resolvent(&s0, z, 1)?;
    let r1 = resolvent(&s1, z, 1)?;
    let lhs = &r1 - &r0;
    let rhs = -(r1 * v.matrix() * r0);
    let mut m = Metadata {
        dim: h.dim(),
        ..Default::default()
    };
    m.extra.push(("z_re".into(), z.re));
    m.extra.push(("z_im".into(), z.im));
    Ok(IdentityReport::from_sides(
        "second-resolvent",
        &lhs,
        &rhs,
        RESOLVENT_TOL,
        m,
    ))
}

/// Every `alpha in {0,1}^n` against `alpha = 0`.
pub fn check_weight_independence(
    f: &ScalarFunction,
    hs: &[HermitianMatrix],
    vs: &[ComplexMatrix],
) -> Result<Vec<IdentityReport>> {
    check_chain(hs, vs)?;
    let n = vs.len();
    budget(f, n)?;
    let ds = decs(hs)?;
    let all = refs(&ds);
    let args = refs(vs);
    let base = moi_weighted(f, &all, &args, &vec![0; n])?;
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let jset: Vec<usize> = (1..=n).filter(|&k| mask & (1 << (k - 1)) != 0).collect();
        let alpha = weights(n, &jset)?;
        let other = moi_weighted(f, &all, &args, &alpha)?;
        let mut m = meta(hs[0].dim(), f);
        m.n = Some(n);
        m.jset = Some(jset);
        out.push(IdentityReport::from_sides(
            "weight-independence",
            &base,
            &other,
            EXACT_TOL,
            m,
        ));
    }
    Ok(out)
}

/// Compositions of `total` into `parts` positive integers.
fn positive_compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 {
            vec![Vec::new()]
        } else {
            Vec::new()
        };
    }
    if total < parts {
        return Vec::new();
    }
    let mut out = Vec::new();
    for first in 1..=total - (parts - 1) {
        for mut rest in positive_compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `(j_1..j_{l+1})` with `j_1..j_l >= 1`, `j_{l+1} >= 0` and sum `k`.
fn power_splits(k: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for last in 0..=k {
        for mut c in positive_compositions(k - last, l) {
            c.push(last);
            out.push(c);
        }
    }
    out
}

struct Powers {
    tilde: Vec<ComplexMatrix>,
    res: Vec<ComplexMatrix>,
}

impl Powers {
    fn new(s: &SpectralDecomposition, v: &ComplexMatrix, k: usize, r: usize) -> Self {
        let d = s.dim();
        let t = v * resolvent_i(s, 1);
        let mut tilde = vec![ComplexMatrix::identity(d, d)];
        for m in 1..=k {
            tilde.push(&tilde[m - 1] * &t);
        }
        let res = (0..=r).map(|p| resolvent_i(s, p as u32)).collect();
        Self { tilde, res }
    }
}

/// Power expansion in `V~ = V R`:
/// `sum_l sum_j (-1)^{k-l} T_{(fu^l)^[l]}(V~^{j_1}, .., V~^{j_l}) V~^{j_{l+1}}`.
fn power_expansion(
    f: &ScalarFunction,
    s: &SpectralDecomposition,
    pw: &Powers,
    k: usize,
) -> Result<ComplexMatrix> {
    let d = s.dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for l in 0..=k {
        let g = f.times_u_pow(l);
        let sup = vec![s; l + 1];
        for js in power_splits(k, l) {
            let args: Vec<&ComplexMatrix> = js[..l].iter().map(|&m| &pw.tilde[m]).collect();
            let term = moi_weighted(&g, &sup, &args, &vec![0; l])? * &pw.tilde[js[l]];
            if (k - l) % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
    }
    Ok(acc)
}

/// Power expansion with `n - k` extra resolvent powers split off the tail.
fn resolvent_split_expansion(
    f: &ScalarFunction,
    s: &SpectralDecomposition,
    pw: &Powers,
    k: usize,
    n: usize,
) -> Result<ComplexMatrix> {
    let d = s.dim();
    let extra = n - k;
    let mut acc = ComplexMatrix::zeros(d, d);
    for l in 0..=k {
        for js in power_splits(k, l) {
            for r in 0..=extra.min(l) {
                let g = f.times_u_pow(extra + l - r);
                let front_len = l - r;
                let sup = vec![s; front_len + 1];
                let args: Vec<&ComplexMatrix> =
                    js[..front_len].iter().map(|&m| &pw.tilde[m]).collect();
                let front = moi_weighted(&g, &sup, &args, &vec![0; front_len])?;
                let tail_powers = &js[front_len..];
                let mut tail_sum = ComplexMatrix::zeros(d, d);
                for p0 in 0..=extra {
                    for ps in positive_compositions(extra - p0, r) {
                        let mut t = &pw.res[p0] * &pw.tilde[tail_powers[0]];
                        for (q, &p) in ps.iter().enumerate() {
                            t = t * &pw.res[p] * &pw.tilde[tail_powers[q + 1]];
                        }
                        tail_sum += t;
                    }
                }
                let term = front * tail_sum;
                if (k + l + r) % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
        }
    }
    Ok(acc)
}

/// `T^{H..H}_{f^[k]}(V..V)` three ways: direct spectral sum, power expansion in
/// `V R`, and the expansion with `n - k` resolvent powers split off. Returns the
/// three pairwise comparisons.
pub fn check_divexp(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k: usize,
    n: usize,
) -> Result<Vec<IdentityReport>> {
    if k == 0 || k >= n {
        return Err(OpError::Invalid(format!(
            "need 1 <= k <= n - 1, got k={k}, n={n}"
        )));
    }
    budget(f, k)?;
    let s = dec(h)?;
    let pw = Powers::new(&s, v.matrix(), k, n - k);
    let direct = moi_weighted(f, &vec![&s; k + 1], &vec![v.matrix(); k], &vec![0; k])?;
    let short = power_expansion(f, &s, &pw, k)?;
    let long = resolvent_split_expansion(f, &s, &pw, k, n)?;
    let mut m = meta(h.dim(), f);
    m.n = Some(n);
    m.j = Some(k);
    Ok(vec![
        IdentityReport::from_sides(
            "divexp-direct-vs-power",
            &direct,
            &short,
            EXACT_TOL,
            m.clone(),
        ),
        IdentityReport::from_sides(
            "divexp-direct-vs-split",
            &direct,
            &long,
            EXACT_TOL,
            m.clone(),
        ),
        IdentityReport::from_sides("divexp-power-vs-split", &short, &long, EXACT_TOL, m),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBound {
    pub trace_abs: f64,
    pub bound: f64,
}

impl TraceBound {
    pub fn margin(&self) -> f64 {
        self.bound - self.trace_abs
    }

    pub fn holds(&self) -> bool {
        self.trace_abs <= self.bound * (1.0 + 1e-10) + TINY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KreinCheck {
    pub identity: IdentityReport,
    /// `|Tr T_{(fu^n)^[1]}(W R_t^n)| <= ||(fu^n)'||_inf ||W R_t^n||_1`.
    pub first: TraceBound,
    /// `|Tr sum_k (fu^k)(H^t) W R_t^{k+1}| <= n ||fu^{n-1}||_inf ||W R_t^n||_1`.
    pub second: TraceBound,
}

impl KreinCheck {
    pub fn all_hold(&self) -> bool {
        self.identity.pass && self.first.holds() && self.second.holds()
    }
}

/// Splits `T^{H^t,H^t}_{f^[1]}(W)` with `H^t = H + R + tW` into
/// `T_{(fu^n)^[1]}(W (H^t - i)^{-n}) - sum_{k<n} (fu^k)(H^t) W (H^t - i)^{-(k+1)}`
/// and checks the trace bounds of both parts. `split = None` means `(R, W) = (0, V)`,
/// `Some(V')` means `(R, W) = (V', V - V')`.
pub fn check_krein_decomposition(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    t: f64,
    n: usize,
    split: Option<&HermitianMatrix>,
) -> Result<KreinCheck> {
    if n == 0 {
        return Err(OpError::Invalid("need n >= 1".into()));
    }
    budget(f, 1)?;
    let (base, w) = match split {
        None => (h.clone(), v.clone()),
        Some(vp) => (h.add(vp)?, v.add_scaled(vp, -1.0)?),
    };
    let s = dec(&base.add_scaled(&w, t)?)?;
    let lhs = moi_weighted(f, &[&s, &s], &[w.matrix()], &[0])?;
    let wrn = w.matrix() * resolvent_i(&s, n as u32);
    let first = moi_weighted(&f.times_u_pow(n), &[&s, &s], &[&wrn], &[0])?;
    let d = h.dim();
    let mut second = ComplexMatrix::zeros(d, d);
    for k in 0..n {
        second +=
            matrix_function(&s, &f.times_u_pow(k))? * w.matrix() * resolvent_i(&s, k as u32 + 1);
    }
    let rhs = &first - &second;
    let trace_norm = schatten_norm(&wrn, 1.0)?;
    let first_bound = TraceBound {
        trace_abs: trace(&first).norm(),
        bound: sup_norm(f, n, 1) * trace_norm,
    };
    let second_bound = TraceBound {
        trace_abs: trace(&second).norm(),
        bound: n as f64 * sup_norm(f, n - 1, 0) * trace_norm,
    };
    let mut m = meta(d, f);
    m.n = Some(n);
    m.t = Some(t);
    m.extra.push(("first_trace".into(), first_bound.trace_abs));
    m.extra.push(("first_bound".into(), first_bound.bound));
    m.extra
        .push(("second_trace".into(), second_bound.trace_abs));
    m.extra.push(("second_bound".into(), second_bound.bound));
    Ok(KreinCheck {
        identity: IdentityReport::from_sides("krein-decomposition", &lhs, &rhs, EXACT_TOL, m),
        first: first_bound,
        second: second_bound,
    })
}
