//! Spectral shift functions of every order for finite Hermitian pairs.
//!
//! `eta_1 = n_H - n_{H+V}`; the trace densities `rho_k` are sums of B-splines
//! over eigenvalue tuples; `eta_{k+1}(x) = -int_{-inf}^x (eta_k - rho_k)`.

use crate::derivatives::taylor_terms;
use crate::error::{OpError, Result};
use crate::identities::{IdentityReport, Metadata};
use crate::linalg::{
    eigendecompose_default, matrix_function, pairwise_sum, trace, ComplexMatrix, HermitianMatrix,
    SpectralDecomposition, C64,
};
use crate::piecewise::{divided_difference_density, eval_poly, Accumulator, PiecewisePolynomial};
use crate::quad::Rule;
use crate::relbound::HypothesisReport;
use crate::scalar::{factorial, FunctionKind, ScalarFunction};

/// Relative tolerance for the hull-vanishing condition of the recursion.
pub const HULL_TOL: f64 = 1e-9;
pub const KREIN_TOL: f64 = 1e-9;
pub const HIGHER_ORDER_TOL: f64 = 1e-7;
const QUAD_NODES: usize = 20;
const MAX_LEVEL: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CountingFunction {
    /// `(location, multiplicity)`, ascending.
    pub jumps: Vec<(f64, usize)>,
}

impl CountingFunction {
    /// Number of eigenvalues `<= x`.
    pub fn eval(&self, x: f64) -> usize {
        self.jumps
            .iter()
            .take_while(|j| j.0 <= x)
            .map(|j| j.1)
            .sum()
    }

    pub fn total(&self) -> usize {
        self.jumps.iter().map(|j| j.1).sum()
    }
}

pub fn counting_function(s: &SpectralDecomposition) -> CountingFunction {
    let jumps = s
        .cluster_values()
        .iter()
        .zip(s.cluster_ranges())
        .map(|(&x, &(a, b))| (x, b - a))
        .collect();
    CountingFunction { jumps }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralShiftFunction {
    pub order: usize,
    /// Real piecewise polynomial of degree `<= order - 1`, no point masses.
    pub density: PiecewisePolynomial,
    /// Smallest interval holding both spectra.
    pub hull: (f64, f64),
    /// Largest imaginary coefficient dropped when taking the real part.
    pub imag_residue: f64,
}

impl SpectralShiftFunction {
    pub fn eval(&self, x: f64) -> f64 {
        self.density.eval(x).re
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDensity {
    pub order: usize,
    /// `int f^{(k)} rho_k = Tr T^{H..H}_{f^[k]}(V..V)`; may carry point masses.
    pub density: PiecewisePolynomial,
    pub imag_residue: f64,
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

fn perturbed(
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

/// Krein's function `xi = n_H - n_{H+V}`.
pub fn krein_xi(h: &HermitianMatrix, v: &HermitianMatrix) -> Result<SpectralShiftFunction> {
    check_pair(h, v)?;
    let s0 = dec(h)?;
    let s1 = perturbed(h, &s0, v)?;
    Ok(krein_xi_from(&s0, &s1))
}

pub fn krein_xi_from(
    s0: &SpectralDecomposition,
    s1: &SpectralDecomposition,
) -> SpectralShiftFunction {
    let n0 = counting_function(s0);
    let n1 = counting_function(s1);
    let mut grid: Vec<f64> = n0.jumps.iter().chain(&n1.jumps).map(|j| j.0).collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let hull = (s0.min().min(s1.min()), s0.max().max(s1.max()));
    if grid.len() < 2 {
        return SpectralShiftFunction {
            order: 1,
            density: PiecewisePolynomial::zero(),
            hull,
            imag_residue: 0.0,
        };
    }
    let pieces = grid[..grid.len() - 1]
        .iter()
        .map(|&x| vec![C64::new(n0.eval(x) as f64 - n1.eval(x) as f64, 0.0)])
        .collect();
    let density = PiecewisePolynomial::new(grid, pieces, Vec::new()).expect("ascending grid");
    SpectralShiftFunction {
        order: 1,
        density,
        hull,
        imag_residue: 0.0,
    }
}

/// `rho_k = sum Tr(P_0 V P_1 ... V P_0) * B(x_0, x_1, .., x_{k-1}, x_0)` over cluster tuples.
/// Only tuples that return to the first cluster carry weight.
pub fn trace_density(h: &HermitianMatrix, v: &HermitianMatrix, k: usize) -> Result<TraceDensity> {
    check_pair(h, v)?;
    if k == 0 {
        return Err(OpError::Invalid("trace density needs k >= 1".into()));
    }
    let s = dec(h)?;
    Ok(trace_density_from(&s, v.matrix(), k))
}

pub fn trace_density_from(s: &SpectralDecomposition, v: &ComplexMatrix, k: usize) -> TraceDensity {
    let w = s.to_eigenbasis(v);
    let ranges = s.cluster_ranges();
    let xs = s.cluster_values();
    let c = ranges.len();
    let block = |a: usize, b: usize| {
        let (r0, r1) = ranges[a];
        let (c0, c1) = ranges[b];
        w.view((r0, c0), (r1 - r0, c1 - c0)).into_owned()
    };
    let blocks: Vec<Vec<ComplexMatrix>> = (0..c)
        .map(|a| (0..c).map(|b| block(a, b)).collect())
        .collect();
    let mut acc = Accumulator::new(xs.to_vec(), k.saturating_sub(1));
    let mut tuple = vec![0usize; k];
    for c0 in 0..c {
        tuple[0] = c0;
        let (r0, r1) = ranges[c0];
        let start = ComplexMatrix::identity(r1 - r0, r1 - r0);
        walk(1, start, &mut tuple, &blocks, xs, k, &mut acc);
    }
    let density = acc.finish();
    let imag_residue = density.max_imag();
    TraceDensity {
        order: k,
        density,
        imag_residue,
    }
}

fn walk(
    depth: usize,
    prod: ComplexMatrix,
    tuple: &mut Vec<usize>,
    blocks: &[Vec<ComplexMatrix>],
    xs: &[f64],
    k: usize,
    acc: &mut Accumulator,
) {
    let prev = tuple[depth - 1];
    if depth == k {
        let weight = trace(&(prod * &blocks[prev][tuple[0]]));
        if weight == C64::new(0.0, 0.0) {
            return;
        }
        let mut nodes: Vec<f64> = tuple.iter().map(|&t| xs[t]).collect();
        nodes.push(xs[tuple[0]]);
        acc.add_density(&divided_difference_density(&nodes), weight);
        return;
    }
    for next in 0..blocks.len() {
        let b = &blocks[prev][next];
        if b.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        tuple[depth] = next;
        walk(depth + 1, &prod * b, tuple, blocks, xs, k, acc);
    }
}

/// Upper bound for `int |p|`.
fn mass_bound(p: &PiecewisePolynomial) -> f64 {
    let b = p.breakpoints();
    let pieces: f64 = p
        .pieces()
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let h = b[i + 1] - b[i];
            h * q
                .iter()
                .enumerate()
                .map(|(j, a)| a.norm() * h.powi(j as i32))
                .sum::<f64>()
        })
        .sum();
    pieces + p.point_masses().iter().map(|m| m.1.norm()).sum::<f64>()
}

/// `eta_{k+1}(x) = -int_{-inf}^x (eta_k - rho_k)`. Fails when the integral over
/// the whole line exceeds `HULL_TOL` times `int |eta_k| + int |rho_k|`.
pub fn eta_next(eta: &SpectralShiftFunction, rho: &TraceDensity) -> Result<SpectralShiftFunction> {
    if eta.order != rho.order {
        return Err(OpError::Invalid(format!(
            "orders differ: eta_{} and rho_{}",
            eta.order, rho.order
        )));
    }
    let diff = eta.density.sub(&rho.density);
    let (cum, tail) = diff.cumulative();
    let scale = (mass_bound(&eta.density) + mass_bound(&rho.density)).max(f64::MIN_POSITIVE);
    if tail.norm() > HULL_TOL * scale {
        return Err(OpError::HullVanishing(tail.norm() / scale));
    }
    let neg = cum.scale(C64::new(-1.0, 0.0));
    let mut hull = eta.hull;
    if let Some((a, b)) = rho.density.support() {
        hull = (hull.0.min(a), hull.1.max(b));
    }
    Ok(SpectralShiftFunction {
        order: eta.order + 1,
        imag_residue: neg.max_imag().max(eta.imag_residue),
        density: neg.real_part(),
        hull,
    })
}

/// `eta_1..=eta_{k_max}` from Krein's function and the recursion.
pub fn eta_sequence(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k_max: usize,
) -> Result<Vec<SpectralShiftFunction>> {
    check_pair(h, v)?;
    let s0 = dec(h)?;
    let s1 = perturbed(h, &s0, v)?;
    let mut out = vec![krein_xi_from(&s0, &s1)];
    for k in 1..k_max {
        let rho = trace_density_from(&s0, v.matrix(), k);
        let next = eta_next(&out[k - 1], &rho)?;
        out.push(next);
    }
    Ok(out)
}

/// Direct route: `Tr R_k(f) = Tr T^{H+V,H..H}_{f^[k]}(V..V)`, so
/// `eta_k = sum_{a,b} Tr(P'_a V P_{b_1} V .. V P_{b_k}) B(mu_a, lambda_{b_1}, .., lambda_{b_k})`
/// with `P'` the spectral projections of `H+V`. Independent of the recursion.
pub fn eta_direct(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k: usize,
) -> Result<SpectralShiftFunction> {
    check_pair(h, v)?;
    if k == 0 {
        return Err(OpError::Invalid("order must be >= 1".into()));
    }
    let s0 = dec(h)?;
    let s1 = perturbed(h, &s0, v)?;
    let w = s0.to_eigenbasis(v.matrix());
    let x = s0.vectors().adjoint() * s1.vectors();
    let r0 = s0.cluster_ranges();
    let c0 = r0.len();
    let blocks: Vec<Vec<ComplexMatrix>> = (0..c0)
        .map(|a| {
            (0..c0)
                .map(|b| {
                    w.view((r0[a].0, r0[b].0), (r0[a].1 - r0[a].0, r0[b].1 - r0[b].0))
                        .into_owned()
                })
                .collect()
        })
        .collect();
    let mut grid: Vec<f64> = s0
        .cluster_values()
        .iter()
        .chain(s1.cluster_values())
        .copied()
        .collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let mut acc = Accumulator::new(grid, k - 1);
    for (a, &(p, q)) in s1.cluster_ranges().iter().enumerate() {
        let xa = x.columns(p, q - p).into_owned();
        let ya = xa.adjoint();
        let mu = s1.cluster_values()[a];
        for b1 in 0..c0 {
            let start = &ya * w.columns(r0[b1].0, r0[b1].1 - r0[b1].0);
            let mut tuple = vec![b1];
            direct_walk(
                start,
                &mut tuple,
                &blocks,
                &xa,
                r0,
                mu,
                s0.cluster_values(),
                k,
                &mut acc,
            );
        }
    }
    let density = acc.finish();
    let imag_residue = density.max_imag();
    let hull = (s0.min().min(s1.min()), s0.max().max(s1.max()));
    Ok(SpectralShiftFunction {
        order: k,
        density: density.real_part(),
        hull,
        imag_residue,
    })
}

#[allow(clippy::too_many_arguments)]
fn direct_walk(
    prod: ComplexMatrix,
    tuple: &mut Vec<usize>,
    blocks: &[Vec<ComplexMatrix>],
    xa: &ComplexMatrix,
    ranges: &[(usize, usize)],
    mu: f64,
    xs: &[f64],
    k: usize,
    acc: &mut Accumulator,
) {
    let last = *tuple.last().unwrap();
    if tuple.len() == k {
        let (p, q) = ranges[last];
        let weight = trace(&(prod * xa.rows(p, q - p)));
        if weight.norm() == 0.0 {
            return;
        }
        let mut nodes = vec![mu];
        nodes.extend(tuple.iter().map(|&t| xs[t]));
        acc.add_density(&divided_difference_density(&nodes), weight);
        return;
    }
    for next in 0..blocks.len() {
        tuple.push(next);
        direct_walk(
            &prod * &blocks[last][next],
            tuple,
            blocks,
            xa,
            ranges,
            mu,
            xs,
            k,
            acc,
        );
        tuple.pop();
    }
}

/// `int g * p` with 20 Gauss–Legendre nodes per sub-interval, halving every
/// piece until two levels agree to `tol` relative. Returns the value and
/// whether it converged.
pub fn integrate_adaptive(
    p: &PiecewisePolynomial,
    g: &dyn Fn(f64) -> C64,
    tol: f64,
) -> (C64, bool) {
    let rule = Rule::new(QUAD_NODES);
    let b = p.breakpoints();
    let at_level = |level: u32| -> C64 {
        let parts = 1usize << level;
        let mut terms = Vec::with_capacity(p.pieces().len() * parts + p.point_masses().len());
        for (i, q) in p.pieces().iter().enumerate() {
            let (a, e) = (b[i], b[i + 1]);
            let h = (e - a) / parts as f64;
            for m in 0..parts {
                let lo = a + m as f64 * h;
                let mut acc = C64::new(0.0, 0.0);
                for (x, w) in rule.on(lo, lo + h) {
                    acc += g(x) * eval_poly(q, x - a) * w;
                }
                terms.push(acc);
            }
        }
        for &(x, w) in p.point_masses() {
            terms.push(g(x) * w);
        }
        pairwise_sum(&terms)
    };
    let mut prev = at_level(0);
    for level in 1..=MAX_LEVEL {
        let cur = at_level(level);
        if (cur - prev).norm() <= tol * cur.norm().max(f64::MIN_POSITIVE) {
            return (cur, true);
        }
        prev = cur;
    }
    (prev, false)
}

/// Factor convention of the Taylor remainder subtracted in the trace formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemainderConvention {
    /// `f(H+V) - sum_{m<k} (1/m!) d^m/dt^m f(H+tV)|_0`.
    #[default]
    Factorial,
    /// `f(H+V) - sum_{m<k} d^m/dt^m f(H+tV)|_0`.
    Plain,
}

impl RemainderConvention {
    pub fn label(&self) -> &'static str {
        match self {
            RemainderConvention::Factorial => "factorial",
            RemainderConvention::Plain => "plain",
        }
    }
}

/// `Tr R_k(f)` for the chosen convention.
pub fn remainder_trace(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k: usize,
    convention: RemainderConvention,
) -> Result<C64> {
    check_pair(h, v)?;
    if let (FunctionKind::Polynomial { coeffs }, RemainderConvention::Factorial) =
        (f.kind(), convention)
    {
        // the Taylor series is finite: sum the tail instead of subtracting
        let deg = coeffs.len() - 1;
        if deg < k {
            return Ok(C64::new(0.0, 0.0));
        }
        let terms = taylor_terms(f, h, v, deg)?;
        return Ok(pairwise_sum(
            &terms[k..].iter().map(trace).collect::<Vec<_>>(),
        ));
    }
    let s0 = dec(h)?;
    let s1 = perturbed(h, &s0, v)?;
    let mut r = matrix_function(&s1, f)?;
    if k > 0 {
        let terms = taylor_terms(f, h, v, k - 1)?;
        for (m, t) in terms.iter().enumerate() {
            let c = match convention {
                RemainderConvention::Factorial => 1.0,
                RemainderConvention::Plain => factorial(m),
            };
            r -= t * C64::new(c, 0.0);
        }
    }
    Ok(trace(&r))
}

/// `Tr R_k(f) = int f^{(k)} eta_k`.
pub fn trace_formula_check(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k: usize,
    eta: &SpectralShiftFunction,
) -> Result<IdentityReport> {
    trace_formula_check_with(f, h, v, k, eta, RemainderConvention::Factorial)
}

pub fn trace_formula_check_with(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k: usize,
    eta: &SpectralShiftFunction,
    convention: RemainderConvention,
) -> Result<IdentityReport> {
    if k == 0 || eta.order != k {
        return Err(OpError::Invalid(format!(
            "need k >= 1 matching eta order, got k={k}, order={}",
            eta.order
        )));
    }
    if !f.has_derivatives(k) {
        return Err(OpError::DerivativeBudget {
            needed: k,
            available: f.max_deriv_order().unwrap_or(0),
        });
    }
    let lhs = remainder_trace(f, h, v, k, convention)?;
    let (rhs, converged) = integrate_adaptive(&eta.density, &|x| f.deriv(x, k), 1e-9);
    let tol = if k == 1 { KREIN_TOL } else { HIGHER_ORDER_TOL };
    let mut m = Metadata {
        dim: h.dim(),
        n: Some(k),
        f: Some(f.describe()),
        ..Default::default()
    };
    m.extra.push((
        "quadrature_converged".into(),
        if converged { 1.0 } else { 0.0 },
    ));
    m.extra.push(("imag_residue".into(), eta.imag_residue));
    Ok(IdentityReport::from_scalars(
        "trace-formula",
        lhs,
        rhs,
        tol,
        m,
    ))
}

/// Weight exponent: `n + eps` for Krein's function, `n + k + eps` above.
pub fn weight_exponent(n: usize, k: usize, eps: f64) -> f64 {
    if k == 1 {
        n as f64 + eps
    } else {
        (n + k) as f64 + eps
    }
}

/// `int |eta_k(x)| / (1 + |x|)^{exponent}` by piecewise quadrature.
pub fn weighted_norm(eta: &SpectralShiftFunction, n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(OpError::Invalid(format!(
            "eps must lie in (0, 1], got {eps}"
        )));
    }
    let e = weight_exponent(n, eta.order, eps);
    // split at 0 so the weight is smooth on every piece
    let mut grid: Vec<f64> = eta.density.breakpoints().to_vec();
    if let (Some(&a), Some(&b)) = (grid.first(), grid.last()) {
        if a < 0.0 && 0.0 < b && !grid.contains(&0.0) {
            grid.push(0.0);
            grid.sort_by(|x, y| x.total_cmp(y));
        }
    }
    let abs_piece = |x: f64| eta.density.eval(x).norm() / (1.0 + x.abs()).powf(e);
    let rule = Rule::new(QUAD_NODES);
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut prev = rule.integrate(a, b, abs_piece);
        let mut parts = 2usize;
        loop {
            let h = (b - a) / parts as f64;
            let cur: f64 = (0..parts)
                .map(|m| rule.integrate(a + m as f64 * h, a + (m + 1) as f64 * h, abs_piece))
                .sum();
            if (cur - prev).abs() <= 1e-12 * cur.abs().max(f64::MIN_POSITIVE)
                || parts >= 1 << MAX_LEVEL
            {
                total += cur;
                break;
            }
            prev = cur;
            parts *= 2;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNormReport {
    pub order: usize,
    pub n: usize,
    pub eps: f64,
    pub exponent: f64,
    pub value: f64,
    /// `(1+b)/(1-a) max(alpha, alpha^{max(k, n)})`; the constant in front is not asserted.
    pub scaffold: f64,
}

pub fn weighted_norm_report(
    eta: &SpectralShiftFunction,
    hyp: &HypothesisReport,
    eps: f64,
) -> Result<WeightedNormReport> {
    let n = hyp.n;
    let value = weighted_norm(eta, n, eps)?;
    let cert = &hyp.certificate;
    let top = eta.order.max(n) as i32;
    let scaffold = (1.0 + cert.b) / (1.0 - cert.a) * hyp.alpha.max(hyp.alpha.powi(top));
    Ok(WeightedNormReport {
        order: eta.order,
        n,
        eps,
        exponent: weight_exponent(n, eta.order, eps),
        value,
        scaffold,
    })
}
