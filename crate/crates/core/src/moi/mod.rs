//! Multiple operator integrals with divided-difference symbols.
//!
//! In eigenbases `H_j = U_j diag(lambda^j) U_j^*` the integral with symbol
//! `f^{[n]}` is
//! `U_0 M U_n^*`, `M[a_0, a_n] = sum phi(lambda_{a_0}, ..., lambda_{a_n}) W_1[a_0, a_1] ... W_n[a_{n-1}, a_n]`
//! with `W_j = U_{j-1}^* V_j U_j`. Weighted requests multiply the symbol by
//! `prod (lambda_{a_j} - i)^{alpha_j}` and the arguments by `(H_j - i)^{-alpha_j}`.

pub mod quadrature;
pub mod simplex;

pub use quadrature::{moi_quadrature, QuadratureOptions};

use rayon::prelude::*;

use crate::error::{OpError, Result};
use crate::linalg::{
    between, matrix_function, op_norm, resolvent_i, schatten_norm, ComplexMatrix,
    SpectralDecomposition, C64, I,
};
use crate::scalar::{
    binomial, divided_difference, factorial, fourier_norm_derivative, sup_norm,
    FourierNormEstimate, ScalarFunction,
};

/// Largest symbol table (product of cluster counts of `H_1..H_n`) built per leading cluster.
pub const MAX_TABLE: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct MoiRequest {
    pub f: ScalarFunction,
    pub superscripts: Vec<SpectralDecomposition>,
    pub arguments: Vec<ComplexMatrix>,
    pub alpha: Vec<u32>,
}

impl MoiRequest {
    pub fn new(
        f: ScalarFunction,
        superscripts: Vec<SpectralDecomposition>,
        arguments: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        let alpha = vec![0; arguments.len()];
        Self::weighted(f, superscripts, arguments, alpha)
    }

    pub fn weighted(
        f: ScalarFunction,
        superscripts: Vec<SpectralDecomposition>,
        arguments: Vec<ComplexMatrix>,
        alpha: Vec<u32>,
    ) -> Result<Self> {
        let hs: Vec<&SpectralDecomposition> = superscripts.iter().collect();
        let vs: Vec<&ComplexMatrix> = arguments.iter().collect();
        check_shapes(&hs, &vs)?;
        if alpha.len() != arguments.len() {
            return Err(OpError::Dimension(format!(
                "{} weights for {} arguments",
                alpha.len(),
                arguments.len()
            )));
        }
        let n = arguments.len();
        if !f.has_derivatives(n) {
            return Err(OpError::DerivativeBudget {
                needed: n,
                available: f.max_deriv_order().unwrap_or(0),
            });
        }
        Ok(Self {
            f,
            superscripts,
            arguments,
            alpha,
        })
    }

    pub fn order(&self) -> usize {
        self.arguments.len()
    }

    pub fn dim(&self) -> usize {
        self.superscripts[0].dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSource {
    /// `(1/n!) ||f^{(n)}||^ prod ||V_j||`, valid for bounded arguments.
    FourierDerivative,
    /// `sum_p C(n,p) (1/p!) ||(f u^p)^{(p)}||^ prod ||V_j (H_j - i)^{-1}||`.
    WeightedExpansion,
}

impl BoundSource {
    pub fn label(&self) -> &'static str {
        match self {
            BoundSource::FourierDerivative => "fourier-derivative",
            BoundSource::WeightedExpansion => "weighted-expansion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    Spectral,
    Quadrature,
}

impl EvalPath {
    pub fn label(&self) -> &'static str {
        match self {
            EvalPath::Spectral => "spectral",
            EvalPath::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AprioriBound {
    pub value: f64,
    pub source: BoundSource,
    /// False when a Fourier norm came from an FFT estimate flagged unreliable.
    pub reliable: bool,
    pub norms: Vec<FourierNormEstimate>,
}

#[derive(Debug, Clone)]
pub struct MoiResult {
    pub value: ComplexMatrix,
    pub apriori_bound: f64,
    pub bound_source: BoundSource,
    pub bound_reliable: bool,
    pub eval_path: EvalPath,
    /// Zero for the spectral path.
    pub error_estimate: f64,
    pub converged: bool,
}

impl MoiResult {
    /// `||value|| <= bound (1 + 1e-9)`.
    pub fn within_bound(&self) -> bool {
        op_norm(&self.value) <= self.apriori_bound * (1.0 + 1e-9)
    }
}

fn check_shapes(hs: &[&SpectralDecomposition], vs: &[&ComplexMatrix]) -> Result<()> {
    if hs.len() != vs.len() + 1 {
        return Err(OpError::Dimension(format!(
            "{} operators for {} arguments",
            hs.len(),
            vs.len()
        )));
    }
    let d = hs[0].dim();
    if hs.iter().any(|h| h.dim() != d) || vs.iter().any(|v| v.shape() != (d, d)) {
        return Err(OpError::Dimension(
            "operators and arguments must share one dimension".into(),
        ));
    }
    Ok(())
}

/// `T^{H_0..H_n}_{f^{[n]}}(V_1..V_n)` for bounded arguments.
pub fn moi(
    f: &ScalarFunction,
    hs: &[&SpectralDecomposition],
    vs: &[&ComplexMatrix],
) -> Result<ComplexMatrix> {
    let alpha = vec![0; vs.len()];
    moi_weighted(f, hs, vs, &alpha)
}

/// `T_{f^{[n]} u^alpha}(V_1 (H_1 - i)^{-alpha_1}, ..., V_n (H_n - i)^{-alpha_n})`.
pub fn moi_weighted(
    f: &ScalarFunction,
    hs: &[&SpectralDecomposition],
    vs: &[&ComplexMatrix],
    alpha: &[u32],
) -> Result<ComplexMatrix> {
    check_shapes(hs, vs)?;
    let n = vs.len();
    if alpha.len() != n {
        return Err(OpError::Dimension(format!(
            "{} weights for {} arguments",
            alpha.len(),
            n
        )));
    }
    if n == 0 {
        return matrix_function(hs[0], f);
    }
    let d = hs[0].dim();
    let ws: Vec<ComplexMatrix> = (0..n)
        .map(|j| {
            let arg = if alpha[j] == 0 {
                vs[j].clone()
            } else {
                vs[j] * resolvent_i(hs[j + 1], alpha[j])
            };
            between(hs[j], &arg, hs[j + 1])
        })
        .collect();
    let counts: Vec<usize> = hs[1..].iter().map(|h| h.cluster_count()).collect();
    let table_len = counts
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .unwrap_or(usize::MAX);
    if table_len > MAX_TABLE {
        return Err(OpError::Invalid(format!(
            "symbol table of {table_len} entries exceeds {MAX_TABLE}"
        )));
    }
    // weight factors per slot and cluster
    let weights: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            hs[j + 1]
                .cluster_values()
                .iter()
                .map(|&x| (C64::new(x, 0.0) - I).powi(alpha[j] as i32))
                .collect()
        })
        .collect();
    let cluster_idx: Vec<Vec<usize>> = hs[1..]
        .iter()
        .map(|h| (0..d).map(|k| h.cluster_of(k)).collect())
        .collect();
    let h0 = hs[0];
    let rows: Vec<Result<Vec<(usize, Vec<C64>)>>> = (0..h0.cluster_count())
        .into_par_iter()
        .map(|c0| {
            let table = symbol_table(f, h0.cluster_values()[c0], hs, &counts, &weights)?;
            let (a, b) = h0.cluster_ranges()[c0];
            let mut out = Vec::with_capacity(b - a);
            for a0 in a..b {
                let mut row = vec![C64::new(0.0, 0.0); d];
                contract(
                    1,
                    a0,
                    C64::new(1.0, 0.0),
                    0,
                    &ws,
                    &cluster_idx,
                    &counts,
                    &table,
                    &mut row,
                );
                out.push((a0, row));
            }
            Ok(out)
        })
        .collect();
    let mut m = ComplexMatrix::zeros(d, d);
    for r in rows {
        for (a0, row) in r? {
            for (k, v) in row.into_iter().enumerate() {
                m[(a0, k)] = v;
            }
        }
    }
    Ok(hs[0].vectors() * m * hs[n].vectors().adjoint())
}

/// `table[c_1..c_n] = f^{[n]}(x_0, x_{c_1}, ..., x_{c_n}) prod (x_{c_j} - i)^{alpha_j}`, row-major.
fn symbol_table(
    f: &ScalarFunction,
    x0: f64,
    hs: &[&SpectralDecomposition],
    counts: &[usize],
    weights: &[Vec<C64>],
) -> Result<Vec<C64>> {
    let n = counts.len();
    let len: usize = counts.iter().product();
    let mut table = Vec::with_capacity(len);
    let mut idx = vec![0usize; n];
    let mut nodes = vec![x0; n + 1];
    for _ in 0..len {
        let mut w = C64::new(1.0, 0.0);
        for j in 0..n {
            nodes[j + 1] = hs[j + 1].cluster_values()[idx[j]];
            w *= weights[j][idx[j]];
        }
        table.push(divided_difference(f, &nodes)? * w);
        // row-major odometer: last slot fastest
        for j in (0..n).rev() {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn contract(
    j: usize,
    prev: usize,
    partial: C64,
    flat: usize,
    ws: &[ComplexMatrix],
    cluster_idx: &[Vec<usize>],
    counts: &[usize],
    table: &[C64],
    row: &mut [C64],
) {
    let n = ws.len();
    let w = &ws[j - 1];
    let d = w.ncols();
    for a in 0..d {
        let x = w[(prev, a)];
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        let p = partial * x;
        let idx = flat * counts[j - 1] + cluster_idx[j - 1][a];
        if j == n {
            row[a] += p * table[idx];
        } else {
            contract(j + 1, a, p, idx, ws, cluster_idx, counts, table, row);
        }
    }
}

/// Number of index tuples `d^{n+1}` visited by the spectral sum.
pub fn tuple_count(d: usize, n: usize) -> f64 {
    (d as f64).powi(n as i32 + 1)
}

/// Value plus a-priori bound.
pub fn moi_spectral(req: &MoiRequest) -> Result<MoiResult> {
    let hs: Vec<&SpectralDecomposition> = req.superscripts.iter().collect();
    let vs: Vec<&ComplexMatrix> = req.arguments.iter().collect();
    let value = moi_weighted(&req.f, &hs, &vs, &req.alpha)?;
    let bound = apriori_bound(req);
    Ok(MoiResult {
        value,
        apriori_bound: bound.value,
        bound_source: bound.source,
        bound_reliable: bound.reliable,
        eval_path: EvalPath::Spectral,
        error_estimate: 0.0,
        converged: true,
    })
}

/// Fourier norms needed by [`apriori_bound_with`].
#[derive(Debug, Clone)]
pub struct BoundNorms {
    /// `||f^{(n)}||^`.
    pub derivative: FourierNormEstimate,
    /// `||(f u^p)^{(p)}||^` for `p = 0..=n`, computed on demand.
    pub weighted: Option<Vec<FourierNormEstimate>>,
}

impl BoundNorms {
    pub fn compute(f: &ScalarFunction, n: usize, with_weighted: bool) -> Self {
        let derivative = fourier_norm_derivative(f, 0, n);
        let weighted =
            with_weighted.then(|| (0..=n).map(|p| fourier_norm_derivative(f, p, p)).collect());
        Self {
            derivative,
            weighted,
        }
    }
}

pub fn apriori_bound(req: &MoiRequest) -> AprioriBound {
    let weighted = req.alpha.iter().any(|&a| a > 0);
    let norms = BoundNorms::compute(&req.f, req.order(), weighted);
    apriori_bound_with(&norms, req)
}

/// Bounded arguments use the Fourier norm of `f^{(n)}`; weighted requests use
/// the expansion bound in `||V_j (H_j - i)^{-1}||`.
pub fn apriori_bound_with(norms: &BoundNorms, req: &MoiRequest) -> AprioriBound {
    let n = req.order();
    let weighted = req.alpha.iter().any(|&a| a > 0);
    if !weighted {
        let prod: f64 = req.arguments.iter().map(op_norm).product();
        let e = &norms.derivative;
        return AprioriBound {
            value: bound_product(e.upper() / factorial(n), prod),
            source: BoundSource::FourierDerivative,
            reliable: e.reliable,
            norms: vec![e.clone()],
        };
    }
    let table = match &norms.weighted {
        Some(t) => t.clone(),
        None => (0..=n)
            .map(|p| fourier_norm_derivative(&req.f, p, p))
            .collect(),
    };
    let prod: f64 = (0..n)
        .map(|j| op_norm(&(&req.arguments[j] * resolvent_i(&req.superscripts[j + 1], 1))))
        .product();
    let sum: f64 = table
        .iter()
        .enumerate()
        .map(|(p, e)| binomial(n, p) / factorial(p) * e.upper())
        .sum();
    AprioriBound {
        value: bound_product(sum, prod),
        source: BoundSource::WeightedExpansion,
        reliable: table.iter().all(|e| e.reliable),
        norms: table,
    }
}

/// `a * b` with `inf * 0 = 0` (a vanishing argument forces a vanishing integral).
fn bound_product(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// The expansion bound in `||V_j (H_j - i)^{-1}||`, also for bounded requests.
pub fn expansion_bound(f: &ScalarFunction, req: &MoiRequest) -> AprioriBound {
    let norms = BoundNorms::compute(f, req.order(), true);
    let mut weighted = req.clone();
    weighted.alpha = vec![1; req.order()];
    apriori_bound_with(&norms, &weighted)
}

/// `||T_{f^{[n]}}(V_1..V_n)||_alpha / (sup |f^{(n)}| prod ||V_m||_{alpha_m})`, where
/// `1/alpha = sum 1/alpha_m`. Reported only; no bound on it is asserted.
#[derive(Debug, Clone, PartialEq)]
pub struct SchattenRatio {
    pub exponents: Vec<f64>,
    pub alpha: f64,
    pub moi_norm: f64,
    /// Sampled, with the slack of `sup_norm`.
    pub derivative_sup: f64,
    pub argument_norms: Vec<f64>,
    pub ratio: f64,
}

pub fn schatten_ratio(
    f: &ScalarFunction,
    hs: &[&SpectralDecomposition],
    vs: &[&ComplexMatrix],
    exponents: &[f64],
) -> Result<SchattenRatio> {
    let n = vs.len();
    if exponents.len() != n || n == 0 {
        return Err(OpError::Dimension(format!(
            "{} exponents for {} arguments",
            exponents.len(),
            n
        )));
    }
    if let Some(e) = exponents.iter().find(|&&e| !(e > 1.0 && e.is_finite())) {
        return Err(OpError::Invalid(format!(
            "Schatten exponents must lie in (1, inf), got {e}"
        )));
    }
    let alpha = 1.0 / exponents.iter().map(|e| 1.0 / e).sum::<f64>();
    if alpha <= 1.0 {
        return Err(OpError::Invalid(format!(
            "combined exponent {alpha} must exceed 1"
        )));
    }
    if !f.has_derivatives(n) {
        return Err(OpError::DerivativeBudget {
            needed: n,
            available: f.max_deriv_order().unwrap_or(0),
        });
    }
    let t = moi(f, hs, vs)?;
    let moi_norm = schatten_norm(&t, alpha)?;
    let argument_norms = vs
        .iter()
        .zip(exponents)
        .map(|(v, &e)| schatten_norm(v, e))
        .collect::<Result<Vec<_>>>()?;
    let derivative_sup = sup_norm(f, 0, n);
    let denom = derivative_sup * argument_norms.iter().product::<f64>();
    let ratio = if denom > 0.0 { moi_norm / denom } else { 0.0 };
    Ok(SchattenRatio {
        exponents: exponents.to_vec(),
        alpha,
        moi_norm,
        derivative_sup,
        argument_norms,
        ratio,
    })
}
