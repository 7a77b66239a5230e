//! Dense complex linear algebra on small Hermitian problems.
//!
//! Every spectral quantity in the crate goes through [`SpectralDecomposition`],
//! whose eigenvalues are snapped to cluster representatives so that functional
//! calculus and the operator-integral sums see the same spectrum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{OpError, Result};
use crate::scalar::ScalarFunction;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Relative clustering threshold used by [`default_tau`].
pub const TAU_CLUSTER_REL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: ComplexMatrix,
}

impl HermitianMatrix {
    /// Builds a Hermitian matrix from `m`, replacing it by `(m + m^*)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(OpError::Dimension(format!(
                "Hermitian matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(Self { m: sym })
    }

    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(m)
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { m }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: ComplexMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: self.m.scale(s) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(&self.m, &other.m)?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    /// `self + t * other`.
    pub fn add_scaled(&self, other: &Self, t: f64) -> Result<Self> {
        check_same(&self.m, &other.m)?;
        Ok(Self {
            m: &self.m + other.m.scale(t),
        })
    }

    pub fn max_abs_entry(&self) -> f64 {
        max_abs_entry(&self.m)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        op_norm(&self.m)
    }
}

fn check_same(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(OpError::Dimension(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn max_abs_entry(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Spectral decomposition with eigenvalues in ascending order and clusters of
/// nearly equal eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    raw: Vec<f64>,
    vectors: ComplexMatrix,
    ranges: Vec<(usize, usize)>,
    values: Vec<f64>,
    cluster_of: Vec<usize>,
    tau: f64,
}

/// `1e-8 * ||H||`, the default clustering threshold.
pub fn default_tau(h: &HermitianMatrix) -> f64 {
    TAU_CLUSTER_REL * h.norm()
}

/// Eigendecomposition with clustering by transitive closure at threshold `tau`.
pub fn eigendecompose(h: &HermitianMatrix, tau: f64) -> Result<SpectralDecomposition> {
    if !(tau >= 0.0) {
        return Err(OpError::Invalid(format!(
            "tau_cluster must be >= 0, got {tau}"
        )));
    }
    let n = h.dim();
    let eig = h
        .matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 1000 * n.max(10))
        .ok_or(OpError::NoConvergence {
            dim: n,
            max_abs: h.max_abs_entry(),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let raw: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(from_parts(raw, vectors, tau))
}

/// Eigendecomposition with the default threshold.
pub fn eigendecompose_default(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    eigendecompose(h, default_tau(h))
}

fn from_parts(raw: Vec<f64>, vectors: ComplexMatrix, tau: f64) -> SpectralDecomposition {
    let n = raw.len();
    let mut ranges = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || raw[k] - raw[k - 1] > tau {
            ranges.push((start, k));
            start = k;
        }
    }
    let values: Vec<f64> = ranges
        .iter()
        .map(|&(a, b)| {
            if b - a == 1 {
                raw[a]
            } else {
                raw[a..b].iter().sum::<f64>() / (b - a) as f64
            }
        })
        .collect();
    let mut cluster_of = vec![0; n];
    for (c, &(a, b)) in ranges.iter().enumerate() {
        for slot in &mut cluster_of[a..b] {
            *slot = c;
        }
    }
    SpectralDecomposition {
        raw,
        vectors,
        ranges,
        values,
        cluster_of,
        tau,
    }
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.raw.len()
    }

    /// Eigenvalues as returned by the solver, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.raw
    }

    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cluster_count(&self) -> usize {
        self.ranges.len()
    }

    /// Index ranges `[start, end)` of the clusters.
    pub fn cluster_ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    /// Representative eigenvalue of each cluster (the cluster mean).
    pub fn cluster_values(&self) -> &[f64] {
        &self.values
    }

    pub fn cluster_of(&self, k: usize) -> usize {
        self.cluster_of[k]
    }

    /// Representative eigenvalue attached to eigenvector `k`.
    pub fn node(&self, k: usize) -> f64 {
        self.values[self.cluster_of[k]]
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        self.ranges.iter().map(|&(a, b)| (a..b).collect()).collect()
    }

    pub fn projector(&self, c: usize) -> ComplexMatrix {
        let (a, b) = self.ranges[c];
        let u = self.vectors.columns(a, b - a);
        &u * u.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// `sum_c g(lambda_c) P_c`.
    pub fn map(&self, g: impl Fn(f64) -> C64) -> ComplexMatrix {
        let d: Vec<C64> = (0..self.dim()).map(|k| g(self.node(k))).collect();
        self.conjugate_diag(&d)
    }

    /// `U diag(d) U^*`.
    pub fn conjugate_diag(&self, d: &[C64]) -> ComplexMatrix {
        let u = &self.vectors;
        let n = self.dim();
        let mut ud = u.clone();
        for j in 0..n {
            let s = d[j];
            for i in 0..n {
                ud[(i, j)] *= s;
            }
        }
        ud * u.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d: Vec<C64> = self.raw.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.conjugate_diag(&d)
    }

    /// The matrix with eigenvalues replaced by their cluster representatives.
    pub fn snapped(&self) -> HermitianMatrix {
        HermitianMatrix {
            m: self.map(|x| C64::new(x, 0.0)),
        }
    }

    /// `U^* A U`.
    pub fn to_eigenbasis(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }
}

/// `A` expressed between two eigenbases: `U_left^* A U_right`.
pub fn between(
    left: &SpectralDecomposition,
    a: &ComplexMatrix,
    right: &SpectralDecomposition,
) -> ComplexMatrix {
    left.vectors.adjoint() * a * &right.vectors
}

/// `f(H)` by functional calculus.
pub fn matrix_function(s: &SpectralDecomposition, f: &ScalarFunction) -> Result<ComplexMatrix> {
    let mut d = Vec::with_capacity(s.dim());
    for k in 0..s.dim() {
        let x = s.node(k);
        let v = f.eval(x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(OpError::Evaluation(x));
        }
        d.push(v);
    }
    Ok(s.conjugate_diag(&d))
}

/// `(H - z)^{-power}`.
pub fn resolvent(s: &SpectralDecomposition, z: C64, power: u32) -> Result<ComplexMatrix> {
    if z.im == 0.0 {
        return Err(OpError::RealResolventPoint(z.re));
    }
    if power == 0 {
        return Err(OpError::Invalid("resolvent power must be positive".into()));
    }
    Ok(s.map(|x| (C64::new(x, 0.0) - z).powi(-(power as i32))))
}

/// `(H - i)^{-power}`, the weight used throughout.
pub fn resolvent_i(s: &SpectralDecomposition, power: u32) -> ComplexMatrix {
    if power == 0 {
        return ComplexMatrix::identity(s.dim(), s.dim());
    }
    s.map(|x| (C64::new(x, -1.0)).powi(-(power as i32)))
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .expect("SVD without iteration cap converges");
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schatten `p`-norm; `p = f64::INFINITY` is the operator norm.
pub fn schatten_norm(a: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(OpError::SchattenExponent(p));
    }
    let s = singular_values(a);
    Ok(schatten_from_singular(&s, p))
}

pub fn schatten_from_singular(s: &[f64], p: f64) -> f64 {
    let top = s.iter().fold(0.0_f64, |m, &x| m.max(x));
    if top == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return top;
    }
    let sum = pairwise_sum_real(&s.iter().map(|&x| (x / top).powf(p)).collect::<Vec<_>>());
    top * sum.powf(1.0 / p)
}

pub fn op_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    let v: Vec<f64> = a.iter().map(|z| z.norm_sqr()).collect();
    pairwise_sum_real(&v).sqrt()
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    let v: Vec<C64> = (0..a.nrows().min(a.ncols())).map(|k| a[(k, k)]).collect();
    pairwise_sum(&v)
}

/// Pairwise summation in fixed index order.
pub fn pairwise_sum(v: &[C64]) -> C64 {
    match v.len() {
        0 => C64::new(0.0, 0.0),
        1 => v[0],
        n if n <= 8 => v.iter().fold(C64::new(0.0, 0.0), |a, &b| a + b),
        n => {
            let (l, r) = v.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

pub fn pairwise_sum_real(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let (l, r) = v.split_at(n / 2);
            pairwise_sum_real(l) + pairwise_sum_real(r)
        }
    }
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(n, n)
}

pub fn diag_c(d: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_column_slice(d))
}

/// Product of a list of matrices, left to right. Empty list gives the identity of size `n`.
pub fn product(n: usize, factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut acc = identity(n);
    for f in factors {
        acc = acc * *f;
    }
    acc
}
