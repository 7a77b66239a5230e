//! Relative-boundedness certificates and resolvent Schatten tables.

use crate::error::{OpError, Result};
use crate::linalg::{
    eigendecompose, eigendecompose_default, op_norm, resolvent_i, schatten_norm, ComplexMatrix,
    HermitianMatrix, C64,
};

/// Certifies `||V psi||^2 <= a^2 ||H psi||^2 + b^2 ||psi||^2`, which implies
/// `||V psi|| <= a ||H psi|| + b ||psi||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeBoundCertificate {
    pub a: f64,
    pub b: f64,
    /// Smallest eigenvalue of `a^2 H^2 + b^2 - V^* V`.
    pub min_eigenvalue: f64,
    pub scale: f64,
}

impl RelativeBoundCertificate {
    pub fn is_valid(&self) -> bool {
        self.min_eigenvalue >= -1e-10 * self.scale
    }
}

fn check_dims(h: &HermitianMatrix, v: &HermitianMatrix) -> Result<()> {
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

/// Smallest `b` for the given `a`: `b^2 = max(0, lambda_max(V^* V - a^2 H^2))`.
pub fn certify(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    a: f64,
) -> Result<RelativeBoundCertificate> {
    check_dims(h, v)?;
    if !(a >= 0.0) {
        return Err(OpError::Invalid(format!("a must be >= 0, got {a}")));
    }
    let hm = h.matrix();
    let vm = v.matrix();
    let vv = vm.adjoint() * vm;
    let hh = hm * hm;
    let diff = HermitianMatrix::new(&vv - &hh * C64::new(a * a, 0.0))?;
    let top = eigendecompose(&diff, 0.0)?
        .eigenvalues()
        .last()
        .copied()
        .unwrap_or(0.0);
    let b = top.max(0.0).sqrt();
    let scale = op_norm(&vv).max(a * a * op_norm(&hh)).max(1.0);
    let check = HermitianMatrix::new(
        &hh * C64::new(a * a, 0.0)
            + ComplexMatrix::identity(h.dim(), h.dim()) * C64::new(b * b, 0.0)
            - &vv,
    )?;
    let min_eigenvalue = eigendecompose(&check, 0.0)?.eigenvalues()[0];
    Ok(RelativeBoundCertificate {
        a,
        b,
        min_eigenvalue,
        scale,
    })
}

/// `||V (H - i)^{-1}||`.
pub fn rel_norm(h: &HermitianMatrix, v: &HermitianMatrix) -> Result<f64> {
    check_dims(h, v)?;
    let s = eigendecompose_default(h)?;
    Ok(op_norm(&(v.matrix() * resolvent_i(&s, 1))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityRow {
    pub t: f64,
    /// Resolvent power (1 for the shift bound).
    pub p: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityRow {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-10 * self.rhs.max(1.0)
    }
}

/// `||V (H + tV - i)^{-1}|| <= (a + b)/(1 - |t| a)` for each `t` in the grid.
pub fn shift_bound_check(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    cert: &RelativeBoundCertificate,
    t_grid: &[f64],
) -> Result<Vec<InequalityRow>> {
    check_dims(h, v)?;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t.abs() * cert.a >= 1.0 {
            return Err(OpError::Invalid(format!(
                "t = {t} outside (-1/a, 1/a) for a = {}",
                cert.a
            )));
        }
        let ht = h.add_scaled(v, t)?;
        let s = eigendecompose_default(&ht)?;
        let lhs = op_norm(&(v.matrix() * resolvent_i(&s, 1)));
        let rhs = (cert.a + cert.b) / (1.0 - t.abs() * cert.a);
        rows.push(InequalityRow { t, p: 1, lhs, rhs });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchattenEntry {
    pub p: usize,
    /// Schatten exponent `n/p`.
    pub exponent: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub n: usize,
    pub table: Vec<SchattenEntry>,
    pub alpha: f64,
    pub certificate: RelativeBoundCertificate,
    /// `||V (H + tV - i)^{-p}||_{n/p}` against `2^p (1+b)/(1-a) alpha max(1, alpha^{p-1})`.
    pub resolvent_bounds: Vec<InequalityRow>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.resolvent_bounds.iter().all(InequalityRow::holds)
    }
}

/// `[||V (H - i)^{-p}||_{n/p}]_{p = 1..n}`.
pub fn schatten_table(
    h: &HermitianMatrix,
    v: &ComplexMatrix,
    n: usize,
) -> Result<Vec<SchattenEntry>> {
    let s = eigendecompose_default(h)?;
    (1..=n)
        .map(|p| {
            let exponent = n as f64 / p as f64;
            let value = schatten_norm(&(v * resolvent_i(&s, p as u32)), exponent)?;
            Ok(SchattenEntry { p, exponent, value })
        })
        .collect()
}

/// Schatten table, `alpha_{n,V,H}`, and the resolvent inequality along `H + tV`
/// for `t in {0, 1/2, 1}` (requires `a < 1`).
pub fn hypothesis_report(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    n: usize,
    a: f64,
) -> Result<HypothesisReport> {
    check_dims(h, v)?;
    if n < 2 {
        return Err(OpError::Invalid(format!("n must be >= 2, got {n}")));
    }
    if !(a < 1.0) {
        return Err(OpError::Invalid(format!("H-bound a must be < 1, got {a}")));
    }
    let certificate = certify(h, v, a)?;
    let table = schatten_table(h, v.matrix(), n)?;
    let alpha = table.iter().fold(0.0_f64, |m, e| m.max(e.value));
    let front = (1.0 + certificate.b) / (1.0 - certificate.a);
    let mut rows = Vec::new();
    for t in [0.0, 0.5, 1.0] {
        let s = eigendecompose_default(&h.add_scaled(v, t)?)?;
        for p in 1..=n {
            let lhs = schatten_norm(
                &(v.matrix() * resolvent_i(&s, p as u32)),
                n as f64 / p as f64,
            )?;
            let rhs = 2f64.powi(p as i32) * front * alpha * 1f64.max(alpha.powi(p as i32 - 1));
            rows.push(InequalityRow { t, p, lhs, rhs });
        }
    }
    Ok(HypothesisReport {
        n,
        table,
        alpha,
        certificate,
        resolvent_bounds: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_a_gives_operator_norm() {
        let h = HermitianMatrix::diag(&[1.0, -3.0]);
        let v = HermitianMatrix::from_real(&[vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let c = certify(&h, &v, 0.0).unwrap();
        assert!((c.b - op_norm(v.matrix())).abs() < 1e-12);
        assert!(c.is_valid());
    }

    #[test]
    fn two_by_two_by_hand() {
        let h = HermitianMatrix::diag(&[0.0, 10.0]);
        let v = HermitianMatrix::diag(&[0.0, 5.0]);
        let c = certify(&h, &v, 0.5).unwrap();
        assert_eq!(c.b, 0.0);
        assert!(c.is_valid());
    }

    #[test]
    fn rel_norm_scalars() {
        let r = rel_norm(
            &HermitianMatrix::diag(&[10.0]),
            &HermitianMatrix::diag(&[3.0]),
        )
        .unwrap();
        assert!((r - 3.0 / 101f64.sqrt()).abs() < 1e-15);
        let r = rel_norm(
            &HermitianMatrix::diag(&[0.0]),
            &HermitianMatrix::diag(&[3.0]),
        )
        .unwrap();
        assert!((r - 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_schatten_table() {
        let h = HermitianMatrix::diag(&[0.0, 1.0]);
        let v = HermitianMatrix::diag(&[1.0, 1.0]);
        let r = hypothesis_report(&h, &v, 2, 0.0).unwrap();
        assert!((r.table[0].value - 1.5f64.sqrt()).abs() < 1e-14);
        assert!((r.table[1].value - 1.5).abs() < 1e-14);
        assert!(r.all_hold());
    }

    #[test]
    fn zero_perturbation() {
        let h = HermitianMatrix::diag(&[0.0, 1.0, 2.0]);
        let v = HermitianMatrix::zeros(3);
        let r = hypothesis_report(&h, &v, 3, 0.5).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert!(r.table.iter().all(|e| e.value == 0.0));
        let c = certify(&h, &v, 0.3).unwrap();
        assert_eq!((c.a, c.b), (0.3, 0.0));
    }
}
