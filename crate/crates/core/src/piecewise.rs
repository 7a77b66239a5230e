//! Piecewise polynomials with point masses.
//!
//! Each piece is stored in the local variable `s = x - left breakpoint`, so
//! short intervals keep full relative precision. The function is zero outside
//! `[first, last)` and right-continuous at breakpoints.

use crate::linalg::C64;
use crate::quad::Rule;
use crate::scalar::{factorial, ScalarFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<C64>>,
    masses: Vec<(f64, C64)>,
}

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Coefficients of `p(s + delta)` given those of `p(s)`.
pub fn shift_poly(coeffs: &[C64], delta: f64) -> Vec<C64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    if delta == 0.0 {
        return c;
    }
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let next = c[j + 1];
            c[j] += next * delta;
        }
    }
    c
}

pub fn eval_poly(coeffs: &[C64], s: f64) -> C64 {
    coeffs.iter().rev().fold(czero(), |acc, &a| acc * s + a)
}

/// `int_0^h p(s) ds`.
pub fn integrate_poly(coeffs: &[C64], h: f64) -> C64 {
    let mut acc = czero();
    for (j, &a) in coeffs.iter().enumerate().rev() {
        acc = acc * h + a / (j as f64 + 1.0);
    }
    acc * h
}

impl PiecewisePolynomial {
    pub fn zero() -> Self {
        Self {
            breakpoints: Vec::new(),
            pieces: Vec::new(),
            masses: Vec::new(),
        }
    }

    /// Validates ascending breakpoints and piece count.
    pub fn new(
        breakpoints: Vec<f64>,
        pieces: Vec<Vec<C64>>,
        mut masses: Vec<(f64, C64)>,
    ) -> Result<Self, String> {
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("breakpoints must be strictly ascending".into());
        }
        if !breakpoints.is_empty() && pieces.len() + 1 != breakpoints.len() {
            return Err(format!(
                "{} pieces for {} breakpoints",
                pieces.len(),
                breakpoints.len()
            ));
        }
        if breakpoints.is_empty() && !pieces.is_empty() {
            return Err("pieces without breakpoints".into());
        }
        masses.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            breakpoints,
            pieces,
            masses: merge_masses(masses),
        })
    }

    pub fn point_mass(at: f64, weight: C64) -> Self {
        Self {
            breakpoints: Vec::new(),
            pieces: Vec::new(),
            masses: vec![(at, weight)],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<C64>] {
        &self.pieces
    }

    pub fn point_masses(&self) -> &[(f64, C64)] {
        &self.masses
    }

    pub fn degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// Smallest interval holding all pieces and masses.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let (Some(a), Some(b)) = (self.breakpoints.first(), self.breakpoints.last()) {
            lo = lo.min(*a);
            hi = hi.max(*b);
        }
        for (x, _) in &self.masses {
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
        if lo.is_finite() {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Value of the absolutely continuous part.
    pub fn eval(&self, x: f64) -> C64 {
        match self.locate(x) {
            Some(i) => eval_poly(&self.pieces[i], x - self.breakpoints[i]),
            None => czero(),
        }
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let b = &self.breakpoints;
        if b.len() < 2 || x < b[0] || x >= b[b.len() - 1] {
            return None;
        }
        let i = b.partition_point(|&t| t <= x) - 1;
        Some(i)
    }

    /// Exact integral: closed-form antiderivatives per piece plus masses.
    pub fn total_integral(&self) -> C64 {
        let mut terms: Vec<C64> = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| integrate_poly(p, self.breakpoints[i + 1] - self.breakpoints[i]))
            .collect();
        terms.extend(self.masses.iter().map(|m| m.1));
        crate::linalg::pairwise_sum(&terms)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|&a| a * c).collect())
                .collect(),
            masses: self.masses.iter().map(|&(x, w)| (x, w * c)).collect(),
        }
    }

    /// Same function on a refined breakpoint set (must contain the current one).
    fn refine(&self, grid: &[f64]) -> Vec<Vec<C64>> {
        let mut out = Vec::with_capacity(grid.len().saturating_sub(1));
        for j in 0..grid.len().saturating_sub(1) {
            let x = grid[j];
            match self.locate(x) {
                Some(i) => out.push(shift_poly(&self.pieces[i], x - self.breakpoints[i])),
                None => out.push(vec![czero()]),
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut grid: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .collect();
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
        let a = self.refine(&grid);
        let b = other.refine(&grid);
        let pieces = a
            .into_iter()
            .zip(b)
            .map(|(p, q)| add_coeffs(&p, &q))
            .collect();
        let mut masses: Vec<(f64, C64)> =
            self.masses.iter().chain(&other.masses).copied().collect();
        masses.sort_by(|x, y| x.0.total_cmp(&y.0));
        Self {
            breakpoints: if grid.len() >= 2 { grid } else { Vec::new() },
            pieces,
            masses: merge_masses(masses),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// `int g(x) * self(dx)` with `nodes` Gauss–Legendre points per piece.
    pub fn integrate_against(&self, g: impl Fn(f64) -> C64, nodes: usize) -> C64 {
        let rule = Rule::new(nodes);
        let mut terms = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let a = self.breakpoints[i];
            let b = self.breakpoints[i + 1];
            let mut acc = czero();
            for (x, w) in rule.on(a, b) {
                acc += g(x) * eval_poly(p, x - a) * w;
            }
            terms.push(acc);
        }
        for &(x, w) in &self.masses {
            terms.push(g(x) * w);
        }
        crate::linalg::pairwise_sum(&terms)
    }

    /// `F(x) = int_{-inf}^x`, with masses entering as jumps (right-continuous).
    /// Returns `F` restricted to the support and the constant value `F` takes
    /// to the right of it.
    pub fn cumulative(&self) -> (Self, C64) {
        let mut grid: Vec<f64> = self.breakpoints.clone();
        grid.extend(self.masses.iter().map(|m| m.0));
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
        if grid.is_empty() {
            return (Self::zero(), czero());
        }
        let pieces = self.refine(&grid);
        let mut out = Vec::with_capacity(pieces.len());
        let mut running = czero();
        let mut m = 0;
        for (j, p) in pieces.iter().enumerate() {
            while m < self.masses.len() && self.masses[m].0 <= grid[j] {
                running += self.masses[m].1;
                m += 1;
            }
            let mut q = vec![running];
            q.extend(p.iter().enumerate().map(|(k, &a)| a / (k as f64 + 1.0)));
            running += integrate_poly(p, grid[j + 1] - grid[j]);
            out.push(q);
        }
        while m < self.masses.len() {
            running += self.masses[m].1;
            m += 1;
        }
        let f = if grid.len() >= 2 {
            Self {
                breakpoints: grid,
                pieces: out,
                masses: Vec::new(),
            }
        } else {
            Self::zero()
        };
        (f, running)
    }

    /// Largest coefficient-wise imaginary part relative to the largest modulus.
    pub fn max_imag(&self) -> f64 {
        let a = self
            .pieces
            .iter()
            .flatten()
            .fold(0.0_f64, |m, z| m.max(z.im.abs()));
        let b = self.masses.iter().fold(0.0_f64, |m, z| m.max(z.1.im.abs()));
        a.max(b)
    }

    /// Drops imaginary parts.
    pub fn real_part(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|z| C64::new(z.re, 0.0)).collect())
                .collect(),
            masses: self
                .masses
                .iter()
                .map(|&(x, w)| (x, C64::new(w.re, 0.0)))
                .collect(),
        }
    }

    /// Sup of `|value|` estimated from the pieces (coefficient bound per piece).
    pub fn sup_bound(&self) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let h = self.breakpoints[i + 1] - self.breakpoints[i];
                p.iter()
                    .enumerate()
                    .map(|(k, a)| a.norm() * h.powi(k as i32))
                    .sum::<f64>()
            })
            .fold(0.0_f64, f64::max)
    }

    /// `true` when the piecewise part is continuous at interior breakpoints within `tol`.
    pub fn is_continuous(&self, tol: f64) -> bool {
        for i in 0..self.pieces.len().saturating_sub(1) {
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            let left = eval_poly(&self.pieces[i], h);
            let right = self.pieces[i + 1][0];
            if (left - right).norm() > tol {
                return false;
            }
        }
        true
    }

    /// Zeroes coefficients below `tol` in modulus and removes zero masses.
    pub fn chop(&self, tol: f64) -> Self {
        let clean = |z: C64| {
            C64::new(
                if z.re.abs() <= tol { 0.0 } else { z.re },
                if z.im.abs() <= tol { 0.0 } else { z.im },
            )
        };
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|&z| clean(z)).collect())
                .collect(),
            masses: self
                .masses
                .iter()
                .filter(|m| m.1.norm() > tol)
                .map(|&(x, w)| (x, clean(w)))
                .collect(),
        }
    }
}

fn add_coeffs(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or_default() + b.get(k).copied().unwrap_or_default())
        .collect()
}

fn merge_masses(sorted: Vec<(f64, C64)>) -> Vec<(f64, C64)> {
    let mut out: Vec<(f64, C64)> = Vec::with_capacity(sorted.len());
    for (x, w) in sorted {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// Accumulates many pieces on a fixed breakpoint grid.
#[derive(Debug, Clone)]
pub struct Accumulator {
    grid: Vec<f64>,
    pieces: Vec<Vec<C64>>,
    masses: Vec<(f64, C64)>,
}

impl Accumulator {
    /// `grid` must be strictly ascending and contain every knot that will be added.
    pub fn new(grid: Vec<f64>, degree: usize) -> Self {
        let n = grid.len().saturating_sub(1);
        Self {
            grid,
            pieces: vec![vec![czero(); degree + 1]; n],
            masses: Vec::new(),
        }
    }

    fn index(&self, x: f64) -> usize {
        self.grid.partition_point(|&t| t < x)
    }

    /// Adds `weight * p(x - left)` on `[left, right)`.
    pub fn add_piece(&mut self, left: f64, right: f64, coeffs: &[C64], weight: C64) {
        let mut j = self.index(left);
        debug_assert!(self.grid[j] == left, "left endpoint not on grid");
        while j + 1 < self.grid.len() && self.grid[j] < right {
            let shifted = shift_poly(coeffs, self.grid[j] - left);
            for (k, a) in shifted.into_iter().enumerate() {
                self.pieces[j][k] += a * weight;
            }
            j += 1;
        }
    }

    pub fn add_mass(&mut self, at: f64, weight: C64) {
        self.masses.push((at, weight));
    }

    pub fn add_density(&mut self, d: &PiecewisePolynomial, weight: C64) {
        for (i, p) in d.pieces.iter().enumerate() {
            self.add_piece(d.breakpoints[i], d.breakpoints[i + 1], p, weight);
        }
        for &(x, w) in &d.masses {
            self.add_mass(x, w * weight);
        }
    }

    pub fn finish(mut self) -> PiecewisePolynomial {
        self.masses.sort_by(|a, b| a.0.total_cmp(&b.0));
        let masses = merge_masses(self.masses);
        if self.grid.len() < 2 {
            return PiecewisePolynomial {
                breakpoints: Vec::new(),
                pieces: Vec::new(),
                masses,
            };
        }
        PiecewisePolynomial {
            breakpoints: self.grid,
            pieces: self.pieces,
            masses,
        }
    }
}

/// Density `rho` with `int f^{(k)} rho = f^{[k]}(nodes)`: the B-spline with the
/// given knots scaled to total mass `1/k!`; fully coincident nodes give a point mass.
pub fn divided_difference_density(nodes: &[f64]) -> PiecewisePolynomial {
    assert!(!nodes.is_empty());
    let mut t: Vec<f64> = nodes.to_vec();
    t.sort_by(|a, b| a.total_cmp(b));
    let k = t.len() - 1;
    if t[0] == t[k] {
        return PiecewisePolynomial::point_mass(t[0], C64::new(1.0 / factorial(k), 0.0));
    }
    let mut distinct = t.clone();
    distinct.dedup();
    let norm = 1.0 / ((t[k] - t[0]) * factorial(k - 1));
    let mut pieces = Vec::with_capacity(distinct.len() - 1);
    for a in 0..distinct.len() - 1 {
        let left = distinct[a];
        let p = bspline_on_interval(&t, left, distinct[a + 1]);
        pieces.push(p.into_iter().map(|c| C64::new(c * norm, 0.0)).collect());
    }
    PiecewisePolynomial {
        breakpoints: distinct,
        pieces,
        masses: Vec::new(),
    }
}

/// `N_{0,k}` (order `k = knots.len() - 1`) on `[left, right)` as a polynomial in `x - left`.
fn bspline_on_interval(knots: &[f64], left: f64, right: f64) -> Vec<f64> {
    let k = knots.len() - 1;
    // order-1 splines: indicator of [t_i, t_{i+1}) containing [left, right)
    let mut level: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            if knots[i] <= left && right <= knots[i + 1] && knots[i] < knots[i + 1] {
                vec![1.0]
            } else {
                vec![0.0]
            }
        })
        .collect();
    for r in 2..=k {
        let mut next = Vec::with_capacity(k + 1 - r);
        for i in 0..=(k - r) {
            let mut acc = vec![0.0; r];
            let d1 = knots[i + r - 1] - knots[i];
            if d1 > 0.0 {
                // (x - t_i)/d1 = (s + left - t_i)/d1
                add_linear_times(&mut acc, &level[i], (left - knots[i]) / d1, 1.0 / d1);
            }
            let d2 = knots[i + r] - knots[i + 1];
            if d2 > 0.0 {
                // (t_{i+r} - x)/d2 = (t_{i+r} - left - s)/d2
                add_linear_times(
                    &mut acc,
                    &level[i + 1],
                    (knots[i + r] - left) / d2,
                    -1.0 / d2,
                );
            }
            next.push(acc);
        }
        level = next;
    }
    level.swap_remove(0)
}

fn add_linear_times(acc: &mut [f64], p: &[f64], alpha: f64, beta: f64) {
    for (j, &c) in p.iter().enumerate() {
        acc[j] += alpha * c;
        acc[j + 1] += beta * c;
    }
}

/// `int f^{(k)} rho` for the divided-difference density, as a check helper.
pub fn apply_density(f: &ScalarFunction, rho: &PiecewisePolynomial, k: usize) -> C64 {
    rho.integrate_against(|x| f.deriv(x, k), 20)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn first_order_density_is_flat() {
        let r = divided_difference_density(&[0.0, 2.0]);
        assert_eq!(r.breakpoints(), &[0.0, 2.0]);
        assert!((r.eval(1.3) - c(0.5)).norm() < 1e-15);
        assert!((r.total_integral() - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn second_order_density_is_half_hat() {
        let r = divided_difference_density(&[2.0, 0.0, 1.0]);
        assert!((r.eval(1.0) - c(0.5)).norm() < 1e-15);
        assert!((r.eval(0.5) - c(0.25)).norm() < 1e-15);
        assert!((r.eval(1.5) - c(0.25)).norm() < 1e-15);
        // x^2 has constant second divided difference 1
        let f = ScalarFunction::real_polynomial(&[0.0, 0.0, 1.0]);
        assert!((apply_density(&f, &r, 2) - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn confluent_density_is_point_mass() {
        let r = divided_difference_density(&[0.7, 0.7, 0.7]);
        assert_eq!(r.point_masses(), &[(0.7, c(0.5))]);
        assert!(r.breakpoints().is_empty());
    }

    #[test]
    fn repeated_knot_density() {
        // f[0,0,1] = f[0,1] - f'(0) for f = x^3 is 1 - 0 = 1
        let r = divided_difference_density(&[0.0, 0.0, 1.0]);
        let f = ScalarFunction::real_polynomial(&[0.0, 0.0, 0.0, 1.0]);
        assert!((apply_density(&f, &r, 2) - c(1.0)).norm() < 1e-14);
        assert!((r.total_integral() - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn shift_is_exact_for_cubic() {
        let p = vec![c(1.0), c(-2.0), c(0.5), c(3.0)];
        let q = shift_poly(&p, 0.7);
        for s in [-1.0, 0.0, 0.3, 2.0] {
            assert!((eval_poly(&q, s) - eval_poly(&p, s + 0.7)).norm() < 1e-13);
        }
    }

    #[test]
    fn cumulative_of_unit_box() {
        let box1 = PiecewisePolynomial::new(vec![0.0, 1.0], vec![vec![c(1.0)]], vec![]).unwrap();
        let (f, tail) = box1.cumulative();
        assert!((tail - c(1.0)).norm() < 1e-15);
        assert!((f.eval(0.25) - c(0.25)).norm() < 1e-15);
    }

    #[test]
    fn cumulative_with_masses() {
        let p = PiecewisePolynomial::new(vec![0.0, 2.0], vec![vec![c(1.0)]], vec![(1.0, c(-2.0))])
            .unwrap();
        let (f, tail) = p.cumulative();
        assert!((tail - c(0.0)).norm() < 1e-15);
        assert!((f.eval(0.5) - c(0.5)).norm() < 1e-15);
        assert!((f.eval(1.0) - c(-1.0)).norm() < 1e-15);
        assert!((f.eval(1.5) - c(-0.5)).norm() < 1e-15);
    }

    #[test]
    fn addition_of_integrals() {
        let a = divided_difference_density(&[0.0, 1.0, 3.0]);
        let b = divided_difference_density(&[0.5, 0.5, 2.0, 4.0]);
        let s = a.add(&b);
        assert!((s.total_integral() - a.total_integral() - b.total_integral()).norm() < 1e-14);
    }

    #[test]
    fn accumulator_matches_add() {
        let a = divided_difference_density(&[0.0, 1.0, 3.0]);
        let b = divided_difference_density(&[1.0, 3.0, 3.0]);
        let mut acc = Accumulator::new(vec![0.0, 1.0, 3.0], 1);
        acc.add_density(&a, c(2.0));
        acc.add_density(&b, c(-1.0));
        let x = acc.finish();
        let y = a.scale(c(2.0)).sub(&b);
        for t in [0.1, 0.9, 1.0, 2.2, 2.99] {
            assert!((x.eval(t) - y.eval(t)).norm() < 1e-14);
        }
    }
}
