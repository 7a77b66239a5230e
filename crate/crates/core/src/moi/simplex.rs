//! Grundmann–Möller rules on the standard simplex and the Kuhn subdivision of
//! the order simplex `1 >= t_1 >= ... >= t_n >= 0`.
//!
//! Points are returned in barycentric coordinates `(s_0, ..., s_n)` with
//! `s_0 = 1 - t_1`, `s_j = t_j - t_{j+1}`, `s_n = t_n`; weights integrate
//! against the flat measure of total mass `1/n!`.

use crate::scalar::factorial;

#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Grundmann–Möller rule of degree `2s + 1` on the `n`-simplex.
pub fn grundmann_moller(n: usize, s: usize) -> SimplexRule {
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 0.25_f64.powi(s as i32) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + n - i));
        for beta in compositions(s - i, n + 1) {
            points.push(beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect());
            weights.push(w);
        }
    }
    SimplexRule { points, weights }
}

/// All `parts`-tuples of nonnegative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Vertices (in `t` coordinates) of the `m^n` Kuhn simplices covering the order simplex.
pub fn kuhn_cells(n: usize, m: usize) -> Vec<Vec<Vec<f64>>> {
    let mut cells = Vec::new();
    let mut k = vec![0usize; n];
    loop {
        if k.windows(2).all(|w| w[0] >= w[1]) {
            for perm in admissible_orders(&k) {
                let mut v = k.iter().map(|&x| x as f64 / m as f64).collect::<Vec<_>>();
                let mut verts = vec![v.clone()];
                for &axis in &perm {
                    v[axis] += 1.0 / m as f64;
                    verts.push(v.clone());
                }
                cells.push(verts);
            }
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == n {
                return cells;
            }
            k[pos] += 1;
            if k[pos] < m {
                break;
            }
            k[pos] = 0;
            pos += 1;
        }
    }
}

/// Orders of the axes (largest fractional part first) keeping equal-`k` axes ascending.
fn admissible_orders(k: &[usize]) -> Vec<Vec<usize>> {
    let n = k.len();
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, k, &mut out);
    out
}

fn permute(perm: &mut Vec<usize>, start: usize, k: &[usize], out: &mut Vec<Vec<usize>>) {
    if start == perm.len() {
        let ok = (0..perm.len())
            .all(|a| (a + 1..perm.len()).all(|b| !(k[perm[a]] == k[perm[b]] && perm[a] > perm[b])));
        if ok {
            out.push(perm.clone());
        }
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, k, out);
        perm.swap(start, i);
    }
}

/// `t` coordinates to barycentric `s` coordinates.
pub fn to_barycentric(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut s = Vec::with_capacity(n + 1);
    s.push(1.0 - t.first().copied().unwrap_or(0.0));
    for j in 0..n {
        s.push(t[j] - t.get(j + 1).copied().unwrap_or(0.0));
    }
    s
}

/// Composite rule: `rule` applied on each of the `m^n` cells.
pub fn composite(n: usize, m: usize, rule: &SimplexRule) -> SimplexRule {
    let scale = (m as f64).powi(n as i32).recip();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if n == 0 {
        return SimplexRule {
            points: vec![vec![1.0]],
            weights: vec![1.0],
        };
    }
    for verts in kuhn_cells(n, m) {
        for (b, &w) in rule.points.iter().zip(&rule.weights) {
            let mut t = vec![0.0; n];
            for (bj, v) in b.iter().zip(&verts) {
                for a in 0..n {
                    t[a] += bj * v[a];
                }
            }
            points.push(to_barycentric(&t));
            weights.push(w * scale);
        }
    }
    SimplexRule { points, weights }
}
