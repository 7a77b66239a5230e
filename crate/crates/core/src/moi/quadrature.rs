//! Fourier-side evaluation of `T_{f^{[n]}}`:
//! `int_R int_{simplex} e^{i s_0 y H_0} V_1 e^{i s_1 y H_1} ... V_n e^{i s_n y H_n} ds dmu_n(y)`
//! where `f^{(n)}(x) = int e^{ixy} dmu_n(y)`. Only kinds with a closed-form
//! density (rational, Gaussian) are supported.

use super::simplex::{composite, grundmann_moller, SimplexRule};
use super::{apriori_bound, EvalPath, MoiRequest, MoiResult};
use crate::error::{OpError, Result};
use crate::linalg::{between, ComplexMatrix, SpectralDecomposition, C64, I};
use crate::quad::Rule;
use crate::scalar::{factorial, rational_expansion, FunctionKind, PoleTerm, ScalarFunction};

#[derive(Debug, Clone)]
pub struct QuadratureOptions {
    /// Gauss–Legendre nodes per panel in the Fourier variable.
    pub nodes_per_panel: usize,
    /// Largest phase change `|y| * spread / m` allowed in one simplex cell.
    pub phase_per_cell: f64,
    /// Cap on the number of integrand evaluations.
    pub max_evaluations: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            nodes_per_panel: 20,
            phase_per_cell: 1.0,
            max_evaluations: 20_000_000,
        }
    }
}

/// The density of `mu_n` on a list of intervals.
struct Density {
    intervals: Vec<(f64, f64)>,
    /// Panel width needed to resolve the density itself.
    resolution: f64,
    eval: Box<dyn Fn(f64) -> C64 + Sync>,
}

fn density_of_derivative(f: &ScalarFunction, n: usize) -> Result<Density> {
    match f.kind() {
        FunctionKind::Gaussian { c, xi } => {
            let (c, xi) = (*c, *xi);
            let sigma = (2.0 * c).sqrt();
            let half = (9.0 + n as f64) * sigma;
            let norm = (4.0 * std::f64::consts::PI * c).sqrt().recip();
            Ok(Density {
                intervals: vec![(xi - half, xi + half)],
                resolution: sigma,
                eval: Box::new(move |y| {
                    (I * y).powi(n as i32) * (norm * (-(y - xi) * (y - xi) / (4.0 * c)).exp())
                }),
            })
        }
        FunctionKind::Rational { constant, terms } => {
            let (_, ts) = rational_expansion(*constant, terms, 0, n)
                .ok_or_else(|| OpError::Invalid("derivative has a polynomial part".into()))?;
            // the constant part of f^{(n)} only survives for n = 0, which is excluded
            let mut intervals = Vec::new();
            let mut resolution = f64::INFINITY;
            for upper in [true, false] {
                let side: Vec<&PoleTerm> =
                    ts.iter().filter(|t| (t.pole.im > 0.0) == upper).collect();
                if side.is_empty() {
                    continue;
                }
                let gmin = side
                    .iter()
                    .fold(f64::INFINITY, |m, t| m.min(t.pole.im.abs()));
                let gmax = side.iter().fold(0.0_f64, |m, t| m.max(t.pole.im.abs()));
                let mmax = side.iter().map(|t| t.order).max().unwrap_or(1) as f64;
                let reach = (40.0 + 2.0 * mmax) / gmin;
                intervals.push(if upper { (-reach, 0.0) } else { (0.0, reach) });
                resolution = resolution.min(1.0 / gmax);
            }
            Ok(Density {
                intervals,
                resolution,
                eval: Box::new(move |y| {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in &ts {
                        let upper = t.pole.im > 0.0;
                        if (upper && y < 0.0) || (!upper && y > 0.0) {
                            let m = t.order as usize;
                            let base = (-I * y).powi(m as i32 - 1) / factorial(m - 1)
                                * (-I * t.pole * y).exp();
                            acc += t.coeff * if upper { I * base } else { -I * base };
                        }
                    }
                    acc
                }),
            })
        }
        _ => Err(OpError::Invalid(format!(
            "no closed-form Fourier density for {}",
            f.describe()
        ))),
    }
}

/// Quadrature evaluation of a bounded-argument request (`alpha = 0`, `1 <= n`).
pub fn moi_quadrature(req: &MoiRequest, opts: &QuadratureOptions) -> Result<MoiResult> {
    let n = req.order();
    if n == 0 {
        return Err(OpError::Invalid("quadrature path needs order >= 1".into()));
    }
    if req.alpha.iter().any(|&a| a != 0) {
        return Err(OpError::Invalid("quadrature path needs alpha = 0".into()));
    }
    let dens = density_of_derivative(&req.f, n)?;
    let hs: Vec<&SpectralDecomposition> = req.superscripts.iter().collect();
    let d = hs[0].dim();
    let ws: Vec<ComplexMatrix> = (0..n)
        .map(|j| between(hs[j], &req.arguments[j], hs[j + 1]))
        .collect();
    let lo = hs
        .iter()
        .fold(f64::INFINITY, |m, h| m.min(h.eigenvalues()[0]));
    let hi = hs
        .iter()
        .fold(f64::NEG_INFINITY, |m, h| m.max(h.eigenvalues()[d - 1]));
    let spread = hi - lo;
    let freq = lo.abs().max(hi.abs());

    // Fourier-variable nodes
    let rule = Rule::new(opts.nodes_per_panel);
    let width = dens.resolution.min(4.0 / (freq + 1.0));
    let mut ys: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in &dens.intervals {
        let panels = ((b - a) / width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            ys.extend(rule.on(a + k as f64 * h, a + (k + 1) as f64 * h));
        }
    }

    let fine = grundmann_moller(n, 4);
    let coarse = grundmann_moller(n, 3);
    let cells_for = |y: f64| ((y.abs() * spread / opts.phase_per_cell).ceil() as usize).max(1);
    let evals: f64 = ys
        .iter()
        .map(|&(y, _)| {
            (cells_for(y) as f64).powi(n as i32)
                * (fine.weights.len() + coarse.weights.len()) as f64
        })
        .sum();
    let shrink = if evals > opts.max_evaluations as f64 {
        (opts.max_evaluations as f64 / evals).powf(1.0 / n as f64)
    } else {
        1.0
    };
    let converged = shrink == 1.0;

    let lambdas: Vec<&[f64]> = hs.iter().map(|h| h.eigenvalues()).collect();
    let mut m = vec![C64::new(0.0, 0.0); d * d];
    let mut err = 0.0;
    let mut cache: Option<(usize, SimplexRule, SimplexRule)> = None;
    for &(y, wy) in &ys {
        let rho = (dens.eval)(y) * wy;
        if rho == C64::new(0.0, 0.0) {
            continue;
        }
        let cells = ((cells_for(y) as f64 * shrink).floor() as usize).max(1);
        if cache.as_ref().map_or(true, |c| c.0 != cells) {
            cache = Some((
                cells,
                composite(n, cells, &fine),
                composite(n, cells, &coarse),
            ));
        }
        let (_, rf, rc) = cache.as_ref().unwrap();
        let qf = simplex_integral(y, rf, &lambdas, &ws, d);
        let qc = simplex_integral(y, rc, &lambdas, &ws, d);
        let mut diff = 0.0;
        for k in 0..d * d {
            m[k] += rho * qf[k];
            diff += (qf[k] - qc[k]).norm_sqr();
        }
        err += rho.norm() * diff.sqrt();
    }
    let inner = ComplexMatrix::from_row_slice(d, d, &m);
    let value = hs[0].vectors() * inner * hs[n].vectors().adjoint();
    let bound = apriori_bound(req);
    Ok(MoiResult {
        value,
        apriori_bound: bound.value,
        bound_source: bound.source,
        bound_reliable: bound.reliable,
        eval_path: EvalPath::Quadrature,
        error_estimate: err,
        converged,
    })
}

/// `sum_points w * D_0 W_1 D_1 ... W_n D_n` with `D_j = diag(e^{i s_j y lambda^j})`, row-major.
fn simplex_integral(
    y: f64,
    rule: &SimplexRule,
    lambdas: &[&[f64]],
    ws: &[ComplexMatrix],
    d: usize,
) -> Vec<C64> {
    let n = ws.len();
    let mut acc = vec![C64::new(0.0, 0.0); d * d];
    let mut cur = vec![C64::new(0.0, 0.0); d * d];
    let mut next = vec![C64::new(0.0, 0.0); d * d];
    let mut phase = vec![C64::new(0.0, 0.0); d];
    for (s, &w) in rule.points.iter().zip(&rule.weights) {
        // start with D_0 as rows scaled, i.e. cur = D_0 W_1 D_1
        for a in 0..d {
            phase[a] = C64::from_polar(1.0, s[0] * y * lambdas[0][a]);
        }
        let w1 = &ws[0];
        for b in 0..d {
            let pb = C64::from_polar(1.0, s[1] * y * lambdas[1][b]);
            for a in 0..d {
                cur[a * d + b] = phase[a] * w1[(a, b)] * pb;
            }
        }
        for j in 2..=n {
            let wj = &ws[j - 1];
            for b in 0..d {
                phase[b] = C64::from_polar(1.0, s[j] * y * lambdas[j][b]);
            }
            for a in 0..d {
                for b in 0..d {
                    let mut t = C64::new(0.0, 0.0);
                    for k in 0..d {
                        t += cur[a * d + k] * wj[(k, b)];
                    }
                    next[a * d + b] = t * phase[b];
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        for k in 0..d * d {
            acc[k] += cur[k] * w;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigendecompose_default, HermitianMatrix};

    #[test]
    fn scalar_first_order_rational() {
        let f = ScalarFunction::pole(C64::new(0.3, 2.0), 1);
        let h = eigendecompose_default(&HermitianMatrix::diag(&[0.7])).unwrap();
        let v = ComplexMatrix::from_element(1, 1, C64::new(1.5, 0.0));
        let req = MoiRequest::new(f.clone(), vec![h.clone(), h], vec![v]).unwrap();
        let r = moi_quadrature(&req, &QuadratureOptions::default()).unwrap();
        let expect = f.deriv(0.7, 1) * 1.5;
        assert!(
            (r.value[(0, 0)] - expect).norm() < 1e-9,
            "{} vs {}",
            r.value[(0, 0)],
            expect
        );
    }

    #[test]
    fn density_reproduces_derivative() {
        // int e^{ixy} dmu_n(y) = f^{(n)}(x) on a fine grid
        for f in [
            ScalarFunction::gaussian(0.8, 0.4),
            ScalarFunction::pole(C64::new(-0.5, -1.2), 2),
        ] {
            for n in 1..=2 {
                let dens = density_of_derivative(&f, n).unwrap();
                let rule = Rule::new(20);
                let x = 0.6;
                let mut acc = C64::new(0.0, 0.0);
                for &(a, b) in &dens.intervals {
                    let panels = 400;
                    let h = (b - a) / panels as f64;
                    for k in 0..panels {
                        for (y, w) in rule.on(a + k as f64 * h, a + (k + 1) as f64 * h) {
                            acc += (dens.eval)(y) * C64::from_polar(1.0, x * y) * w;
                        }
                    }
                }
                let e = f.deriv(x, n);
                assert!(
                    (acc - e).norm() < 1e-10 * e.norm().max(1.0),
                    "{} n={n}: {acc} vs {e}",
                    f.describe()
                );
            }
        }
    }
}
