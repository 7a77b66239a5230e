//! Membership checks for the smoothness-and-decay classes and the Taylor
//! constants `(c_f, C_f)`.

use super::fourier::{
    fourier_norm_derivative, fourier_norm_fft, rational_expansion, FourierNormEstimate,
};
use super::{factorial, FunctionKind, ScalarFunction, FFT_SAMPLES};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassName {
    /// `(f u^p)^{(p)}` in `W_0` for `p <= n`.
    W,
    /// `(f u^p)^{(n-k+p)}` in `W_0` for `p <= k`.
    WUpper,
    /// The spectral-shift class with parameters `(n, k)`.
    Q,
    /// All `W_n` plus geometric growth of the normalized Fourier norms.
    Taylor,
}

impl ClassName {
    pub fn label(&self) -> &'static str {
        match self {
            ClassName::W => "W_n",
            ClassName::WUpper => "W^n_k",
            ClassName::Q => "Q^k_n",
            ClassName::Taylor => "TaylorClass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    NumericOnly,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::NumericOnly => "numeric-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMembershipReport {
    pub class_name: ClassName,
    pub n: usize,
    pub k: usize,
    pub verdict: Verdict,
    /// `(condition, value)` pairs; norms are `inf` when not finite.
    pub witnesses: Vec<(String, f64)>,
    /// Conditions that failed or could not be decided.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decay {
    Vanishing,
    Bounded,
    Unbounded,
    Unknown,
}

/// Tracks the worst outcome across conditions.
struct Tally {
    verdict: Verdict,
    witnesses: Vec<(String, f64)>,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            verdict: Verdict::Holds,
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, why: String) {
        self.verdict = Verdict::Fails;
        self.notes.push(why);
    }

    fn unsure(&mut self, why: String) {
        if self.verdict == Verdict::Holds {
            self.verdict = Verdict::NumericOnly;
        }
        self.notes.push(why);
    }

    fn smooth(&mut self, f: &ScalarFunction, order: usize) {
        if !f.has_derivatives(order) {
            self.fail(format!("f is not C^{order}"));
        }
    }

    fn decay(&mut self, label: String, d: Decay, need_vanishing: bool) {
        match d {
            Decay::Vanishing => {}
            Decay::Bounded if !need_vanishing => {}
            Decay::Bounded => self.fail(format!("{label} does not vanish at infinity")),
            Decay::Unbounded => self.fail(format!("{label} is unbounded")),
            Decay::Unknown => self.unsure(format!("{label}: decay undecided")),
        }
    }

    fn fourier(&mut self, label: String, e: &FourierNormEstimate) {
        self.witnesses.push((label.clone(), e.value));
        if !e.value.is_finite() {
            self.fail(format!("{label} has no finite Fourier measure"));
        } else if !e.reliable {
            self.unsure(format!("{label}: Fourier estimate unreliable"));
        }
    }
}

/// Decay of `(f u^p)^{(q)}`.
fn decay_of_uderiv(f: &ScalarFunction, p: usize, q: usize) -> Decay {
    match f.kind() {
        FunctionKind::Rational { constant, terms } => {
            match rational_expansion(*constant, terms, p, q) {
                None => Decay::Unbounded,
                Some((c, _)) if c.norm() == 0.0 => Decay::Vanishing,
                Some((c, ts)) => {
                    let s = ts.iter().fold(0.0_f64, |m, t| m.max(t.coeff.norm()));
                    if c.norm() <= 1e-13 * s {
                        Decay::Vanishing
                    } else {
                        Decay::Bounded
                    }
                }
            }
        }
        FunctionKind::Gaussian { .. } => Decay::Vanishing,
        FunctionKind::HermiteBump { .. } => {
            if f.has_derivatives(q) {
                Decay::Vanishing
            } else {
                Decay::Unknown
            }
        }
        FunctionKind::Polynomial { .. } => {
            let g = f.times_u_pow(p);
            sampled_decay(|x| g.deriv(x, q).norm())
        }
        FunctionKind::Product(_) => {
            let g = f.times_u_pow(p);
            sampled_decay(|x| g.deriv(x, q).norm())
        }
    }
}

/// Decay of `f^{(l)} u^s`.
fn decay_of_deriv_times_u(f: &ScalarFunction, l: usize, s: usize) -> Decay {
    match f.kind() {
        FunctionKind::Rational { constant, terms } => {
            let (c, ts) = rational_expansion(*constant, terms, 0, l)
                .expect("derivatives of rationals stay rational");
            let g = ScalarFunction::new(FunctionKind::Rational {
                constant: c,
                terms: ts,
            })
            .expect("valid");
            decay_of_uderiv(&g, s, 0)
        }
        FunctionKind::Gaussian { .. } => Decay::Vanishing,
        FunctionKind::HermiteBump { .. } => {
            if f.has_derivatives(l) {
                Decay::Vanishing
            } else {
                Decay::Unknown
            }
        }
        _ => sampled_decay(|x| (f.deriv(x, l) * C64::new(x, -1.0).powi(s as i32)).norm()),
    }
}

fn sampled_decay(g: impl Fn(f64) -> f64) -> Decay {
    let grid = log_grid(100_000);
    let peak = grid.iter().fold(0.0_f64, |m, &x| m.max(g(x)));
    if !peak.is_finite() {
        return Decay::Unbounded;
    }
    let outer = g(1e6).max(g(-1e6));
    let mid = g(1e5).max(g(-1e5));
    if outer > 2.0 * mid && outer > 1e-12 * peak {
        Decay::Unbounded
    } else if outer <= 1e-6 * peak.max(1e-300) || peak == 0.0 {
        Decay::Vanishing
    } else {
        Decay::Bounded
    }
}

/// Symmetric grid: a linear core on `[-1e-3, 1e-3]` plus log-spaced points out to `1e6`.
fn log_grid(n: usize) -> Vec<f64> {
    let core = 200;
    let side = (n - core) / 2;
    let mut v = Vec::with_capacity(n);
    for k in 0..core {
        v.push(-1e-3 + 2e-3 * k as f64 / (core - 1) as f64);
    }
    for k in 0..side {
        let e = -3.0 + 9.0 * k as f64 / (side - 1) as f64;
        let x = 10f64.powf(e);
        v.push(x);
        v.push(-x);
    }
    v
}

/// Sampled `sup |(f u^p)^{(q)}|` times the slack factor 1.01.
pub fn sup_norm(f: &ScalarFunction, p: usize, q: usize) -> f64 {
    let g = f.times_u_pow(p);
    let m = log_grid(100_000)
        .into_iter()
        .fold(0.0_f64, |m, x| m.max(g.deriv(x, q).norm()));
    1.01 * m
}

/// Fourier norm of `f^{(l)} u^s`.
fn fourier_norm_deriv_times_u(f: &ScalarFunction, l: usize, s: usize) -> FourierNormEstimate {
    match f.kind() {
        FunctionKind::Rational { constant, terms } => {
            let (c, ts) = rational_expansion(*constant, terms, 0, l)
                .expect("derivatives of rationals stay rational");
            let g = ScalarFunction::new(FunctionKind::Rational {
                constant: c,
                terms: ts,
            })
            .expect("valid");
            fourier_norm_derivative(&g, s, 0)
        }
        FunctionKind::Polynomial { .. } => {
            let d: Vec<C64> = {
                // f^{(l)} as a polynomial, then times u^s without further derivatives
                let FunctionKind::Polynomial { coeffs } = f.kind() else {
                    unreachable!()
                };
                if l >= coeffs.len() {
                    vec![C64::new(0.0, 0.0)]
                } else {
                    (l..coeffs.len())
                        .map(|j| coeffs[j] * ((j - l + 1..=j).fold(1.0, |a, m| a * m as f64)))
                        .collect()
                }
            };
            fourier_norm_derivative(&ScalarFunction::polynomial(d), s, 0)
        }
        _ => {
            let x = 200.0 * (1.0 + f.width_scale());
            let mut e = fourier_norm_fft(
                |t| f.deriv(t, l) * C64::new(t, -1.0).powi(s as i32),
                x,
                FFT_SAMPLES,
            );
            e.q = l;
            e.p = s;
            if !f.has_derivatives(l + 1) {
                e.reliable = false;
            }
            e
        }
    }
}

pub fn class_membership(
    f: &ScalarFunction,
    class: ClassName,
    n: usize,
    k: usize,
) -> ClassMembershipReport {
    let mut t = Tally::new();
    match class {
        ClassName::W => check_w(f, n, &mut t),
        ClassName::WUpper => {
            t.smooth(f, n);
            if k > n {
                t.fail(format!("k={k} exceeds n={n}"));
            } else {
                for p in 0..=k {
                    let q = n - k + p;
                    let label = format!("(f u^{p})^({q})");
                    t.decay(label.clone(), decay_of_uderiv(f, p, q), true);
                    t.fourier(label, &fourier_norm_derivative(f, p, q));
                }
            }
        }
        ClassName::Q => {
            t.smooth(f, k);
            t.decay(
                format!("f u^{}", 2 * n),
                decay_of_uderiv(f, 2 * n, 0),
                false,
            );
            for l in 1..=k {
                let s = n + l + 1;
                t.decay(
                    format!("f^({l}) u^{s}"),
                    decay_of_deriv_times_u(f, l, s),
                    true,
                );
            }
            let s = k.max(n);
            let label = format!("f^({k}) u^{s}");
            let d = decay_of_deriv_times_u(f, k, s);
            t.decay(label.clone(), d, true);
            t.fourier(label, &fourier_norm_deriv_times_u(f, k, s));
        }
        ClassName::Taylor => {
            check_w(f, n, &mut t);
            let tc = taylor_constants(f, n);
            t.witnesses.push(("c_f".into(), tc.c_f));
            t.witnesses.push(("C_f".into(), tc.big_c_f));
            if !tc.c_f.is_finite() || !tc.big_c_f.is_finite() {
                t.fail("no finite geometric fit".into());
            } else if !tc.exact {
                t.unsure(format!("geometric growth fitted over n <= {n} only"));
            }
        }
    }
    ClassMembershipReport {
        class_name: class,
        n,
        k,
        verdict: t.verdict,
        witnesses: t.witnesses,
        notes: t.notes,
    }
}

fn check_w(f: &ScalarFunction, n: usize, t: &mut Tally) {
    t.smooth(f, n);
    for p in 0..=n {
        let label = format!("(f u^{p})^({p})");
        t.decay(label.clone(), decay_of_uderiv(f, p, p), true);
        t.fourier(label, &fourier_norm_derivative(f, p, p));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorConstants {
    pub c_f: f64,
    pub big_c_f: f64,
    /// `a_n = ||(f u^n)^{(n)}||^ / n!` for `n = 0..=n_max`.
    pub per_order: Vec<f64>,
    /// Relative residuals `|a_n - c C^n| / a_n` of the least-squares log fit.
    pub residuals: Vec<f64>,
    /// The least-squares fit itself `(c, C)`.
    pub ls_fit: (f64, f64),
    /// True when `a_n` is exactly geometric in closed form (single pole).
    pub exact: bool,
}

impl TaylorConstants {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0_f64, |m, &r| m.max(r))
    }

    /// `||a - c C^n||_2 / ||a||_2` over the fitted orders, with `(c, C)` the least-squares fit.
    pub fn relative_fit_residual(&self) -> f64 {
        let (c, big) = self.ls_fit;
        let (num, den) = self
            .per_order
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(n2, d2), (n, &a)| {
                let r = a - c * big.powi(n as i32);
                (n2 + r * r, d2 + a * a)
            });
        (num / den.max(1e-300)).sqrt()
    }

    /// `c_f (1 + C_f)^n r^n`.
    pub fn remainder_bound(&self, n: usize, rel_norm: f64) -> f64 {
        self.c_f * ((1.0 + self.big_c_f) * rel_norm).powi(n as i32)
    }
}

pub fn taylor_constants(f: &ScalarFunction, n_max: usize) -> TaylorConstants {
    if let FunctionKind::Rational { constant, terms } = f.kind() {
        if constant.norm() == 0.0 && terms.len() == 1 && terms[0].order == 1 {
            let t = &terms[0];
            let g = t.pole.im.abs();
            let c = t.coeff.norm() / g;
            let big = (t.pole - C64::new(0.0, 1.0)).norm() / g;
            let per_order: Vec<f64> = (0..=n_max).map(|n| c * big.powi(n as i32)).collect();
            let residuals = vec![0.0; n_max + 1];
            return TaylorConstants {
                c_f: c,
                big_c_f: big,
                per_order,
                residuals,
                ls_fit: (c, big),
                exact: true,
            };
        }
    }
    let per_order: Vec<f64> = (0..=n_max)
        .map(|n| {
            let e = super::fourier_norm(f, n);
            e.upper() / factorial(n)
        })
        .collect();
    fit_geometric(per_order)
}

fn fit_geometric(per_order: Vec<f64>) -> TaylorConstants {
    let n_max = per_order.len() - 1;
    if per_order.iter().any(|a| !a.is_finite()) {
        return TaylorConstants {
            c_f: f64::INFINITY,
            big_c_f: f64::INFINITY,
            residuals: vec![f64::INFINITY; n_max + 1],
            per_order,
            ls_fit: (f64::INFINITY, f64::INFINITY),
            exact: false,
        };
    }
    let pts: Vec<(f64, f64)> = per_order
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(n, &a)| (n as f64, a.ln()))
        .collect();
    let (ln_c, ln_big) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        ((sy - slope * sx) / m, slope)
    } else {
        (pts.first().map_or(0.0, |p| p.1), 0.0)
    };
    let ls_c = ln_c.exp();
    let big = ln_big.exp();
    let residuals: Vec<f64> = per_order
        .iter()
        .enumerate()
        .map(|(n, &a)| {
            let fit = ls_c * big.powi(n as i32);
            if a == 0.0 {
                0.0
            } else {
                (a - fit).abs() / a
            }
        })
        .collect();
    // smallest c with a_n <= c C^n for the fitted C
    let c = per_order
        .iter()
        .enumerate()
        .fold(0.0_f64, |m, (n, &a)| m.max(a / big.powi(n as i32)));
    TaylorConstants {
        c_f: c,
        big_c_f: big,
        per_order,
        residuals,
        ls_fit: (ls_c, big),
        exact: false,
    }
}
