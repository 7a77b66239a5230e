//! Command-line driver: configuration, operator sources, report emission.

pub mod commands;
pub mod config;
pub mod output;
pub mod schrodinger;

use std::path::{Path, PathBuf};

use opfun_core::linalg::{ComplexMatrix, HermitianMatrix, C64};
use opfun_core::scalar::{FunctionKind, PoleTerm, ScalarFunction};
use opfun_core::{mmio, random, suite, OpError};

use config::{Config, FunctionSpec, MatrixSpec, OperatorSource};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files (exit 2).
    Usage(String),
    /// Failed while writing reports (exit 2).
    Io(PathBuf, std::io::Error),
    /// A computation refused its input (exit 1).
    Core(OpError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<OpError> for CliError {
    fn from(e: OpError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) => 1,
            _ => 2,
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn c(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

pub fn build_function(spec: &FunctionSpec) -> Result<ScalarFunction, CliError> {
    let kind = match spec {
        FunctionSpec::Rational { constant, poles } => FunctionKind::Rational {
            constant: c(*constant),
            terms: poles
                .iter()
                .map(|t| PoleTerm {
                    pole: C64::new(t.re, t.im),
                    order: t.mult,
                    coeff: c(t.coeff),
                })
                .collect(),
        },
        FunctionSpec::Gaussian { c: width, xi } => FunctionKind::Gaussian { c: *width, xi: *xi },
        FunctionSpec::Bump {
            center,
            radius,
            order,
        } => FunctionKind::HermiteBump {
            center: *center,
            radius: *radius,
            order: *order,
        },
        FunctionSpec::Polynomial { coeffs } => FunctionKind::Polynomial {
            coeffs: coeffs.iter().map(|&z| c(z)).collect(),
        },
        FunctionSpec::RealPolynomial { coeffs } => FunctionKind::Polynomial {
            coeffs: coeffs.iter().map(|&x| C64::new(x, 0.0)).collect(),
        },
        FunctionSpec::Product { factors } => FunctionKind::Product(
            factors
                .iter()
                .map(build_function)
                .collect::<Result<_, _>>()?,
        ),
    };
    ScalarFunction::new(kind).map_err(|e| CliError::Usage(format!("invalid function: {e}")))
}

pub fn functions(cfg: &Config) -> Result<Vec<ScalarFunction>, CliError> {
    if cfg.functions.is_empty() {
        Ok(suite::catalog())
    } else {
        cfg.functions.iter().map(build_function).collect()
    }
}

fn matrix_from_spec(spec: &MatrixSpec, name: &str) -> Result<HermitianMatrix, CliError> {
    let rows: Vec<Vec<C64>> = match spec {
        MatrixSpec::Real(r) => r
            .iter()
            .map(|row| row.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect(),
        MatrixSpec::Complex(r) => r
            .iter()
            .map(|row| row.iter().map(|&z| c(z)).collect())
            .collect(),
    };
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Usage(format!(
            "operators.{name} must be a nonempty square matrix"
        )));
    }
    let m = ComplexMatrix::from_fn(d, d, |i, j| rows[i][j]);
    hermitian(m, &format!("operators.{name}"))
}

fn hermitian(m: ComplexMatrix, what: &str) -> Result<HermitianMatrix, CliError> {
    if m.nrows() != m.ncols() {
        return Err(CliError::Usage(format!("{what} is not square")));
    }
    let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(1.0);
    let skew = (&m - m.adjoint())
        .iter()
        .fold(0.0_f64, |a, z| a.max(z.norm()));
    if skew > 1e-12 * scale {
        return Err(CliError::Usage(format!(
            "{what} is not Hermitian (max |A - A^*| = {skew:e})"
        )));
    }
    HermitianMatrix::new(m).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn read_mm(base: &Path, p: &Path) -> Result<HermitianMatrix, CliError> {
    let path = if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    };
    let m = mmio::read_matrix(&path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    hermitian(m, &path.display().to_string())
}

/// One `(H, V)` pair with its provenance.
#[derive(Debug, Clone)]
pub struct Draw {
    pub case: usize,
    pub seed: u64,
    pub h: HermitianMatrix,
    pub v: HermitianMatrix,
}

/// Pairs for the derivative, Taylor and SSF commands. Random sources draw
/// `cases` pairs per entry of `dims`; fixed sources give one pair. With
/// `moi_limit`, oversized sources are rejected before anything is built.
pub fn draws(
    cfg: &Config,
    base: &Path,
    default_dims: &[usize],
    default_cases: usize,
    moi_limit: bool,
) -> Result<Vec<Draw>, CliError> {
    let dims = cfg.dims.clone().unwrap_or_else(|| default_dims.to_vec());
    if moi_limit {
        let largest = match &cfg.operators {
            None | Some(OperatorSource::Random { .. }) => dims.iter().copied().max(),
            Some(OperatorSource::Schrodinger(g)) => Some(g.grid_points.pow(g.dimension as u32)),
            _ => None,
        };
        moi_guard(largest)?;
    }
    let random_draws = |h_scale: f64, v_scale: f64, repeated: bool| {
        let cases = cfg.cases.unwrap_or(default_cases);
        let mut out = Vec::new();
        for &d in &dims {
            for k in 0..cases {
                let seed = cfg.seed.wrapping_add(k as u64);
                let mut rng = random::rng(seed);
                let h = if repeated {
                    suite::operator(&mut rng, d, k)
                } else {
                    random::hermitian(&mut rng, d, 1.0)
                };
                let v = random::hermitian(&mut rng, d, v_scale);
                out.push(Draw {
                    case: out.len(),
                    seed,
                    h: h.scale(h_scale),
                    v,
                });
            }
        }
        out
    };
    let ds = match &cfg.operators {
        None => random_draws(1.0, 0.5, true),
        Some(OperatorSource::Random {
            h_scale,
            v_scale,
            repeated_eigenvalues,
        }) => random_draws(*h_scale, *v_scale, *repeated_eigenvalues),
        Some(OperatorSource::Inline { h, v }) => {
            let (h, v) = (matrix_from_spec(h, "h")?, matrix_from_spec(v, "v")?);
            vec![Draw {
                case: 0,
                seed: cfg.seed,
                h,
                v,
            }]
        }
        Some(OperatorSource::MatrixMarket { h, v }) => {
            vec![Draw {
                case: 0,
                seed: cfg.seed,
                h: read_mm(base, h)?,
                v: read_mm(base, v)?,
            }]
        }
        Some(OperatorSource::Schrodinger(g)) => {
            let (h, v) =
                schrodinger::generate(g.dimension, g.grid_points, g.box_half_width, &g.potential)?;
            vec![Draw {
                case: 0,
                seed: cfg.seed,
                h,
                v,
            }]
        }
    };
    if ds.iter().any(|d| d.h.dim() != d.v.dim()) {
        return Err(CliError::Usage("H and V dimensions differ".into()));
    }
    if moi_limit {
        moi_guard(ds.iter().map(|d| d.h.dim()).max())?;
    }
    Ok(ds)
}

/// Rejects dimensions too large for the tuple-sum engine.
pub fn moi_guard(dim: Option<usize>) -> Result<(), CliError> {
    match dim {
        Some(d) if d > schrodinger::MOI_DIM_LIMIT => Err(CliError::Usage(format!(
            "dimension {d} exceeds {} for suites that build multiple operator integrals",
            schrodinger::MOI_DIM_LIMIT
        ))),
        _ => Ok(()),
    }
}

/// Caps the global thread pool from `OPFUN_THREADS`.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(s) = std::env::var("OPFUN_THREADS") {
        let n: usize = s.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "OPFUN_THREADS must be a positive integer, got '{s}'"
            ))
        })?;
        if n == 0 {
            return Err(CliError::Usage("OPFUN_THREADS must be positive".into()));
        }
        // a second call (tests) leaves the first pool in place
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}
