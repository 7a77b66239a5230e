//! Experiment configuration. Every struct rejects unknown keys.

use schemars::JsonSchema;
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Identities,
    Derivative,
    Taylor,
    Ssf,
    Classes,
    DemoSchrodinger,
}

impl CommandName {
    pub fn label(&self) -> &'static str {
        match self {
            CommandName::Identities => "identities",
            CommandName::Derivative => "derivative",
            CommandName::Taylor => "taylor",
            CommandName::Ssf => "ssf",
            CommandName::Classes => "classes",
            CommandName::DemoSchrodinger => "demo-schrodinger",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: Option<CommandName>,
    #[serde(default)]
    pub seed: u64,
    pub dims: Option<Vec<usize>>,
    /// Random draws per dimension and function.
    pub cases: Option<usize>,
    /// Defaults to the built-in catalog.
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    pub operators: Option<OperatorSource>,
    /// Derivative orders.
    pub orders: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    pub taylor: Option<TaylorSpec>,
    pub ssf: Option<SsfSpec>,
    pub classes: Option<ClassesSpec>,
    pub schrodinger: Option<SchrodingerSpec>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub identity: Option<f64>,
    pub krein: Option<f64>,
    pub higher_order: Option<f64>,
    /// Relative floor in `max(floor * scale, 10 * fd_error)`.
    pub derivative: Option<f64>,
    pub taylor_moi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            formats: all_formats(),
        }
    }
}

/// `[re, im]`.
pub type Complex = [f64; 2];

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `constant + sum coeff / (x - pole)^mult`; every pole needs a nonzero imaginary part.
    Rational {
        #[serde(default)]
        constant: Complex,
        poles: Vec<PoleSpec>,
    },
    /// `exp(-c x^2 + i xi x)`.
    Gaussian {
        c: f64,
        #[serde(default)]
        xi: f64,
    },
    /// `(1 - ((x - center) / radius)^2)^order` on the support, zero outside.
    Bump {
        center: f64,
        radius: f64,
        order: u32,
    },
    /// Coefficients in increasing degree.
    Polynomial {
        coeffs: Vec<Complex>,
    },
    RealPolynomial {
        coeffs: Vec<f64>,
    },
    Product {
        factors: Vec<FunctionSpec>,
    },
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PoleSpec {
    pub re: f64,
    pub im: f64,
    #[serde(default = "one_u32")]
    pub mult: u32,
    #[serde(default = "unit")]
    pub coeff: Complex,
}

fn one_u32() -> u32 {
    1
}

fn unit() -> Complex {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum MatrixSpec {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<Complex>>),
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSource {
    /// Uses `dims`; every third draw of `H` has a repeated eigenvalue when enabled.
    Random {
        #[serde(default = "one")]
        h_scale: f64,
        #[serde(default = "half")]
        v_scale: f64,
        #[serde(default = "yes")]
        repeated_eigenvalues: bool,
    },
    Inline {
        h: MatrixSpec,
        v: MatrixSpec,
    },
    /// Paths relative to the config file.
    MatrixMarket {
        h: PathBuf,
        v: PathBuf,
    },
    Schrodinger(GridSpec),
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// 1 or 3.
    pub dimension: usize,
    pub grid_points: usize,
    pub box_half_width: f64,
    pub potential: Potential,
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    /// `-strength / r` for `r < radius`, zero outside.
    TruncatedCoulomb { radius: f64, strength: f64 },
    /// `-depth * exp(-r^2 / (2 width^2))`.
    GaussianWell { depth: f64, width: f64 },
    /// One sample per grid point, row-major.
    Custom { samples: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TaylorSpec {
    #[serde(default = "sixty")]
    pub n_max: usize,
    /// Rescale `V` so that `(1 + C_f) ||V (H - i)^{-1}||` equals this value.
    pub contraction: Option<f64>,
}

fn sixty() -> usize {
    60
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SsfSpec {
    #[serde(default = "three")]
    pub k_max: usize,
    /// Sample grid for the CSV export; defaults to 201 points over the hull.
    pub grid: Option<SampleGrid>,
    #[serde(default = "two")]
    pub weight_n: usize,
    #[serde(default = "half")]
    pub epsilon: f64,
    /// `H`-bound used for the scaffold certificate.
    #[serde(default = "half")]
    pub h_bound: f64,
    /// `factorial` or `plain`.
    #[serde(default)]
    pub remainder_convention: Convention,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Factorial,
    Plain,
}

fn three() -> usize {
    3
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Copy, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SampleGrid {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ClassesSpec {
    #[serde(default = "default_classes")]
    pub classes: Vec<ClassLabel>,
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "one_usize")]
    pub k: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ClassLabel {
    W,
    WUpper,
    Q,
    Taylor,
}

fn default_classes() -> Vec<ClassLabel> {
    vec![
        ClassLabel::W,
        ClassLabel::WUpper,
        ClassLabel::Q,
        ClassLabel::Taylor,
    ]
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerSpec {
    pub dimension: usize,
    /// One run per entry.
    pub grid_points: Vec<usize>,
    pub box_half_width: f64,
    pub potential: Potential,
    /// Schatten order `n` of the hypothesis diagnostics.
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "half")]
    pub h_bound: f64,
}

impl Config {
    /// JSON Schema of the config file, as published in `docs/config.schema.json`.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(Config)).expect("schema serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if let Some(d) = &self.dims {
            if d.is_empty() || d.contains(&0) {
                return bad("dims must be a nonempty list of positive integers".into());
            }
        }
        if let Some(o) = &self.orders {
            if o.is_empty() || o.contains(&0) {
                return bad("orders must be a nonempty list of positive integers".into());
            }
        }
        if self.cases == Some(0) {
            return bad("cases must be positive".into());
        }
        for (name, t) in [
            ("identity", self.tolerances.identity),
            ("krein", self.tolerances.krein),
            ("higher_order", self.tolerances.higher_order),
            ("derivative", self.tolerances.derivative),
            ("taylor_moi", self.tolerances.taylor_moi),
        ] {
            if let Some(t) = t {
                if !(t > 0.0 && t.is_finite()) {
                    return bad(format!("tolerances.{name} must be positive, got {t}"));
                }
            }
        }
        if let Some(s) = &self.ssf {
            if s.k_max == 0 {
                return bad("ssf.k_max must be >= 1".into());
            }
            if !(s.epsilon > 0.0 && s.epsilon <= 1.0) {
                return bad(format!("ssf.epsilon must lie in (0, 1], got {}", s.epsilon));
            }
            if let Some(g) = s.grid {
                if g.points < 2 || !(g.from < g.to) {
                    return bad("ssf.grid needs from < to and at least 2 points".into());
                }
            }
        }
        if let Some(t) = &self.taylor {
            if let Some(c) = t.contraction {
                if !(c > 0.0 && c.is_finite()) {
                    return bad("taylor.contraction must be positive".into());
                }
            }
        }
        if let Some(OperatorSource::Schrodinger(g)) = &self.operators {
            crate::schrodinger::validate(
                g.dimension,
                g.grid_points,
                g.box_half_width,
                &g.potential,
            )?;
        }
        if let Some(s) = &self.schrodinger {
            if s.grid_points.is_empty() {
                return bad("schrodinger.grid_points must not be empty".into());
            }
            for &p in &s.grid_points {
                crate::schrodinger::validate(s.dimension, p, s.box_half_width, &s.potential)?;
            }
        }
        Ok(())
    }
}
