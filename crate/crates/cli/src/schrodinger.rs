//! Finite-difference Schrödinger operators on a Dirichlet box.

use opfun_core::linalg::{ComplexMatrix, HermitianMatrix, C64};

use crate::config::Potential;
use crate::CliError;

/// Largest total dimension admitted for suites that build multiple operator integrals.
pub const MOI_DIM_LIMIT: usize = 4096;
pub const MAX_POINTS_3D: usize = 16;

pub fn validate(
    dimension: usize,
    points: usize,
    half_width: f64,
    potential: &Potential,
) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Usage(m));
    if dimension != 1 && dimension != 3 {
        return bad(format!("grid dimension must be 1 or 3, got {dimension}"));
    }
    if points < 8 {
        return bad(format!(
            "grid needs at least 8 points per axis, got {points}"
        ));
    }
    if dimension == 3 && points > MAX_POINTS_3D {
        return bad(format!(
            "3D grids are limited to {MAX_POINTS_3D} points per axis, got {points}"
        ));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return bad(format!("box half-width must be positive, got {half_width}"));
    }
    match potential {
        Potential::TruncatedCoulomb { radius, strength } => {
            if !(*radius > 0.0 && *radius < half_width) {
                return bad(format!(
                    "truncation radius {radius} must lie in (0, {half_width})"
                ));
            }
            if !strength.is_finite() {
                return bad("coulomb strength must be finite".into());
            }
        }
        Potential::GaussianWell { depth, width } => {
            if !(depth.is_finite() && *width > 0.0) {
                return bad("gaussian well needs finite depth and positive width".into());
            }
        }
        Potential::Custom { samples } => {
            let total = points.pow(dimension as u32);
            if samples.len() != total {
                return bad(format!(
                    "custom potential has {} samples, grid has {total}",
                    samples.len()
                ));
            }
        }
    }
    Ok(())
}

pub fn spacing(points: usize, half_width: f64) -> f64 {
    2.0 * half_width / (points + 1) as f64
}

/// Interior nodes `-L + (i + 1) dx`.
pub fn axis(points: usize, half_width: f64) -> Vec<f64> {
    let dx = spacing(points, half_width);
    (0..points)
        .map(|i| -half_width + (i + 1) as f64 * dx)
        .collect()
}

/// Potential samples, row-major over the grid. The Coulomb singularity at
/// `r = 0` is evaluated at `r = dx / 2`.
pub fn potential_samples(
    dimension: usize,
    points: usize,
    half_width: f64,
    potential: &Potential,
) -> Vec<f64> {
    let xs = axis(points, half_width);
    let dx = spacing(points, half_width);
    let coords: Vec<Vec<f64>> = if dimension == 1 {
        xs.iter().map(|&x| vec![x]).collect()
    } else {
        let mut c = Vec::with_capacity(points.pow(3));
        for &x in &xs {
            for &y in &xs {
                for &z in &xs {
                    c.push(vec![x, y, z]);
                }
            }
        }
        c
    };
    match potential {
        Potential::Custom { samples } => samples.clone(),
        Potential::TruncatedCoulomb { radius, strength } => coords
            .iter()
            .map(|p| {
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r >= *radius {
                    0.0
                } else {
                    -strength / r.max(0.5 * dx)
                }
            })
            .collect(),
        Potential::GaussianWell { depth, width } => coords
            .iter()
            .map(|p| {
                let r2 = p.iter().map(|x| x * x).sum::<f64>();
                -depth * (-r2 / (2.0 * width * width)).exp()
            })
            .collect(),
    }
}

/// `H = -Laplacian` with the standard stencil and Dirichlet walls, `V = diag(samples)`.
pub fn generate(
    dimension: usize,
    points: usize,
    half_width: f64,
    potential: &Potential,
) -> Result<(HermitianMatrix, HermitianMatrix), CliError> {
    validate(dimension, points, half_width, potential)?;
    let dx = spacing(points, half_width);
    let s = 1.0 / (dx * dx);
    let total = points.pow(dimension as u32);
    let mut h = ComplexMatrix::zeros(total, total);
    let strides: Vec<usize> = (0..dimension)
        .map(|a| points.pow((dimension - 1 - a) as u32))
        .collect();
    for idx in 0..total {
        h[(idx, idx)] = C64::new(2.0 * dimension as f64 * s, 0.0);
        for &st in &strides {
            let coord = (idx / st) % points;
            if coord + 1 < points {
                h[(idx, idx + st)] = C64::new(-s, 0.0);
                h[(idx + st, idx)] = C64::new(-s, 0.0);
            }
        }
    }
    let v = potential_samples(dimension, points, half_width, potential);
    Ok((
        HermitianMatrix::new(h).map_err(core_err)?,
        HermitianMatrix::diag(&v),
    ))
}

fn core_err(e: opfun_core::OpError) -> CliError {
    CliError::Core(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_is_tridiagonal() {
        let (h, v) = generate(
            1,
            32,
            5.0,
            &Potential::GaussianWell {
                depth: 2.0,
                width: 1.0,
            },
        )
        .unwrap();
        let m = h.matrix();
        for i in 0..32usize {
            for j in 0..32 {
                if i.abs_diff(j) > 1 {
                    assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
        let dx = spacing(32, 5.0);
        assert!((m[(0, 0)].re - 2.0 / (dx * dx)).abs() < 1e-12);
        assert!(v.matrix()[(15, 15)].re < 0.0);
    }

    #[test]
    fn coulomb_regularized_at_origin() {
        // odd point count puts a node at the origin
        let pot = Potential::TruncatedCoulomb {
            radius: 2.0,
            strength: 1.0,
        };
        let v = potential_samples(1, 9, 5.0, &pot);
        let dx = spacing(9, 5.0);
        assert_eq!(v[4], -1.0 / (0.5 * dx));
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn three_dimensional_stencil() {
        let (h, _) = generate(
            3,
            8,
            4.0,
            &Potential::GaussianWell {
                depth: 0.0,
                width: 1.0,
            },
        )
        .unwrap();
        let m = h.matrix();
        // interior node has six neighbours
        let idx = 3 * 64 + 3 * 8 + 3;
        let neighbours = (0..512)
            .filter(|&j| j != idx && m[(idx, j)] != C64::new(0.0, 0.0))
            .count();
        assert_eq!(neighbours, 6);
    }

    #[test]
    fn rejects_bad_specs() {
        let pot = Potential::TruncatedCoulomb {
            radius: 6.0,
            strength: 1.0,
        };
        assert!(validate(1, 32, 5.0, &pot).is_err());
        assert!(validate(
            2,
            32,
            5.0,
            &Potential::GaussianWell {
                depth: 1.0,
                width: 1.0
            }
        )
        .is_err());
        assert!(validate(
            1,
            4,
            5.0,
            &Potential::GaussianWell {
                depth: 1.0,
                width: 1.0
            }
        )
        .is_err());
        assert!(validate(
            3,
            17,
            5.0,
            &Potential::GaussianWell {
                depth: 1.0,
                width: 1.0
            }
        )
        .is_err());
    }
}
