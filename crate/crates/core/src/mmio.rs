//! Matrix Market coordinate/array files, real or complex, with general,
//! symmetric or hermitian storage. Values are written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{OpError, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Integer,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
    Hermitian,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> OpError {
    OpError::Parse {
        line,
        msg: msg.into(),
    }
}

fn number(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.ok_or_else(|| parse_err(line, "missing value"))?;
    t.parse::<f64>()
        .map_err(|_| parse_err(line, format!("bad number '{t}'")))
}

fn index(tok: Option<&str>, bound: usize, line: usize) -> Result<usize> {
    let t = tok.ok_or_else(|| parse_err(line, "missing index"))?;
    let i: usize = t
        .parse()
        .map_err(|_| parse_err(line, format!("bad index '{t}'")))?;
    if i == 0 || i > bound {
        return Err(parse_err(line, format!("index {i} outside 1..={bound}")));
    }
    Ok(i - 1)
}

/// Parses Matrix Market text into a dense complex matrix.
pub fn parse(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let words: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(
            1,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        w => return Err(parse_err(1, format!("unknown format '{w}'"))),
    };
    let field = match words[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        w => return Err(parse_err(1, format!("unsupported field '{w}'"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        w => return Err(parse_err(1, format!("unknown symmetry '{w}'"))),
    };
    if symmetry == Symmetry::Hermitian && field != Field::Complex {
        return Err(parse_err(1, "hermitian storage needs the complex field"));
    }
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line, size) = body
        .next()
        .ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(size_line, format!("bad size '{t}'")))
        })
        .collect::<Result<_>>()?;
    let (rows, cols) = match (coordinate, dims.as_slice()) {
        (true, [r, c, _]) | (false, [r, c]) => (*r, *c),
        _ => return Err(parse_err(size_line, "wrong number of size entries")),
    };
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(
            size_line,
            "symmetric storage needs a square matrix",
        ));
    }
    let read_value = |it: &mut std::str::SplitWhitespace, line: usize| -> Result<C64> {
        let re = number(it.next(), line)?;
        let im = if field == Field::Complex {
            number(it.next(), line)?
        } else {
            0.0
        };
        if it.next().is_some() {
            return Err(parse_err(line, "trailing tokens"));
        }
        Ok(C64::new(re, im))
    };
    let mut m = ComplexMatrix::zeros(rows, cols);
    let mut place = |i: usize, j: usize, z: C64, line: usize| -> Result<()> {
        if symmetry != Symmetry::General && j > i {
            return Err(parse_err(
                line,
                format!(
                    "entry ({}, {}) above the diagonal in symmetric storage",
                    i + 1,
                    j + 1
                ),
            ));
        }
        m[(i, j)] = z;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] = z,
                Symmetry::Hermitian => m[(j, i)] = z.conj(),
                Symmetry::SkewSymmetric => m[(j, i)] = -z,
            }
        } else if symmetry == Symmetry::SkewSymmetric && z != C64::new(0.0, 0.0) {
            return Err(parse_err(
                line,
                "nonzero diagonal in skew-symmetric storage",
            ));
        }
        Ok(())
    };
    if coordinate {
        let nnz = dims[2];
        let mut seen = 0;
        for (line, l) in body {
            if seen == nnz {
                return Err(parse_err(line, format!("more than {nnz} entries")));
            }
            let mut it = l.split_whitespace();
            let i = index(it.next(), rows, line)?;
            let j = index(it.next(), cols, line)?;
            let z = read_value(&mut it, line)?;
            place(i, j, z, line)?;
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(
                size_line,
                format!("expected {nnz} entries, found {seen}"),
            ));
        }
    } else {
        // column-major; symmetric storage lists the lower triangle only
        let slots: Vec<(usize, usize)> = (0..cols)
            .flat_map(|j| {
                let start = if symmetry == Symmetry::General {
                    0
                } else if symmetry == Symmetry::SkewSymmetric {
                    j + 1
                } else {
                    j
                };
                (start..rows).map(move |i| (i, j))
            })
            .collect();
        let mut k = 0;
        for (line, l) in body {
            if k == slots.len() {
                return Err(parse_err(
                    line,
                    format!("more than {} entries", slots.len()),
                ));
            }
            let mut it = l.split_whitespace();
            let z = read_value(&mut it, line)?;
            place(slots[k].0, slots[k].1, z, line)?;
            k += 1;
        }
        if k != slots.len() {
            return Err(parse_err(
                size_line,
                format!("expected {} entries, found {k}", slots.len()),
            ));
        }
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OpError::Invalid(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Reads a file and checks that the result is Hermitian.
pub fn read_hermitian(path: &Path) -> Result<HermitianMatrix> {
    HermitianMatrix::new(read_matrix(path)?)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Complex general coordinate format, every entry listed.
pub fn format_general(m: &ComplexMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate complex general\n");
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            let _ = writeln!(s, "{} {} {} {}", i + 1, j + 1, num(z.re), num(z.im));
        }
    }
    s
}

/// Complex hermitian coordinate format, lower triangle only.
pub fn format_hermitian(h: &HermitianMatrix) -> String {
    let m = h.matrix();
    let d = h.dim();
    let mut s = String::from("%%MatrixMarket matrix coordinate complex hermitian\n");
    let _ = writeln!(s, "{d} {d} {}", d * (d + 1) / 2);
    for j in 0..d {
        for i in j..d {
            let z = m[(i, j)];
            let _ = writeln!(s, "{} {} {} {}", i + 1, j + 1, num(z.re), num(z.im));
        }
    }
    s
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    std::fs::write(path, format_general(m))
        .map_err(|e| OpError::Invalid(format!("{}: {e}", path.display())))
}

pub fn write_hermitian(path: &Path, h: &HermitianMatrix) -> Result<()> {
    std::fs::write(path, format_hermitian(h))
        .map_err(|e| OpError::Invalid(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_lower_triangle_expands() {
        let text = "%%MatrixMarket matrix coordinate complex hermitian\n% comment\n2 2 3\n1 1 1.0 0.0\n2 1 0.5 -2.0\n2 2 3.0 0.0\n";
        let m = parse(text).unwrap();
        assert_eq!(m[(0, 1)], C64::new(0.5, 2.0));
        assert_eq!(m[(1, 0)], C64::new(0.5, -2.0));
        assert!(HermitianMatrix::new(m).is_ok());
    }

    #[test]
    fn real_symmetric_promoted() {
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n-4\n2\n";
        let m = parse(text).unwrap();
        assert_eq!(m[(0, 1)], C64::new(-4.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(2.0, 0.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "%%MatrixMarket matrix coordinate complex general\n2 2 1\n\n3 1 1 0\n";
        assert!(matches!(parse(bad), Err(OpError::Parse { line: 4, .. })));
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 x\n";
        assert!(matches!(parse(bad), Err(OpError::Parse { line: 3, .. })));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"),
            Err(OpError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("hello\n"),
            Err(OpError::Parse { line: 1, .. })
        ));
        let upper = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 1\n1 2 1 0\n";
        assert!(matches!(parse(upper), Err(OpError::Parse { line: 3, .. })));
    }

    #[test]
    fn general_round_trip() {
        let m = ComplexMatrix::from_fn(2, 3, |i, j| {
            C64::new(0.1 * i as f64 - 1.0 / 3.0, j as f64 * std::f64::consts::PI)
        });
        let text = format_general(&m);
        let back = parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(format_general(&back), text);
    }
}
