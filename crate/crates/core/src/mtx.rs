//! Matrix Market reader and writer (real coordinate and array formats).

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{MorError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn syntax(line: usize, message: impl Into<String>) -> MorError {
    MorError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses a real Matrix Market file into a dense matrix.
pub fn read_matrix_market(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (hline, header) = lines.next().ok_or_else(|| syntax(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(syntax(hline, "missing %%MatrixMarket matrix header"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(syntax(hline, format!("unsupported layout '{other}'"))),
    };
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(syntax(hline, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(syntax(hline, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (sline, size) = body.next().ok_or_else(|| syntax(hline, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| syntax(sline, "bad size line")))
        .collect::<Result<_>>()?;

    let parse_f = |line: usize, tok: &str| -> Result<f64> {
        let v: f64 = tok
            .parse()
            .map_err(|_| syntax(line, format!("bad value '{tok}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(syntax(line, "non-finite value"))
        }
    };

    match layout {
        Layout::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(syntax(sline, "coordinate size line needs rows cols nnz"));
            };
            let mut m = DMatrix::zeros(rows, cols);
            let mut seen = 0;
            for (ln, l) in body {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(syntax(ln, "expected 'row col value'"));
                }
                let i: usize = t[0].parse().map_err(|_| syntax(ln, "bad row index"))?;
                let j: usize = t[1].parse().map_err(|_| syntax(ln, "bad column index"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(syntax(ln, format!("index ({i}, {j}) out of range")));
                }
                let v = parse_f(ln, t[2])?;
                m[(i - 1, j - 1)] += v;
                if i != j {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => m[(j - 1, i - 1)] += v,
                        Symmetry::SkewSymmetric => m[(j - 1, i - 1)] -= v,
                    }
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(syntax(sline, format!("declared {nnz} entries, found {seen}")));
            }
            Ok(m)
        }
        Layout::Array => {
            let [rows, cols] = dims[..] else {
                return Err(syntax(sline, "array size line needs rows cols"));
            };
            let mut values = Vec::with_capacity(rows * cols);
            for (ln, l) in body {
                for tok in l.split_whitespace() {
                    values.push(parse_f(ln, tok)?);
                }
            }
            let mut m = DMatrix::zeros(rows, cols);
            let mut it = values.into_iter();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    let v = it.next().ok_or_else(|| syntax(sline, "too few array values"))?;
                    m[(i, j)] = v;
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => m[(j, i)] = v,
                        Symmetry::SkewSymmetric => m[(j, i)] = -v,
                    }
                }
            }
            if it.next().is_some() {
                return Err(syntax(sline, "too many array values"));
            }
            Ok(m)
        }
    }
}

/// Writes the nonzeros of `m` in coordinate format, column-major order.
pub fn write_coordinate(m: &DMatrix<f64>) -> String {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nnz);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
    }
    out
}

/// Writes `m` densely in array format (column-major).
pub fn write_array(m: &DMatrix<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}
