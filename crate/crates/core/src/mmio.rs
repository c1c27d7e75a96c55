//! Matrix Market reading (array and coordinate, real, general or symmetric) and writing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::RMat;

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::MatrixMarket { line, reason: reason.into() }
}

pub fn parse_matrix(text: &str) -> Result<RMat> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(bad(1, "expected '%%MatrixMarket matrix <format> real|integer <symmetry>'"));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(bad(1, format!("unsupported format {other}"))),
    };
    if h[3] != "real" && h[3] != "integer" {
        return Err(bad(1, format!("unsupported field {}", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad(1, format!("unsupported symmetry {other}"))),
    };
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (sl, size) = body.next().ok_or_else(|| bad(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(sl, "bad size entry")))
        .collect::<Result<_>>()?;
    let num = |ln: usize, t: &str| t.parse::<f64>().map_err(|_| bad(ln, format!("bad number '{t}'")));
    if coordinate {
        if dims.len() != 3 {
            return Err(bad(sl, "coordinate size line needs rows cols nnz"));
        }
        let (m, n, nnz) = (dims[0], dims[1], dims[2]);
        let mut a = Mat::zeros(m, n);
        let mut count = 0;
        for (ln, l) in body {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad(ln, "expected 'row col value'"));
            }
            let i: usize = t[0].parse().map_err(|_| bad(ln, "bad row index"))?;
            let j: usize = t[1].parse().map_err(|_| bad(ln, "bad column index"))?;
            if i == 0 || j == 0 || i > m || j > n {
                return Err(bad(ln, "index out of range"));
            }
            let v = num(ln, t[2])?;
            a[(i - 1, j - 1)] += v;
            if symmetric && i != j {
                a[(j - 1, i - 1)] += v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(bad(sl, format!("expected {nnz} entries, found {count}")));
        }
        Ok(a)
    } else {
        if dims.len() != 2 {
            return Err(bad(sl, "array size line needs rows cols"));
        }
        let (m, n) = (dims[0], dims[1]);
        let mut vals = Vec::new();
        for (ln, l) in body {
            for t in l.split_whitespace() {
                vals.push(num(ln, t)?);
            }
        }
        let mut a = Mat::zeros(m, n);
        let mut it = vals.into_iter();
        let mut missing = || bad(sl, "too few array entries");
        // column-major; symmetric stores the lower triangle only
        for j in 0..n {
            let start = if symmetric { j } else { 0 };
            for i in start..m {
                let v = it.next().ok_or_else(&mut missing)?;
                a[(i, j)] = v;
                if symmetric {
                    a[(j, i)] = v;
                }
            }
        }
        if it.next().is_some() {
            return Err(bad(sl, "too many array entries"));
        }
        Ok(a)
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<RMat> {
    parse_matrix(&fs::read_to_string(path)?)
}

/// Dense array format, column-major, full precision.
pub fn format_dense(a: &RMat) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let _ = writeln!(s, "{:e}", a[(i, j)]);
        }
    }
    s
}

/// Coordinate format with the exact nonzeros.
pub fn format_sparse(a: &RMat) -> String {
    let mut entries = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                entries.push((i, j, a[(i, j)]));
            }
        }
    }
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    s
}

pub fn write_dense(path: impl AsRef<Path>, a: &RMat) -> Result<()> {
    Ok(fs::write(path, format_dense(a))?)
}

pub fn write_sparse(path: impl AsRef<Path>, a: &RMat) -> Result<()> {
    Ok(fs::write(path, format_sparse(a))?)
}
