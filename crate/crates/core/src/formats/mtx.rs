//! Matrix Market coordinate files.
//!
//! Supported: `matrix coordinate` with `real`, `integer` or `pattern` values
//! and `general` or `symmetric` symmetry. Symmetric files are expanded to
//! both triangles at load time.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::executor::Executor;

use super::CooMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxField {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxSymmetry {
    General,
    Symmetric,
}

/// Parsed file contents before assembly. Indices are 0-based and
/// symmetric entries are already mirrored.
#[derive(Debug, Clone, PartialEq)]
pub struct MtxData {
    pub nrows: usize,
    pub ncols: usize,
    pub field: MtxField,
    pub symmetry: MtxSymmetry,
    pub entries: Vec<(usize, usize, f64)>,
}

fn unsupported(line: usize, msg: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        line,
        msg: msg.into(),
    }
}

fn malformed(line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str) -> Result<(MtxField, MtxSymmetry)> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(unsupported(
            1,
            format!("malformed Matrix Market header '{line}'"),
        ));
    }
    if tokens[1] != "matrix" {
        return Err(unsupported(
            1,
            format!("object '{}' is not supported", tokens[1]),
        ));
    }
    if tokens[2] != "coordinate" {
        return Err(unsupported(
            1,
            format!("'{}' format is not supported", tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => MtxField::Real,
        "integer" => MtxField::Integer,
        "pattern" => MtxField::Pattern,
        other => return Err(unsupported(1, format!("'{other}' field is not supported"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MtxSymmetry::General,
        "symmetric" => MtxSymmetry::Symmetric,
        other => {
            return Err(unsupported(
                1,
                format!("'{other}' symmetry is not supported"),
            ))
        }
    };
    Ok((field, symmetry))
}

fn parse_index(token: Option<&str>, bound: usize, line: usize) -> Result<usize> {
    let token = token.ok_or_else(|| malformed(line, "missing index"))?;
    let idx: usize = token
        .parse()
        .map_err(|_| malformed(line, format!("'{token}' is not a valid index")))?;
    if idx == 0 || idx > bound {
        return Err(malformed(line, format!("index {idx} outside 1..={bound}")));
    }
    Ok(idx - 1)
}

pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<MtxData> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or_else(|| unsupported(1, "empty input"))?;
    let (field, symmetry) = parse_header(&header?)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let Some((nrows, ncols, nnz)) = size else {
            let mut dims = [0usize; 3];
            for d in dims.iter_mut() {
                let t = tokens
                    .next()
                    .ok_or_else(|| malformed(lineno, "size line needs 3 integers"))?;
                *d = t
                    .parse()
                    .map_err(|_| malformed(lineno, format!("'{t}' is not a valid size")))?;
            }
            if tokens.next().is_some() {
                return Err(malformed(lineno, "size line needs exactly 3 integers"));
            }
            if symmetry == MtxSymmetry::Symmetric && dims[0] != dims[1] {
                return Err(malformed(lineno, "symmetric matrix must be square"));
            }
            size = Some((dims[0], dims[1], dims[2]));
            entries.reserve(dims[2]);
            continue;
        };
        if seen == nnz {
            return Err(malformed(lineno, format!("more than {nnz} entries")));
        }
        let r = parse_index(tokens.next(), nrows, lineno)?;
        let c = parse_index(tokens.next(), ncols, lineno)?;
        let v = match field {
            MtxField::Pattern => 1.0,
            MtxField::Real | MtxField::Integer => {
                let t = tokens
                    .next()
                    .ok_or_else(|| malformed(lineno, "missing value"))?;
                let v: f64 = t
                    .parse()
                    .map_err(|_| malformed(lineno, format!("'{t}' is not a number")))?;
                if field == MtxField::Integer && v.fract() != 0.0 {
                    return Err(malformed(lineno, format!("'{t}' is not an integer")));
                }
                v
            }
        };
        if tokens.next().is_some() {
            return Err(malformed(lineno, "trailing tokens after entry"));
        }
        entries.push((r, c, v));
        if symmetry == MtxSymmetry::Symmetric && r != c {
            entries.push((c, r, v));
        }
        seen += 1;
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| malformed(0, "missing size line"))?;
    if seen != nnz {
        return Err(malformed(
            0,
            format!("expected {nnz} entries, found {seen}"),
        ));
    }
    Ok(MtxData {
        nrows,
        ncols,
        field,
        symmetry,
        entries,
    })
}

/// Reads a Matrix Market stream into a canonical COO matrix on `exec`.
pub fn read_matrix_market<R: BufRead>(exec: &Executor, reader: R) -> Result<CooMatrix> {
    let data = parse_matrix_market(reader)?;
    CooMatrix::from_entries(exec, data.nrows, data.ncols, &data.entries)
}

/// Writes `matrix` as a `real general` coordinate file.
pub fn write_matrix_market<W: Write>(matrix: &CooMatrix, mut writer: W) -> Result<()> {
    writeln!(writer, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(
        writer,
        "{} {} {}",
        matrix.nrows(),
        matrix.ncols(),
        matrix.nnz()
    )?;
    for (r, c, v) in matrix.entries()? {
        writeln!(writer, "{} {} {v:?}", r + 1, c + 1)?;
    }
    Ok(())
}
