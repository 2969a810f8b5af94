//! Plain-text file formats for matrices and dipole geometries.
//!
//! Matrix files carry a `rows cols` header line followed by one
//! comma-separated line per row:
//!
//! ```text
//! 2 2
//! 1,2
//! 3,4
//! ```
//!
//! Values are written with Rust's shortest round-trip decimal formatting,
//! so `read(write(M)) == M` holds bit-for-bit. Geometry files have no
//! header; each line is the `x,y,z` coordinate of one dipole site.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use twr_core::Matrix;

/// Parse or I/O failure for the text formats in this module.
#[derive(Debug)]
pub enum FormatError {
    /// The first line is not two positive integers.
    MalformedHeader { line: String },
    /// The number of data cells disagrees with the header.
    DimensionMismatch { expected: usize, found: usize },
    /// A cell did not parse as a decimal number.
    MalformedCell { row: usize, col: usize, token: String },
    /// A cell parsed to NaN or an infinity.
    NonFiniteValue { row: usize, col: usize },
    /// A geometry line does not have exactly three cells.
    MalformedGeometryLine { line: usize, found: usize },
    /// The underlying read or write failed.
    IoFailure { path: String, message: String },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::MalformedHeader { line } => {
                write!(f, "malformed header (want `rows cols`): {line:?}")
            }
            FormatError::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} cells, found {found}")
            }
            FormatError::MalformedCell { row, col, token } => {
                write!(f, "cell ({row}, {col}) is not a number: {token:?}")
            }
            FormatError::NonFiniteValue { row, col } => {
                write!(f, "cell ({row}, {col}) is not finite")
            }
            FormatError::MalformedGeometryLine { line, found } => {
                write!(f, "geometry line {line} has {found} cells, want 3 (x,y,z)")
            }
            FormatError::IoFailure { path, message } => {
                write!(f, "{path}: {message}")
            }
        }
    }
}

impl std::error::Error for FormatError {}

fn io_failure(path: &Path, err: std::io::Error) -> FormatError {
    FormatError::IoFailure {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Splits off trailing blank lines; interior blanks still count as rows.
fn data_lines(body: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = body.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    lines
}

fn parse_cell(token: &str, row: usize, col: usize) -> Result<f64, FormatError> {
    let trimmed = token.trim();
    let value: f64 = trimmed.parse().map_err(|_| FormatError::MalformedCell {
        row,
        col,
        token: trimmed.to_string(),
    })?;
    if !value.is_finite() {
        return Err(FormatError::NonFiniteValue { row, col });
    }
    Ok(value)
}

/// Parses a matrix from its text form.
pub fn parse_matrix(text: &str) -> Result<Matrix, FormatError> {
    let (header, rest) = text.split_once('\n').unwrap_or((text, ""));
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dims: Vec<usize> = fields.iter().filter_map(|t| t.parse().ok()).collect();
    if fields.len() != 2 || dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
        return Err(FormatError::MalformedHeader {
            line: header.to_string(),
        });
    }
    let (rows, cols) = (dims[0], dims[1]);
    let expected = rows.checked_mul(cols).ok_or(FormatError::MalformedHeader {
        line: header.to_string(),
    })?;

    let body = data_lines(rest);
    let found: usize = body
        .iter()
        .map(|l| if l.trim().is_empty() { 0 } else { l.split(',').count() })
        .sum();
    if body.len() != rows || found != expected {
        return Err(FormatError::DimensionMismatch { expected, found });
    }

    let mut m = Matrix::zeros(rows, cols);
    for (i, line) in body.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(FormatError::DimensionMismatch { expected, found });
        }
        for (j, token) in cells.iter().enumerate() {
            m[(i, j)] = parse_cell(token, i, j)?;
        }
    }
    Ok(m)
}

/// Renders a matrix to its text form.
pub fn matrix_to_string(m: &Matrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// Reads a matrix file.
pub fn read_matrix(path: &Path) -> Result<Matrix, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    parse_matrix(&text)
}

/// Writes a matrix file.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<(), FormatError> {
    fs::write(path, matrix_to_string(m)).map_err(|e| io_failure(path, e))
}

/// Parses geometry text: one `x,y,z` line per dipole, no header.
pub fn parse_geometry(text: &str) -> Result<Vec<[f64; 3]>, FormatError> {
    let mut coords = Vec::new();
    for (i, line) in data_lines(text).iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(FormatError::MalformedGeometryLine {
                line: i,
                found: cells.len(),
            });
        }
        let mut point = [0.0f64; 3];
        for (j, token) in cells.iter().enumerate() {
            point[j] = parse_cell(token, i, j)?;
        }
        coords.push(point);
    }
    Ok(coords)
}

/// Reads a geometry file into raw dipole coordinates.
pub fn read_geometry(path: &Path) -> Result<Vec<[f64; 3]>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    parse_geometry(&text)
}

/// Writes a geometry file from raw dipole coordinates.
pub fn write_geometry(path: &Path, coords: &[[f64; 3]]) -> Result<(), FormatError> {
    let mut out = String::new();
    for c in coords {
        let _ = writeln!(out, "{},{},{}", c[0], c[1], c[2]);
    }
    fs::write(path, out).map_err(|e| io_failure(path, e))
}
