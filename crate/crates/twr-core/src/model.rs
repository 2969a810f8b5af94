//! Problem-level types: matrices, dipole geometry, and the assembled
//! inverse-problem instance.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense column-major `f64` matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense `f64` column vector.
pub type Vector = nalgebra::DVector<f64>;

/// Returns an error naming the first non-finite entry of `m`, if any.
pub fn ensure_finite(m: &Matrix) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// One of the three orthogonal components of a dipole moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn from_offset(offset: usize) -> Axis {
        match offset {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }
}

/// Spatial layout of the source space.
///
/// Each dipole sits at a 3-D coordinate and contributes three consecutive
/// rows to the source matrix: row `3*d + a` holds component `a` (x, y, z)
/// of dipole `d`. The geometry owns that row mapping so that callers never
/// hand-roll the index arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleGeometry {
    coords: Vec<[f64; 3]>,
}

impl DipoleGeometry {
    /// Builds a geometry from per-dipole coordinates.
    pub fn new(coords: Vec<[f64; 3]>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("geometry needs at least one dipole".to_string()));
        }
        for (d, c) in coords.iter().enumerate() {
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { row: d, col: 0 });
            }
        }
        Ok(DipoleGeometry { coords })
    }

    /// Deterministic unit-spaced cubic lattice holding `n_dipoles` sites.
    ///
    /// Dipole `d` sits at `(d % side, (d / side) % side, d / side^2)` where
    /// `side = ceil(n_dipoles^(1/3))`. Used when no measured geometry is
    /// available.
    pub fn unit_lattice(n_dipoles: usize) -> Result<Self> {
        let mut side = 1usize;
        while side * side * side < n_dipoles {
            side += 1;
        }
        let coords = (0..n_dipoles)
            .map(|d| {
                [
                    (d % side) as f64,
                    ((d / side) % side) as f64,
                    (d / (side * side)) as f64,
                ]
            })
            .collect();
        Self::new(coords)
    }

    pub fn n_dipoles(&self) -> usize {
        self.coords.len()
    }

    /// Number of source-matrix rows: `3 * n_dipoles`.
    pub fn n_components(&self) -> usize {
        3 * self.coords.len()
    }

    pub fn coord(&self, dipole: usize) -> Result<[f64; 3]> {
        self.coords
            .get(dipole)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: dipole,
                bound: self.coords.len(),
            })
    }

    /// Maps a source-matrix row to its `(dipole, axis)` pair.
    pub fn component_of(&self, row: usize) -> Result<(usize, Axis)> {
        if row >= self.n_components() {
            return Err(Error::IndexOutOfRange {
                index: row,
                bound: self.coords.len(),
            });
        }
        Ok((row / 3, Axis::from_offset(row % 3)))
    }

    /// Inverse of [`component_of`](Self::component_of).
    pub fn row_of(&self, dipole: usize, axis: Axis) -> Result<usize> {
        if dipole >= self.coords.len() {
            return Err(Error::IndexOutOfRange {
                index: dipole,
                bound: self.coords.len(),
            });
        }
        let offset = match axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        };
        Ok(3 * dipole + offset)
    }

    /// Euclidean distance between two dipole sites.
    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        let ca = self.coord(a)?;
        let cb = self.coord(b)?;
        let d2: f64 = (0..3).map(|i| (ca[i] - cb[i]) * (ca[i] - cb[i])).sum();
        Ok(libm::sqrt(d2))
    }
}

/// A fully assembled inverse problem: forward operator, data, geometry, and
/// sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub x: Matrix,
    pub y: Matrix,
    pub geometry: DipoleGeometry,
    pub sample_rate_hz: f64,
}

impl ProblemInstance {
    /// Validates cross-shape consistency: `X` is n x p with `p = 3 *
    /// n_dipoles`, `Y` is n x s, all entries finite, positive sample rate.
    pub fn new(
        x: Matrix,
        y: Matrix,
        geometry: DipoleGeometry,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() != geometry.n_components() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} columns but the geometry has {} dipoles ({} components)",
                x.ncols(),
                geometry.n_dipoles(),
                geometry.n_components()
            )));
        }
        if x.nrows() == 0 || y.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "empty problem: X is {}x{}, Y is {}x{}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample_rate_hz must be positive and finite, got {sample_rate_hz}"
            )));
        }
        ensure_finite(&x)?;
        ensure_finite(&y)?;
        Ok(ProblemInstance {
            x,
            y,
            geometry,
            sample_rate_hz,
        })
    }

    /// Number of sensors (rows of `X` and `Y`).
    pub fn n_sensors(&self) -> usize {
        self.x.nrows()
    }

    /// Number of source components (columns of `X`).
    pub fn n_components(&self) -> usize {
        self.x.ncols()
    }

    /// Number of time samples (columns of `Y`).
    pub fn n_timepoints(&self) -> usize {
        self.y.ncols()
    }
}
