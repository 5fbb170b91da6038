//! Grid functions and the CMCF field file format.
//!
//! File layout:
//!
//! ```text
//! CMCF1\n
//! nx ny re(omega1) im(omega1) re(omega2) im(omega2) m\n
//! nx*ny little-endian f64, row-major (k outer, j inner)
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{Grid, LatticeError, TorusLattice};

pub const CMCF_MAGIC: &[u8] = b"CMCF1\n";

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field has {got} values, grid needs {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("malformed CMCF header: {0}")]
    MalformedHeader(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::SizeMismatch {
                got: values.len(),
                want: grid.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.ny {
            for j in 0..grid.nx {
                let z = grid.point(j, k);
                values.push(f(z.re, z.im));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(j, k)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L²(dxdy) norm.
    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Trapezoid-rule inner product in L²(dxdy); the caller guarantees a shared grid.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.cell_area()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<ScalarField, FieldError> {
        self.check_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<(), FieldError> {
        if self.grid.same_resolution(&other.grid) {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    /// `u(-z)` on grid nodes, via index reflection.
    pub fn reflected(&self) -> ScalarField {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        for k in 0..g.ny {
            for j in 0..g.nx {
                values[g.index(j, k)] = self.values[g.reflect(j, k)];
            }
        }
        ScalarField { grid: g, values }
    }

    /// Projection onto functions with `u(z) = u(-z)`.
    pub fn even_part(&self) -> ScalarField {
        let r = self.reflected();
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&r.values)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn write_cmcf<W: Write>(&self, mut w: W) -> io::Result<()> {
        let l = &self.grid.lattice;
        w.write_all(CMCF_MAGIC)?;
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            self.grid.nx, self.grid.ny, l.omega1.re, l.omega1.im, l.omega2.re, l.omega2.im, l.m
        )?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_cmcf(bytes: &[u8]) -> Result<Self, FieldError> {
        let rest = bytes
            .strip_prefix(CMCF_MAGIC)
            .ok_or_else(|| FieldError::MalformedHeader("missing CMCF1 magic".into()))?;
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| FieldError::MalformedHeader("unterminated header line".into()))?;
        let header = std::str::from_utf8(&rest[..nl])
            .map_err(|_| FieldError::MalformedHeader("header is not UTF-8".into()))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 7 {
            return Err(FieldError::MalformedHeader(format!(
                "expected 7 header fields, found {}",
                parts.len()
            )));
        }
        let bad = |what: &str| FieldError::MalformedHeader(format!("cannot parse {what}"));
        let nx: usize = parts[0].parse().map_err(|_| bad("nx"))?;
        let ny: usize = parts[1].parse().map_err(|_| bad("ny"))?;
        let mut w = [0.0f64; 4];
        for (i, slot) in w.iter_mut().enumerate() {
            *slot = parts[2 + i].parse().map_err(|_| bad("lattice generator"))?;
        }
        let m: u32 = parts[6].parse().map_err(|_| bad("m"))?;
        let lattice = TorusLattice::new(Complex64::new(w[0], w[1]), Complex64::new(w[2], w[3]), m)?;
        let grid = Grid::new(lattice, nx, ny)?;
        let payload = &rest[nl + 1..];
        if payload.len() != 8 * grid.len() {
            return Err(FieldError::SizeMismatch {
                got: payload.len() / 8,
                want: grid.len(),
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(grid, values)
    }

    pub fn save(&self, path: &Path) -> Result<(), FieldError> {
        let mut buf = Vec::new();
        self.write_cmcf(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FieldError> {
        Self::read_cmcf(&fs::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::SizeMismatch {
                got: values.len(),
                want: grid.len(),
            });
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.ny {
            for j in 0..grid.nx {
                let z = grid.point(j, k);
                values.push(f(z.re, z.im));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}
