//! Period lattices, sampling grids and half-periods.
//!
//! A [`TorusLattice`] stores the generators of the periodicity lattice of `u`
//! together with the number `m` of translated copies of its fundamental
//! domain that fit inside the fundamental domain of the surface lattice.
//! Points of the grid are `z = (j/nx)·omega1 + (k/ny)·omega2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("lattice generators are linearly dependent over R (Im(omega2/omega1) = {0})")]
    Degenerate(f64),
    #[error("sublattice multiplicity must be >= 1")]
    ZeroMultiplicity,
    #[error("grid sizes must be positive and even, got {nx}x{ny}")]
    BadResolution { nx: usize, ny: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusLattice {
    pub omega1: Complex64,
    pub omega2: Complex64,
    pub m: u32,
}

impl TorusLattice {
    pub fn new(omega1: Complex64, omega2: Complex64, m: u32) -> Result<Self, LatticeError> {
        if m == 0 {
            return Err(LatticeError::ZeroMultiplicity);
        }
        let ratio = omega2 / omega1;
        if !ratio.im.is_finite() || ratio.im.abs() < 1e-12 {
            return Err(LatticeError::Degenerate(ratio.im));
        }
        Ok(Self { omega1, omega2, m })
    }

    /// Rectangle with sides `lx` (real axis) and `ly` (imaginary axis).
    pub fn rectangular(lx: f64, ly: f64) -> Result<Self, LatticeError> {
        Self::new(Complex64::new(lx, 0.0), Complex64::new(0.0, ly), 1)
    }

    pub fn square(side: f64) -> Result<Self, LatticeError> {
        Self::rectangular(side, side)
    }

    pub fn with_multiplicity(mut self, m: u32) -> Result<Self, LatticeError> {
        if m == 0 {
            return Err(LatticeError::ZeroMultiplicity);
        }
        self.m = m;
        Ok(self)
    }

    /// Area of the fundamental parallelogram.
    pub fn area(&self) -> f64 {
        (self.omega1.re * self.omega2.im - self.omega1.im * self.omega2.re).abs()
    }

    /// Columns are the real coordinates of the generators: `(x, y) = A (s, t)`.
    pub fn basis(&self) -> [[f64; 2]; 2] {
        [
            [self.omega1.re, self.omega2.re],
            [self.omega1.im, self.omega2.im],
        ]
    }

    fn basis_inverse(&self) -> [[f64; 2]; 2] {
        let a = self.basis();
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ]
    }

    /// Logical coordinates `(s, t)` of a point, not reduced.
    pub fn to_logical(&self, z: Complex64) -> (f64, f64) {
        let b = self.basis_inverse();
        (
            b[0][0] * z.re + b[0][1] * z.im,
            b[1][0] * z.re + b[1][1] * z.im,
        )
    }

    pub fn from_logical(&self, s: f64, t: f64) -> Complex64 {
        self.omega1 * s + self.omega2 * t
    }

    /// Reduces `z` into the half-open fundamental parallelogram.
    pub fn reduce(&self, z: Complex64) -> Complex64 {
        let (s, t) = self.to_logical(z);
        let mut s = s - s.floor();
        let mut t = t - t.floor();
        // floor of values like -1e-17 leaves s == 1.0
        if s >= 1.0 - 1e-14 {
            s = 0.0;
        }
        if t >= 1.0 - 1e-14 {
            t = 0.0;
        }
        self.from_logical(s, t)
    }

    /// Dual-lattice wave vector of the Fourier mode `exp(2πi(p s + q t))`.
    pub fn wave_vector(&self, p: f64, q: f64) -> (f64, f64) {
        // xi = 2π A^{-T} (p, q)
        let b = self.basis_inverse();
        (
            2.0 * PI * (b[0][0] * p + b[1][0] * q),
            2.0 * PI * (b[0][1] * p + b[1][1] * q),
        )
    }

    /// The four points of C/Λ whose doubles lie in Λ: `0, ω1/2, ω2/2, (ω1+ω2)/2`.
    pub fn half_periods(&self) -> [Complex64; 4] {
        [
            Complex64::new(0.0, 0.0),
            self.reduce(self.omega1 * 0.5),
            self.reduce(self.omega2 * 0.5),
            self.reduce((self.omega1 + self.omega2) * 0.5),
        ]
    }
}

/// Free function form of [`TorusLattice::half_periods`].
pub fn half_periods(lattice: &TorusLattice) -> [Complex64; 4] {
    lattice.half_periods()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lattice: TorusLattice,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(lattice: TorusLattice, nx: usize, ny: usize) -> Result<Self, LatticeError> {
        if nx == 0 || ny == 0 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(LatticeError::BadResolution { nx, ny });
        }
        Ok(Self { lattice, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major: `k` (omega2 direction) is the slow index.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.nx + j
    }

    #[inline]
    pub fn wrap_index(&self, j: isize, k: isize) -> usize {
        let j = j.rem_euclid(self.nx as isize) as usize;
        let k = k.rem_euclid(self.ny as isize) as usize;
        self.index(j, k)
    }

    pub fn point(&self, j: usize, k: usize) -> Complex64 {
        self.lattice
            .from_logical(j as f64 / self.nx as f64, k as f64 / self.ny as f64)
    }

    /// Quadrature weight of one node (periodic trapezoid rule).
    pub fn cell_area(&self) -> f64 {
        self.lattice.area() / self.len() as f64
    }

    /// Index of the node at `-z` for the node at `(j, k)`.
    pub fn reflect(&self, j: usize, k: usize) -> usize {
        self.index((self.nx - j) % self.nx, (self.ny - k) % self.ny)
    }

    /// Signed Fourier index in `[-n/2, n/2)` for FFT bin `i`.
    #[inline]
    pub fn signed_mode(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn same_resolution(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lattice == other.lattice
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn half_periods_square() {
        let l = TorusLattice::square(2.0 * PI).unwrap();
        let hp = l.half_periods();
        let want = [
            Complex64::new(0.0, 0.0),
            Complex64::new(PI, 0.0),
            Complex64::new(0.0, PI),
            Complex64::new(PI, PI),
        ];
        for (a, b) in hp.iter().zip(want.iter()) {
            assert!(close(*a, *b), "{a} vs {b}");
        }
    }

    #[test]
    fn half_periods_rectangular() {
        let l = TorusLattice::rectangular(2.0 * PI, 4.0 * PI).unwrap();
        let hp = l.half_periods();
        assert!(close(hp[1], Complex64::new(PI, 0.0)));
        assert!(close(hp[2], Complex64::new(0.0, 2.0 * PI)));
        assert!(close(hp[3], Complex64::new(PI, 2.0 * PI)));
    }

    #[test]
    fn doubled_half_periods_reduce_to_zero() {
        let l = TorusLattice::new(Complex64::new(2.0, 0.3), Complex64::new(0.4, 1.7), 1).unwrap();
        for w in l.half_periods() {
            assert!(close(l.reduce(w * 2.0), Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn rejects_degenerate_lattice_and_zero_m() {
        assert!(matches!(
            TorusLattice::new(Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), 1),
            Err(LatticeError::Degenerate(_))
        ));
        assert_eq!(
            TorusLattice::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), 0),
            Err(LatticeError::ZeroMultiplicity)
        );
    }

    #[test]
    fn odd_grid_rejected() {
        let l = TorusLattice::square(1.0).unwrap();
        assert!(Grid::new(l, 7, 8).is_err());
        assert!(Grid::new(l, 8, 0).is_err());
    }

    #[test]
    fn wave_vector_square() {
        let l = TorusLattice::square(2.0 * PI).unwrap();
        let (a, b) = l.wave_vector(3.0, -2.0);
        assert!((a - 3.0).abs() < 1e-14 && (b + 2.0).abs() < 1e-14);
    }

    #[test]
    fn wave_vector_is_dual() {
        let l = TorusLattice::new(Complex64::new(2.0, 0.3), Complex64::new(0.4, 1.7), 1).unwrap();
        // exp(i xi·omega) must equal exp(2πi p) etc.
        let (xx, xy) = l.wave_vector(1.0, 0.0);
        let dot1 = xx * l.omega1.re + xy * l.omega1.im;
        let dot2 = xx * l.omega2.re + xy * l.omega2.im;
        assert!((dot1 - 2.0 * PI).abs() < 1e-12);
        assert!(dot2.abs() < 1e-12);
    }
}
