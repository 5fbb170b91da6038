//! Fourier differentiation on periodic grids.
//!
//! Every operator here is a diagonal multiplier on the discrete Fourier modes
//! `exp(2πi(p s + q t))`, whose physical wave vector `ξ` comes from
//! [`TorusLattice::wave_vector`]. Odd-order multipliers vanish on the Nyquist
//! row/column; the `|ξ|²` multiplier averages the two Nyquist sign choices so
//! that it stays symmetric on oblique lattices.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::field::{ComplexField, ScalarField};
use crate::lattice::Grid;

/// Default admissible energy fraction in the top third of the spectrum.
pub const DEFAULT_ALIAS_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("field under-resolved: top-third spectral energy fraction {fraction:.3e} exceeds {threshold:.3e}")]
    Aliased { fraction: f64, threshold: f64 },
    #[error("derivative order must be >= 1")]
    ZeroOrder,
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// FFT plans and wave vectors for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    xi: Vec<(f64, f64)>,
    nyquist: Vec<bool>,
    xi_sq: Vec<f64>,
    high: Vec<bool>,
    alias_threshold: f64,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .field("alias_threshold", &self.alias_threshold)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let (nx, ny) = (grid.nx, grid.ny);
        let mut xi = Vec::with_capacity(grid.len());
        let mut nyquist = Vec::with_capacity(grid.len());
        let mut xi_sq = Vec::with_capacity(grid.len());
        let mut high = Vec::with_capacity(grid.len());
        let l = &grid.lattice;
        for k in 0..ny {
            let q = Grid::signed_mode(k, ny);
            for j in 0..nx {
                let p = Grid::signed_mode(j, nx);
                let w = l.wave_vector(p as f64, q as f64);
                xi.push(w);
                let nyq_p = 2 * p.unsigned_abs() as usize == nx;
                let nyq_q = 2 * q.unsigned_abs() as usize == ny;
                nyquist.push(nyq_p || nyq_q);
                let ps: &[f64] = if nyq_p { &[-1.0, 1.0] } else { &[1.0] };
                let qs: &[f64] = if nyq_q { &[-1.0, 1.0] } else { &[1.0] };
                let mut acc = 0.0;
                for sp in ps {
                    for sq in qs {
                        let (a, b) = l.wave_vector(sp * p as f64, sq * q as f64);
                        acc += a * a + b * b;
                    }
                }
                xi_sq.push(acc / (ps.len() * qs.len()) as f64);
                high.push(3 * p.unsigned_abs() as usize > nx || 3 * q.unsigned_abs() as usize > ny);
            }
        }
        Self {
            grid,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
            xi,
            nyquist,
            xi_sq,
            high,
            alias_threshold: DEFAULT_ALIAS_THRESHOLD,
        }
    }

    pub fn with_alias_threshold(mut self, threshold: f64) -> Self {
        self.alias_threshold = threshold;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alias_threshold(&self) -> f64 {
        self.alias_threshold
    }

    /// `|ξ|²` per mode, in FFT order.
    pub fn xi_squared(&self) -> &[f64] {
        &self.xi_sq
    }

    /// Physical wave vector per mode, in FFT order.
    pub fn wave_vectors(&self) -> &[(f64, f64)] {
        &self.xi
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        self.nyquist[idx]
    }

    fn transform(&self, data: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        fx.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for j in 0..nx {
            for k in 0..ny {
                col[k] = data[k * nx + j];
            }
            fy.process(&mut col);
            for k in 0..ny {
                data[k * nx + j] = col[k];
            }
        }
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd_x, &self.fwd_y);
    }

    /// Inverse DFT in place, normalized so that `inverse(forward(f)) = f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv_x, &self.inv_y);
        let s = 1.0 / self.grid.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    /// Fraction of spectral energy in modes with `|p| > nx/3` or `|q| > ny/3`.
    pub fn top_third_fraction(&self, spectrum: &[Complex64]) -> f64 {
        let mut total = 0.0;
        let mut top = 0.0;
        for (c, &h) in spectrum.iter().zip(&self.high) {
            let e = c.norm_sqr();
            total += e;
            if h {
                top += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            top / total
        }
    }

    fn guard(&self, spectrum: &[Complex64]) -> Result<(), SpectralError> {
        let fraction = self.top_third_fraction(spectrum);
        if fraction > self.alias_threshold {
            Err(SpectralError::Aliased {
                fraction,
                threshold: self.alias_threshold,
            })
        } else {
            Ok(())
        }
    }

    /// Checks the aliasing guard without differentiating.
    pub fn check_resolved(&self, field: &ScalarField) -> Result<(), SpectralError> {
        self.guard(&self.spectrum(field.values()))
    }

    fn apply_complex(&self, values: &[Complex64], mult: impl Fn(usize) -> Complex64, guarded: bool) -> Result<Vec<Complex64>, SpectralError> {
        let mut data = values.to_vec();
        self.forward(&mut data);
        if guarded {
            self.guard(&data)?;
        }
        for (i, v) in data.iter_mut().enumerate() {
            *v *= mult(i);
        }
        self.inverse(&mut data);
        Ok(data)
    }

    /// Multiplier of `∂_z = ½(∂_x − i∂_y)`.
    #[inline]
    pub fn dz_multiplier(&self, idx: usize) -> Complex64 {
        if self.nyquist[idx] {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = self.xi[idx];
        Complex64::new(b, a) * 0.5
    }

    /// Multiplier of `∂_z̄ = ½(∂_x + i∂_y)`.
    #[inline]
    pub fn dzbar_multiplier(&self, idx: usize) -> Complex64 {
        if self.nyquist[idx] {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = self.xi[idx];
        Complex64::new(-b, a) * 0.5
    }

    /// `∂_z^k` of a complex grid function.
    pub fn dz(&self, field: &ComplexField, order: u32) -> Result<ComplexField, SpectralError> {
        if order == 0 {
            return Err(SpectralError::ZeroOrder);
        }
        let out = self.apply_complex(field.values(), |i| self.dz_multiplier(i).powu(order), true)?;
        Ok(ComplexField::from_raw(self.grid, out))
    }

    pub fn dzbar(&self, field: &ComplexField, order: u32) -> Result<ComplexField, SpectralError> {
        if order == 0 {
            return Err(SpectralError::ZeroOrder);
        }
        let out = self.apply_complex(field.values(), |i| self.dzbar_multiplier(i).powu(order), true)?;
        Ok(ComplexField::from_raw(self.grid, out))
    }

    /// All derivatives `∂_z^k u` for `k = 1..=max_order` from a single forward transform.
    pub fn dz_ladder(&self, field: &ScalarField, max_order: u32) -> Result<Vec<ComplexField>, SpectralError> {
        let spec = self.spectrum(field.values());
        self.guard(&spec)?;
        let mut out = Vec::with_capacity(max_order as usize);
        for order in 1..=max_order {
            let mut data: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(i, c)| c * self.dz_multiplier(i).powu(order))
                .collect();
            self.inverse(&mut data);
            out.push(ComplexField::from_raw(self.grid, data));
        }
        Ok(out)
    }

    /// `Δ_Eucl f = −(f_xx + f_yy)`, multiplier `|ξ|²`.
    pub fn laplacian_eucl(&self, field: &ScalarField) -> Result<ScalarField, SpectralError> {
        let out = self.apply_real_guarded(field.values(), |i| self.xi_sq[i], true)?;
        Ok(ScalarField::new(self.grid, out).expect("finite"))
    }

    /// Applies a real, even multiplier (no aliasing guard). Used inside solvers.
    pub fn apply_real(&self, values: &[f64], mult: impl Fn(usize) -> f64) -> Vec<f64> {
        self.apply_real_guarded(values, mult, false).expect("unguarded")
    }

    fn apply_real_guarded(&self, values: &[f64], mult: impl Fn(usize) -> f64, guarded: bool) -> Result<Vec<f64>, SpectralError> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        if guarded {
            self.guard(&data)?;
        }
        for (i, v) in data.iter_mut().enumerate() {
            *v *= mult(i);
        }
        self.inverse(&mut data);
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    /// Dense row-major `N×N` matrix of a real even multiplier in the nodal basis.
    /// The operator is a convolution, so every row is a shift of one kernel.
    pub fn dense_matrix(&self, mult: impl Fn(usize) -> f64) -> Vec<f64> {
        let g = self.grid;
        let n = g.len();
        let mut delta = vec![0.0; n];
        delta[0] = 1.0;
        let kernel = self.apply_real(&delta, mult);
        let mut out = vec![0.0; n * n];
        for k1 in 0..g.ny {
            for j1 in 0..g.nx {
                let row = g.index(j1, k1) * n;
                for k2 in 0..g.ny {
                    let dk = (k1 + g.ny - k2) % g.ny;
                    for j2 in 0..g.nx {
                        let dj = (j1 + g.nx - j2) % g.nx;
                        out[row + g.index(j2, k2)] = kernel[g.index(dj, dk)];
                    }
                }
            }
        }
        out
    }

    /// `(f_x, f_y)` of a real field (no aliasing guard).
    pub fn gradient(&self, field: &ScalarField) -> (ScalarField, ScalarField) {
        let spec = self.spectrum(field.values());
        let comp = |pick: fn((f64, f64)) -> f64| {
            let mut data: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if self.nyquist[i] {
                        Complex64::new(0.0, 0.0)
                    } else {
                        c * I * pick(self.xi[i])
                    }
                })
                .collect();
            self.inverse(&mut data);
            ScalarField::new(self.grid, data.into_iter().map(|c| c.re).collect()).expect("finite")
        };
        (comp(|w| w.0), comp(|w| w.1))
    }
}

/// `∂_z^k` of a real or complex field with the default aliasing threshold.
pub fn dz<F: AsComplexField + ?Sized>(field: &F, order: u32) -> Result<ComplexField, SpectralError> {
    let f = field.as_complex_field();
    Spectral::new(*f.grid()).dz(&f, order)
}

/// `Δ_Eucl = −∂_x∂_x − ∂_y∂_y` with the default aliasing threshold.
pub fn laplacian_eucl(field: &ScalarField) -> Result<ScalarField, SpectralError> {
    Spectral::new(*field.grid()).laplacian_eucl(field)
}

pub trait AsComplexField {
    fn as_complex_field(&self) -> ComplexField;
}

impl AsComplexField for ScalarField {
    fn as_complex_field(&self) -> ComplexField {
        self.to_complex()
    }
}

impl AsComplexField for ComplexField {
    fn as_complex_field(&self) -> ComplexField {
        self.clone()
    }
}

/// Fourier resampling to a new resolution (zero padding / truncation).
pub fn resample(field: &ScalarField, nx: usize, ny: usize) -> Result<ScalarField, crate::field::FieldError> {
    let src = *field.grid();
    let dst = Grid::new(src.lattice, nx, ny)?;
    if src.nx == nx && src.ny == ny {
        return Ok(field.clone());
    }
    let spec = Spectral::new(src).spectrum(field.values());
    let mut out = vec![Complex64::new(0.0, 0.0); dst.len()];
    // Split source Nyquist modes evenly between ±N/2 when the target can hold both.
    let targets = |m: i64, n_src: usize, n_dst: usize| -> Vec<(usize, f64)> {
        let half = (n_dst / 2) as i64;
        let place = |mm: i64| -> Option<usize> {
            if mm >= -half && mm < half {
                Some(mm.rem_euclid(n_dst as i64) as usize)
            } else {
                None
            }
        };
        if 2 * m.unsigned_abs() as usize == n_src && n_dst > n_src {
            vec![(place(m).unwrap(), 0.5), (place(-m).unwrap(), 0.5)]
        } else {
            place(m).map(|i| vec![(i, 1.0)]).unwrap_or_default()
        }
    };
    let scale = dst.len() as f64 / src.len() as f64;
    for k in 0..src.ny {
        let q = Grid::signed_mode(k, src.ny);
        let tq = targets(q, src.ny, ny);
        for j in 0..src.nx {
            let p = Grid::signed_mode(j, src.nx);
            let tp = targets(p, src.nx, nx);
            let c = spec[src.index(j, k)] * scale;
            for &(jj, wp) in &tp {
                for &(kk, wq) in &tq {
                    out[dst.index(jj, kk)] += c * wp * wq;
                }
            }
        }
    }
    let s = Spectral::new(dst);
    s.inverse(&mut out);
    ScalarField::new(dst, out.into_iter().map(|c| c.re).collect())
}

/// Trigonometric interpolant of a real grid function, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

/// Value, gradient and Hessian in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub value: f64,
    pub grad: (f64, f64),
    pub hess: [[f64; 2]; 2],
}

impl TrigInterpolant {
    pub fn new(field: &ScalarField) -> Self {
        let grid = *field.grid();
        let mut coeffs = Spectral::new(grid).spectrum(field.values());
        let n = grid.len() as f64;
        for c in coeffs.iter_mut() {
            *c /= n;
        }
        Self { grid, coeffs }
    }

    fn phases(n: usize, s: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let p = Grid::signed_mode(i, n) as f64;
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * p * s)
            })
            .collect()
    }

    pub fn value(&self, z: Complex64) -> f64 {
        self.jet_inner(z, false).value
    }

    pub fn jet(&self, z: Complex64) -> Jet2 {
        self.jet_inner(z, true)
    }

    fn jet_inner(&self, z: Complex64, derivs: bool) -> Jet2 {
        let g = &self.grid;
        let (s, t) = g.lattice.to_logical(z);
        let ex = Self::phases(g.nx, s);
        let ey = Self::phases(g.ny, t);
        let tau = 2.0 * std::f64::consts::PI;
        // sums over modes of c·e, weighted by (2πi p)^a (2πi q)^b
        let mut acc = [Complex64::new(0.0, 0.0); 6];
        for k in 0..g.ny {
            let q = Grid::signed_mode(k, g.ny);
            let nyq_q = 2 * q.unsigned_abs() as usize == g.ny;
            let mut row = [Complex64::new(0.0, 0.0); 3];
            for j in 0..g.nx {
                let p = Grid::signed_mode(j, g.nx);
                let c = self.coeffs[g.index(j, k)] * ex[j];
                row[0] += c;
                if derivs && 2 * p.unsigned_abs() as usize != g.nx {
                    let ip = I * (tau * p as f64);
                    row[1] += c * ip;
                    row[2] += c * ip * ip;
                }
            }
            let e = ey[k];
            acc[0] += row[0] * e;
            if derivs {
                acc[1] += row[1] * e;
                acc[3] += row[2] * e;
                if !nyq_q {
                    let iq = I * (tau * q as f64);
                    acc[2] += row[0] * e * iq;
                    acc[4] += row[1] * e * iq;
                    acc[5] += row[0] * e * iq * iq;
                }
            }
        }
        let value = acc[0].re;
        if !derivs {
            return Jet2 {
                value,
                grad: (0.0, 0.0),
                hess: [[0.0; 2]; 2],
            };
        }
        let (fs, ft) = (acc[1].re, acc[2].re);
        let (fss, fst, ftt) = (acc[3].re, acc[4].re, acc[5].re);
        // chain rule through the linear map (x, y) -> (s, t)
        let (sx, tx) = g.lattice.to_logical(Complex64::new(1.0, 0.0));
        let (sy, ty) = g.lattice.to_logical(Complex64::new(0.0, 1.0));
        let grad = (fs * sx + ft * tx, fs * sy + ft * ty);
        let hxx = fss * sx * sx + 2.0 * fst * sx * tx + ftt * tx * tx;
        let hyy = fss * sy * sy + 2.0 * fst * sy * ty + ftt * ty * ty;
        let hxy = fss * sx * sy + fst * (sx * ty + sy * tx) + ftt * tx * ty;
        Jet2 {
            value,
            grad,
            hess: [[hxx, hxy], [hxy, hyy]],
        }
    }
}
