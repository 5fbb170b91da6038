//! The Jacobi operator `L = −¼Δ₀ − cosh u`, its low spectrum with respect to
//! `dxdy`, the count of negative eigenvalues and second-variation quantities.

mod dense;
mod lobpcg;

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Section};
use crate::field::{FieldError, ScalarField};
use crate::lattice::{Grid, TorusLattice};
use crate::spectral::Spectral;

pub use dense::lowest_eigenpairs;
pub use lobpcg::{lobpcg, LobpcgResult};

/// Largest operator assembled as a dense matrix under `Discretization::Auto`.
pub const DENSE_LIMIT: usize = 4096;
pub const DEFAULT_KERNEL_EPS: f64 = 1e-5;
pub const DEFAULT_COUNT: usize = 40;
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    Auto,
    Dense,
    MatrixFree,
}

impl std::str::FromStr for Discretization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "dense" => Ok(Self::Dense),
            "matrix_free" => Ok(Self::MatrixFree),
            other => Err(format!("unknown discretization '{other}' (auto|dense|matrix_free)")),
        }
    }
}

impl fmt::Display for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Dense => "dense",
            Self::MatrixFree => "matrix_free",
        })
    }
}

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("λ_{count} = {largest} is still below zero_tol = {zero_tol}; request more eigenvalues")]
    NotEnoughEigenvalues { count: usize, largest: f64, zero_tol: f64 },
    #[error("iterative eigensolver stopped after {iterations} iterations with residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dense eigensolver failed: {0}")]
    Dense(String),
    #[error("requested {requested} eigenvalues from an operator of size {size}")]
    CountTooLarge { requested: usize, size: usize },
    #[error("requested zero eigenvalues")]
    ZeroCount,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `L v = ¼|ξ|² v̂ − cosh(u)·v` on the grid of `u`.
pub struct JacobiOperator {
    u: ScalarField,
    discretization: Discretization,
    spectral: Spectral,
    cosh_u: Vec<f64>,
}

impl fmt::Debug for JacobiOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JacobiOperator")
            .field("grid", self.u.grid())
            .field("discretization", &self.discretization)
            .finish()
    }
}

impl JacobiOperator {
    pub fn new(u: ScalarField) -> Self {
        Self::with_discretization(u, Discretization::Auto)
    }

    pub fn with_discretization(u: ScalarField, discretization: Discretization) -> Self {
        let spectral = Spectral::new(*u.grid());
        let cosh_u = u.values().iter().map(|x| x.cosh()).collect();
        let discretization = match discretization {
            Discretization::Auto if u.grid().len() <= DENSE_LIMIT => Discretization::Dense,
            Discretization::Auto => Discretization::MatrixFree,
            d => d,
        };
        Self {
            u,
            discretization,
            spectral,
            cosh_u,
        }
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.u.grid().lattice
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn apply_values(&self, v: &[f64]) -> Vec<f64> {
        let xi_sq = self.spectral.xi_squared();
        let mut out = self.spectral.apply_real(v, |i| 0.25 * xi_sq[i]);
        for ((o, c), x) in out.iter_mut().zip(&self.cosh_u).zip(v) {
            *o -= c * x;
        }
        out
    }

    pub fn apply(&self, v: &ScalarField) -> Result<ScalarField, FieldError> {
        self.u.check_grid(v)?;
        ScalarField::new(*self.grid(), self.apply_values(v.values()))
    }

    /// Row-major dense matrix of the discrete operator.
    pub fn dense_matrix(&self) -> Vec<f64> {
        let xi_sq = self.spectral.xi_squared();
        let mut a = self.spectral.dense_matrix(|i| 0.25 * xi_sq[i]);
        let n = self.grid().len();
        for (i, c) in self.cosh_u.iter().enumerate() {
            a[i * n + i] -= c;
        }
        a
    }

    /// `‖L v‖₂ / ‖v‖₂` in `L²(dxdy)`.
    pub fn relative_residual(&self, v: &ScalarField) -> Result<f64, FieldError> {
        let lv = self.apply(v)?;
        Ok(lv.l2_norm() / v.l2_norm())
    }

    /// `⟨v, L v⟩ / ⟨v, v⟩` in `L²(dxdy)`.
    pub fn rayleigh_quotient(&self, v: &ScalarField) -> Result<f64, FieldError> {
        let lv = self.apply(v)?;
        Ok(v.dot(&lv) / v.dot(v))
    }

    pub fn cosh_sup(&self) -> f64 {
        self.cosh_u.iter().cloned().fold(0.0, f64::max)
    }

    pub fn default_zero_tol(&self) -> f64 {
        default_zero_tol(self.cosh_sup(), DEFAULT_KERNEL_EPS)
    }
}

/// `max(1e−8, 10·ε_kernel·‖cosh u‖∞)`.
pub fn default_zero_tol(cosh_sup: f64, kernel_eps: f64) -> f64 {
    (10.0 * kernel_eps * cosh_sup).max(1e-8)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub schema: u32,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal in `L²(dxdy)`, first value above noise positive.
    #[serde(skip)]
    pub eigenfields: Vec<ScalarField>,
    pub neg_count: usize,
    pub zero_mult: usize,
    pub zero_tol: f64,
    pub index_lower: i64,
    pub index_upper: i64,
    /// `λ_{𝒦+1}` lies within `zero_tol` of 0.
    pub first_nonnegative_is_zero: bool,
    pub ground_state_simple: bool,
    pub discretization: Discretization,
    /// Largest `|⟨φ,Lφ⟩/⟨φ,φ⟩ − λ|` over the computed pairs.
    pub rayleigh_defect: f64,
}

impl SpectrumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumConfig {
    pub count: usize,
    /// `None` selects the default derived from `‖cosh u‖∞`.
    pub zero_tol: Option<f64>,
    pub kernel_eps: f64,
    pub discretization: Discretization,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_COUNT,
            zero_tol: None,
            kernel_eps: DEFAULT_KERNEL_EPS,
            discretization: Discretization::Auto,
        }
    }
}

pub const SPECTRUM_KEYS: &[&str] = &["count", "zero_tol", "kernel_eps", "discretization"];

impl SpectrumConfig {
    pub fn from_section(s: &Section) -> Result<Self, ConfigError> {
        s.reject_unknown(SPECTRUM_KEYS)?;
        let d = Self::default();
        let count: usize = s.get_or("count", d.count)?;
        if count == 0 {
            return Err(s.bad("count", "must be >= 1"));
        }
        let zero_tol = match s.raw("zero_tol") {
            None => None,
            Some(_) => Some(s.positive("zero_tol", 1.0)?),
        };
        Ok(Self {
            count,
            zero_tol,
            kernel_eps: s.positive("kernel_eps", d.kernel_eps)?,
            discretization: s.get_or("discretization", d.discretization)?,
        })
    }

    pub fn zero_tol_for(&self, op: &JacobiOperator) -> f64 {
        self.zero_tol
            .unwrap_or_else(|| default_zero_tol(op.cosh_sup(), self.kernel_eps))
    }
}

const LOBPCG_TOL: f64 = 1e-9;
const LOBPCG_MAX_ITER: usize = 2000;

/// Lowest `count` eigenpairs of `op` and the derived index data.
pub fn eigen(op: &JacobiOperator, count: usize, zero_tol: f64) -> Result<SpectrumReport, SpectrumError> {
    let grid = *op.grid();
    let n = grid.len();
    if count == 0 {
        return Err(SpectrumError::ZeroCount);
    }
    if count > n {
        return Err(SpectrumError::CountTooLarge { requested: count, size: n });
    }
    let (values, vectors) = match op.discretization {
        Discretization::MatrixFree => matrix_free_pairs(op, count)?,
        _ => {
            lowest_eigenpairs(&op.dense_matrix(), n, count).map_err(SpectrumError::Dense)?
        }
    };
    let largest = *values.last().expect("count >= 1");
    if largest < zero_tol {
        return Err(SpectrumError::NotEnoughEigenvalues {
            count,
            largest,
            zero_tol,
        });
    }
    let scale = 1.0 / grid.cell_area().sqrt();
    let mut eigenfields = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        v.iter_mut().for_each(|x| *x *= scale);
        eigenfields.push(ScalarField::new(grid, v)?);
    }
    let mut rayleigh_defect = 0.0f64;
    for (f, l) in eigenfields.iter().zip(&values) {
        rayleigh_defect = rayleigh_defect.max((op.rayleigh_quotient(f)? - l).abs());
    }
    let neg_count = values.iter().filter(|&&l| l < -zero_tol).count();
    let zero_mult = values.iter().filter(|&&l| l.abs() <= zero_tol).count();
    Ok(SpectrumReport {
        schema: REPORT_SCHEMA,
        first_nonnegative_is_zero: values.get(neg_count).is_some_and(|l| l.abs() <= zero_tol),
        ground_state_simple: values.len() < 2 || values[1] - values[0] > zero_tol,
        eigenvalues: values,
        eigenfields,
        neg_count,
        zero_mult,
        zero_tol,
        index_lower: neg_count as i64 - 1,
        index_upper: neg_count as i64,
        discretization: op.discretization,
        rayleigh_defect,
    })
}

/// Runs [`eigen`], doubling the count until the largest computed eigenvalue
/// clears `zero_tol` or the operator size is reached.
pub fn eigen_adaptive(op: &JacobiOperator, count: usize, zero_tol: f64) -> Result<SpectrumReport, SpectrumError> {
    let n = op.grid().len();
    let mut count = count.min(n);
    loop {
        match eigen(op, count, zero_tol) {
            Err(SpectrumError::NotEnoughEigenvalues { .. }) if count < n => count = (2 * count).min(n),
            other => return other,
        }
    }
}

fn matrix_free_pairs(op: &JacobiOperator, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectrumError> {
    let grid = *op.grid();
    let n = grid.len();
    let block = (count + (count / 2).max(8)).min(n);
    let xi_sq = op.spectral.xi_squared();
    // lowest Fourier modes as start vectors, slightly perturbed
    let mut modes: Vec<usize> = (0..n).collect();
    modes.sort_by(|&a, &b| xi_sq[a].total_cmp(&xi_sq[b]).then(a.cmp(&b)));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start = Vec::with_capacity(block);
    let mut idx = 0;
    while start.len() < block && idx < n {
        let (p, q) = (
            Grid::signed_mode(modes[idx] % grid.nx, grid.nx) as f64,
            Grid::signed_mode(modes[idx] / grid.nx, grid.ny) as f64,
        );
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let (j, k) = ((i % grid.nx) as f64, (i / grid.nx) as f64);
                let phase = 2.0 * std::f64::consts::PI * (p * j / grid.nx as f64 + q * k / grid.ny as f64);
                let base = if start.len() % 2 == 0 { phase.cos() } else { phase.sin() };
                base + 1e-3 * rng.gen_range(-1.0..1.0)
            })
            .collect();
        start.push(v);
        idx += 1;
    }
    let shift = op.cosh_sup();
    let res = lobpcg(
        |v| op.apply_values(v),
        |r| op.spectral.apply_real(r, |i| 1.0 / (0.25 * xi_sq[i] + shift)),
        start,
        count,
        LOBPCG_TOL,
        LOBPCG_MAX_ITER,
    );
    if !res.converged {
        return Err(SpectrumError::NotConverged {
            iterations: res.iterations,
            residual: res.max_residual,
        });
    }
    Ok((res.eigenvalues, res.vectors))
}

/// `4∫ v L v dxdy`.
pub fn second_variation(v: &ScalarField, op: &JacobiOperator) -> Result<f64, FieldError> {
    let lv = op.apply(v)?;
    Ok(4.0 * v.dot(&lv))
}

/// `∫|∇₀v|² dxdy − ∫(4 − 2K) v² e^u dxdy` with `K = 1 − e^{−2u}`.
pub fn intrinsic_second_variation(v: &ScalarField, u: &ScalarField) -> Result<f64, FieldError> {
    u.check_grid(v)?;
    let spectral = Spectral::new(*u.grid());
    let (vx, vy) = spectral.gradient(v);
    let grad_sq = vx.zip_map(&vy, |a, b| a * a + b * b)?;
    let potential = v.zip_map(u, |vi, ui| {
        let k = 1.0 - (-2.0 * ui).exp();
        (4.0 - 2.0 * k) * vi * vi * ui.exp()
    })?;
    Ok(grad_sq.integral() - potential.integral())
}

/// `∫ v e^u dxdy`.
pub fn volume_functional(v: &ScalarField, u: &ScalarField) -> Result<f64, FieldError> {
    Ok(v.zip_map(u, |a, b| a * b.exp())?.integral())
}

/// Number of singular values of the `L²(dxdy)` Gram matrix above
/// `tol · σ_max`.
pub fn gram_rank(fields: &[ScalarField], tol: f64) -> Result<usize, FieldError> {
    let m = fields.len();
    if m == 0 {
        return Ok(0);
    }
    for f in &fields[1..] {
        fields[0].check_grid(f)?;
    }
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let d = fields[i].dot(&fields[j]);
            g[(i, j)] = d;
            g[(j, i)] = d;
        }
    }
    let sv = g.singular_values();
    let top = sv.max();
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(n: usize) -> JacobiOperator {
        let g = Grid::new(TorusLattice::square(2.0 * PI).unwrap(), n, n).unwrap();
        JacobiOperator::new(ScalarField::zeros(g))
    }

    /// `¼(j² + k²) − 1` over all integer modes, sorted.
    fn flat_oracle(count: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (-20i64..=20)
            .flat_map(|j| (-20i64..=20).map(move |k| 0.25 * (j * j + k * k) as f64 - 1.0))
            .collect();
        v.sort_by(f64::total_cmp);
        v.truncate(count);
        v
    }

    #[test]
    fn flat_torus_dense() {
        let op = flat(16);
        let r = eigen(&op, 30, op.default_zero_tol()).unwrap();
        for (l, w) in r.eigenvalues.iter().zip(flat_oracle(30)) {
            assert!((l - w).abs() < 1e-10, "{l} vs {w}");
        }
        assert_eq!((r.neg_count, r.zero_mult, r.index_lower, r.index_upper), (9, 4, 8, 9));
        assert!(r.first_nonnegative_is_zero && r.ground_state_simple);
        assert!(r.rayleigh_defect < 1e-9, "{}", r.rayleigh_defect);
        // constant ground state, unit L² norm
        let c = 1.0 / (2.0 * PI);
        assert!(r.eigenfields[0].values().iter().all(|x| (x - c).abs() < 1e-10));
        assert!((second_variation(&r.eigenfields[0], &op).unwrap() + 4.0).abs() < 1e-10);
    }

    #[test]
    fn matrix_free_agrees_with_dense_on_oblique_lattice() {
        let lat = TorusLattice::new(
            num_complex::Complex64::new(5.0, 0.0),
            num_complex::Complex64::new(1.3, 4.2),
            1,
        )
        .unwrap();
        let g = Grid::new(lat, 16, 16).unwrap();
        let u = ScalarField::from_fn(g, |x, y| 0.3 * (2.0 * PI * x / 5.0).cos() + 0.1 * (0.7 * y).sin().powi(2)).unwrap();
        let dense = eigen(&JacobiOperator::with_discretization(u.clone(), Discretization::Dense), 12, 1e-6).unwrap();
        let free = eigen(&JacobiOperator::with_discretization(u, Discretization::MatrixFree), 12, 1e-6).unwrap();
        for (a, b) in dense.eigenvalues.iter().zip(&free.eigenvalues) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(dense.neg_count, free.neg_count);
    }

    #[test]
    fn operator_is_symmetric() {
        let g = Grid::new(TorusLattice::rectangular(3.0, 2.0).unwrap(), 16, 8).unwrap();
        let u = ScalarField::from_fn(g, |x, y| (2.0 * PI * x / 3.0).sin() * (PI * y).cos()).unwrap();
        let op = JacobiOperator::new(u);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let a = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let b = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let lab = a.dot(&op.apply(&b).unwrap());
            let lba = b.dot(&op.apply(&a).unwrap());
            assert!((lab - lba).abs() < 1e-10 * lab.abs().max(1.0));
        }
    }

    #[test]
    fn too_few_eigenvalues_is_reported() {
        let op = flat(8);
        assert!(matches!(
            eigen(&op, 5, op.default_zero_tol()),
            Err(SpectrumError::NotEnoughEigenvalues { count: 5, .. })
        ));
        let r = eigen_adaptive(&op, 5, op.default_zero_tol()).unwrap();
        assert_eq!(r.neg_count, 9);
    }

    #[test]
    fn volume_and_rank_examples() {
        let g = Grid::new(TorusLattice::square(2.0 * PI).unwrap(), 16, 16).unwrap();
        let zero = ScalarField::zeros(g);
        let c = ScalarField::constant(g, 1.5);
        assert!((volume_functional(&c, &zero).unwrap() - 1.5 * 4.0 * PI * PI).abs() < 1e-12);
        let s = ScalarField::from_fn(g, |x, _| x.sin()).unwrap();
        let co = ScalarField::from_fn(g, |x, _| x.cos()).unwrap();
        let sum = s.zip_map(&co, |a, b| a + b).unwrap();
        assert_eq!(gram_rank(&[s, co, sum], 1e-10).unwrap(), 2);
        assert_eq!(gram_rank(&[zero], 1e-10).unwrap(), 0);
    }

    #[test]
    fn config_section() {
        let mut s = Section::new("spectrum");
        s.insert("count", "12");
        s.insert("discretization", "dense");
        let c = SpectrumConfig::from_section(&s).unwrap();
        assert_eq!(c.count, 12);
        assert_eq!(c.zero_tol, None);
        s.insert("zero_tol", "0");
        assert!(SpectrumConfig::from_section(&s).is_err());
    }
}
