//! Doubly periodic solutions of `∂_z∂_z̄u + sinh u = 0`.
//!
//! Internally the equation is always written in real coordinates as
//! `¼(u_xx + u_yy) + sinh u = 0`.

mod continuation;
mod minres;
pub mod oned;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Section};
use crate::field::{FieldError, ScalarField};
use crate::lattice::Grid;
use crate::spectral::{resample, Spectral};

pub use continuation::{
    continue_branch, detect_bifurcation, Bifurcation, Branch, BranchPoint, ContinuationError,
    LatticeFamily, MAX_UNKNOWNS,
};
pub use minres::{minres, MinresOutcome};
pub use oned::{period_quadrature, return_time_ode, solve_1d, OneDError, OneDProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    None,
    /// `u(z) = u(−z)`
    Even,
}

impl std::str::FromStr for Symmetry {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Symmetry::None),
            "even" => Ok(Symmetry::Even),
            other => Err(format!("unknown symmetry '{other}' (none|even)")),
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::None => "none",
            Symmetry::Even => "even",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Target sup-norm of `¼Δ₀u + sinh u`.
    pub newton_tol: f64,
    pub max_iters: u32,
    pub deflation_enabled: bool,
    pub symmetry: Symmetry,
    pub continuation_steps: u32,
    /// Pseudo-arclength step, in RMS units of `u`.
    pub continuation_step: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 50,
            deflation_enabled: false,
            symmetry: Symmetry::None,
            continuation_steps: 8,
            continuation_step: 0.05,
        }
    }
}

pub const SOLVE_KEYS: &[&str] = &[
    "newton_tol",
    "max_iters",
    "symmetry",
    "deflation",
    "continuation_steps",
    "continuation_step",
];

impl SolveConfig {
    /// Reads the `[solve]` section; absent keys keep their defaults.
    pub fn from_section(s: &Section) -> Result<Self, ConfigError> {
        s.reject_unknown(SOLVE_KEYS)?;
        let d = Self::default();
        let max_iters = s.get_or("max_iters", d.max_iters)?;
        if max_iters == 0 {
            return Err(s.bad("max_iters", "must be >= 1"));
        }
        Ok(Self {
            newton_tol: s.positive("newton_tol", d.newton_tol)?,
            max_iters,
            deflation_enabled: s.get_or("deflation", d.deflation_enabled)?,
            symmetry: s.get_or("symmetry", d.symmetry)?,
            continuation_steps: s.get_or("continuation_steps", d.continuation_steps)?,
            continuation_step: s.positive("continuation_step", d.continuation_step)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchTag {
    Trivial,
    Newton,
    Continuation,
    OnedShooting,
    File,
}

impl fmt::Display for BranchTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchTag::Trivial => "trivial",
            BranchTag::Newton => "newton",
            BranchTag::Continuation => "continuation",
            BranchTag::OnedShooting => "oned-shooting",
            BranchTag::File => "file",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SinhGordonSolution {
    pub u: ScalarField,
    /// Sup-norm of `¼Δ₀u + sinh u`.
    pub residual_norm: f64,
    pub branch_tag: BranchTag,
    /// Residual sup-norm before each Newton step and after the last one.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton did not reach {tol:.1e} in {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: u32, residual: f64, tol: f64 },
    #[error("iterates collapsed onto u = 0 from a nontrivial seed")]
    DivergedToTrivial,
    #[error("seed lives on a different lattice than the target grid")]
    LatticeMismatch,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    OneD(#[from] OneDError),
}

/// `¼Δ₀u + sinh u` on the nodes.
pub fn residual(spectral: &Spectral, u: &[f64]) -> Vec<f64> {
    let lap = spectral.apply_real(u, |i| spectral.xi_squared()[i]);
    u.iter()
        .zip(&lap)
        .map(|(&ui, &li)| -0.25 * li + ui.sinh())
        .collect()
}

pub fn residual_sup(u: &ScalarField) -> f64 {
    let s = Spectral::new(*u.grid());
    sup(&residual(&s, u.values()))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project_even(grid: &Grid, v: &mut [f64]) {
    let src = v.to_vec();
    for k in 0..grid.ny {
        for j in 0..grid.nx {
            let i = grid.index(j, k);
            v[i] = 0.5 * (src[i] + src[grid.reflect(j, k)]);
        }
    }
}

const TRIVIAL_SUP: f64 = 1e-8;

/// Newton iteration for `¼Δ₀u + sinh u = 0` on `grid`, starting from `seed`
/// (Fourier-resampled if its resolution differs).
///
/// Each linear step solves `(¼Δ₀ + cosh u) δ = −F` by MINRES, preconditioned
/// with the Fourier multiplier `(¼|ξ|² + mean cosh u)⁻¹`.
pub fn solve(grid: Grid, seed: &ScalarField, cfg: &SolveConfig) -> Result<SinhGordonSolution, SolveError> {
    if seed.grid().lattice != grid.lattice {
        return Err(SolveError::LatticeMismatch);
    }
    let seed = resample(seed, grid.nx, grid.ny)?;
    let spectral = Spectral::new(grid);
    let n = grid.len();
    let mut u = seed.values().to_vec();
    if cfg.symmetry == Symmetry::Even {
        project_even(&grid, &mut u);
    }
    let seed_sup = seed.sup_norm();
    let mut history = Vec::new();
    let xi_sq = spectral.xi_squared().to_vec();

    for _ in 0..=cfg.max_iters {
        let f = residual(&spectral, &u);
        let r = sup(&f);
        history.push(r);
        if r <= cfg.newton_tol {
            if seed_sup >= TRIVIAL_SUP && sup(&u) < TRIVIAL_SUP {
                return Err(SolveError::DivergedToTrivial);
            }
            let tag = if sup(&u) == 0.0 { BranchTag::Trivial } else { BranchTag::Newton };
            let u = ScalarField::new(grid, u)?;
            return Ok(SinhGordonSolution {
                u,
                residual_norm: r,
                branch_tag: tag,
                residual_history: history,
            });
        }
        if history.len() > cfg.max_iters as usize {
            break;
        }
        let cosh: Vec<f64> = u.iter().map(|x| x.cosh()).collect();
        let shift = cosh.iter().sum::<f64>() / n as f64;
        let mut rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        if cfg.symmetry == Symmetry::Even {
            project_even(&grid, &mut rhs);
        }
        let rtol = (r * 1e-3).clamp(1e-14, 1e-6);
        let (mut delta, _) = minres(
            &rhs,
            |v, out| {
                let lap = spectral.apply_real(v, |i| xi_sq[i]);
                for i in 0..n {
                    out[i] = -0.25 * lap[i] + cosh[i] * v[i];
                }
            },
            |v, out| {
                let w = spectral.apply_real(v, |i| 1.0 / (0.25 * xi_sq[i] + shift));
                out.copy_from_slice(&w);
            },
            rtol,
            2000,
        );
        if cfg.symmetry == Symmetry::Even {
            project_even(&grid, &mut delta);
        }
        if cfg.deflation_enabled {
            // deflation of u = 0 with M(u) = 1/|u|² + 1 (mean-square norm)
            let nu2 = u.iter().map(|x| x * x).sum::<f64>() / n as f64;
            if nu2 > 0.0 {
                let m = 1.0 / nu2 + 1.0;
                let ud = u.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                let grad_m_delta = -2.0 * ud / (nu2 * nu2);
                let denom = m - grad_m_delta;
                if denom.abs() > 1e-14 * m {
                    let tau = m / denom;
                    delta.iter_mut().for_each(|d| *d *= tau);
                }
            }
        }
        // backtracking on the residual 2-norm
        let f0 = l2(&f);
        let mut step = 1.0;
        let mut trial = u.clone();
        loop {
            for i in 0..n {
                trial[i] = u[i] + step * delta[i];
            }
            let ft = residual(&spectral, &trial);
            if l2(&ft) < f0 || step < 1.0 / 64.0 {
                break;
            }
            step *= 0.5;
        }
        u.copy_from_slice(&trial);
        if cfg.symmetry == Symmetry::Even {
            project_even(&grid, &mut u);
        }
    }
    let residual = *history.last().unwrap_or(&f64::INFINITY);
    Err(SolveError::NonConvergence {
        iters: cfg.max_iters,
        residual,
        tol: cfg.newton_tol,
    })
}

/// Builds a solution from the 1-D orbit with energy `energy` on the rectangle
/// `T(E) × ly`, then polishes it with Newton (even symmetry).
pub fn solve_oned_branch(energy: f64, nx: usize, ly: f64, ny: usize, cfg: &SolveConfig) -> Result<SinhGordonSolution, SolveError> {
    let profile = solve_1d(energy, nx)?;
    let seed = profile
        .to_field(ly, ny)
        .map_err(|e| SolveError::Field(FieldError::Lattice(e)))?;
    let mut polished = solve(*seed.grid(), &seed, cfg)?;
    polished.branch_tag = BranchTag::OnedShooting;
    Ok(polished)
}

/// Reads a CMCF file; the residual is always recomputed.
pub fn load_field(path: &Path) -> Result<SinhGordonSolution, FieldError> {
    let u = ScalarField::load(path)?;
    Ok(from_field(u, BranchTag::File))
}

pub fn from_field(u: ScalarField, tag: BranchTag) -> SinhGordonSolution {
    let r = residual_sup(&u);
    SinhGordonSolution {
        u,
        residual_norm: r,
        branch_tag: tag,
        residual_history: vec![r],
    }
}

pub fn save_field(solution: &SinhGordonSolution, path: &Path) -> Result<(), FieldError> {
    solution.u.save(path)
}
