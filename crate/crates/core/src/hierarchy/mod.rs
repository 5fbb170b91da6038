//! The recursion for the matrices `R_j`, `K_j`, the scalars `ρ_j` read off
//! from `K_j = ρ_j σ₁` (even `j`), and the Jacobi fields built from them.

mod poly;
mod rational;

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{ComplexField, ScalarField};
use crate::spectral::{Spectral, SpectralError};

pub use poly::{DiffMonomial, DiffPoly, MatPoly};
pub use rational::GaussianRational;

pub const DEFAULT_J_MAX: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("j_max must be at least 2, got {0}")]
    OrderTooSmall(u32),
    #[error("recursion inconsistency at j = {j}: {what}")]
    RecursionInconsistency { j: u32, what: String },
    #[error("Jacobi field index must be >= 1")]
    ZeroIndex,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `R_1..R_jmax`, `K_1..K_jmax` and `ρ_j` for even `j ≤ j_max`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    j_max: u32,
    r: Vec<MatPoly>,
    k: Vec<MatPoly>,
    rho: BTreeMap<u32, DiffPoly>,
}

fn half(n: i64) -> GaussianRational {
    GaussianRational::real(n, 2)
}

/// Runs the recursion in exact arithmetic up to `j_max`.
pub fn recursion(j_max: u32) -> Result<Hierarchy, HierarchyError> {
    if j_max < 2 {
        return Err(HierarchyError::OrderTooSmall(j_max));
    }
    let s1 = MatPoly::sigma1();
    let s3 = MatPoly::sigma3();
    let i = GaussianRational::i();
    let u1 = DiffPoly::dz_u(1);

    // index 0 is a placeholder so that r[j] = R_j
    let mut r = vec![
        MatPoly::zero(),
        MatPoly::sigma2().times_poly(&u1.scale(&half(-1))),
        s1.times_poly(&DiffPoly::dz_u(2).scale(&half(1))),
    ];
    // i[R_{k+1}, σ3] = −u_z Σ_{n=1}^{k−1} R_n σ1 R_{k−n} − 2∂R_k
    for k in 2..j_max as usize {
        let mut sum = MatPoly::zero();
        for n in 1..k {
            sum = &sum + &(&(&r[n] * &s1) * &r[k - n]);
        }
        let rhs = &sum.times_poly(&-&u1) - &r[k].derivative().scale(&GaussianRational::real(2, 1));
        if !rhs.is_off_diagonal() {
            return Err(HierarchyError::RecursionInconsistency {
                j: k as u32 + 1,
                what: "right-hand side has a nonzero diagonal".into(),
            });
        }
        // i[M, σ3] = [[0, −2i M12], [2i M21, 0]]
        let m12 = rhs.a12.scale(&GaussianRational::imag(1, 2));
        let m21 = rhs.a21.scale(&GaussianRational::imag(-1, 2));
        r.push(MatPoly::new(DiffPoly::zero(), m12, m21, DiffPoly::zero()));
    }

    let mut k = vec![
        MatPoly::zero(),
        MatPoly::sigma3().scale(&GaussianRational::imag(-1, 1)),
        s1.times_poly(&-&u1),
    ];
    // K_{j+1} = −i[R_j, σ3] − Σ_{i=2}^{j} K_i R_{j+1−i}
    for j in 2..j_max as usize {
        let mut next = r[j].commutator(&s3).scale(&-&i);
        for idx in 2..=j {
            next = &next - &(&k[idx] * &r[j + 1 - idx]);
        }
        k.push(next);
    }

    let mut rho = BTreeMap::new();
    for j in (2..=j_max).step_by(2) {
        let kj = &k[j as usize];
        if !kj.is_off_diagonal() || kj.a12 != kj.a21 {
            return Err(HierarchyError::RecursionInconsistency {
                j,
                what: "K_j is not a multiple of σ1".into(),
            });
        }
        rho.insert(j, kj.a12.clone());
    }
    Ok(Hierarchy { j_max, r, k, rho })
}

impl Hierarchy {
    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    /// `R_j` for `1 ≤ j ≤ j_max`.
    pub fn r(&self, j: u32) -> Option<&MatPoly> {
        self.r.get(j as usize).filter(|_| j >= 1)
    }

    /// `K_j` for `1 ≤ j ≤ j_max`.
    pub fn k(&self, j: u32) -> Option<&MatPoly> {
        self.k.get(j as usize).filter(|_| j >= 1)
    }

    /// `ρ_j` for even `j ≤ j_max`.
    pub fn rho(&self, j: u32) -> Option<&DiffPoly> {
        self.rho.get(&j)
    }

    pub fn rhos(&self) -> impl Iterator<Item = (u32, &DiffPoly)> {
        self.rho.iter().map(|(j, p)| (*j, p))
    }

    /// One line per even `j`: `rho{j} = <canonical text>`.
    pub fn dump(&self) -> String {
        self.rhos()
            .map(|(j, p)| format!("rho{j} = {}\n", p.canonical()))
            .collect()
    }

    /// Largest `j` with `v_j` available: needs `ρ_{j+1}` for odd `j`.
    pub fn max_jacobi_index(&self) -> u32 {
        self.j_max - self.j_max % 2
    }

    /// `v_j = Re ρ_{j+1}` for odd `j`, `Im ρ_j` for even `j`.
    pub fn jacobi_field(&self, j: u32, u: &ScalarField) -> Result<ScalarField, HierarchyError> {
        let (idx, real) = jacobi_source(j)?;
        let rho = self.rho(idx).ok_or(HierarchyError::RecursionInconsistency {
            j: idx,
            what: format!("rho{idx} not computed (j_max = {})", self.j_max),
        })?;
        let val = evaluate(rho, u)?;
        Ok(if real { val.re() } else { val.im() })
    }
}

fn jacobi_source(j: u32) -> Result<(u32, bool), HierarchyError> {
    match j {
        0 => Err(HierarchyError::ZeroIndex),
        j if j % 2 == 1 => Ok((j + 1, true)),
        j => Ok((j, false)),
    }
}

/// Substitutes spectral derivatives `∂_z^k u` into `poly`.
pub fn evaluate(poly: &DiffPoly, u: &ScalarField) -> Result<ComplexField, HierarchyError> {
    let grid = *u.grid();
    let spectral = Spectral::new(grid);
    let ladder = spectral.dz_ladder(u, poly.max_order().max(1))?;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for mono in poly.terms() {
        let c = mono.coeff.to_complex64();
        for (i, a) in acc.iter_mut().enumerate() {
            let mut prod = c;
            for &f in &mono.factors {
                prod *= ladder[f as usize - 1].values()[i];
            }
            *a += prod;
        }
    }
    Ok(ComplexField::new(grid, acc).expect("products of finite values"))
}

/// `v_j` on the grid of `u`, running the recursion just far enough.
pub fn jacobi_field(j: u32, u: &ScalarField) -> Result<ScalarField, HierarchyError> {
    let (idx, _) = jacobi_source(j)?;
    recursion(idx.max(2))?.jacobi_field(j, u)
}
