//! Branches of even solutions bifurcating from `u ≡ 0` along a one-parameter
//! family of lattices.
//!
//! At `u = 0` the linearization `¼Δ₀ + 1` is singular exactly when some
//! dual-lattice vector has `|ξ|² = 4`. Fields are stored in logical
//! coordinates, so the family only changes the Fourier multiplier.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use super::{project_even, residual, sup, BranchTag, SinhGordonSolution, SolveConfig};
use crate::field::ScalarField;
use crate::lattice::{Grid, LatticeError, TorusLattice};
use crate::spectral::Spectral;

/// Largest dense bordered system the continuation will assemble.
pub const MAX_UNKNOWNS: usize = 2048;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("no dual-lattice mode reaches |ξ|² = 4 along the family")]
    NoBifurcationDetected,
    #[error("corrector failed after {steps_done} steps: {reason}")]
    StepFailure {
        steps_done: usize,
        reason: String,
        last_good: Option<Box<BranchPoint>>,
    },
    #[error("grid has {0} unknowns, dense continuation supports at most {MAX_UNKNOWNS}")]
    TooLarge(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// `ω_i(t) = (1−t)·ω_i(start) + t·ω_i(end)` for `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeFamily {
    pub start: TorusLattice,
    pub end: TorusLattice,
}

impl LatticeFamily {
    pub fn new(start: TorusLattice, end: TorusLattice) -> Self {
        Self { start, end }
    }

    pub fn constant(lattice: TorusLattice) -> Self {
        Self::new(lattice, lattice)
    }

    pub fn at(&self, t: f64) -> Result<TorusLattice, LatticeError> {
        let lerp = |a: Complex64, b: Complex64| a * (1.0 - t) + b * t;
        TorusLattice::new(
            lerp(self.start.omega1, self.end.omega1),
            lerp(self.start.omega2, self.end.omega2),
            self.start.m,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bifurcation {
    pub t: f64,
    /// Modes `(p, q)` with `¼|ξ(t)|² = 1`, one representative per `±` pair.
    pub modes: Vec<(i64, i64)>,
}

impl Bifurcation {
    /// Dimension of the even part of the kernel of `¼Δ₀ + 1`.
    pub fn even_kernel_dim(&self) -> usize {
        self.modes.len()
    }
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub t: f64,
    pub lattice: TorusLattice,
    pub solution: SinhGordonSolution,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub bifurcation: Bifurcation,
    pub points: Vec<BranchPoint>,
}

const DETECT_SAMPLES: usize = 1000;
const ZERO_TOL: f64 = 1e-9;

fn gap(family: &LatticeFamily, t: f64, p: i64, q: i64) -> Result<f64, LatticeError> {
    let (x, y) = family.at(t)?.wave_vector(p as f64, q as f64);
    Ok(0.25 * (x * x + y * y) - 1.0)
}

/// Smallest `t` at which some resolved mode satisfies `¼|ξ(t)|² = 1`,
/// located by sign changes on a uniform sample and refined by bisection.
pub fn detect_bifurcation(family: &LatticeFamily, nx: usize, ny: usize) -> Result<Bifurcation, ContinuationError> {
    let (pmax, qmax) = (nx as i64 / 2 - 1, ny as i64 / 2 - 1);
    // one representative per ± pair
    let modes: Vec<(i64, i64)> = (0..=pmax)
        .flat_map(|p| (-qmax..=qmax).map(move |q| (p, q)))
        .filter(|&(p, q)| p > 0 || (p == 0 && q > 0))
        .collect();
    let ts: Vec<f64> = (0..=DETECT_SAMPLES).map(|i| i as f64 / DETECT_SAMPLES as f64).collect();
    let mut best: Option<f64> = None;
    for &(p, q) in &modes {
        let mut prev = gap(family, 0.0, p, q)?;
        if prev == 0.0 {
            best = Some(0.0);
            break;
        }
        for w in ts.windows(2) {
            if best.is_some_and(|b| w[0] >= b) {
                break;
            }
            let cur = gap(family, w[1], p, q)?;
            if cur == 0.0 || (cur < 0.0) != (prev < 0.0) {
                let (mut lo, mut hi, flo) = (w[0], w[1], prev);
                if cur != 0.0 {
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let fm = gap(family, mid, p, q)?;
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if (fm < 0.0) == (flo < 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                }
                let root = if cur == 0.0 { w[1] } else { 0.5 * (lo + hi) };
                best = Some(best.map_or(root, |b: f64| b.min(root)));
                break;
            }
            prev = cur;
        }
    }
    let t = best.ok_or(ContinuationError::NoBifurcationDetected)?;
    let mut critical = Vec::new();
    for &(p, q) in &modes {
        if gap(family, t, p, q)?.abs() <= ZERO_TOL {
            critical.push((p, q));
        }
    }
    Ok(Bifurcation { t, modes: critical })
}

/// Pointwise operators of the problem at one lattice of the family.
struct Frame {
    grid: Grid,
    spectral: Spectral,
}

impl Frame {
    fn new(family: &LatticeFamily, t: f64, nx: usize, ny: usize) -> Result<Self, LatticeError> {
        let grid = Grid::new(family.at(t)?, nx, ny)?;
        Ok(Self {
            grid,
            spectral: Spectral::new(grid),
        })
    }
}

const T_STEP: f64 = 1e-6;

/// Arclength inner product: mean over nodes plus the parameter component.
fn inner(a: &[f64], at: f64, b: &[f64], bt: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64 + at * bt
}

struct Corrector<'a> {
    family: &'a LatticeFamily,
    nx: usize,
    ny: usize,
    cfg: &'a SolveConfig,
}

impl Corrector<'_> {
    /// Newton on `F(u, t) = 0`, `⟨τ, (u, t) − z0⟩ = ds` restricted to even `u`.
    fn run(&self, z0: (&[f64], f64), tau: (&[f64], f64), ds: f64, guess: (Vec<f64>, f64)) -> Result<(Vec<f64>, f64, Vec<f64>), String> {
        let (mut u, mut t) = guess;
        let n = u.len();
        let mut history = Vec::new();
        for _ in 0..=self.cfg.max_iters {
            let frame = Frame::new(self.family, t, self.nx, self.ny).map_err(|e| e.to_string())?;
            let f = residual(&frame.spectral, &u);
            let du: Vec<f64> = u.iter().zip(z0.0).map(|(a, b)| a - b).collect();
            let g = inner(tau.0, tau.1, &du, t - z0.1) - ds;
            let r = sup(&f);
            history.push(r);
            if r <= self.cfg.newton_tol && g.abs() <= 1e-8 * ds.max(1.0) {
                return Ok((u, t, history));
            }
            if history.len() > self.cfg.max_iters as usize {
                break;
            }
            let jac = self.bordered(&frame, &u, t, tau)?;
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                rhs[i] = -f[i];
            }
            rhs[n] = -g;
            let sol = jac.lu().solve(&rhs).ok_or("singular bordered system")?;
            let mut delta: Vec<f64> = sol.iter().take(n).copied().collect();
            project_even(&frame.grid, &mut delta);
            for i in 0..n {
                u[i] += delta[i];
            }
            t += sol[n];
            if !t.is_finite() || u.iter().any(|x| !x.is_finite()) {
                return Err("corrector produced non-finite iterate".into());
            }
        }
        Err(format!(
            "corrector did not reach {:.1e} in {} iterations (residual {:.3e})",
            self.cfg.newton_tol,
            self.cfg.max_iters,
            history.last().copied().unwrap_or(f64::INFINITY)
        ))
    }

    /// `[[J + P_odd, F_t], [τ_u/N, τ_t]]`; `P_odd` makes the odd subspace
    /// trivial so translations do not enter the kernel.
    fn bordered(&self, frame: &Frame, u: &[f64], t: f64, tau: (&[f64], f64)) -> Result<DMatrix<f64>, String> {
        let n = u.len();
        let grid = frame.grid;
        let xi_sq = frame.spectral.xi_squared();
        let k = frame.spectral.dense_matrix(|i| xi_sq[i]);
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = -0.25 * k[r * n + c];
            }
            m[(r, r)] += u[r].cosh();
        }
        for kk in 0..grid.ny {
            for j in 0..grid.nx {
                let i = grid.index(j, kk);
                m[(i, i)] += 0.5;
                m[(i, grid.reflect(j, kk))] -= 0.5;
            }
        }
        let ft = self.parameter_derivative(u, t)?;
        for r in 0..n {
            m[(r, n)] = ft[r];
            m[(n, r)] = tau.0[r] / n as f64;
        }
        m[(n, n)] = tau.1;
        Ok(m)
    }

    /// `∂F/∂t` by central differences of the multiplier.
    fn parameter_derivative(&self, u: &[f64], t: f64) -> Result<Vec<f64>, String> {
        let plus = Frame::new(self.family, t + T_STEP, self.nx, self.ny).map_err(|e| e.to_string())?;
        let minus = Frame::new(self.family, t - T_STEP, self.nx, self.ny).map_err(|e| e.to_string())?;
        let (xp, xm) = (plus.spectral.xi_squared(), minus.spectral.xi_squared());
        Ok(plus
            .spectral
            .apply_real(u, |i| -0.25 * (xp[i] - xm[i]) / (2.0 * T_STEP)))
    }
}

const MAX_HALVINGS: u32 = 6;

/// Pseudo-arclength continuation of the even branch leaving `u ≡ 0` at the
/// first bifurcation of `family`. Returns `cfg.continuation_steps` points.
pub fn continue_branch(family: &LatticeFamily, nx: usize, ny: usize, cfg: &SolveConfig) -> Result<Branch, ContinuationError> {
    let n = nx * ny;
    if n > MAX_UNKNOWNS {
        return Err(ContinuationError::TooLarge(n));
    }
    let bifurcation = detect_bifurcation(family, nx, ny)?;
    let (p, q) = bifurcation.modes[0];
    let frame = Frame::new(family, bifurcation.t, nx, ny)?;
    let grid = frame.grid;
    // unit-RMS even kernel function cos(2π(p s + q t))
    let mut phi = vec![0.0; n];
    for k in 0..ny {
        for j in 0..nx {
            let arg = 2.0 * std::f64::consts::PI * (p as f64 * j as f64 / nx as f64 + q as f64 * k as f64 / ny as f64);
            phi[grid.index(j, k)] = std::f64::consts::SQRT_2 * arg.cos();
        }
    }

    let corrector = Corrector { family, nx, ny, cfg };
    let mut prev: (Vec<f64>, f64) = (vec![0.0; n], bifurcation.t);
    let mut tau: (Vec<f64>, f64) = (phi, 0.0);
    let mut points: Vec<BranchPoint> = Vec::new();
    let fail = |points: &[BranchPoint], reason: String| ContinuationError::StepFailure {
        steps_done: points.len(),
        reason,
        last_good: points.last().cloned().map(Box::new),
    };

    while points.len() < cfg.continuation_steps as usize {
        let mut ds = cfg.continuation_step;
        let mut halvings = 0;
        let (u, t, history) = loop {
            let guess_u: Vec<f64> = prev.0.iter().zip(&tau.0).map(|(a, b)| a + ds * b).collect();
            let guess = (guess_u, prev.1 + ds * tau.1);
            match corrector.run((&prev.0, prev.1), (&tau.0, tau.1), ds, guess) {
                Ok(ok) if (0.0..=1.0).contains(&ok.1) => break ok,
                Ok(ok) => return Err(fail(&points, format!("branch left the family at t = {}", ok.1))),
                Err(reason) if halvings >= MAX_HALVINGS => return Err(fail(&points, reason)),
                Err(_) => {
                    ds *= 0.5;
                    halvings += 1;
                }
            }
        };
        let lattice = family.at(t)?;
        let grid = Grid::new(lattice, nx, ny)?;
        let field = ScalarField::new(grid, u.clone()).map_err(|e| fail(&points, e.to_string()))?;
        let residual_norm = *history.last().expect("corrector records residuals");
        if sup(&u) < 1e-8 {
            return Err(fail(&points, "corrector fell back onto u = 0".into()));
        }
        // secant tangent for the next predictor
        let du: Vec<f64> = u.iter().zip(&prev.0).map(|(a, b)| a - b).collect();
        let dt = t - prev.1;
        let norm = inner(&du, dt, &du, dt).sqrt();
        tau = (du.iter().map(|x| x / norm).collect(), dt / norm);
        prev = (u, t);
        points.push(BranchPoint {
            t,
            lattice,
            solution: SinhGordonSolution {
                u: field,
                residual_norm,
                branch_tag: BranchTag::Continuation,
                residual_history: history,
            },
        });
    }
    Ok(Branch { bifurcation, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sinh_gordon::{period_quadrature, residual_sup};
    use std::f64::consts::PI;

    fn shrinking_family() -> LatticeFamily {
        LatticeFamily::new(
            TorusLattice::rectangular(3.3, 1.0).unwrap(),
            TorusLattice::rectangular(2.8, 1.0).unwrap(),
        )
    }

    #[test]
    fn constant_period_pi_is_a_bifurcation_for_any_height() {
        for ly in [0.7, 1.0, 5.0] {
            let fam = LatticeFamily::constant(TorusLattice::rectangular(PI, ly).unwrap());
            let b = detect_bifurcation(&fam, 16, 4).unwrap();
            assert_eq!(b.t, 0.0);
            assert!(b.modes.contains(&(1, 0)));
        }
    }

    #[test]
    fn family_without_critical_mode_reports_no_bifurcation() {
        let fam = LatticeFamily::constant(TorusLattice::square(2.5).unwrap());
        assert!(matches!(
            detect_bifurcation(&fam, 16, 16),
            Err(ContinuationError::NoBifurcationDetected)
        ));
    }

    #[test]
    fn detected_parameter_matches_period_pi() {
        let fam = shrinking_family();
        let b = detect_bifurcation(&fam, 32, 4).unwrap();
        // x-period 3.3 − 0.5 t = π
        let expect = (3.3 - PI) / 0.5;
        assert!((b.t - expect).abs() < 1e-12, "{} vs {expect}", b.t);
        assert_eq!(b.modes, vec![(1, 0)]);
    }

    #[test]
    fn branch_matches_oned_oracle_and_grows() {
        let cfg = SolveConfig {
            continuation_steps: 6,
            ..Default::default()
        };
        let branch = continue_branch(&shrinking_family(), 32, 4, &cfg).unwrap();
        assert_eq!(branch.points.len(), 6);
        let mut amp = 0.0;
        for pt in &branch.points {
            let s = &pt.solution;
            assert!(residual_sup(&s.u) <= cfg.newton_tol);
            assert!(s.u.max_abs_diff(&s.u.reflected()) <= 10.0 * cfg.newton_tol);
            let a = s.u.sup_norm();
            assert!(a > amp, "amplitude not increasing");
            amp = a;
            // the x-period equals the orbit period at energy 4 cosh(max u)
            let max_u = s.u.values().iter().cloned().fold(f64::MIN, f64::max);
            let period = period_quadrature(4.0 * max_u.cosh()).unwrap();
            let lx = pt.lattice.omega1.re;
            assert!((period - lx).abs() < 1e-6 * lx, "{period} vs {lx}");
        }
    }
}
