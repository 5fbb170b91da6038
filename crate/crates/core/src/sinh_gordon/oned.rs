//! y-independent solutions: `u'' = −4 sinh u` with conserved energy
//! `E = ½(u')² + 4 cosh u`. Closed orbits around `u = 0` exist for `E > 4`.
//!
//! Two independent routes to the period are provided: a quadrature of
//! `T(E) = 2∫ du / √(2E − 8 cosh u)` and the return time of a direct ODE
//! integration.

use std::f64::consts::PI;

use thiserror::Error;

use crate::field::ScalarField;
use crate::lattice::{Grid, LatticeError, TorusLattice};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OneDError {
    #[error("energy {0} <= 4: no oscillating orbit")]
    NoOscillation(f64),
    #[error("need at least 4 samples, got {0}")]
    TooFewSamples(usize),
}

/// A sampled periodic orbit, starting at its maximum.
#[derive(Debug, Clone)]
pub struct OneDProfile {
    pub energy: f64,
    pub period: f64,
    pub amplitude: f64,
    /// `u(i·T/n)` for `i = 0..n`, with `u(0) = amplitude`.
    pub profile: Vec<f64>,
    /// Largest relative change of the energy along the integration.
    pub energy_drift: f64,
}

impl OneDProfile {
    /// The profile as a y-independent field on the rectangle `T × ly`.
    pub fn to_field(&self, ly: f64, ny: usize) -> Result<ScalarField, LatticeError> {
        let lattice = TorusLattice::rectangular(self.period, ly)?;
        let grid = Grid::new(lattice, self.profile.len(), ny)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..ny {
            values.extend_from_slice(&self.profile);
        }
        Ok(ScalarField::new(grid, values).expect("profile is finite"))
    }
}

pub fn amplitude(energy: f64) -> f64 {
    (energy / 4.0).acosh()
}

fn sinhc(y: f64) -> f64 {
    if y.abs() < 1e-6 {
        1.0 + y * y / 6.0
    } else {
        y.sinh() / y
    }
}

/// Integrand in the angle variable `u = a sin θ`; analytic and 2π-periodic,
/// so the trapezoid rule converges geometrically.
fn angle_integrand(a: f64, theta: f64) -> f64 {
    let s = theta.sin().abs();
    let c = theta.cos();
    let y = a * c * c / (2.0 * (1.0 + s));
    (a * (1.0 + s) / (8.0 * (a * (1.0 + s) / 2.0).sinh() * sinhc(y))).sqrt()
}

/// Orbit period by quadrature, relative accuracy ~1e-14.
pub fn period_quadrature(energy: f64) -> Result<f64, OneDError> {
    if !(energy > 4.0) {
        return Err(OneDError::NoOscillation(energy));
    }
    let a = amplitude(energy);
    let trap = |n: usize| -> f64 {
        let h = 2.0 * PI / n as f64;
        (0..n).map(|i| angle_integrand(a, i as f64 * h)).sum::<f64>() * h
    };
    let mut n = 64;
    let mut prev = trap(n);
    loop {
        n *= 2;
        let cur = trap(n);
        if (cur - prev).abs() <= 1e-14 * cur.abs() || n >= 1 << 20 {
            return Ok(cur);
        }
        prev = cur;
    }
}

type State = [f64; 2];

fn rhs(y: State) -> State {
    [y[1], -4.0 * y[0].sinh()]
}

fn rk4(y: State, h: f64) -> State {
    let k1 = rhs(y);
    let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn energy_of(y: State) -> f64 {
    0.5 * y[1] * y[1] + 4.0 * y[0].cosh()
}

const MAX_STEP: f64 = 2.5e-4;

/// Period from ODE integration: time for `u` to return to 0 moving upward.
pub fn return_time_ode(energy: f64) -> Result<f64, OneDError> {
    if !(energy > 4.0) {
        return Err(OneDError::NoOscillation(energy));
    }
    let h = MAX_STEP;
    let mut y: State = [0.0, (2.0 * energy - 8.0).sqrt()];
    let mut t = 0.0;
    let mut crossings = 0;
    loop {
        let next = rk4(y, h);
        if y[0] < 0.0 && next[0] >= 0.0 {
            crossings += 1;
        } else if y[0] > 0.0 && next[0] <= 0.0 {
            crossings += 1;
        }
        if crossings == 2 {
            // secant refinement of the partial step that lands on u = 0
            let (mut lo, mut hi) = (0.0, h);
            let (mut flo, mut fhi) = (y[0], next[0]);
            for _ in 0..60 {
                let mid = lo - flo * (hi - lo) / (fhi - flo);
                let fm = rk4(y, mid)[0];
                if fm.abs() < 1e-17 {
                    return Ok(t + mid);
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                    fhi = fm;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            return Ok(t + lo - flo * (hi - lo) / (fhi - flo));
        }
        y = next;
        t += h;
    }
}

/// Period by quadrature and the orbit sampled at `samples` uniform points
/// starting from the maximum `u = acosh(E/4)`.
pub fn solve_1d(energy: f64, samples: usize) -> Result<OneDProfile, OneDError> {
    if samples < 4 {
        return Err(OneDError::TooFewSamples(samples));
    }
    let period = period_quadrature(energy)?;
    let a = amplitude(energy);
    let dt = period / samples as f64;
    let sub = (dt / MAX_STEP).ceil() as usize;
    let h = dt / sub as f64;
    let mut y: State = [a, 0.0];
    let e0 = energy_of(y);
    let mut drift = 0.0f64;
    let mut profile = Vec::with_capacity(samples);
    for _ in 0..samples {
        profile.push(y[0]);
        for _ in 0..sub {
            y = rk4(y, h);
        }
        drift = drift.max((energy_of(y) - e0).abs() / e0);
    }
    Ok(OneDProfile {
        energy,
        period,
        amplitude: a,
        profile,
        energy_drift: drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_amplitude_period_tends_to_pi() {
        let t = period_quadrature(4.0 + 1e-10).unwrap();
        assert!((t - PI).abs() < 1e-8, "{t}");
    }

    #[test]
    fn quadrature_matches_ode_return_time() {
        let tq = period_quadrature(6.0).unwrap();
        let to = return_time_ode(6.0).unwrap();
        assert!((tq - to).abs() < 1e-8, "{tq} vs {to}");
    }

    #[test]
    fn quadrature_matches_naive_midpoint_rule() {
        // 4∫_0^a du/√(2E − 8cosh u) with u = a sin φ and a fine midpoint rule
        let e = 5.0;
        let a = amplitude(e);
        let n = 200_000;
        let h = (PI / 2.0) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let phi = (i as f64 + 0.5) * h;
            let u = a * phi.sin();
            acc += a * phi.cos() / (2.0 * e - 8.0 * u.cosh()).sqrt();
        }
        let naive = 4.0 * acc * h;
        assert!((naive - period_quadrature(e).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn period_decreases_with_energy() {
        let t5 = period_quadrature(5.0).unwrap();
        let t8 = period_quadrature(8.0).unwrap();
        assert!(t8 < t5 && t5 < PI);
    }

    #[test]
    fn rejects_low_energy() {
        assert_eq!(period_quadrature(4.0), Err(OneDError::NoOscillation(4.0)));
        assert!(solve_1d(3.0, 64).is_err());
        assert_eq!(solve_1d(6.0, 2).unwrap_err(), OneDError::TooFewSamples(2));
    }

    #[test]
    fn profile_is_symmetric_and_conserves_energy() {
        let p = solve_1d(6.0, 128).unwrap();
        let max = p.profile.iter().cloned().fold(f64::MIN, f64::max);
        let min = p.profile.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max + min).abs() < 1e-12, "{max} {min}");
        assert!(p.energy_drift <= 1e-10, "{}", p.energy_drift);
        // u(x) = u(−x) for a profile starting at the maximum
        for i in 1..128 {
            assert!((p.profile[i] - p.profile[128 - i]).abs() < 1e-11);
        }
    }
}
