//! Preconditioned MINRES for symmetric (possibly indefinite, possibly
//! singular but consistent) systems with a symmetric positive definite
//! preconditioner.

#[derive(Debug, Clone, Copy)]
pub struct MinresOutcome {
    pub iterations: usize,
    /// Final preconditioned residual norm relative to the initial one.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0`. `apply_a` and `apply_minv` write into their
/// second argument.
pub fn minres(
    b: &[f64],
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    mut apply_minv: impl FnMut(&[f64], &mut [f64]),
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, MinresOutcome) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut v_prev = vec![0.0; n];
    let mut v = b.to_vec();
    let mut z = vec![0.0; n];
    apply_minv(&v, &mut z);
    let mut gamma = dot(&z, &v).max(0.0).sqrt();
    let gamma1 = gamma;
    if gamma1 == 0.0 {
        return (
            x,
            MinresOutcome {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut gamma_prev = 1.0;
    let mut eta = gamma1;
    let (mut s_prev, mut s) = (0.0, 0.0);
    let (mut c_prev, mut c) = (1.0, 1.0);
    let mut w_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut az = vec![0.0; n];
    let mut z_next = vec![0.0; n];
    for it in 1..=max_iter {
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        apply_a(&z, &mut az);
        let delta = dot(&az, &z);
        let mut v_next = vec![0.0; n];
        for i in 0..n {
            v_next[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i];
        }
        apply_minv(&v_next, &mut z_next);
        let gamma_next = dot(&z_next, &v_next).max(0.0).sqrt();

        let alpha0 = c * delta - c_prev * s * gamma;
        let alpha1 = alpha0.hypot(gamma_next);
        let alpha2 = s * delta + c_prev * c * gamma;
        let alpha3 = s_prev * gamma;
        if alpha1 == 0.0 {
            // exact breakdown: x is the solution in the Krylov space
            return (
                x,
                MinresOutcome {
                    iterations: it,
                    relative_residual: eta.abs() / gamma1,
                    converged: eta.abs() <= rtol * gamma1,
                },
            );
        }
        let c_next = alpha0 / alpha1;
        let s_next = gamma_next / alpha1;
        let mut w_next = vec![0.0; n];
        for i in 0..n {
            w_next[i] = (z[i] - alpha3 * w_prev[i] - alpha2 * w[i]) / alpha1;
            x[i] += c_next * eta * w_next[i];
        }
        eta *= -s_next;

        w_prev = std::mem::replace(&mut w, w_next);
        v_prev = std::mem::replace(&mut v, v_next);
        std::mem::swap(&mut z, &mut z_next);
        gamma_prev = gamma;
        gamma = gamma_next;
        s_prev = s;
        s = s_next;
        c_prev = c;
        c = c_next;

        let rel = eta.abs() / gamma1;
        if rel <= rtol || gamma == 0.0 {
            return (
                x,
                MinresOutcome {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                },
            );
        }
    }
    (
        x,
        MinresOutcome {
            iterations: max_iter,
            relative_residual: eta.abs() / gamma1,
            converged: false,
        },
    )
}
