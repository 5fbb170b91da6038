//! Block preconditioned eigensolver (LOBPCG) for the smallest eigenpairs of
//! a symmetric operator given only by its action.

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct LobpcgResult {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Largest `‖Ax − λx‖ / max(1, |λ|)` over the requested pairs.
    pub max_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Appends the parts of `candidates` orthogonal to `basis` (two Gram–Schmidt
/// passes), dropping vectors that are numerically dependent.
fn extend_orthonormal(basis: &mut Vec<Vec<f64>>, candidates: Vec<Vec<f64>>) -> usize {
    let mut added = 0;
    for mut c in candidates {
        let n0 = norm(&c);
        if n0 == 0.0 || !n0.is_finite() {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= n0);
        for _ in 0..2 {
            for b in basis.iter() {
                let p = dot(b, &c);
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n1 = norm(&c);
        if n1 > 1e-8 {
            c.iter_mut().for_each(|x| *x /= n1);
            basis.push(c);
            added += 1;
        }
    }
    added
}

fn combine(basis: &[Vec<f64>], coeffs: &DMatrix<f64>, rows: std::ops::Range<usize>, col: usize) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for r in rows {
        let c = coeffs[(r, col)];
        if c != 0.0 {
            out.iter_mut().zip(&basis[r]).for_each(|(o, b)| *o += c * b);
        }
    }
    out
}

/// Rayleigh–Ritz on an orthonormal basis: Ritz values ascending and
/// coefficient matrix with matching column order.
fn rayleigh_ritz(basis: &[Vec<f64>], images: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let m = basis.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Computes the `want` smallest eigenpairs. `start` supplies the block
/// (its size should exceed `want` by a few guard vectors); `precond` should
/// approximate a positive definite inverse of the shifted operator.
pub fn lobpcg(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    start: Vec<Vec<f64>>,
    want: usize,
    tol: f64,
    max_iter: usize,
) -> LobpcgResult {
    let mut x: Vec<Vec<f64>> = Vec::new();
    extend_orthonormal(&mut x, start);
    let block = x.len();
    assert!(block >= want, "start block smaller than the requested count");
    let ax: Vec<Vec<f64>> = x.iter().map(|v| apply_a(v)).collect();
    let (vals, c) = rayleigh_ritz(&x, &ax);
    let mut lambda: Vec<f64> = vals[..block].to_vec();
    let mut xs: Vec<Vec<f64>> = (0..block).map(|j| combine(&x, &c, 0..block, j)).collect();
    let mut axs: Vec<Vec<f64>> = (0..block).map(|j| combine(&ax, &c, 0..block, j)).collect();
    let mut p: Vec<Vec<f64>> = Vec::new();

    for it in 0..=max_iter {
        let residuals: Vec<Vec<f64>> = (0..block)
            .map(|j| axs[j].iter().zip(&xs[j]).map(|(a, b)| a - lambda[j] * b).collect())
            .collect();
        let rel: Vec<f64> = residuals
            .iter()
            .zip(&lambda)
            .map(|(r, l)| norm(r) / l.abs().max(1.0))
            .collect();
        let max_res = rel[..want].iter().cloned().fold(0.0, f64::max);
        if max_res <= tol || it == max_iter {
            return LobpcgResult {
                eigenvalues: lambda[..want].to_vec(),
                vectors: xs.into_iter().take(want).collect(),
                iterations: it,
                max_residual: max_res,
                converged: max_res <= tol,
            };
        }
        let w: Vec<Vec<f64>> = residuals
            .iter()
            .zip(&rel)
            .filter(|(_, &r)| r > tol)
            .map(|(r, _)| precond(r))
            .collect();
        let mut basis = xs.clone();
        extend_orthonormal(&mut basis, w);
        extend_orthonormal(&mut basis, p);
        let mut images = axs.clone();
        images.extend(basis[block..].iter().map(|v| apply_a(v)));
        let (vals, c) = rayleigh_ritz(&basis, &images);
        let m = basis.len();
        lambda = vals[..block].to_vec();
        xs = (0..block).map(|j| combine(&basis, &c, 0..m, j)).collect();
        axs = (0..block).map(|j| combine(&images, &c, 0..m, j)).collect();
        p = (0..block).map(|j| combine(&basis, &c, block..m, j)).collect();
    }
    unreachable!("loop returns at max_iter")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_with_degenerate_cluster() {
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| if i < 4 { -1.0 } else { i as f64 * 0.1 }).collect();
        let start: Vec<Vec<f64>> = (0..10)
            .map(|k| (0..n).map(|i| (((i + 1) * (k + 1)) as f64 * 0.7).sin() + 0.01 * i as f64).collect())
            .collect();
        let res = lobpcg(
            |v| v.iter().zip(&d).map(|(a, b)| a * b).collect(),
            |r| r.iter().zip(&d).map(|(a, b)| a / (b + 2.0)).collect(),
            start,
            6,
            1e-10,
            500,
        );
        assert!(res.converged, "residual {}", res.max_residual);
        let want = [-1.0, -1.0, -1.0, -1.0, 0.4, 0.5];
        for (l, w) in res.eigenvalues.iter().zip(want) {
            assert!((l - w).abs() < 1e-12, "{l} vs {w}");
        }
    }
}
