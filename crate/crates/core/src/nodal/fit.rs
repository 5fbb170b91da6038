//! Combinations of given fields whose value and gradient vanish at chosen points.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::NodalError;
use crate::field::ScalarField;
use crate::spectral::TrigInterpolant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingFit {
    pub points: Vec<[f64; 2]>,
    /// Unit Euclidean norm, largest-magnitude entry positive.
    pub coefficients: Vec<f64>,
    /// Largest `|v|`, `|v_x|`, `|v_y|` over the points.
    pub residual: f64,
    pub basis_size: usize,
    pub least_singular_value: f64,
    pub largest_singular_value: f64,
    /// Least singular value above `fit_tol` times the largest.
    pub no_exact_kernel: bool,
}

impl VanishingFit {
    /// `Σ a_j v_j` on the grid of `fields`.
    pub fn combine(&self, fields: &[ScalarField]) -> Result<ScalarField, NodalError> {
        let first = fields.first().ok_or(NodalError::NoFields)?;
        let mut values = vec![0.0; first.values().len()];
        for (c, f) in self.coefficients.iter().zip(fields) {
            first.check_grid(f)?;
            values.iter_mut().zip(f.values()).for_each(|(a, b)| *a += c * b);
        }
        Ok(ScalarField::new(*first.grid(), values)?)
    }
}

/// Least-squares null vector of the point conditions `v = v_x = v_y = 0`,
/// with values and derivatives from the trigonometric interpolants.
pub fn vanishing_fit(
    fields: &[ScalarField],
    points: &[Complex64],
    fit_tol: f64,
) -> Result<VanishingFit, NodalError> {
    let first = fields.first().ok_or(NodalError::NoFields)?;
    for f in fields {
        first.check_grid(f)?;
    }
    let n = fields.len();
    if 3 * points.len() > n {
        return Err(NodalError::TooManyPoints {
            points: points.len(),
            fields: n,
        });
    }
    let lattice = first.grid().lattice;
    for (i, p) in points.iter().enumerate() {
        let rp = lattice.reduce(*p);
        if points[..i].iter().any(|q| (lattice.reduce(*q) - rp).norm() < 1e-12) {
            return Err(NodalError::DuplicatePoint(i));
        }
    }
    let interps: Vec<TrigInterpolant> = fields.iter().map(TrigInterpolant::new).collect();
    // square system padded with zero rows so the SVD returns a full basis
    let rows = 3 * points.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (pi, &p) in points.iter().enumerate() {
        for (fi, interp) in interps.iter().enumerate() {
            let jet = interp.jet(p);
            a[(3 * pi, fi)] = jet.value;
            a[(3 * pi + 1, fi)] = jet.grad.0;
            a[(3 * pi + 2, fi)] = jet.grad.1;
        }
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let (imin, &smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("at least one field");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut coefficients: Vec<f64> = v_t.row(imin).iter().copied().collect();
    let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    let lead = coefficients
        .iter()
        .copied()
        .max_by(|x, y| x.abs().total_cmp(&y.abs()))
        .unwrap_or(1.0);
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    coefficients.iter_mut().for_each(|c| *c *= sign / norm);
    let image = &a * nalgebra::DVector::from_column_slice(&coefficients);
    let residual = image.rows(0, rows).iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    Ok(VanishingFit {
        points: points.iter().map(|p| [p.re, p.im]).collect(),
        coefficients,
        residual,
        basis_size: n,
        least_singular_value: smin,
        largest_singular_value: smax,
        no_exact_kernel: smin > fit_tol * smax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Grid, TorusLattice};
    use std::f64::consts::PI;

    fn fields(fs: &[fn(f64, f64) -> f64]) -> Vec<ScalarField> {
        let g = Grid::new(TorusLattice::square(2.0 * PI).unwrap(), 16, 16).unwrap();
        fs.iter().map(|f| ScalarField::from_fn(g, f).unwrap()).collect()
    }

    const ORIGIN: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn full_rank_conditions_have_no_kernel() {
        let f = fields(&[|x, _| x.sin(), |x, _| x.cos(), |_, y| y.sin()]);
        let fit = vanishing_fit(&f, &[ORIGIN], 1e-8).unwrap();
        assert!(fit.no_exact_kernel);
        assert!((fit.least_singular_value - 1.0).abs() < 1e-12);
        assert!(fit.residual > 0.5);
    }

    #[test]
    fn kernel_kills_value_and_gradient() {
        let f = fields(&[|x, _| x.sin(), |x, _| (2.0 * x).sin(), |_, y| y.sin(), |_, y| (2.0 * y).sin()]);
        let fit = vanishing_fit(&f, &[ORIGIN], 1e-8).unwrap();
        assert!(!fit.no_exact_kernel);
        assert!(fit.residual <= 1e-10);
        let c = &fit.coefficients;
        // the kernel is spanned by (2,−1,0,0) and (0,0,2,−1)
        assert!((c[0] + 2.0 * c[1]).abs() < 1e-10 && (c[2] + 2.0 * c[3]).abs() < 1e-10);
        let norm: f64 = c.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let v = fit.combine(&f).unwrap();
        assert!(v.at(0, 0).abs() < 1e-12);
    }

    #[test]
    fn odd_fields_vanish_at_the_origin() {
        let f = fields(&[|x, y| (x + y).sin(), |x, _| (2.0 * x).sin(), |x, y| (x - 2.0 * y).sin()]);
        let fit = vanishing_fit(&f, &[ORIGIN], 1e-8).unwrap();
        assert!(fit.residual <= 1e-10 && !fit.no_exact_kernel);
    }

    #[test]
    fn rejected_inputs() {
        let f = fields(&[|x, _| x.sin(), |x, _| x.cos()]);
        assert!(matches!(vanishing_fit(&f, &[ORIGIN], 1e-8), Err(NodalError::TooManyPoints { .. })));
        let f = fields(&[(|x, _| x.sin()) as fn(f64, f64) -> f64; 6]);
        let p = [ORIGIN, Complex64::new(2.0 * PI, 0.0)];
        assert!(matches!(vanishing_fit(&f, &p, 1e-8), Err(NodalError::DuplicatePoint(1))));
        assert!(matches!(vanishing_fit(&[], &[], 1e-8), Err(NodalError::NoFields)));
    }
}
