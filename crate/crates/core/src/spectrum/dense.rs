//! Lowest eigenpairs of a dense symmetric matrix.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};

/// Eigenvalues (ascending) and unit eigenvectors of the `count` smallest
/// eigenpairs of the symmetric row-major `n×n` matrix `a`. Runs sequentially
/// so that repeated runs are bit-identical.
pub fn lowest_eigenpairs(a: &[f64], n: usize, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    assert_eq!(a.len(), n * n);
    let count = count.min(n);
    if count == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let mut u = Mat::<f64>::zeros(n, n);
    let mut s = Diag::<f64>::zeros(n);
    let scratch = self_adjoint_evd_scratch::<f64>(n, ComputeEigenvectors::Yes, Par::Seq, Default::default());
    self_adjoint_evd(
        m.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|e| format!("{e:?}"))?;
    let s = s.column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]).then(x.cmp(&y)));
    let values = order[..count].iter().map(|&k| s[k]).collect();
    let vectors = order[..count]
        .iter()
        .map(|&k| (0..n).map(|i| u[(i, k)]).collect())
        .collect();
    Ok((values, vectors))
}
