//! Nodal sets as graphs-with-loops, nodal domain counts, the Euler and
//! Courant checks, and the vanishing fit for Jacobi field combinations.

mod fit;
mod svg;
mod trace;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Section};
use crate::field::{FieldError, ScalarField};
use crate::spectral::{resample, Spectral};
use crate::spectrum::SpectrumReport;

pub use fit::{vanishing_fit, VanishingFit};
pub use svg::render_svg;
pub use trace::{extract_graph, Edge, NodalGraph, Vertex};

/// Fields with `‖v‖∞` at or below this are treated as identically zero.
pub const DEGENERATE_SUP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NodalError {
    #[error("field is numerically zero (sup norm {sup:e}); no nodal set to extract")]
    DegenerateField { sup: f64 },
    #[error("ambiguous nodal topology ({reason}) in cells {cells:?}; refine the grid or adjust tol_zero/tol_vertex")]
    AmbiguousTopology {
        reason: String,
        cells: Vec<(usize, usize)>,
    },
    #[error("{points} points impose {} conditions but only {fields} fields are given", 3 * points)]
    TooManyPoints { points: usize, fields: usize },
    #[error("fit point {0} duplicates an earlier point")]
    DuplicatePoint(usize),
    #[error("no fields to fit")]
    NoFields,
    #[error("spectrum report carries no eigenfields")]
    MissingEigenfields,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Relative tolerances: `tol_zero·‖v‖∞` for values, `tol_vertex·‖∇v‖∞` for gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodalTolerances {
    pub tol_zero: f64,
    pub tol_vertex: f64,
}

impl Default for NodalTolerances {
    fn default() -> Self {
        Self {
            tol_zero: 1e-6,
            tol_vertex: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalConfig {
    pub tolerances: NodalTolerances,
    /// Relative least singular value above which a fit is flagged inexact.
    pub fit_tol: f64,
    /// Random combinations tested per degenerate cluster.
    pub combinations: usize,
    pub seed: u64,
}

impl Default for NodalConfig {
    fn default() -> Self {
        Self {
            tolerances: NodalTolerances::default(),
            fit_tol: 1e-8,
            combinations: 20,
            seed: 20_231,
        }
    }
}

pub const NODAL_KEYS: &[&str] = &["tol_zero", "tol_vertex", "fit_tol", "combinations", "seed"];

impl NodalConfig {
    pub fn from_section(s: &Section) -> Result<Self, ConfigError> {
        s.reject_unknown(NODAL_KEYS)?;
        let d = Self::default();
        Ok(Self {
            tolerances: NodalTolerances {
                tol_zero: s.positive("tol_zero", d.tolerances.tol_zero)?,
                tol_vertex: s.positive("tol_vertex", d.tolerances.tol_vertex)?,
            },
            fit_tol: s.positive("fit_tol", d.fit_tol)?,
            combinations: s.get_or("combinations", d.combinations)?,
            seed: s.get_or("seed", d.seed)?,
        })
    }
}

/// Minimal union-find with path halving.
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Number of distinct roots among `members`.
    pub(crate) fn count_roots(&mut self, members: impl Iterator<Item = usize>) -> usize {
        let mut roots: Vec<usize> = members.map(|i| self.find(i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

fn check_nondegenerate(v: &ScalarField) -> Result<f64, NodalError> {
    let sup = v.sup_norm();
    if !(sup > DEGENERATE_SUP) {
        return Err(NodalError::DegenerateField { sup });
    }
    Ok(sup)
}

/// Trigonometric interpolant of one grid line, in units of the grid step.
struct LineInterpolant {
    n: usize,
    /// `c_p` for `p = 0..=n/2`.
    coeffs: Vec<Complex64>,
    /// Bound on `|dv/dt|` per grid step.
    slope: f64,
}

impl LineInterpolant {
    fn new(samples: &[f64], fft: &dyn Fft<f64>) -> Self {
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft.process(&mut buf);
        let coeffs: Vec<Complex64> = buf[..=n / 2].iter().map(|c| c / n as f64).collect();
        let slope = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(p, c)| Self::weight(n, p) * c.norm() * 2.0 * PI * p as f64 / n as f64)
            .sum();
        Self { n, coeffs, slope }
    }

    fn weight(n: usize, p: usize) -> f64 {
        if p == 0 || 2 * p == n {
            1.0
        } else {
            2.0
        }
    }

    /// Value at fractional grid position `t`.
    fn value(&self, t: f64) -> f64 {
        let step = Complex64::from_polar(1.0, 2.0 * PI * t / self.n as f64);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut sum = 0.0;
        for (p, c) in self.coeffs.iter().enumerate() {
            sum += if 2 * p == self.n {
                c.re * phase.re
            } else {
                Self::weight(self.n, p) * (c * phase).re
            };
            phase *= step;
        }
        sum
    }

    /// Whether the interpolant keeps the sign of `a = v(t0)` and `b = v(t0+1)`,
    /// staying above `thr` in magnitude, between the two samples.
    fn keeps_sign(&self, t0: f64, a: f64, b: f64, thr: f64) -> bool {
        if a.abs() + b.abs() > self.slope + 2.0 * thr {
            return true;
        }
        let s = a.signum();
        (1..EDGE_SAMPLES).all(|i| s * self.value(t0 + i as f64 / EDGE_SAMPLES as f64) > thr)
    }
}

const EDGE_SAMPLES: usize = 16;

/// Components of `{|v| > tol_zero·‖v‖∞}` of the trigonometric interpolant,
/// counted on a spectrally refined copy of the grid under periodic
/// 4-connectivity.
///
/// Neighbours of equal sign are joined only if the interpolant along the grid
/// line between them keeps that sign, so opposite wedges at a crossing stay
/// apart. A component counts only if some node has `|v|` above `h` times the
/// largest `|∇v|` on its 3×3 block, i.e. lies about a refined cell or more
/// from the zero set; slivers thinner than that (the tips of narrow wedges)
/// are below resolution and belong to a neighbouring counted component.
pub fn count_nodal_domains(v: &ScalarField, tol_zero: f64) -> Result<usize, NodalError> {
    let sup = check_nondegenerate(v)?;
    let g = *v.grid();
    let factor = (1..=DOMAIN_REFINEMENT)
        .rev()
        .find(|f| f * f * g.len() <= MAX_REFINED_NODES)
        .unwrap_or(1);
    let fine = resample(v, factor * g.nx, factor * g.ny)?;
    Ok(count_resolved_components(&fine, tol_zero * sup))
}

/// Linear refinement of the grid used for domain counting.
pub const DOMAIN_REFINEMENT: usize = 4;
const MAX_REFINED_NODES: usize = 1 << 20;

fn count_resolved_components(v: &ScalarField, thr: f64) -> usize {
    let g = *v.grid();
    let vals = v.values();
    let active = |i: usize| vals[i].abs() > thr;
    let mut planner = FftPlanner::new();
    let (fx, fy) = (planner.plan_fft_forward(g.nx), planner.plan_fft_forward(g.ny));
    let rows: Vec<LineInterpolant> = (0..g.ny)
        .map(|k| LineInterpolant::new(&vals[k * g.nx..(k + 1) * g.nx], fx.as_ref()))
        .collect();
    let cols: Vec<LineInterpolant> = (0..g.nx)
        .map(|j| {
            let column: Vec<f64> = (0..g.ny).map(|k| vals[g.index(j, k)]).collect();
            LineInterpolant::new(&column, fy.as_ref())
        })
        .collect();
    let mut sets = DisjointSets::new(g.len());
    for k in 0..g.ny {
        for j in 0..g.nx {
            let i = g.index(j, k);
            if !active(i) {
                continue;
            }
            let right = g.index((j + 1) % g.nx, k);
            let up = g.index(j, (k + 1) % g.ny);
            for (n, line, t0) in [(right, &rows[k], j), (up, &cols[j], k)] {
                let same_sign = active(n) && (vals[i] > 0.0) == (vals[n] > 0.0);
                if same_sign && line.keeps_sign(t0 as f64, vals[i], vals[n], thr) {
                    sets.union(i, n);
                }
            }
        }
    }
    let (gx, gy) = Spectral::new(g).gradient(v);
    let grad: Vec<f64> = gx.values().iter().zip(gy.values()).map(|(a, b)| a.hypot(*b)).collect();
    let h = (g.lattice.omega1.norm() / g.nx as f64).max(g.lattice.omega2.norm() / g.ny as f64);
    let resolved = |i: usize| {
        let (j, k) = ((i % g.nx) as isize, (i / g.nx) as isize);
        let local = (-1..=1)
            .flat_map(|dk| (-1..=1).map(move |dj| (dj, dk)))
            .map(|(dj, dk)| grad[g.wrap_index(j + dj, k + dk)])
            .fold(0.0f64, f64::max);
        active(i) && vals[i].abs() > h * local
    };
    let mut counted: Vec<usize> = (0..g.len()).filter(|&i| resolved(i)).map(|i| sets.find(i)).collect();
    counted.sort_unstable();
    counted.dedup();
    counted.len()
}

/// Face, edge, vertex and closed-loop counts of a graph-with-loops.
/// `edges` includes the closed loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodalCounts {
    pub faces: usize,
    pub edges: usize,
    pub vertices: usize,
    pub loops: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EulerCheck {
    pub lhs: i64,
    pub rhs: i64,
    /// Raw comparison `lhs ≥ rhs`, reported even when not applicable.
    pub holds: bool,
    /// The inequality is only claimed when there is at least one vertex.
    pub applicable: bool,
}

impl EulerCheck {
    pub fn label(&self) -> &'static str {
        match (self.applicable, self.holds) {
            (false, _) => "lemma-not-applicable",
            (true, true) => "holds",
            (true, false) => "violated",
        }
    }
}

/// `ℱ − ℰ + 𝒱` against `χ(M) = 2 − 2·genus`.
pub fn euler_check(counts: &NodalCounts, genus: u32) -> EulerCheck {
    let lhs = counts.faces as i64 - counts.edges as i64 + counts.vertices as i64;
    let rhs = 2 - 2 * genus as i64;
    EulerCheck {
        lhs,
        rhs,
        holds: lhs >= rhs,
        applicable: counts.vertices >= 1,
    }
}

/// The counting chain from forced vertices to a lower bound on faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FaceChain {
    pub vertices_required: usize,
    /// `𝒱 ≥ m·points`.
    pub enough_vertices: bool,
    /// `ℱ ≥ ℰ − 𝒱` (Euler on the torus).
    pub faces_vs_edges: bool,
    /// `ℰ ≥ 2𝒱`.
    pub edges_vs_vertices: bool,
    /// `ℱ ≥ m·points`.
    pub faces_bound: bool,
}

impl NodalCounts {
    /// Checks the chain for a fit through `points` zeros replicated `m` times.
    /// `faces_bound` must hold whenever the three premises do.
    pub fn face_chain(&self, points: usize, m: u32) -> FaceChain {
        let required = points * m as usize;
        FaceChain {
            vertices_required: required,
            enough_vertices: self.vertices >= required,
            faces_vs_edges: self.faces as i64 >= self.edges as i64 - self.vertices as i64,
            edges_vs_vertices: self.edges >= 2 * self.vertices,
            faces_bound: self.faces >= required,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CourantRow {
    /// 1-based position of the eigenvalue (first of the cluster for combinations).
    pub j: usize,
    /// Trial number for random in-cluster combinations, `None` for eigenfields.
    pub combination: Option<usize>,
    pub domains: usize,
    pub bound: usize,
    pub ok: bool,
}

/// Maximal runs of eigenvalues within `tol` of the run's first value.
pub fn clusters(eigenvalues: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=eigenvalues.len() {
        if i == eigenvalues.len() || (eigenvalues[i] - eigenvalues[start]).abs() > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Nodal domain counts of eigenfields against their position, plus random
/// unit combinations inside each degenerate cluster against the cluster start.
pub fn courant_check(
    report: &SpectrumReport,
    tol_zero: f64,
    combinations: usize,
    seed: u64,
) -> Result<Vec<CourantRow>, NodalError> {
    let fields = &report.eigenfields;
    if fields.len() < report.eigenvalues.len() || fields.is_empty() {
        return Err(NodalError::MissingEigenfields);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for cluster in clusters(&report.eigenvalues, report.zero_tol) {
        let bound = cluster.start + 1;
        for idx in cluster.clone() {
            let domains = count_nodal_domains(&fields[idx], tol_zero)?;
            rows.push(CourantRow {
                j: idx + 1,
                combination: None,
                domains,
                bound,
                ok: domains <= bound,
            });
        }
        if cluster.len() < 2 {
            continue;
        }
        for trial in 0..combinations {
            let mut coeffs: Vec<f64> = cluster.clone().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            coeffs.iter_mut().for_each(|c| *c /= norm);
            let mut values = vec![0.0; fields[0].values().len()];
            for (c, f) in coeffs.iter().zip(&fields[cluster.clone()]) {
                values.iter_mut().zip(f.values()).for_each(|(a, b)| *a += c * b);
            }
            let combo = ScalarField::new(*fields[0].grid(), values)?;
            let domains = count_nodal_domains(&combo, tol_zero)?;
            rows.push(CourantRow {
                j: bound,
                combination: Some(trial),
                domains,
                bound,
                ok: domains <= bound,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Grid, TorusLattice};
    use crate::spectrum::{eigen, JacobiOperator};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(TorusLattice::square(2.0 * PI).unwrap(), n, n).unwrap()
    }

    #[test]
    fn domain_counts_of_simple_fields() {
        let g = grid(32);
        let count = |f: fn(f64, f64) -> f64| count_nodal_domains(&ScalarField::from_fn(g, f).unwrap(), 1e-6).unwrap();
        assert_eq!(count(|_, _| 2.5), 1);
        assert_eq!(count(|x, _| x.sin()), 2);
        assert_eq!(count(|x, y| x.sin() * y.sin()), 4);
        assert_eq!(count(|x, y| (2.0 * x).cos() * (3.0 * y).sin()), 24);
        let zero = ScalarField::zeros(g);
        assert!(matches!(count_nodal_domains(&zero, 1e-6), Err(NodalError::DegenerateField { .. })));
    }

    #[test]
    fn euler_examples() {
        let torus = NodalCounts { faces: 4, edges: 8, vertices: 4, loops: 0 };
        let c = euler_check(&torus, 1);
        assert_eq!((c.lhs, c.rhs, c.holds, c.label()), (0, 0, true, "holds"));
        // one closed loop on the sphere
        let single = NodalCounts { faces: 2, edges: 1, vertices: 0, loops: 1 };
        let c = euler_check(&single, 0);
        assert_eq!((c.lhs, c.rhs, c.holds), (1, 2, false));
        assert_eq!(c.label(), "lemma-not-applicable");
        // loop-edge at a vertex plus a disjoint closed loop on the sphere
        let annular = NodalCounts { faces: 3, edges: 2, vertices: 1, loops: 1 };
        let c = euler_check(&annular, 0);
        assert_eq!((c.lhs, c.rhs, c.holds, c.applicable), (2, 2, true, true));
    }

    #[test]
    fn face_chain_arithmetic() {
        let c = NodalCounts { faces: 4, edges: 8, vertices: 4, loops: 0 }.face_chain(2, 2);
        assert!(c.enough_vertices && c.faces_vs_edges && c.edges_vs_vertices && c.faces_bound);
        let c = NodalCounts { faces: 2, edges: 2, vertices: 1, loops: 0 }.face_chain(1, 3);
        assert!(!c.enough_vertices);
    }

    #[test]
    fn cluster_runs() {
        let r = clusters(&[-1.0, -0.75, -0.75 + 1e-12, -0.75, -0.5, 0.0], 1e-9);
        assert_eq!(r, vec![0..1, 1..4, 4..5, 5..6]);
    }

    #[test]
    fn courant_on_flat_operator() {
        let g = grid(16);
        let op = JacobiOperator::new(ScalarField::zeros(g));
        let report = eigen(&op, 30, op.default_zero_tol()).unwrap();
        let rows = courant_check(&report, 1e-6, 20, 1).unwrap();
        assert!(rows.iter().all(|r| r.ok), "{rows:?}");
        assert_eq!(rows[0].domains, 1);
        // the λ = −3/4 cluster occupies positions 2..5
        let combos: Vec<_> = rows.iter().filter(|r| r.combination.is_some() && r.j == 2).collect();
        assert_eq!(combos.len(), 20);
        assert!(combos.iter().all(|r| r.domains == 2));
    }

    #[test]
    fn nodal_config_keys() {
        let mut s = Section::new("nodal");
        s.insert("tol_zero", "1e-7");
        s.insert("seed", "9");
        let c = NodalConfig::from_section(&s).unwrap();
        assert_eq!(c.tolerances.tol_zero, 1e-7);
        assert_eq!(c.seed, 9);
        s.insert("bogus", "1");
        assert!(NodalConfig::from_section(&s).is_err());
    }
}
