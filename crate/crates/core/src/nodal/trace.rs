//! Marching-squares tracing of the zero set, vertex location by Newton's
//! method on the trigonometric interpolant, and assembly of the graph.

use num_complex::Complex64;
use serde::Serialize;

use super::{check_nondegenerate, DisjointSets, NodalCounts, NodalError, NodalTolerances};
use crate::field::ScalarField;
use crate::lattice::Grid;
use crate::spectral::{resample, Spectral, TrigInterpolant};

/// Excision radius around vertices, in cell sizes.
const VERTEX_RADIUS_CELLS: f64 = 2.5;
/// Cells whose smallest corner gradient is below this fraction of `‖∇v‖∞`
/// seed a vertex search.
const CANDIDATE_GRADIENT: f64 = 0.25;
const NEWTON_ITERS: usize = 40;
const CIRCLE_SAMPLES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex {
    pub position: [f64; 2],
    /// Number of edge ends meeting here (loop-edges count twice).
    pub degree: usize,
    pub value: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Unwrapped physical coordinates; reduce modulo the lattice to plot.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalGraph {
    pub grid: Grid,
    pub tolerances: NodalTolerances,
    pub excision_radius: f64,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub closed_loops: Vec<Vec<[f64; 2]>>,
    pub faces: usize,
    /// Vertices whose degree is odd or below four.
    pub degree_violations: Vec<usize>,
}

impl NodalGraph {
    pub fn counts(&self) -> NodalCounts {
        NodalCounts {
            faces: self.faces,
            edges: self.edges.len() + self.closed_loops.len(),
            vertices: self.vertices.len(),
            loops: self.closed_loops.len(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }
}

/// Periodic geometry helpers in physical coordinates.
struct Torus {
    grid: Grid,
}

impl Torus {
    /// Shortest displacement from `b` to `a` on the torus.
    fn displacement(&self, a: Complex64, b: Complex64) -> Complex64 {
        let l = &self.grid.lattice;
        let (s, t) = l.to_logical(a - b);
        let (s, t) = (s - s.round(), t - t.round());
        let mut best = l.from_logical(s, t);
        for ds in -1..=1 {
            for dt in -1..=1 {
                let d = l.from_logical(s + ds as f64, t + dt as f64);
                if d.norm() < best.norm() {
                    best = d;
                }
            }
        }
        best
    }

    fn distance(&self, a: Complex64, b: Complex64) -> f64 {
        self.displacement(a, b).norm()
    }

    fn cell_size(&self) -> f64 {
        let g = &self.grid;
        (g.lattice.omega1.norm() / g.nx as f64).max(g.lattice.omega2.norm() / g.ny as f64)
    }

    fn logical_to_physical(&self, s: f64, t: f64) -> Complex64 {
        self.grid.lattice.from_logical(s, t)
    }
}

/// A zero of `v` on a grid edge. Horizontal edges join `(j,k)`–`(j+1,k)`.
#[derive(Clone, Copy)]
struct Crossing {
    s: f64,
    t: f64,
}

struct Segment {
    a: usize,
    b: usize,
}

fn unit_logical(g: &Grid, j: f64, k: f64) -> (f64, f64) {
    (j / g.nx as f64, k / g.ny as f64)
}

/// Extracts the nodal graph of `v`.
pub fn extract_graph(v: &ScalarField, tol: &NodalTolerances) -> Result<NodalGraph, NodalError> {
    let sup = check_nondegenerate(v)?;
    let g = *v.grid();
    let thr = tol.tol_zero * sup;
    let torus = Torus { grid: g };
    let h = torus.cell_size();
    let radius = VERTEX_RADIUS_CELLS * h;
    let vals = v.values();
    let positive: Vec<bool> = vals.iter().map(|&x| x > -thr).collect();

    let (gx, gy) = Spectral::new(g).gradient(v);
    let grad_norm: Vec<f64> = gx.values().iter().zip(gy.values()).map(|(a, b)| a.hypot(*b)).collect();
    let grad_sup = grad_norm.iter().cloned().fold(0.0, f64::max);
    let interp = TrigInterpolant::new(v);

    let corners = |j: usize, k: usize| {
        let (j1, k1) = ((j + 1) % g.nx, (k + 1) % g.ny);
        [g.index(j, k), g.index(j1, k), g.index(j1, k1), g.index(j, k1)]
    };

    // vertices
    let mut centers: Vec<Complex64> = Vec::new();
    for k in 0..g.ny {
        for j in 0..g.nx {
            let c = corners(j, k);
            let n_pos = c.iter().filter(|&&i| positive[i]).count();
            if n_pos == 0 || n_pos == 4 {
                continue;
            }
            let min_grad = c.iter().map(|&i| grad_norm[i]).fold(f64::INFINITY, f64::min);
            if min_grad > CANDIDATE_GRADIENT * grad_sup {
                continue;
            }
            let (s, t) = unit_logical(&g, j as f64 + 0.5, k as f64 + 0.5);
            let start = torus.logical_to_physical(s, t);
            // a singular zero is a vertex wherever Newton lands; wedges thinner
            // than a cell can hide its own cell from the candidate scan
            let Some(p) = newton_critical_point(&interp, start, h) else {
                continue;
            };
            let jet = interp.jet(p);
            let gn = jet.grad.0.hypot(jet.grad.1);
            if jet.value.abs() > thr || gn > tol.tol_vertex * grad_sup {
                continue;
            }
            let p = g.lattice.reduce(p);
            if centers.iter().all(|&q| torus.distance(p, q) > h) {
                centers.push(p);
            }
        }
    }
    for (a, &p) in centers.iter().enumerate() {
        for &q in &centers[a + 1..] {
            if torus.distance(p, q) <= 2.0 * radius {
                return Err(ambiguous(&g, &[p, q], "vertices closer than the excision diameter"));
            }
        }
    }
    let inside_vertex = |z: Complex64| centers.iter().position(|&p| torus.distance(z, p) < radius);
    let node_inside: Vec<bool> = (0..g.len())
        .map(|i| inside_vertex(g.point(i % g.nx, i / g.nx)).is_some())
        .collect();

    // marching squares
    let n = g.len();
    let mut crossing: Vec<Option<Crossing>> = vec![None; 2 * n];
    let mut crossing_at = |id: usize, j: usize, k: usize| -> usize {
        if crossing[id].is_none() {
            let (a, b, dj, dk) = if id < n {
                (g.index(j, k), g.index((j + 1) % g.nx, k), 1.0, 0.0)
            } else {
                (g.index(j, k), g.index(j, (k + 1) % g.ny), 0.0, 1.0)
            };
            let frac = (vals[a] / (vals[a] - vals[b])).clamp(0.0, 1.0);
            let (s, t) = unit_logical(&g, j as f64 + frac * dj, k as f64 + frac * dk);
            crossing[id] = Some(Crossing { s, t });
        }
        id
    };
    let mut segments: Vec<Segment> = Vec::new();
    let mut ambiguous_cells = Vec::new();
    for k in 0..g.ny {
        for j in 0..g.nx {
            let c = corners(j, k);
            let b = c.map(|i| positive[i]);
            let bottom = || (g.index(j, k), j, k);
            let right = || (n + g.index((j + 1) % g.nx, k), (j + 1) % g.nx, k);
            let top = || (g.index(j, (k + 1) % g.ny), j, (k + 1) % g.ny);
            let left = || (n + g.index(j, k), j, k);
            let mut cut = Vec::with_capacity(4);
            if b[0] != b[1] {
                cut.push(bottom());
            }
            if b[1] != b[2] {
                cut.push(right());
            }
            if b[3] != b[2] {
                cut.push(top());
            }
            if b[0] != b[3] {
                cut.push(left());
            }
            let pairs: Vec<((usize, usize, usize), (usize, usize, usize))> = match cut.len() {
                0 => Vec::new(),
                2 => vec![(cut[0], cut[1])],
                _ => {
                    let center = 0.25 * c.iter().map(|&i| vals[i]).sum::<f64>();
                    let in_disk = c.iter().any(|&i| node_inside[i]);
                    if center.abs() <= thr && !in_disk {
                        ambiguous_cells.push((j, k));
                    }
                    if (center > -thr) == b[0] {
                        // corners 0 and 2 joined; cut off corners 1 and 3
                        vec![(bottom(), right()), (top(), left())]
                    } else {
                        vec![(left(), bottom()), (right(), top())]
                    }
                }
            };
            for (p, q) in pairs {
                let a = crossing_at(p.0, p.1, p.2);
                let b = crossing_at(q.0, q.1, q.2);
                segments.push(Segment { a, b });
            }
        }
    }
    if !ambiguous_cells.is_empty() {
        return Err(NodalError::AmbiguousTopology {
            reason: "saddle cells with cell-centre value at tolerance".into(),
            cells: ambiguous_cells,
        });
    }

    // faces, checked for stability under spectral refinement
    let faces = count_faces(v, thr, &centers, radius)?;
    let fine = resample(v, 2 * g.nx, 2 * g.ny)?;
    let fine_faces = count_faces(&fine, thr, &centers, radius)?;
    if fine_faces != faces {
        return Err(ambiguous(
            &g,
            &centers,
            &format!("{faces} faces, {fine_faces} on the 2x refined grid; a neck or wedge is under-resolved"),
        ));
    }

    // trace cycles of segments
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    for (si, s) in segments.iter().enumerate() {
        incident[s.a].push(si);
        incident[s.b].push(si);
    }
    if let Some(bad) = incident.iter().position(|l| !l.is_empty() && l.len() != 2) {
        let (j, k) = ((bad % n) % g.nx, (bad % n) / g.nx);
        return Err(ambiguous_cell(j, k, "contour branches at a grid edge"));
    }
    let position = |id: usize| crossing[id].expect("crossing recorded");
    let mut used = vec![false; segments.len()];
    let mut vertices: Vec<Vertex> = centers
        .iter()
        .map(|&p| {
            let jet = interp.jet(p);
            Vertex {
                position: [p.re, p.im],
                degree: 0,
                value: jet.value,
                gradient_norm: jet.grad.0.hypot(jet.grad.1),
            }
        })
        .collect();
    let mut edges = Vec::new();
    let mut closed_loops = Vec::new();
    for s0 in 0..segments.len() {
        if used[s0] {
            continue;
        }
        // walk the cycle starting with segment s0 oriented a -> b
        let mut ids = vec![segments[s0].a];
        let (mut cur_seg, mut cur) = (s0, segments[s0].b);
        loop {
            used[cur_seg] = true;
            if cur == ids[0] {
                break;
            }
            ids.push(cur);
            let next = incident[cur].iter().copied().find(|&x| x != cur_seg).expect("two incidences");
            let s = &segments[next];
            cur = if s.a == cur { s.b } else { s.a };
            cur_seg = next;
        }
        // unwrapped logical coordinates along the cycle, closing point appended
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(ids.len() + 1);
        for &id in ids.iter().chain(std::iter::once(&ids[0])) {
            let c = position(id);
            let (s, t) = match pts.last() {
                None => (c.s, c.t),
                Some(&(ps, pt)) => (ps + wrap_half(c.s - ps), pt + wrap_half(c.t - pt)),
            };
            pts.push((s, t));
        }
        let phys: Vec<Complex64> = pts.iter().map(|&(s, t)| torus.logical_to_physical(s, t)).collect();
        let owner: Vec<Option<usize>> = (0..ids.len())
            .map(|i| inside_vertex((phys[i] + phys[i + 1]) * 0.5))
            .collect();
        let as_xy = |z: &Complex64| [z.re, z.im];
        let Some(first_in) = owner.iter().position(Option::is_some) else {
            closed_loops.push(phys.iter().map(as_xy).collect());
            continue;
        };
        let len = ids.len();
        let mut i = 0;
        while i < len {
            let idx = (first_in + i) % len;
            if owner[idx].is_some() {
                i += 1;
                continue;
            }
            let from = owner[(idx + len - 1) % len].expect("run starts after a disk segment");
            let mut run = vec![idx];
            i += 1;
            while owner[(first_in + i) % len].is_none() {
                run.push((first_in + i) % len);
                i += 1;
            }
            let to = owner[(first_in + i) % len].expect("run ends before a disk segment");
            // segment r joins points r and r+1 of the unwrapped sequence
            let mut points = Vec::with_capacity(run.len() + 1);
            let mut shift = Complex64::new(0.0, 0.0);
            for (q, &r) in run.iter().enumerate() {
                if q > 0 && r == 0 {
                    // crossed the closing point: keep coordinates continuous
                    shift = phys[len] - phys[0];
                }
                points.push(as_xy(&(phys[r] + shift)));
            }
            let last = *run.last().expect("non-empty run");
            points.push(as_xy(&(phys[last + 1] + shift)));
            vertices[from].degree += 1;
            vertices[to].degree += 1;
            edges.push(Edge { from, to, points });
        }
    }

    // cross-check ends against sign changes on the excision circle
    for vert in &vertices {
        let p = Complex64::new(vert.position[0], vert.position[1]);
        let changes = circle_sign_changes(&interp, p, radius, thr);
        if changes != vert.degree {
            return Err(ambiguous(
                &g,
                &[p],
                &format!("{} edge ends but {changes} sign changes around a vertex", vert.degree),
            ));
        }
    }
    let degree_violations = vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| v.degree % 2 == 1 || v.degree < 4)
        .map(|(i, _)| i)
        .collect();
    Ok(NodalGraph {
        grid: g,
        tolerances: *tol,
        excision_radius: radius,
        vertices,
        edges,
        closed_loops,
        faces,
        degree_violations,
    })
}

/// Sign components of the nodes outside the vertex disks, joined along grid
/// edges and across saddle cells by the diagonal the cell centre selects.
fn count_faces(v: &ScalarField, thr: f64, centers: &[Complex64], radius: f64) -> Result<usize, NodalError> {
    let g = *v.grid();
    let torus = Torus { grid: g };
    let vals = v.values();
    let n = g.len();
    let positive: Vec<bool> = vals.iter().map(|&x| x > -thr).collect();
    let outside: Vec<bool> = (0..n)
        .map(|i| {
            let z = g.point(i % g.nx, i / g.nx);
            centers.iter().all(|&p| torus.distance(z, p) >= radius)
        })
        .collect();
    let mut sets = DisjointSets::new(n);
    let mut diagonal_links = Vec::new();
    for k in 0..g.ny {
        for j in 0..g.nx {
            let (j1, k1) = ((j + 1) % g.nx, (k + 1) % g.ny);
            let c = [g.index(j, k), g.index(j1, k), g.index(j1, k1), g.index(j, k1)];
            for nb in [c[1], c[3]] {
                if outside[c[0]] && outside[nb] && positive[c[0]] == positive[nb] {
                    sets.union(c[0], nb);
                }
            }
            let saddle = positive[c[0]] == positive[c[2]]
                && positive[c[1]] == positive[c[3]]
                && positive[c[0]] != positive[c[1]];
            if saddle && c.iter().all(|&i| outside[i]) {
                let center = 0.25 * c.iter().map(|&i| vals[i]).sum::<f64>();
                if (center > -thr) == positive[c[0]] {
                    diagonal_links.push((c[0], c[2]));
                } else {
                    diagonal_links.push((c[1], c[3]));
                }
            }
        }
    }
    let members = || (0..n).filter(|&i| outside[i]);
    let four_connected = sets.count_roots(members());
    for &(a, b) in &diagonal_links {
        sets.union(a, b);
    }
    let faces = sets.count_roots(members());
    if faces != four_connected {
        let cells: Vec<(usize, usize)> = diagonal_links.iter().map(|&(a, _)| (a % g.nx, a / g.nx)).collect();
        return Err(NodalError::AmbiguousTopology {
            reason: format!(
                "sign regions joined only across saddle cells ({four_connected} faces by edges, {faces} with diagonals)"
            ),
            cells,
        });
    }
    Ok(faces)
}

fn wrap_half(d: f64) -> f64 {
    d - d.round()
}

fn ambiguous_cell(j: usize, k: usize, reason: &str) -> NodalError {
    NodalError::AmbiguousTopology {
        reason: reason.into(),
        cells: vec![(j, k)],
    }
}

fn ambiguous(g: &Grid, points: &[Complex64], reason: &str) -> NodalError {
    let cells = points
        .iter()
        .map(|&p| {
            let (s, t) = g.lattice.to_logical(g.lattice.reduce(p));
            (
                ((s * g.nx as f64).floor() as usize).min(g.nx - 1),
                ((t * g.ny as f64).floor() as usize).min(g.ny - 1),
            )
        })
        .collect();
    NodalError::AmbiguousTopology {
        reason: reason.into(),
        cells,
    }
}

/// Newton's method for `∇v = 0`, steps capped at one cell.
fn newton_critical_point(interp: &TrigInterpolant, start: Complex64, h: f64) -> Option<Complex64> {
    let mut p = start;
    for _ in 0..NEWTON_ITERS {
        let jet = interp.jet(p);
        let [[a, b], [_, d]] = jet.hess;
        let det = a * d - b * b;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let (gx, gy) = jet.grad;
        let mut step = Complex64::new((d * gx - b * gy) / det, (a * gy - b * gx) / det);
        if step.norm() > h {
            step *= h / step.norm();
        }
        p -= step;
        if step.norm() < 1e-13 * h {
            return Some(p);
        }
    }
    None
}

fn circle_sign_changes(interp: &TrigInterpolant, p: Complex64, radius: f64, thr: f64) -> usize {
    let signs: Vec<bool> = (0..CIRCLE_SAMPLES)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / CIRCLE_SAMPLES as f64;
            interp.value(p + Complex64::from_polar(radius, th)) > -thr
        })
        .collect();
    (0..CIRCLE_SAMPLES)
        .filter(|&i| signs[i] != signs[(i + 1) % CIRCLE_SAMPLES])
        .count()
}
