//! SVG rendering of a nodal graph over the fundamental domain.

use std::fmt::Write;

use num_complex::Complex64;

use super::NodalGraph;
use crate::field::ScalarField;

const WIDTH: f64 = 640.0;
const POSITIVE_FILL: &str = "#f4c7a1";
const NEGATIVE_FILL: &str = "#a9c8ec";

/// Fundamental parallelogram with cells shaded by sign, nodal curves in
/// black and vertices as red dots. Curves are drawn with their lattice
/// translates and clipped to the domain.
pub fn render_svg(graph: &NodalGraph, v: &ScalarField) -> String {
    let g = graph.grid;
    let (w1, w2) = (g.lattice.omega1, g.lattice.omega2);
    let corners = [Complex64::new(0.0, 0.0), w1, w1 + w2, w2];
    let min_x = corners.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    let max_x = corners.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    let min_y = corners.iter().map(|c| c.im).fold(f64::INFINITY, f64::min);
    let max_y = corners.iter().map(|c| c.im).fold(f64::NEG_INFINITY, f64::max);
    let scale = WIDTH / (max_x - min_x);
    let height = (max_y - min_y) * scale;
    let map = |z: Complex64| ((z.re - min_x) * scale, (max_y - z.im) * scale);
    let poly = |pts: &[Complex64]| {
        pts.iter()
            .map(|&z| {
                let (x, y) = map(z);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.3} {height:.3}">"#
    );
    let _ = writeln!(out, r#"<defs><clipPath id="domain"><polygon points="{}"/></clipPath></defs>"#, poly(&corners));
    let _ = writeln!(out, r#"<g clip-path="url(#domain)" stroke="none">"#);
    let thr = graph.tolerances.tol_zero * v.sup_norm();
    let (dx, dy) = (w1 / g.nx as f64, w2 / g.ny as f64);
    for k in 0..g.ny {
        for j in 0..g.nx {
            // cell centred on the node
            let c = g.point(j, k) - (dx + dy) * 0.5;
            let fill = if v.at(j, k) > -thr { POSITIVE_FILL } else { NEGATIVE_FILL };
            for shift in [Complex64::new(0.0, 0.0), w1, w2, w1 + w2] {
                let cell = [c, c + dx, c + dx + dy, c + dy].map(|z| z + shift);
                if shift.norm() == 0.0 || j == 0 || k == 0 {
                    let _ = writeln!(out, r#"<polygon points="{}" fill="{fill}"/>"#, poly(&cell));
                }
            }
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g clip-path="url(#domain)" fill="none" stroke="black" stroke-width="1.5">"#);
    let curves = graph
        .edges
        .iter()
        .map(|e| &e.points)
        .chain(graph.closed_loops.iter());
    for pts in curves {
        let z: Vec<Complex64> = pts.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        // bring the curve start into the domain, then draw neighbouring translates
        let base = g.lattice.reduce(z[0]) - z[0];
        for a in -2..=1 {
            for b in -2..=1 {
                let shift = base + w1 * a as f64 + w2 * b as f64;
                let moved: Vec<Complex64> = z.iter().map(|p| p + shift).collect();
                let _ = writeln!(out, r#"<polyline points="{}"/>"#, poly(&moved));
            }
        }
    }
    let _ = writeln!(out, "</g>");
    for vert in &graph.vertices {
        let (x, y) = map(Complex64::new(vert.position[0], vert.position[1]));
        let _ = writeln!(out, r##"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="#c0392b"/>"##);
    }
    let _ = writeln!(out, r#"<polygon points="{}" fill="none" stroke="gray"/>"#, poly(&corners));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Grid, TorusLattice};
    use crate::nodal::{extract_graph, NodalTolerances};
    use std::f64::consts::PI;

    #[test]
    fn svg_has_curves_and_vertices() {
        let g = Grid::new(TorusLattice::square(2.0 * PI).unwrap(), 16, 16).unwrap();
        let v = ScalarField::from_fn(g, |x, y| (x - 0.1).sin() * (y - 0.2).sin()).unwrap();
        let graph = extract_graph(&v, &NodalTolerances::default()).unwrap();
        let svg = render_svg(&graph, &v);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("<polyline").count(), 8 * 16);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
