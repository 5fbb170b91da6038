//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the lines always reach the terminal.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cmc_index::bounds::{flpp_area_lower, table_csv, thm1_bound, thm2_bound};
use cmc_index::field::ScalarField;
use cmc_index::hierarchy::{recursion, DiffPoly, GaussianRational};
use cmc_index::lattice::{Grid, TorusLattice};
use cmc_index::nodal::{
    count_nodal_domains, courant_check, euler_check, extract_graph, NodalCounts, NodalTolerances,
};
use cmc_index::sinh_gordon::{solve, solve_oned_branch, SolveConfig};
use cmc_index::spectrum::{eigen, intrinsic_second_variation, second_variation, JacobiOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn square(n: usize) -> Grid {
    Grid::new(TorusLattice::square(2.0 * PI).unwrap(), n, n).unwrap()
}

fn q(num: i64, den: i64) -> GaussianRational {
    GaussianRational::real(num, den)
}

fn term(c: GaussianRational, factors: &[u32]) -> DiffPoly {
    DiffPoly::monomial(c, factors.to_vec())
}

fn sum(terms: &[DiffPoly]) -> DiffPoly {
    terms.iter().fold(DiffPoly::zero(), |acc, t| &acc + t)
}

fn rho_closed_forms() -> Outcome {
    let h = recursion(6).map_err(|e| e.to_string())?;
    let expected = [
        (2, sum(&[term(q(-1, 1), &[1])])),
        (4, sum(&[term(q(-1, 2), &[1, 1, 1]), term(q(1, 1), &[3])])),
        (
            6,
            sum(&[
                term(q(-3, 8), &[1, 1, 1, 1, 1]),
                term(q(5, 2), &[1, 2, 2]),
                term(q(5, 2), &[1, 1, 3]),
                term(q(-1, 1), &[5]),
            ]),
        ),
    ];
    for (j, want) in &expected {
        let got = h.rho(*j).ok_or(format!("rho{j} missing"))?;
        ensure(got == want, || format!("rho{j} = {got}, expected {want}"))?;
    }
    Ok("rho2, rho4, rho6 equal term by term".into())
}

fn rho_weights() -> Outcome {
    let h = recursion(12).map_err(|e| e.to_string())?;
    let mut terms = 0;
    for (j, rho) in h.rhos() {
        for m in rho.terms() {
            ensure(m.weight() == j - 1, || format!("rho{j}: monomial {:?} has weight {}", m.factors, m.weight()))?;
            terms += 1;
        }
    }
    let dump = h.dump();
    ensure(dump == golden("rho.txt"), || "dump differs from the sympy golden file".into())?;
    Ok(format!("{terms} monomials in rho2..rho12, all of weight j-1; matches golden"))
}

/// `¼(j² + k²) − 1` over integer modes, ascending.
fn flat_oracle(count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (-20i64..=20)
        .flat_map(|j| (-20i64..=20).map(move |k| 0.25 * (j * j + k * k) as f64 - 1.0))
        .collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

fn flat_spectrum() -> Outcome {
    let op = JacobiOperator::new(ScalarField::zeros(square(64)));
    let count = 40;
    let r = eigen(&op, count, op.default_zero_tol()).map_err(|e| e.to_string())?;
    let err = r
        .eigenvalues
        .iter()
        .zip(flat_oracle(count))
        .fold(0.0f64, |m, (l, w)| m.max((l - w).abs()));
    ensure(r.eigenvalues.len() == count, || format!("{} eigenvalues", r.eigenvalues.len()))?;
    ensure(err <= 1e-8, || format!("max eigenvalue error {err:.3e}"))?;
    let got = (r.neg_count, r.zero_mult, r.index_lower, r.index_upper);
    ensure(got == (9, 4, 8, 9), || format!("(K, zero_mult, lower, upper) = {got:?}"))?;
    Ok(format!("{count} modes, max error {err:.2e}, K = 9, zero_mult = 4, index [8, 9]"))
}

struct Oracle {
    period: f64,
    samples: Vec<f64>,
}

fn oned_oracle() -> Oracle {
    let text = golden("oned_e6.txt");
    let mut period = None;
    let mut samples = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if let Some(p) = line.strip_prefix("period ") {
            period = Some(p.trim().parse().unwrap());
        } else {
            samples.push(line.trim().parse().unwrap());
        }
    }
    Oracle {
        period: period.expect("period line"),
        samples,
    }
}

fn oned_solution() -> Outcome {
    let oracle = oned_oracle();
    let n = oracle.samples.len();
    let t = cmc_index::sinh_gordon::period_quadrature(6.0).map_err(|e| e.to_string())?;
    ensure((t - oracle.period).abs() < 1e-12, || format!("period {t} vs oracle {}", oracle.period))?;
    let grid = Grid::new(TorusLattice::rectangular(t, 2.0).unwrap(), n, 8).unwrap();
    // generic seed: a cosine of the right amplitude, not the orbit itself
    let a = oracle.samples[0];
    let seed = ScalarField::from_fn(grid, |x, _| a * (2.0 * PI * x / t).cos()).unwrap();
    let sol = solve(grid, &seed, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let mut err = 0.0f64;
    for k in 0..grid.ny {
        for (j, w) in oracle.samples.iter().enumerate() {
            err = err.max((sol.u.at(j, k) - w).abs());
        }
    }
    ensure(err <= 1e-8, || format!("sup error {err:.3e} against the shooting oracle"))?;
    Ok(format!("{n} points, sup error {err:.2e}, {} Newton steps", sol.residual_history.len()))
}

fn oned_field() -> ScalarField {
    solve_oned_branch(6.0, 64, 6.0, 32, &SolveConfig::default()).unwrap().u
}

fn kernel_residuals() -> Outcome {
    let u = oned_field();
    let h = recursion(4).map_err(|e| e.to_string())?;
    let v1 = h.jacobi_field(1, &u).map_err(|e| e.to_string())?;
    let v2 = h.jacobi_field(2, &u).map_err(|e| e.to_string())?;
    let op = JacobiOperator::new(u);
    let rel = op.relative_residual(&v1).map_err(|e| e.to_string())?;
    ensure(v1.l2_norm() > 1e-3, || "v1 vanishes".into())?;
    ensure(rel <= 1e-5, || format!("|L v1| / |v1| = {rel:.3e}"))?;
    ensure(v2.sup_norm() <= 1e-10, || format!("sup |v2| = {:.3e}", v2.sup_norm()))?;
    Ok(format!("|L v1|/|v1| = {rel:.2e}, sup |v2| = {:.2e}", v2.sup_norm()))
}

fn band_limited(grid: Grid, rng: &mut ChaCha8Rng, modes: i32) -> ScalarField {
    let mut waves = Vec::new();
    for p in -modes..=modes {
        for q in -modes..=modes {
            let (kx, ky) = grid.lattice.wave_vector(p as f64, q as f64);
            waves.push((kx, ky, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    ScalarField::from_fn(grid, |x, y| {
        waves
            .iter()
            .map(|(kx, ky, a, b)| {
                let phase = kx * x + ky * y;
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    })
    .unwrap()
}

fn second_variation_forms() -> Outcome {
    let u = oned_field();
    let op = JacobiOperator::new(u.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let v = band_limited(*u.grid(), &mut rng, 4);
        let a = second_variation(&v, &op).map_err(|e| e.to_string())?;
        let b = intrinsic_second_variation(&v, &u).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    ensure(worst <= 1e-6, || format!("worst relative difference {worst:.3e}"))?;
    Ok(format!("20 fields, worst relative difference {worst:.2e}"))
}

fn courant_suite() -> Outcome {
    let cases = [
        ("u = 0", JacobiOperator::new(ScalarField::zeros(square(32))), 25),
        ("1-D E=6", JacobiOperator::new(oned_field()), 30),
    ];
    let mut summary = Vec::new();
    for (label, op, count) in cases {
        let r = eigen(&op, count, op.default_zero_tol()).map_err(|e| e.to_string())?;
        let rows = courant_check(&r, 1e-6, 20, 20_231).map_err(|e| e.to_string())?;
        if let Some(bad) = rows.iter().find(|r| !r.ok) {
            return Err(format!("{label}: {bad:?}"));
        }
        let combos = rows.iter().filter(|r| r.combination.is_some()).count();
        summary.push(format!("{label}: {} eigenfields + {combos} combinations", rows.len() - combos));
    }
    Ok(summary.join("; "))
}

fn trig_poly(grid: Grid, rng: &mut ChaCha8Rng, modes: i32) -> ScalarField {
    band_limited(grid, rng, modes)
}

struct CorpusEntry {
    counts: NodalCounts,
    domains: usize,
}

/// Products `f·g` of random trigonometric polynomials (their zero sets cross,
/// giving vertices) followed by plain random polynomials.
fn corpus() -> (Vec<CorpusEntry>, usize) {
    let grid = square(64);
    let mut rng = ChaCha8Rng::seed_from_u64(20_231);
    let tol = NodalTolerances::default();
    let mut entries = Vec::new();
    let mut rejected = 0;
    for i in 0..160 {
        let v = if i < 120 {
            let f = trig_poly(grid, &mut rng, 1);
            let g = trig_poly(grid, &mut rng, 1);
            f.zip_map(&g, |a, b| a * b).unwrap()
        } else {
            trig_poly(grid, &mut rng, 2)
        };
        match extract_graph(&v, &tol) {
            Ok(graph) => entries.push(CorpusEntry {
                counts: graph.counts(),
                domains: count_nodal_domains(&v, tol.tol_zero).unwrap(),
            }),
            Err(_) => rejected += 1,
        }
    }
    (entries, rejected)
}

fn euler_suite() -> Outcome {
    let tol = NodalTolerances::default();
    let product = ScalarField::from_fn(square(64), |x, y| x.sin() * y.sin()).unwrap();
    let graph = extract_graph(&product, &tol).map_err(|e| e.to_string())?;
    let base = euler_check(&graph.counts(), 1);
    ensure(base.lhs == 0 && base.applicable, || format!("sin x sin y: {base:?}"))?;
    let (entries, rejected) = corpus();
    let with_vertices: Vec<_> = entries.iter().filter(|e| e.counts.vertices > 0).collect();
    ensure(with_vertices.len() >= 50, || {
        format!("only {} fields with vertices ({rejected} rejected)", with_vertices.len())
    })?;
    for e in &with_vertices {
        let check = euler_check(&e.counts, 1);
        ensure(check.holds, || format!("Euler violated: {:?}", e.counts))?;
        ensure(e.counts.edges >= 2 * e.counts.vertices, || format!("E < 2V: {:?}", e.counts))?;
    }
    Ok(format!(
        "sin x sin y gives 0; {} fields with vertices pass ({rejected} of 160 rejected as ambiguous)",
        with_vertices.len()
    ))
}

fn parse_csv(text: &str) -> (String, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn bound_tables() -> Outcome {
    let ours = table_csv(2, 20, &[1, 2, 3], 1.0).map_err(|e| e.to_string())?;
    let (h1, a) = parse_csv(&ours);
    let (h2, b) = parse_csv(&golden("bounds.csv"));
    ensure(h1 == h2, || format!("header {h1} vs {h2}"))?;
    ensure(a.len() == b.len() && a.len() == 19 * 3, || format!("{} rows vs {}", a.len(), b.len()))?;
    for (ra, rb) in a.iter().zip(&b) {
        let same = ra.iter().zip(rb).all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs().max(1.0));
        ensure(same && ra.len() == rb.len(), || format!("row {ra:?} vs golden {rb:?}"))?;
    }
    ensure(thm1_bound(13, 2) == 6, || "thm1(13,2) != 6".into())?;
    ensure(thm2_bound(13, 1) == 6, || "thm2(13,1) != 6".into())?;
    let flpp = flpp_area_lower(2);
    ensure((flpp - 15.0 * PI / 4.0).abs() < 1e-14, || format!("flpp(2) = {flpp}"))?;
    Ok("57 rows match golden; thm1(13,2)=6, thm2(13,1)=6, flpp(2)=15π/4".into())
}

fn domains_match_faces() -> Outcome {
    let (entries, rejected) = corpus();
    for e in &entries {
        ensure(e.domains == e.counts.faces, || format!("{} domains vs {:?}", e.domains, e.counts))?;
    }
    Ok(format!("{} extracted fields agree ({rejected} rejected)", entries.len()))
}

fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = std::fs::read(&path).unwrap();
        if name == "manifest.json" {
            let mut m: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            m.as_object_mut().unwrap().remove("created_unix");
            bytes = serde_json::to_vec(&m).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn pipeline_determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/oned.conf");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_cmc-index"))
            .arg("pipeline")
            .arg("--config")
            .arg(&config)
            .arg("--out-dir")
            .arg(&dir)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("pipeline exited with {status}"))?;
        runs.push(read_outputs(&dir));
    }
    ensure(runs[0].len() >= 10, || format!("only {} outputs", runs[0].len()))?;
    ensure(runs[0].keys().eq(runs[1].keys()), || "different file sets".into())?;
    for (name, bytes) in &runs[0] {
        ensure(runs[1][name] == *bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical (manifest timestamp excluded)", runs[0].len()))
}

fn main() {
    let criteria = [
        Criterion { name: "rho closed forms", budget: Duration::from_secs(1), run: rho_closed_forms },
        Criterion { name: "rho grading", budget: Duration::from_secs(1), run: rho_weights },
        Criterion { name: "flat spectrum 64x64", budget: Duration::from_secs(30), run: flat_spectrum },
        Criterion { name: "1-D oracle", budget: Duration::from_secs(10), run: oned_solution },
        Criterion { name: "kernel residuals", budget: Duration::from_secs(10), run: kernel_residuals },
        Criterion { name: "second variation", budget: Duration::from_secs(10), run: second_variation_forms },
        Criterion { name: "Courant", budget: Duration::from_secs(60), run: courant_suite },
        Criterion { name: "Euler", budget: Duration::from_secs(60), run: euler_suite },
        Criterion { name: "bound tables", budget: Duration::from_secs(1), run: bound_tables },
        Criterion { name: "domains = faces", budget: Duration::from_secs(60), run: domains_match_faces },
        Criterion { name: "pipeline determinism", budget: Duration::from_secs(120), run: pipeline_determinism },
    ];
    let mut failures = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; over budget {:?}", c.budget)),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {:<22} {:>8.2}s  {detail}", i + 1, c.name, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
