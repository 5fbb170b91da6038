//! Configuration of a full run and the chain solve → hierarchy → spectrum →
//! nodal → bounds with its artifacts.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use super::CliError;
use crate::bounds::{compare, surface_area, BoundInputs};
use crate::config::{ConfigError, ConfigFile, Section};
use crate::field::ScalarField;
use crate::hierarchy::{recursion, DEFAULT_J_MAX};
use crate::lattice::{Grid, TorusLattice};
use crate::nodal::{count_nodal_domains, courant_check, euler_check, extract_graph, render_svg, NodalConfig};
use crate::sinh_gordon::{oned::period_quadrature, solve, solve_oned_branch, SinhGordonSolution, SolveConfig};
use crate::spectrum::{eigen_adaptive, JacobiOperator, SpectrumConfig};

pub const SECTIONS: &[&str] = &["lattice", "solve", "spectrum", "nodal", "bounds", "pipeline"];
pub const LATTICE_KEYS: &[&str] = &[
    "energy", "lx", "ly", "omega1_re", "omega1_im", "omega2_re", "omega2_im", "nx", "ny", "m", "initial",
];
pub const PIPELINE_KEYS: &[&str] = &["output", "jmax", "jacobi", "zero_field"];
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    Oned,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    /// Energy of the 1-D orbit whose period sets the first generator.
    pub energy: Option<f64>,
    pub lattice: TorusLattice,
    pub nx: usize,
    pub ny: usize,
    pub initial: InitialGuess,
}

impl LatticeSpec {
    pub fn from_section(s: &Section) -> Result<Self, ConfigError> {
        s.reject_unknown(LATTICE_KEYS)?;
        let nx: usize = s.require("nx")?;
        let ny: usize = s.require("ny")?;
        let m: u32 = s.get_or("m", 1)?;
        let energy: Option<f64> = s.get("energy")?;
        let lattice = if let Some(e) = energy {
            let period = period_quadrature(e).map_err(|err| s.bad("energy", &err.to_string()))?;
            TorusLattice::rectangular(period, s.positive("ly", 1.0)?)
        } else if s.raw("lx").is_some() {
            TorusLattice::rectangular(s.positive("lx", 1.0)?, s.positive("ly", 1.0)?)
        } else {
            let w1 = Complex64::new(s.require("omega1_re")?, s.get_or("omega1_im", 0.0)?);
            let w2 = Complex64::new(s.get_or("omega2_re", 0.0)?, s.require("omega2_im")?);
            TorusLattice::new(w1, w2, 1)
        }
        .and_then(|l| l.with_multiplicity(m))
        .map_err(|e| s.bad("m", &e.to_string()))?;
        Grid::new(lattice, nx, ny).map_err(|e| s.bad("nx", &e.to_string()))?;
        let initial = match s.raw("initial") {
            None if energy.is_some() => InitialGuess::Oned,
            None | Some("zero") => InitialGuess::Zero,
            Some("oned") if energy.is_some() => InitialGuess::Oned,
            Some("oned") => return Err(s.bad("initial", "oned requires energy")),
            Some(path) => InitialGuess::File(PathBuf::from(path)),
        };
        Ok(Self {
            energy,
            lattice,
            nx,
            ny,
            initial,
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.lattice, self.nx, self.ny).expect("validated on parse")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub output: PathBuf,
    pub jmax: u32,
    /// Jacobi fields `v_1..v_jacobi` written and analysed.
    pub jacobi: u32,
    /// Jacobi fields with sup norm at most this are recorded as zero.
    pub zero_field: f64,
}

impl RunOptions {
    pub fn from_section(s: &Section) -> Result<Self, ConfigError> {
        s.reject_unknown(PIPELINE_KEYS)?;
        let jmax: u32 = s.get_or("jmax", DEFAULT_J_MAX)?;
        let jacobi: u32 = s.get_or("jacobi", 2)?;
        if jacobi > jmax - jmax % 2 {
            return Err(s.bad("jacobi", "needs rho_{j+1}; raise jmax"));
        }
        Ok(Self {
            output: PathBuf::from(s.raw("output").unwrap_or("cmc-out")),
            jmax,
            jacobi,
            zero_field: s.positive("zero_field", 1e-8)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub lattice: LatticeSpec,
    pub solve: SolveConfig,
    pub spectrum: SpectrumConfig,
    pub nodal: NodalConfig,
    pub bounds: Option<BoundInputs>,
    pub pipeline: RunOptions,
}

impl PipelineConfig {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, ConfigError> {
        cfg.reject_unknown_sections(SECTIONS)?;
        let lattice = cfg
            .section("lattice")
            .ok_or_else(|| ConfigError::Missing {
                section: "lattice".into(),
                key: "nx".into(),
            })
            .and_then(LatticeSpec::from_section)?;
        Ok(Self {
            lattice,
            solve: SolveConfig::from_section(&cfg.section_or_empty("solve"))?,
            spectrum: SpectrumConfig::from_section(&cfg.section_or_empty("spectrum"))?,
            nodal: NodalConfig::from_section(&cfg.section_or_empty("nodal"))?,
            bounds: cfg.section("bounds").map(BoundInputs::from_section).transpose()?,
            pipeline: RunOptions::from_section(&cfg.section_or_empty("pipeline"))?,
        })
    }
}

/// Solves for `u` as the lattice section prescribes.
pub fn solve_configured(spec: &LatticeSpec, cfg: &SolveConfig) -> Result<SinhGordonSolution, CliError> {
    let grid = spec.grid();
    let sol = match &spec.initial {
        InitialGuess::Oned => {
            let e = spec.energy.expect("oned requires energy");
            let mut s = solve_oned_branch(e, spec.nx, spec.lattice.omega2.im, spec.ny, cfg)?;
            // the rectangle is rebuilt from the period; keep the configured multiplicity
            let g = Grid::new(spec.lattice, spec.nx, spec.ny).expect("validated");
            s.u = ScalarField::new(g, s.u.into_values())?;
            s
        }
        InitialGuess::Zero => solve(grid, &ScalarField::zeros(grid), cfg)?,
        InitialGuess::File(path) => {
            let seed = ScalarField::load(path)?;
            solve(grid, &seed, cfg)?
        }
    };
    Ok(sol)
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    /// Property violations (exit status 4 when non-empty).
    pub violations: Vec<String>,
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io { path, source: e })?;
    Ok(name.to_string())
}

/// Runs the full chain, writing every artifact into `out_dir` and a manifest
/// linking them. Everything but the manifest timestamp is deterministic.
pub fn run_pipeline(pc: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutcome, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut outputs = serde_json::Map::new();
    let mut violations = Vec::new();

    let sol = solve_configured(&pc.lattice, &pc.solve)?;
    let mut buf = Vec::new();
    sol.u.write_cmcf(&mut buf).map_err(|e| CliError::Io {
        path: out_dir.join("u.cmcf"),
        source: e,
    })?;
    outputs.insert("u".into(), write(out_dir, "u.cmcf", &buf)?.into());
    let solve_summary = json!({
        "branch_tag": sol.branch_tag.to_string(),
        "residual_norm": sol.residual_norm,
        "residual_history": sol.residual_history,
    });
    outputs.insert(
        "solve".into(),
        write(out_dir, "solve.json", pretty(&solve_summary).as_bytes())?.into(),
    );

    let hierarchy = recursion(pc.pipeline.jmax)?;
    outputs.insert("hierarchy".into(), write(out_dir, "hierarchy.txt", hierarchy.dump().as_bytes())?.into());

    let op = JacobiOperator::with_discretization(sol.u.clone(), pc.spectrum.discretization);
    let zero_tol = pc.spectrum.zero_tol_for(&op);
    let report = eigen_adaptive(&op, pc.spectrum.count, zero_tol)?;
    outputs.insert("spectrum".into(), write(out_dir, "spectrum.json", report.to_json().as_bytes())?.into());

    let mut jacobi = Vec::new();
    let mut nodal = Vec::new();
    for j in 1..=pc.pipeline.jacobi {
        let v = hierarchy.jacobi_field(j, &sol.u)?;
        let sup = v.sup_norm();
        let mut buf = Vec::new();
        v.write_cmcf(&mut buf).map_err(|e| CliError::Io {
            path: out_dir.join(format!("v{j}.cmcf")),
            source: e,
        })?;
        let file = write(out_dir, &format!("v{j}.cmcf"), &buf)?;
        let zero = sup <= pc.pipeline.zero_field;
        let residual = if zero { None } else { Some(op.relative_residual(&v)?) };
        jacobi.push(json!({ "j": j, "file": file, "sup": sup, "zero": zero, "kernel_residual": residual }));
        if zero {
            continue;
        }
        let graph = extract_graph(&v, &pc.nodal.tolerances)?;
        let counts = graph.counts();
        let euler = euler_check(&counts, 1);
        let domains = count_nodal_domains(&v, pc.nodal.tolerances.tol_zero)?;
        if euler.applicable && !euler.holds {
            violations.push(format!("v{j}: Euler inequality violated ({} < {})", euler.lhs, euler.rhs));
        }
        if !graph.degree_violations.is_empty() {
            violations.push(format!("v{j}: vertices with odd degree or degree < 4"));
        }
        if domains != counts.faces {
            violations.push(format!("v{j}: {domains} nodal domains but {} faces", counts.faces));
        }
        let graph_file = write(out_dir, &format!("nodal_v{j}.json"), graph.to_json().as_bytes())?;
        let svg_file = write(out_dir, &format!("nodal_v{j}.svg"), render_svg(&graph, &v).as_bytes())?;
        nodal.push(json!({
            "field": format!("v{j}"),
            "graph": graph_file,
            "svg": svg_file,
            "counts": counts,
            "euler": { "lhs": euler.lhs, "rhs": euler.rhs, "holds": euler.holds, "label": euler.label() },
            "domains": domains,
        }));
    }
    outputs.insert(
        "jacobi".into(),
        write(out_dir, "jacobi.json", pretty(&json!(jacobi)).as_bytes())?.into(),
    );
    outputs.insert("nodal".into(), write(out_dir, "nodal.json", pretty(&json!(nodal)).as_bytes())?.into());

    let rows = courant_check(&report, pc.nodal.tolerances.tol_zero, pc.nodal.combinations, pc.nodal.seed)?;
    let failed = rows.iter().filter(|r| !r.ok).count();
    if failed > 0 {
        violations.push(format!("Courant bound exceeded in {failed} rows"));
    }
    outputs.insert("courant".into(), write(out_dir, "courant.json", pretty(&json!(rows)).as_bytes())?.into());

    let mut area = None;
    if let Some(inputs) = &pc.bounds {
        let mut inputs = *inputs;
        if inputs.area.is_none() {
            inputs.area = Some(surface_area(&sol.u));
        }
        area = inputs.area;
        let b = compare(&inputs, Some(&report))?;
        outputs.insert("bounds".into(), write(out_dir, "bounds.json", b.to_json().as_bytes())?.into());
    }

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "schema": MANIFEST_SCHEMA,
        "created_unix": created,
        "config": pc,
        "resolved": {
            "spectrum_zero_tol": zero_tol,
            "spectrum_count": report.eigenvalues.len(),
            "surface_area": area,
        },
        "summary": {
            "residual_norm": sol.residual_norm,
            "neg_count": report.neg_count,
            "zero_mult": report.zero_mult,
            "index_interval": [report.index_lower, report.index_upper],
        },
        "outputs": outputs,
        "violations": violations,
    });
    write(out_dir, "manifest.json", pretty(&manifest).as_bytes())?;
    Ok(PipelineOutcome {
        out_dir: out_dir.to_path_buf(),
        violations,
    })
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}
