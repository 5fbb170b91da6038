//! Command-line interface: subcommands for each stage and the full pipeline.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 property violation (a check failed; usually a tolerance or
//! resolution problem).

pub mod pipeline;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::bounds::{compare, default_c, surface_area, table_csv, BoundInputs, BoundsError, DEFAULT_C_TILDE};
use crate::config::{ConfigError, ConfigFile};
use crate::field::{FieldError, ScalarField};
use crate::hierarchy::{recursion, HierarchyError};
use crate::nodal::{count_nodal_domains, euler_check, extract_graph, render_svg, NodalError, NodalTolerances};
use crate::sinh_gordon::SolveError;
use crate::spectrum::{eigen_adaptive, JacobiOperator, SpectrumConfig, SpectrumError};

pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Nodal(#[from] NodalError),
    #[error("property violation: {0}")]
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } | CliError::Bounds(_) => 2,
            CliError::Field(_) => 2,
            CliError::Solve(_) | CliError::Hierarchy(_) | CliError::Spectrum(_) | CliError::Nodal(_) => 3,
            CliError::Violation(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cmc-index", version, about = "Morse-index analysis of CMC tori via the sinh-Gordon equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the sinh-Gordon equation and write a CMCF field.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a config value: section.key=value (repeatable).
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the ρ_j hierarchy; with a field, write Jacobi fields and kernel residuals.
    Hierarchy {
        #[arg(long, default_value_t = crate::hierarchy::DEFAULT_J_MAX)]
        jmax: u32,
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        field: Option<PathBuf>,
        /// Directory for v_j fields and kernel.json (requires --field).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Number of Jacobi fields v_1..v_count.
        #[arg(long, default_value_t = 2)]
        count: u32,
    },
    /// Lowest eigenpairs of the Jacobi operator of a field.
    Spectrum {
        field: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nodal graph of a field with the Euler check and domain count.
    Nodal {
        field: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        genus: u32,
        #[arg(long, default_value_t = 1e-6)]
        tol_zero: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol_vertex: f64,
    },
    /// Closed-form index bounds for spectral genus g and multiplicity m.
    Bounds {
        #[arg(long)]
        g: u32,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long)]
        d_zero: bool,
        #[arg(long, default_value_t = DEFAULT_C_TILDE)]
        c_tilde: f64,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, conflicts_with = "area_from")]
        area: Option<f64>,
        /// Take the area ∫e^u dxdy from a CMCF field.
        #[arg(long)]
        area_from: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV table of the bounds over a genus range.
    Table {
        #[arg(long, default_value_t = 2)]
        g_from: u32,
        #[arg(long, default_value_t = 20)]
        g_to: u32,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        m: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_C_TILDE)]
        c_tilde: f64,
        /// Constant of the quadratic bound; defaults to π/(4·c_tilde).
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full chain with a manifest linking every output.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides [pipeline] output.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses a config file and applies `section.key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ConfigFile, CliError> {
    let mut cfg = ConfigFile::parse(&read_to_string(path)?)?;
    for o in overrides {
        let (lhs, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override '{o}' is not section.key=value")))?;
        let (section, key) = lhs
            .split_once('.')
            .ok_or_else(|| CliError::Usage(format!("override '{o}' is not section.key=value")))?;
        cfg.set(section.trim(), key.trim(), value.trim());
    }
    Ok(cfg)
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, out, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let pc = PipelineConfig::from_config(&cfg)?;
            let sol = pipeline::solve_configured(&pc.lattice, &pc.solve)?;
            sol.u.save(&out)?;
            eprintln!(
                "{}: branch {}, residual {:.3e}",
                out.display(),
                sol.branch_tag,
                sol.residual_norm
            );
            Ok(())
        }
        Command::Hierarchy {
            jmax,
            dump,
            field,
            out_dir,
            count,
        } => {
            let h = recursion(jmax)?;
            if dump || field.is_none() {
                print!("{}", h.dump());
            }
            if let Some(path) = field {
                if count > h.max_jacobi_index() {
                    return Err(CliError::Usage(format!(
                        "--count {count} needs jmax >= {}",
                        count + count % 2
                    )));
                }
                let u = ScalarField::load(&path)?;
                let op = JacobiOperator::new(u.clone());
                let mut rows = Vec::new();
                for j in 1..=count {
                    let v = h.jacobi_field(j, &u)?;
                    let norm = v.l2_norm();
                    let residual = if norm > 0.0 { Some(op.relative_residual(&v)?) } else { None };
                    if let Some(dir) = &out_dir {
                        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
                            path: dir.clone(),
                            source: e,
                        })?;
                        v.save(&dir.join(format!("v{j}.cmcf")))?;
                    }
                    rows.push(json!({ "j": j, "l2_norm": norm, "kernel_residual": residual }));
                }
                let text = json_text(&json!({ "schema": 1, "jacobi": rows }));
                emit(out_dir.map(|d| d.join("kernel.json")).as_deref(), &text)?;
            }
            Ok(())
        }
        Command::Spectrum {
            field,
            count,
            config,
            out,
        } => {
            let mut sc = match config {
                Some(path) => SpectrumConfig::from_section(&load_config(&path, &[])?.section_or_empty("spectrum"))?,
                None => SpectrumConfig::default(),
            };
            if let Some(n) = count {
                if n == 0 {
                    return Err(CliError::Usage("--count must be >= 1".into()));
                }
                sc.count = n;
            }
            let u = ScalarField::load(&field)?;
            let op = JacobiOperator::with_discretization(u, sc.discretization);
            let report = eigen_adaptive(&op, sc.count, sc.zero_tol_for(&op))?;
            emit(out.as_deref(), &(report.to_json() + "\n"))
        }
        Command::Nodal {
            field,
            svg,
            out,
            genus,
            tol_zero,
            tol_vertex,
        } => {
            if !(tol_zero > 0.0 && tol_vertex > 0.0) {
                return Err(CliError::Usage("tolerances must be positive".into()));
            }
            let v = ScalarField::load(&field)?;
            let tol = NodalTolerances { tol_zero, tol_vertex };
            let graph = extract_graph(&v, &tol)?;
            let counts = graph.counts();
            let euler = euler_check(&counts, genus);
            let domains = count_nodal_domains(&v, tol_zero)?;
            if let Some(path) = &svg {
                emit(Some(path), &render_svg(&graph, &v))?;
            }
            let text = json_text(&json!({
                "schema": 1,
                "counts": counts,
                "euler": { "lhs": euler.lhs, "rhs": euler.rhs, "holds": euler.holds, "label": euler.label() },
                "domains": domains,
                "graph": graph,
            }));
            emit(out.as_deref(), &text)?;
            let mut problems = Vec::new();
            if euler.applicable && !euler.holds {
                problems.push(format!("Euler inequality violated ({} < {})", euler.lhs, euler.rhs));
            }
            if !graph.degree_violations.is_empty() {
                problems.push("vertices with odd degree or degree < 4".to_string());
            }
            if domains != counts.faces {
                problems.push(format!("{domains} nodal domains but {} faces", counts.faces));
            }
            if problems.is_empty() {
                Ok(())
            } else {
                Err(CliError::Violation(problems.join("; ")))
            }
        }
        Command::Bounds {
            g,
            m,
            d_zero,
            c_tilde,
            c,
            area,
            area_from,
            format,
            out,
        } => {
            let area = match area_from {
                Some(path) => Some(surface_area(&ScalarField::load(&path)?)),
                None => area,
            };
            let inputs = BoundInputs {
                g,
                m,
                d_zero,
                c_tilde,
                c,
                area,
            };
            let report = compare(&inputs, None)?;
            let text = match format {
                Format::Json => report.to_json() + "\n",
                Format::Table => report.to_table(),
            };
            emit(out.as_deref(), &text)
        }
        Command::Table {
            g_from,
            g_to,
            m,
            c_tilde,
            c,
            out,
        } => {
            if !(c_tilde > 0.0) {
                return Err(CliError::Usage("--c-tilde must be positive".into()));
            }
            let c = c.unwrap_or_else(|| default_c(c_tilde));
            emit(out.as_deref(), &table_csv(g_from, g_to, &m, c)?)
        }
        Command::Pipeline {
            config,
            out_dir,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let pc = PipelineConfig::from_config(&cfg)?;
            let dir = out_dir.unwrap_or_else(|| pc.pipeline.output.clone());
            let outcome = run_pipeline(&pc, &dir)?;
            eprintln!("wrote {}", dir.join("manifest.json").display());
            if outcome.violations.is_empty() {
                Ok(())
            } else {
                Err(CliError::Violation(outcome.violations.join("; ")))
            }
        }
    }
}
