use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use teig_core::assembly::{assemble_block_system, AssemblyOptions, MatrixKind};
use teig_core::coefficients::RefractiveIndex;
use teig_core::elements::{gauss_rule, DEFAULT_QUAD_ORDER};
use teig_core::harness::{emit_report, format_table, parse_eigs, parse_ladder, run_study, StudyConfig, StudyMode};
use teig_core::mesh::{build_mesh, DomainKind};
use teig_core::{Result, TeigError};

#[derive(Parser)]
#[command(name = "teig", version, about = "Transmission eigenvalues with mixed BFS/Q2 elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a direct and/or two-grid convergence study.
    Study(StudyArgs),
    /// Write the mesh as NODE/CELL/BND text lines.
    Mesh {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        cells: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the assembled matrices in MatrixMarket format.
    Export {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        index: String,
        #[arg(long)]
        cells: usize,
        #[arg(long, default_value_t = DEFAULT_QUAD_ORDER)]
        quad_order: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// square | lshape
    #[arg(long)]
    domain: Option<String>,
    /// const16 | tilt | radial
    #[arg(long)]
    index: Option<String>,
    /// direct | twogrid | both
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated H:h pairs in cells per unit, e.g. "4:16,8:32"
    #[arg(long)]
    ladder: Option<String>,
    /// Comma-separated 1-based eigenvalue indices
    #[arg(long)]
    eigs: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, env = "TEIG_THREADS")]
    threads: Option<usize>,
    /// Skip direct fine solves above this many cells per unit
    #[arg(long)]
    max_direct_cells: Option<usize>,
    /// Leave the seconds column empty for reproducible output
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    domain: Option<String>,
    index: Option<String>,
    mode: Option<String>,
    ladder: Option<String>,
    eigs: Option<String>,
    out: Option<PathBuf>,
    quad_order: Option<usize>,
    tol: Option<f64>,
    threads: Option<usize>,
    max_direct_cells: Option<usize>,
    no_timing: Option<bool>,
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| TeigError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| TeigError::Config(format!("{}: {e}", path.display())))
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| TeigError::Config(format!("missing --{name} (flag or config key)")))
}

fn study_config(args: StudyArgs) -> Result<(StudyConfig, PathBuf)> {
    let file = match &args.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    let domain = DomainKind::parse(&required(args.domain.or(file.domain), "domain")?)?;
    let index = RefractiveIndex::parse(&required(args.index.or(file.index), "index")?)?;
    let ladder = parse_ladder(&required(args.ladder.or(file.ladder), "ladder")?)?;
    let eigs = parse_eigs(&required(args.eigs.or(file.eigs), "eigs")?)?;
    let out = required(args.out.or(file.out), "out")?;
    let mut config = StudyConfig::new(domain, index, ladder, eigs);
    if let Some(m) = args.mode.or(file.mode) {
        config.mode = StudyMode::parse(&m)?;
    }
    config.quad_order = args.quad_order.or(file.quad_order).unwrap_or(DEFAULT_QUAD_ORDER);
    if let Some(t) = args.tol.or(file.tol) {
        config.tol = t;
    }
    config.threads = args.threads.or(file.threads);
    config.max_direct_cells = args.max_direct_cells.or(file.max_direct_cells);
    config.record_timing = !(args.no_timing || file.no_timing.unwrap_or(false));
    config.validate()?;
    Ok((config, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Study(args) => {
            let (config, out) = study_config(args)?;
            let report = run_study(&config)?;
            emit_report(&report, &out)?;
            print!("{}", format_table(&report));
        }
        Command::Mesh { domain, cells, out } => {
            build_mesh(DomainKind::parse(&domain)?, cells)?.write_dump(&out)?;
        }
        Command::Export { domain, index, cells, quad_order, out } => {
            let mesh = build_mesh(DomainKind::parse(&domain)?, cells)?;
            let sys = assemble_block_system(&mesh, &RefractiveIndex::parse(&index)?, &gauss_rule(quad_order)?, AssemblyOptions::default())?;
            std::fs::create_dir_all(&out).map_err(|e| TeigError::Config(format!("{}: {e}", out.display())))?;
            for (name, kind) in [
                ("A1", MatrixKind::A1),
                ("A2", MatrixKind::A2),
                ("S1", MatrixKind::S1),
                ("S2", MatrixKind::S2),
                ("R", MatrixKind::R),
                ("M", MatrixKind::M),
            ] {
                sys.matrices.get(kind).write_matrix_market(&out.join(format!("{name}.mtx")))?;
            }
            sys.pencil.a_block.write_matrix_market(&out.join("A.mtx"))?;
            sys.pencil.b_block.write_matrix_market(&out.join("B.mtx"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
