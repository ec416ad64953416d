//! `biharm`: convergence studies for the biharmonic interface problem.
//!
//! Exit codes: 0 success, 2 configuration error, 3 assumption violation,
//! 4 solver failure, 1 anything else.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use biharm_core::experiment::{refined_sequence, structured_meshes};
use biharm_core::solver::dump_system;
use biharm_core::{
    run_convergence, ConvergenceTable, Error, Mesh, PenaltyScaling, RunOutcome, SolveParams, StageError,
};
use clap::Parser;

use config::{MeshSource, RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "biharm", version, about = "Patch-reconstruction DG convergence studies")]
struct Cli {
    /// Problem name: example1, example2, example3, example4 or patch-test.
    #[arg(long)]
    problem: Option<String>,
    /// Polynomial degree m (at least 2).
    #[arg(long)]
    order: Option<usize>,
    /// Cells per direction, comma separated, coarse to fine.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Uniform refinements of a single `--n` mesh or of `--mesh-file`.
    #[arg(long)]
    refinements: Option<usize>,
    /// Penalty parameter.
    #[arg(long)]
    eta: Option<f64>,
    /// Patch size #S.
    #[arg(long)]
    patch_size: Option<usize>,
    /// Volume quadrature order (at least 2m).
    #[arg(long)]
    quad_order: Option<usize>,
    /// Relative tolerance of the interface approximation.
    #[arg(long)]
    geom_tol: Option<f64>,
    /// `unweighted` (mu = eta / h^k) or `coefficient` (mu scaled by beta).
    #[arg(long, value_parser = |s: &str| s.parse::<PenaltyScaling>().map_err(|e| e.to_string()))]
    penalty_scaling: Option<PenaltyScaling>,
    /// Replace the problem's interface: circle, ellipse or star.
    #[arg(long)]
    interface: Option<String>,
    /// Interface parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Option<Vec<f64>>,
    /// CSV output path (standard output when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Mesh in the `v x y` / `t i j k` text format.
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    /// Write each linear system in coordinate format to this path
    /// (`.<index>` is appended when there are several meshes).
    #[arg(long)]
    dump_system: Option<PathBuf>,
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Cli {
    fn settings(self) -> Result<Settings, Error> {
        let file = match &self.config {
            Some(path) => Settings::parse(&read(path)?)?,
            None => Settings::default(),
        };
        let flags = Settings {
            problem: self.problem,
            order: self.order,
            n: self.n,
            refinements: self.refinements,
            eta: self.eta,
            patch_size: self.patch_size,
            quad_order: self.quad_order,
            geom_tol: self.geom_tol,
            penalty_scaling: self.penalty_scaling,
            interface: self.interface,
            params: self.params,
            output: self.output,
            mesh_file: self.mesh_file,
            dump_system: self.dump_system,
        };
        Ok(file.overridden_by(flags))
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidInput(_) | Error::MeshFormat { .. } | Error::NonMonotoneH => 2,
        Error::AssumptionViolation { .. }
        | Error::PatchTooSmall { .. }
        | Error::RankDeficient { .. }
        | Error::DegenerateGradient { .. } => 3,
        Error::NotPositiveDefinite { .. } | Error::SingularMatrix(_) => 4,
        _ => 1,
    }
}

fn meshes(cfg: &RunConfig) -> Result<Vec<Arc<Mesh>>, Error> {
    match &cfg.meshes {
        MeshSource::Structured(ns) => structured_meshes(&cfg.problem, ns),
        MeshSource::StructuredRefined { n, refinements } => Ok(refined_sequence(
            Mesh::structured(cfg.problem.domain, *n)?,
            *refinements,
        )),
        MeshSource::File { path, refinements } => Ok(refined_sequence(Mesh::from_text(&read(path)?)?, *refinements)),
    }
}

fn dump_path(base: &Path, index: usize, count: usize) -> PathBuf {
    if count == 1 {
        base.to_path_buf()
    } else {
        let mut s = base.as_os_str().to_owned();
        s.push(format!(".{index}"));
        s.into()
    }
}

fn write_dump(path: &Path, out: &RunOutcome) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    dump_system(&out.system.matrix, &out.system.rhs, &mut w)?;
    w.flush()?;
    Ok(())
}

fn summary(table: &ConvergenceTable) -> Result<String, Error> {
    let (ee, el) = (table.eoc_energy()?, table.eoc_l2()?);
    let mut s = format!(
        "{:>10} {:>8} {:>11} {:>6} {:>11} {:>6}\n",
        "h", "dofs", "energy", "eoc", "l2", "eoc"
    );
    for (i, r) in table.rows.iter().enumerate() {
        let rate = |v: &[f64]| {
            if i == 0 {
                "-".to_string()
            } else {
                format!("{:.2}", v[i - 1])
            }
        };
        s += &format!(
            "{:>10.4e} {:>8} {:>11.4e} {:>6} {:>11.4e} {:>6}\n",
            r.report.h,
            r.report.dofs,
            r.report.energy_error,
            rate(&ee),
            r.report.l2_error,
            rate(&el)
        );
    }
    Ok(s)
}

/// A failed run: the message to print and the process exit code.
#[derive(Debug)]
struct Failure {
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Self {
            code: exit_code(&e.error),
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::from_settings(cli.settings()?)?;
    let meshes = meshes(&cfg)?;
    let params = SolveParams {
        order: cfg.order,
        eta: cfg.eta,
        patch_size: cfg.patch_size,
        quad_order: cfg.quad_order,
        geom_tol: cfg.geom_tol,
        penalty_scaling: cfg.penalty_scaling,
    };
    let count = meshes.len();
    let mut index = 0;
    let table = run_convergence(&cfg.problem, meshes, &params, |out| {
        if let Some(base) = &cfg.dump_system {
            write_dump(&dump_path(base, index, count), out)?;
        }
        index += 1;
        Ok(())
    })?;

    eprint!("{}", summary(&table)?);
    write_table(cfg.output.as_deref(), &table)?;
    Ok(())
}

fn write_table(path: Option<&Path>, table: &ConvergenceTable) -> Result<(), Error> {
    match path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => table.write_csv(&mut std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
