//! End-to-end runs: classify, reconstruct, assemble, solve and measure the
//! error on one mesh or on a sequence of meshes.

use std::sync::Arc;
use std::time::Instant;

use crate::analysis::{compute_errors, ConvergenceRow, ConvergenceTable, ErrorReport};
use crate::dg::{assemble, default_quad_order, LinearSystem, PenaltyConfig, PenaltyScaling};
use crate::error::Error;
use crate::geometry::{Classification, DEFAULT_GEOM_TOL};
use crate::mesh::Mesh;
use crate::problems::NamedProblem;
use crate::reconstruction::ReconstructionSpace;
use crate::solver::{galerkin_residual, solve_spd, FactorizationReport};

/// Extra quadrature order used when measuring errors.
pub const ERROR_QUAD_BONUS: usize = 2;

/// Discretisation parameters; `None` selects the problem's default.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub order: usize,
    pub eta: Option<f64>,
    pub patch_size: Option<usize>,
    pub quad_order: Option<usize>,
    pub geom_tol: Option<f64>,
    pub penalty_scaling: PenaltyScaling,
}

impl SolveParams {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            eta: None,
            patch_size: None,
            quad_order: None,
            geom_tol: None,
            penalty_scaling: PenaltyScaling::default(),
        }
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order.unwrap_or_else(|| default_quad_order(self.order))
    }
}

/// Pipeline stage, reported with failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Classify,
    Reconstruct,
    Assemble,
    Solve,
    Errors,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Classify => "classification",
            Stage::Reconstruct => "reconstruction",
            Stage::Assemble => "assembly",
            Stage::Solve => "solve",
            Stage::Errors => "error evaluation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} failed: {error}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub error: Error,
}

fn at<T>(stage: Stage, r: crate::Result<T>) -> Result<T, StageError> {
    r.map_err(|error| StageError { stage, error })
}

/// Everything produced by a solve on one mesh.
#[derive(Debug)]
pub struct RunOutcome {
    pub classification: Classification,
    pub space: ReconstructionSpace,
    pub system: LinearSystem,
    pub solution: Vec<f64>,
    pub factorization: FactorizationReport,
    pub report: ErrorReport,
    pub galerkin_residual: f64,
    /// Classification, reconstruction and assembly time.
    pub assemble_ms: f64,
    /// Factorisation and solve time.
    pub solve_ms: f64,
}

pub fn solve_on_mesh(problem: &NamedProblem, mesh: Arc<Mesh>, params: &SolveParams) -> Result<RunOutcome, StageError> {
    let defaults = problem.defaults(params.order);
    let eta = params.eta.unwrap_or(defaults.eta);
    let patch_size = params.patch_size.unwrap_or(defaults.patch_size);
    let quad_order = params.quad_order();
    let penalty = at(
        Stage::Assemble,
        PenaltyConfig::with_scaling(eta, params.penalty_scaling),
    )?;

    let start = Instant::now();
    let cls = at(
        Stage::Classify,
        Classification::with_tolerance(
            mesh,
            problem.level_set.clone(),
            params.geom_tol.unwrap_or(DEFAULT_GEOM_TOL),
        ),
    )?;
    let space = at(
        Stage::Reconstruct,
        ReconstructionSpace::build(&cls, params.order, patch_size),
    )?;
    let system = at(
        Stage::Assemble,
        assemble(&space, &cls, &problem.spec, &penalty, quad_order),
    )?;
    let assemble_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let (solution, factorization) = at(Stage::Solve, solve_spd(&system.matrix, &system.rhs))?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    let residual = galerkin_residual(&system.matrix, &system.rhs, &solution);

    let report = at(
        Stage::Errors,
        compute_errors(&space, &cls, &problem.spec, &solution, quad_order + ERROR_QUAD_BONUS),
    )?;
    log::info!(
        "h = {:.4e}, dofs = {}, energy = {:.4e}, L2 = {:.4e}",
        report.h,
        report.dofs,
        report.energy_error,
        report.l2_error
    );
    Ok(RunOutcome {
        classification: cls,
        space,
        system,
        solution,
        factorization,
        report,
        galerkin_residual: residual,
        assemble_ms,
        solve_ms,
    })
}

/// Solves on every mesh in order. `inspect` sees each outcome before it is
/// reduced to a table row (and dropped).
pub fn run_convergence(
    problem: &NamedProblem,
    meshes: impl IntoIterator<Item = Arc<Mesh>>,
    params: &SolveParams,
    mut inspect: impl FnMut(&RunOutcome) -> crate::Result<()>,
) -> Result<ConvergenceTable, StageError> {
    let mut table = ConvergenceTable::default();
    for mesh in meshes {
        let out = solve_on_mesh(problem, mesh, params)?;
        at(Stage::Solve, inspect(&out))?;
        table.push(ConvergenceRow {
            report: out.report.clone(),
            assemble_ms: out.assemble_ms,
            solve_ms: out.solve_ms,
        });
    }
    Ok(table)
}

/// Structured meshes of the problem's domain with `n` cells per direction.
pub fn structured_meshes(problem: &NamedProblem, ns: &[usize]) -> crate::Result<Vec<Arc<Mesh>>> {
    ns.iter()
        .map(|&n| Mesh::structured(problem.domain, n).map(Arc::new))
        .collect()
}

/// `base` followed by `refinements` uniform refinements.
pub fn refined_sequence(base: Mesh, refinements: usize) -> Vec<Arc<Mesh>> {
    let mut out = vec![Arc::new(base)];
    for _ in 0..refinements {
        let next = out.last().unwrap().refine_uniform();
        out.push(Arc::new(next));
    }
    out
}
