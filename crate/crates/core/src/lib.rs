//! Patch-reconstruction discontinuous Galerkin solver for the biharmonic
//! interface problem `Delta(beta Delta u) = f` on unfitted triangular meshes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dg;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod mesh;
pub mod poly;
pub mod problems;
pub mod reconstruction;
pub mod solver;
pub mod sparse;

pub use analysis::{ConvergenceRow, ConvergenceTable, ErrorReport, NormBreakdown};
pub use dg::{assemble, ExactJet, ExactSolution, LinearSystem, PenaltyConfig, PenaltyScaling, ProblemSpec};
pub use error::{Assumption, Error, Result};
pub use experiment::{run_convergence, solve_on_mesh, RunOutcome, SolveParams, Stage, StageError};
pub use geometry::{Classification, ElementTag, FaceTag, LevelSet, QuadratureRule, Region};
pub use mesh::{Mesh, Rect};
pub use poly::{Jet, ScaledMonomials};
pub use problems::NamedProblem;
pub use reconstruction::{ElementPatch, LocalFit, ReconstructionSpace};
pub use solver::{solve_spd, FactorizationReport};
pub use sparse::CsrMatrix;

pub type Point = nalgebra::Point2<f64>;
pub type Vector = nalgebra::Vector2<f64>;
