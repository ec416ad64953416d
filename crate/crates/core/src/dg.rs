//! Symmetric interior-penalty discretisation of `Delta(beta Delta u) = f` over
//! the reconstructed space.
//!
//! Every surface integral is written through four trace quantities of a
//! function `v` at a point with a `+` side, an optional `-` side and the unit
//! normal `n` pointing out of the `+` side:
//!
//! * `J(v)  = v+ - v-`                                  (jump, `v+` on the boundary)
//! * `A3(v) = {n . beta grad Delta v}`                  (average of the flux)
//! * `G(v)  = n . (grad v+ - grad v-)`                  (normal-derivative jump)
//! * `A2(v) = {beta Delta v}`
//!
//! and the integrand of the bilinear form is
//! `J(u)A3(v) + J(v)A3(u) - G(u)A2(v) - G(v)A2(u) + mu1 J(u)J(v) + mu2 G(u)G(v)`.
//! On the interface the `+` side is `Omega_0` and `n = n_0`; on a face it is
//! the face's left element, on both sides of the face restricted to the same
//! subdomain.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Classification, QuadratureRule};
use crate::poly::Jet;
use crate::reconstruction::{LocalFit, ReconstructionSpace};
use crate::sparse::CsrMatrix;
use crate::{Point, Vector};

/// Derivatives of an exact solution up to the bi-Laplacian at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExactJet {
    pub value: f64,
    pub grad: Vector,
    pub lap: f64,
    pub grad_lap: Vector,
    pub bilap: f64,
}

impl ExactJet {
    pub fn jet(&self) -> Jet {
        Jet {
            value: self.value,
            grad: self.grad,
            lap: self.lap,
            grad_lap: self.grad_lap,
        }
    }
}

/// A piecewise-smooth exact solution, given in closed form on each side.
pub trait ExactSolution: Send + Sync {
    /// Derivatives of the side-`side` branch at `p`.
    fn jet(&self, side: usize, p: &Point) -> ExactJet;
}

impl<F> ExactSolution for F
where
    F: Fn(usize, &Point) -> ExactJet + Send + Sync,
{
    fn jet(&self, side: usize, p: &Point) -> ExactJet {
        self(side, p)
    }
}

/// Coefficients and data of an interface problem. Source, boundary and jump
/// data are all derived from the exact solution so they are consistent by
/// construction.
#[derive(Clone)]
pub struct ProblemSpec {
    pub beta: [f64; 2],
    pub exact: Arc<dyn ExactSolution>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

/// Interface jump data at one point, with `n_0` the normal out of `Omega_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpData {
    /// `u_0 - u_1`.
    pub a1: f64,
    /// `n_0 . (grad u_0 - grad u_1)`.
    pub a2: f64,
    /// `beta_0 Delta u_0 - beta_1 Delta u_1`.
    pub a3: f64,
    /// `n_0 . (beta_0 grad Delta u_0 - beta_1 grad Delta u_1)`.
    pub a4: f64,
}

impl ProblemSpec {
    pub fn new(beta: [f64; 2], exact: Arc<dyn ExactSolution>) -> Result<Self> {
        if !(beta[0] > 0.0 && beta[1] > 0.0) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta:?}")));
        }
        Ok(Self { beta, exact })
    }

    pub fn exact_jet(&self, side: usize, p: &Point) -> ExactJet {
        self.exact.jet(side, p)
    }

    /// `f = beta_i Delta^2 u_i`.
    pub fn source(&self, side: usize, p: &Point) -> f64 {
        self.beta[side] * self.exact.jet(side, p).bilap
    }

    /// Dirichlet data `g1 = u`.
    pub fn g1(&self, side: usize, p: &Point) -> f64 {
        self.exact.jet(side, p).value
    }

    /// Neumann data `g2 = du/dn` for the outward normal `n`.
    pub fn g2(&self, side: usize, p: &Point, n: &Vector) -> f64 {
        self.exact.jet(side, p).grad.dot(n)
    }

    pub fn jumps(&self, p: &Point, n0: &Vector) -> JumpData {
        let u0 = self.exact.jet(0, p);
        let u1 = self.exact.jet(1, p);
        let [b0, b1] = self.beta;
        JumpData {
            a1: u0.value - u1.value,
            a2: n0.dot(&(u0.grad - u1.grad)),
            a3: b0 * u0.lap - b1 * u1.lap,
            a4: n0.dot(&(u0.grad_lap * b0 - u1.grad_lap * b1)),
        }
    }
}

/// How the penalties depend on the coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyScaling {
    /// `mu1 = eta / h^3` and `mu2 = eta / h` whatever `beta` is.
    #[default]
    Unweighted,
    /// Both penalties are multiplied by the largest `beta` on the surface:
    /// the subdomain's `beta` on a face, `max(beta_0, beta_1)` on the
    /// interface. The consistency terms carry `beta`, so this makes the
    /// coercivity threshold for `eta` independent of the coefficient;
    /// unweighted, it grows roughly linearly with `max beta`.
    Coefficient,
}

impl std::str::FromStr for PenaltyScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coefficient" => Ok(Self::Coefficient),
            "unweighted" => Ok(Self::Unweighted),
            other => Err(Error::InvalidInput(format!(
                "unknown penalty scaling '{other}' (expected coefficient or unweighted)"
            ))),
        }
    }
}

/// Penalty parameter `eta`; `mu1 = w eta / h^3` and `mu2 = w eta / h` with `h`
/// the face length on faces and the element diameter on the interface, and
/// `w` the coefficient weight selected by [`PenaltyScaling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub eta: f64,
    pub scaling: PenaltyScaling,
}

impl PenaltyConfig {
    pub fn new(eta: f64) -> Result<Self> {
        Self::with_scaling(eta, PenaltyScaling::default())
    }

    pub fn with_scaling(eta: f64, scaling: PenaltyScaling) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("penalty eta must be positive, got {eta}")));
        }
        Ok(Self { eta, scaling })
    }

    /// Coefficient weight for a surface whose largest `beta` is `beta_max`.
    pub fn weight(&self, beta_max: f64) -> f64 {
        match self.scaling {
            PenaltyScaling::Coefficient => beta_max,
            PenaltyScaling::Unweighted => 1.0,
        }
    }

    /// `mu1` without the coefficient weight.
    pub fn mu1(&self, h: f64) -> f64 {
        self.eta / (h * h * h)
    }

    /// `mu2` without the coefficient weight.
    pub fn mu2(&self, h: f64) -> f64 {
        self.eta / h
    }
}

/// Default volume quadrature order for degree `m`; surface rules use one more.
pub fn default_quad_order(m: usize) -> usize {
    2 * m
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// One independent piece of the assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Group {
    Volume { element: usize, side: usize },
    Face { face: usize, side: usize },
    Interface { element: usize },
}

/// All assembly groups in a fixed order: volumes, faces, interfaces.
pub(crate) fn groups(cls: &Classification) -> Vec<Group> {
    let mesh = cls.mesh();
    let mut out = Vec::new();
    for element in 0..mesh.num_elements() {
        for side in 0..2 {
            if cls.has_side(element, side) {
                out.push(Group::Volume { element, side });
            }
        }
    }
    for face in 0..mesh.num_faces() {
        for side in 0..2 {
            if cls.face_has_side(face, side) {
                out.push(Group::Face { face, side });
            }
        }
    }
    out.extend(cls.cut_elements().map(|element| Group::Interface { element }));
    out
}

/// The traces entering a surface integral: the `+` fit and, unless on the
/// boundary, the `-` fit, with their coefficients of `beta`.
pub(crate) struct SurfaceSides<'a> {
    pub plus: (&'a LocalFit, f64),
    pub minus: Option<(&'a LocalFit, f64)>,
    /// `h_e` or `h_K`.
    pub h: f64,
    pub rule: QuadratureRule,
    /// Side of the `+` trace; used for boundary data.
    pub plus_side: usize,
}

pub(crate) fn surface_sides<'a>(
    space: &'a ReconstructionSpace,
    cls: &Classification,
    problem_beta: [f64; 2],
    group: Group,
    order: usize,
) -> Result<SurfaceSides<'a>> {
    let mesh = cls.mesh();
    let missing = |k: usize, side: usize| Error::EmptyRegion { element: k, side };
    match group {
        Group::Face { face, side } => {
            let f = mesh.face(face);
            let plus = space.fit(f.left, side).ok_or_else(|| missing(f.left, side))?;
            let minus = match f.right {
                Some(r) => Some((space.fit(r, side).ok_or_else(|| missing(r, side))?, problem_beta[side])),
                None => None,
            };
            Ok(SurfaceSides {
                plus: (plus, problem_beta[side]),
                minus,
                h: mesh.face_diameter(face),
                rule: cls.quad_face(face, side, order)?,
                plus_side: side,
            })
        }
        Group::Interface { element } => {
            let f0 = space.fit(element, 0).ok_or_else(|| missing(element, 0))?;
            let f1 = space.fit(element, 1).ok_or_else(|| missing(element, 1))?;
            Ok(SurfaceSides {
                plus: (f0, problem_beta[0]),
                minus: Some((f1, problem_beta[1])),
                h: mesh.element_diameter(element),
                rule: cls.quad_interface(element, order)?,
                plus_side: 0,
            })
        }
        Group::Volume { .. } => unreachable!("volume groups have no traces"),
    }
}

/// Sorted union of the DOFs of `fits`, and for each fit the position of its
/// local DOFs in the union.
fn union_dofs(fits: &[&LocalFit]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut all: Vec<usize> = fits.iter().flat_map(|f| f.dofs.iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    let maps = fits
        .iter()
        .map(|f| f.dofs.iter().map(|d| all.binary_search(d).unwrap()).collect())
        .collect();
    (all, maps)
}

/// Columns of the trace matrix: `J, A3, G, A2, {v}, {n . grad v}`.
const TRACE_COLS: usize = 6;

/// Fills `w` (`n x 6`) with the trace quantities of every union basis function.
fn trace_matrix(
    sides: &SurfaceSides<'_>,
    maps: &[Vec<usize>],
    p: &Point,
    n: &Vector,
    jets: &mut Vec<Jet>,
    w: &mut DMatrix<f64>,
) {
    w.fill(0.0);
    let avg = if sides.minus.is_some() { 0.5 } else { 1.0 };
    let (fit, beta) = sides.plus;
    fit.basis_jets(p, jets);
    for (j, &a) in jets.iter().zip(&maps[0]) {
        let dn = n.dot(&j.grad);
        w[(a, 0)] += j.value;
        w[(a, 1)] += avg * beta * n.dot(&j.grad_lap);
        w[(a, 2)] += dn;
        w[(a, 3)] += avg * beta * j.lap;
        w[(a, 4)] += avg * j.value;
        w[(a, 5)] += avg * dn;
    }
    if let Some((fit, beta)) = sides.minus {
        fit.basis_jets(p, jets);
        for (j, &a) in jets.iter().zip(&maps[1]) {
            let dn = n.dot(&j.grad);
            w[(a, 0)] -= j.value;
            w[(a, 1)] += avg * beta * n.dot(&j.grad_lap);
            w[(a, 2)] -= dn;
            w[(a, 3)] += avg * beta * j.lap;
            w[(a, 4)] += avg * j.value;
            w[(a, 5)] += avg * dn;
        }
    }
}

/// Local dense contribution of one group.
struct Local {
    dofs: Vec<usize>,
    /// Row-major `dofs.len()` square block.
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

fn local_volume(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    element: usize,
    side: usize,
    order: usize,
) -> Result<Local> {
    let fit = space.fit(element, side).ok_or(Error::EmptyRegion { element, side })?;
    let rule = cls.quad_bulk(element, side, order)?;
    let n = fit.dofs.len();
    let beta = problem.beta[side];
    let mut lap = DMatrix::zeros(n, rule.len());
    let mut weighted = DMatrix::zeros(n, rule.len());
    let mut jets = Vec::new();
    let mut rhs = DVector::zeros(n);
    for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        fit.basis_jets(p, &mut jets);
        let f = problem.source(side, p);
        for (a, j) in jets.iter().enumerate() {
            lap[(a, q)] = j.lap;
            weighted[(a, q)] = w * beta * j.lap;
            rhs[a] += w * f * j.value;
        }
    }
    let m = weighted * lap.transpose();
    let m = (&m + m.transpose()) * 0.5;
    Ok(Local {
        dofs: fit.dofs.clone(),
        matrix: row_major(&m),
        rhs: rhs.iter().copied().collect(),
    })
}

fn local_surface(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    penalty: &PenaltyConfig,
    group: Group,
    order: usize,
) -> Result<Local> {
    let sides = surface_sides(space, cls, problem.beta, group, order)?;
    let mut fits = vec![sides.plus.0];
    if let Some((f, _)) = sides.minus {
        fits.push(f);
    }
    let (dofs, maps) = union_dofs(&fits);
    let n = dofs.len();
    let beta_max = sides.minus.map_or(sides.plus.1, |(_, b)| b.max(sides.plus.1));
    let w = penalty.weight(beta_max);
    let (mu1, mu2) = (w * penalty.mu1(sides.h), w * penalty.mu2(sides.h));
    #[rustfmt::skip]
    let q = Matrix4::new(
        mu1, 1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, mu2, -1.0,
        0.0, 0.0, -1.0, 0.0,
    );
    let is_interface = matches!(group, Group::Interface { .. });
    let mut w = DMatrix::zeros(n, TRACE_COLS);
    let mut jets = Vec::new();
    let mut mat = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for ((p, weight), normal) in sides
        .rule
        .points
        .iter()
        .zip(&sides.rule.weights)
        .zip(&sides.rule.normals)
    {
        trace_matrix(&sides, &maps, p, normal, &mut jets, &mut w);
        let w4 = w.columns(0, 4);
        let wq = w4 * q;
        mat.gemm(*weight, &wq, &w4.transpose(), 1.0);
        // Data coefficients against the columns of `w`.
        let data: Option<[f64; TRACE_COLS]> = if is_interface {
            let d = problem.jumps(p, normal);
            Some([mu1 * d.a1, d.a1, mu2 * d.a2, -d.a2, -d.a4, d.a3])
        } else if sides.minus.is_none() {
            let g1 = problem.g1(sides.plus_side, p);
            let g2 = problem.g2(sides.plus_side, p, normal);
            Some([mu1 * g1, g1, mu2 * g2, -g2, 0.0, 0.0])
        } else {
            None
        };
        if let Some(c) = data {
            for a in 0..n {
                rhs[a] += weight * (0..TRACE_COLS).map(|k| w[(a, k)] * c[k]).sum::<f64>();
            }
        }
    }
    let sym = (&mat + mat.transpose()) * 0.5;
    Ok(Local {
        dofs,
        matrix: row_major(&sym),
        rhs: rhs.iter().copied().collect(),
    })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn check_orders(space: &ReconstructionSpace, quad_order: usize) -> Result<()> {
    let m = space.degree();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "polynomial degree must be at least 2, got {m}"
        )));
    }
    if quad_order < 2 * m {
        return Err(Error::InvalidInput(format!(
            "quadrature order {quad_order} is below 2m = {}",
            2 * m
        )));
    }
    Ok(())
}

/// Assembles the matrix `A_{ij} = B_h(lambda_j, lambda_i)` and the vector
/// `b_i = l_h(lambda_i)`. Volume integrals use `quad_order`, surface integrals
/// `quad_order + 1`.
pub fn assemble(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    penalty: &PenaltyConfig,
    quad_order: usize,
) -> Result<LinearSystem> {
    check_orders(space, quad_order)?;
    let groups = groups(cls);
    let locals: Vec<Result<Local>> = groups
        .par_iter()
        .map(|&g| match g {
            Group::Volume { element, side } => local_volume(space, cls, problem, element, side, quad_order),
            _ => local_surface(space, cls, problem, penalty, g, quad_order + 1),
        })
        .collect();
    let locals = locals.into_iter().collect::<Result<Vec<_>>>()?;
    // Accumulation runs serially in group order, so the result does not
    // depend on the number of threads.
    let mut matrix = CsrMatrix::from_groups(space.num_dofs(), locals.iter().map(|l| l.dofs.as_slice()));
    let mut rhs = vec![0.0; space.num_dofs()];
    for l in &locals {
        matrix.add_block(&l.dofs, &l.matrix);
        for (&d, v) in l.dofs.iter().zip(&l.rhs) {
            rhs[d] += v;
        }
    }
    Ok(LinearSystem { matrix, rhs })
}

pub fn assemble_bilinear(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    penalty: &PenaltyConfig,
    quad_order: usize,
) -> Result<CsrMatrix> {
    assemble(space, cls, problem, penalty, quad_order).map(|s| s.matrix)
}

pub fn assemble_linear(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    penalty: &PenaltyConfig,
    quad_order: usize,
) -> Result<Vec<f64>> {
    assemble(space, cls, problem, penalty, quad_order).map(|s| s.rhs)
}
