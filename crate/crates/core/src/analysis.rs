//! Error measures: the two mesh-dependent energy norms, the L2 norm,
//! convergence orders and CSV output of convergence tables.
//!
//! For a piecewise function `v` (one polynomial per element side):
//!
//! * `|||v|||^2   = sum |Delta v|^2 + h^-3 J(v)^2 + h^-1 G(v)^2` over the
//!   volume, faces and interface pieces,
//! * `|||v|||_e^2 = |||v|||^2 + h^3 |{grad Delta v}|^2 + h |{Delta v}|^2`
//!   over faces and interface pieces,
//!
//! with `J`, `G` the value and normal-derivative jumps of [`crate::dg`]
//! (one-sided traces on the boundary) and `h = h_e` on faces, `h_K` on
//! `Gamma_K`. No `beta` weighting is applied.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dg::{groups, Group, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::Classification;
use crate::poly::Jet;
use crate::reconstruction::ReconstructionSpace;
use crate::{Point, Vector};

/// Squared contributions of each term family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormBreakdown {
    pub volume: f64,
    pub face_jump: f64,
    pub interface_jump: f64,
    pub face_average: f64,
    pub interface_average: f64,
    /// `sum (v)^2` over the volume (the squared L2 norm).
    pub l2: f64,
}

impl NormBreakdown {
    pub fn dg_squared(&self) -> f64 {
        self.volume + self.face_jump + self.interface_jump
    }

    pub fn energy_squared(&self) -> f64 {
        self.dg_squared() + self.face_average + self.interface_average
    }

    fn add(&mut self, o: &NormBreakdown) {
        self.volume += o.volume;
        self.face_jump += o.face_jump;
        self.interface_jump += o.interface_jump;
        self.face_average += o.face_average;
        self.interface_average += o.interface_average;
        self.l2 += o.l2;
    }
}

/// Local polynomial coefficients of a discrete function, per element side.
struct DiscreteField<'a> {
    space: &'a ReconstructionSpace,
    coeffs: Vec<[Option<Vec<f64>>; 2]>,
}

impl<'a> DiscreteField<'a> {
    fn new(space: &'a ReconstructionSpace, num_elements: usize, u: &[f64]) -> Self {
        let coeffs = (0..num_elements)
            .into_par_iter()
            .map(|k| [space.local_coefficients(k, 0, u), space.local_coefficients(k, 1, u)])
            .collect();
        Self { space, coeffs }
    }

    fn jet(&self, k: usize, side: usize, p: &Point) -> Jet {
        match (&self.coeffs[k][side], self.space.fit(k, side)) {
            (Some(c), Some(fit)) => fit.basis.eval_jet(c, p),
            _ => Jet::default(),
        }
    }
}

/// Evaluates all norm terms of the piecewise function `v(k, side, p)`.
pub fn norm_terms<F>(cls: &Classification, order: usize, v: F) -> Result<NormBreakdown>
where
    F: Fn(usize, usize, &Point) -> Jet + Sync,
{
    let mesh = cls.mesh();
    let parts: Vec<Result<NormBreakdown>> = groups(cls)
        .par_iter()
        .map(|&g| {
            let mut out = NormBreakdown::default();
            match g {
                Group::Volume { element, side } => {
                    let rule = cls.quad_bulk(element, side, order)?;
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        let j = v(element, side, p);
                        out.volume += w * j.lap * j.lap;
                        out.l2 += w * j.value * j.value;
                    }
                }
                Group::Face { face, side } => {
                    let f = mesh.face(face);
                    let rule = cls.quad_face(face, side, order + 1)?;
                    let h = mesh.face_diameter(face);
                    let (jump, avg) = surface_terms(&rule.points, &rule.weights, &rule.normals, h, |p| {
                        (v(f.left, side, p), f.right.map(|r| v(r, side, p)))
                    });
                    out.face_jump = jump;
                    out.face_average = avg;
                }
                Group::Interface { element } => {
                    let rule = cls.quad_interface(element, order + 1)?;
                    let h = mesh.element_diameter(element);
                    let (jump, avg) = surface_terms(&rule.points, &rule.weights, &rule.normals, h, |p| {
                        (v(element, 0, p), Some(v(element, 1, p)))
                    });
                    out.interface_jump = jump;
                    out.interface_average = avg;
                }
            }
            Ok(out)
        })
        .collect();
    let mut total = NormBreakdown::default();
    for part in parts {
        total.add(&part?);
    }
    Ok(total)
}

fn surface_terms(
    points: &[Point],
    weights: &[f64],
    normals: &[Vector],
    h: f64,
    traces: impl Fn(&Point) -> (Jet, Option<Jet>),
) -> (f64, f64) {
    let (mut jump, mut avg) = (0.0, 0.0);
    for ((p, w), n) in points.iter().zip(weights).zip(normals) {
        let (plus, minus) = traces(p);
        let (j, g, a_gl, a_lap) = match minus {
            Some(m) => (
                plus.value - m.value,
                n.dot(&(plus.grad - m.grad)),
                (plus.grad_lap + m.grad_lap) * 0.5,
                0.5 * (plus.lap + m.lap),
            ),
            None => (plus.value, n.dot(&plus.grad), plus.grad_lap, plus.lap),
        };
        jump += w * (j * j / (h * h * h) + g * g / h);
        avg += w * (h * h * h * a_gl.norm_squared() + h * a_lap * a_lap);
    }
    (jump, avg)
}

/// Errors of one discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    /// `|||u - u_h|||_e`.
    pub energy_error: f64,
    /// `|||u - u_h|||`.
    pub dg_error: f64,
    pub l2_error: f64,
    pub breakdown: NormBreakdown,
}

/// Norms of `u - u_h` for the exact solution of `problem`, integrated with
/// rules of order `quad_order` (volume) and `quad_order + 1` (surfaces).
pub fn compute_errors(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    uh: &[f64],
    quad_order: usize,
) -> Result<ErrorReport> {
    let field = DiscreteField::new(space, cls.mesh().num_elements(), uh);
    let breakdown = norm_terms(cls, quad_order, |k, side, p| {
        problem.exact_jet(side, p).jet() - field.jet(k, side, p)
    })?;
    Ok(ErrorReport {
        h: cls.mesh().h(),
        dofs: space.num_dofs(),
        energy_error: breakdown.energy_squared().sqrt(),
        dg_error: breakdown.dg_squared().sqrt(),
        l2_error: breakdown.l2.sqrt(),
        breakdown,
    })
}

/// Norms of the discrete function with DOF values `u`.
pub fn discrete_norms(
    space: &ReconstructionSpace,
    cls: &Classification,
    u: &[f64],
    quad_order: usize,
) -> Result<NormBreakdown> {
    let field = DiscreteField::new(space, cls.mesh().num_elements(), u);
    norm_terms(cls, quad_order, |k, side, p| field.jet(k, side, p))
}

/// `sqrt(sum_K int (u - u_h)^2)`.
pub fn l2_error(
    space: &ReconstructionSpace,
    cls: &Classification,
    problem: &ProblemSpec,
    uh: &[f64],
    quad_order: usize,
) -> Result<f64> {
    compute_errors(space, cls, problem, uh, quad_order).map(|r| r.l2_error)
}

/// Largest `|||u_h|||_e / |||u_h|||` over `samples` random DOF vectors drawn
/// uniformly from `[-1, 1]` with the given seed.
pub fn norm_equivalence_probe(
    space: &ReconstructionSpace,
    cls: &Classification,
    samples: usize,
    seed: u64,
    quad_order: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u: Vec<f64> = (0..space.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = discrete_norms(space, cls, &u, quad_order)?;
        worst = worst.max((b.energy_squared() / b.dg_squared()).sqrt());
    }
    Ok(worst)
}

/// Orders `log(e_{k-1}/e_k) / log(h_{k-1}/h_k)` for consecutive entries.
pub fn eoc(h: &[f64], err: &[f64]) -> Result<Vec<f64>> {
    if h.len() != err.len() {
        return Err(Error::InvalidInput("mesh sizes and errors differ in length".into()));
    }
    if h.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NonMonotoneH);
    }
    Ok(h.windows(2)
        .zip(err.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect())
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub report: ErrorReport,
    pub assemble_ms: f64,
    pub solve_ms: f64,
}

/// Results on a sequence of meshes, coarse to fine.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

pub const CSV_HEADER: &str = "h,dofs,energy_err,dg_err,l2_err,eoc_energy,eoc_l2,assemble_ms,solve_ms";

impl ConvergenceTable {
    pub fn push(&mut self, row: ConvergenceRow) {
        self.rows.push(row);
    }

    fn hs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.report.h).collect()
    }

    pub fn eoc_energy(&self) -> Result<Vec<f64>> {
        eoc(
            &self.hs(),
            &self.rows.iter().map(|r| r.report.energy_error).collect::<Vec<_>>(),
        )
    }

    pub fn eoc_dg(&self) -> Result<Vec<f64>> {
        eoc(
            &self.hs(),
            &self.rows.iter().map(|r| r.report.dg_error).collect::<Vec<_>>(),
        )
    }

    pub fn eoc_l2(&self) -> Result<Vec<f64>> {
        eoc(
            &self.hs(),
            &self.rows.iter().map(|r| r.report.l2_error).collect::<Vec<_>>(),
        )
    }

    /// Writes the table as CSV. Floats carry 17 significant digits; the order
    /// columns are empty on the first row.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let (ee, el) = (self.eoc_energy()?, self.eoc_l2()?);
        writeln!(out, "{CSV_HEADER}")?;
        for (i, r) in self.rows.iter().enumerate() {
            let rate = |v: &[f64]| {
                if i == 0 {
                    String::new()
                } else {
                    format!("{:.16e}", v[i - 1])
                }
            };
            writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e}",
                r.report.h,
                r.report.dofs,
                r.report.energy_error,
                r.report.dg_error,
                r.report.l2_error,
                rate(&ee),
                rate(&el),
                r.assemble_ms,
                r.solve_ms
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV is ASCII"))
    }
}
