//! Interface geometry: element/face classification against a level set and
//! quadrature over the cut pieces `K^0`, `K^1`, `Gamma_K`, `e^0`, `e^1`.
//!
//! Inside a cut element the interface is split into chords whose endpoints lie
//! on `{phi = 0}`. Each chord is recursively halved until the arc's deviation
//! from it (the sagitta) falls below `geom_tol * h_K^2`. Points on the arc are
//! parameterised over the chord and projected onto the zero level along the
//! chord normal, so the arc-length Jacobian is available in closed form and
//! Gauss rules on the pieces converge spectrally.

pub mod level_set;
pub mod quadrature;

use std::sync::Arc;

use crate::error::{Assumption, Error, Result};
use crate::mesh::Mesh;
use crate::{Point, Vector};

pub use level_set::{edge_root, interface_normal, Circle, Ellipse, HalfPlane, LevelSet, Shifted, Star};
pub use quadrature::{QuadratureRule, Region};

use quadrature::{gauss_legendre, points_for_order, push_fan, push_segment, push_triangle};

/// Default sagitta tolerance factor: chords are refined until the sagitta is
/// below `DEFAULT_GEOM_TOL * h_K^2`.
pub const DEFAULT_GEOM_TOL: f64 = 1e-3;

const EDGE_SAMPLES: usize = 32;
const VERTEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementTag {
    /// Entirely inside `Omega_side` (`T_h^{side, o}`).
    Interior(usize),
    /// Intersected by the interface (`T_h^Gamma`).
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceTag {
    Side(usize),
    Cut,
}

/// A piece of `Gamma_K` between two points on the interface, parameterised by
/// offsets along the normal of the chord joining them.
#[derive(Debug, Clone, Copy)]
pub struct ArcPiece {
    pub start: Point,
    pub end: Point,
    /// Pieces far shorter than the element (slivers left by a vertex
    /// perturbation) are integrated along the chord itself.
    pub straight: bool,
}

/// Geometry of one cut element.
#[derive(Debug, Clone)]
pub struct CutCell {
    /// Local index of the vertex separated from the other two by the interface.
    pub lone_vertex: usize,
    /// Crossing on the edge from the lone vertex to the next (ccw) vertex.
    pub entry: Point,
    /// Crossing on the edge from the previous vertex back to the lone vertex.
    pub exit: Point,
    /// Chord subdivision of `Gamma_K`, ordered from `entry` to `exit`.
    pub arc: Vec<ArcPiece>,
}

#[derive(Debug, Clone)]
pub struct Classification {
    mesh: Arc<Mesh>,
    level_set: Arc<dyn LevelSet>,
    element_tags: Vec<ElementTag>,
    face_tags: Vec<FaceTag>,
    face_roots: Vec<Option<Point>>,
    cut_cells: Vec<Option<CutCell>>,
    anchors: Vec<[Option<usize>; 2]>,
    geom_tol: f64,
    perturbation: Option<f64>,
}

impl Classification {
    pub fn new(mesh: Arc<Mesh>, level_set: Arc<dyn LevelSet>) -> Result<Self> {
        Self::with_tolerance(mesh, level_set, DEFAULT_GEOM_TOL)
    }

    /// Classifies every element and face of `mesh` against `level_set`.
    ///
    /// If the interface passes within `1e-12` of a mesh vertex the level set is
    /// shifted by `1e-10 h` (repeatedly if needed) and the shift is recorded.
    pub fn with_tolerance(mesh: Arc<Mesh>, level_set: Arc<dyn LevelSet>, geom_tol: f64) -> Result<Self> {
        if !(geom_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "geom_tol must be positive, got {geom_tol}"
            )));
        }
        let touches = |ls: &dyn LevelSet| mesh.vertices().iter().any(|v| ls.value(v).abs() < VERTEX_TOL);
        if !touches(level_set.as_ref()) {
            return Self::build(mesh, level_set, geom_tol, None);
        }
        // Try +delta first; a shift in that direction can turn a chord between
        // two touched vertices into a doubly crossed face, so fall back to the
        // opposite sign (and then larger shifts) when that happens.
        let step = 1e-10 * mesh.h();
        let mut last_err = None;
        for k in 1..=4 {
            for sign in [1.0, -1.0] {
                let delta = sign * k as f64 * step;
                let ls: Arc<dyn LevelSet> = Arc::new(Shifted {
                    inner: level_set.clone(),
                    delta,
                });
                if touches(ls.as_ref()) {
                    continue;
                }
                match Self::build(mesh.clone(), ls, geom_tol, Some(delta)) {
                    Err(
                        e @ Error::AssumptionViolation {
                            which: Assumption::SingleFaceCrossing,
                            ..
                        },
                    ) => last_err = Some(e),
                    Ok(cls) => {
                        log::info!("interface touches a mesh vertex; level set shifted by {delta:e}");
                        return Ok(cls);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Err(last_err
            .unwrap_or_else(|| Error::InvalidInput("interface keeps touching mesh vertices after perturbation".into())))
    }

    fn build(mesh: Arc<Mesh>, ls: Arc<dyn LevelSet>, geom_tol: f64, perturbation: Option<f64>) -> Result<Self> {
        let vertex_values: Vec<f64> = mesh.vertices().iter().map(|v| ls.value(v)).collect();
        let side_of = |v: usize| usize::from(vertex_values[v] > 0.0);

        let mut face_tags = Vec::with_capacity(mesh.num_faces());
        let mut face_roots = Vec::with_capacity(mesh.num_faces());
        for (e, face) in mesh.faces().iter().enumerate() {
            let [a, b] = mesh.face_points(e);
            let changes = sign_changes(ls.as_ref(), &a, &b);
            if changes > 1 {
                return Err(Error::AssumptionViolation {
                    which: Assumption::SingleFaceCrossing,
                    detail: format!("face {e} is crossed {changes} times; refine the mesh"),
                });
            }
            let (sa, sb) = (side_of(face.vertices[0]), side_of(face.vertices[1]));
            if sa == sb {
                face_tags.push(FaceTag::Side(sa));
                face_roots.push(None);
            } else {
                face_tags.push(FaceTag::Cut);
                face_roots.push(Some(edge_root(ls.as_ref(), &a, &b)?));
            }
        }

        let mut element_tags = Vec::with_capacity(mesh.num_elements());
        let mut cut_cells = Vec::with_capacity(mesh.num_elements());
        for k in 0..mesh.num_elements() {
            let t = mesh.triangles()[k];
            let sides = [side_of(t[0]), side_of(t[1]), side_of(t[2])];
            if sides[0] == sides[1] && sides[1] == sides[2] {
                check_uncut_interior(ls.as_ref(), &mesh, k, sides[0])?;
                element_tags.push(ElementTag::Interior(sides[0]));
                cut_cells.push(None);
                continue;
            }
            let lone = (0..3)
                .find(|&j| sides[j] != sides[(j + 1) % 3] && sides[j] != sides[(j + 2) % 3])
                .expect("two of three binary labels agree");
            let faces = mesh.element_faces(k);
            let entry = face_roots[faces[lone]].expect("edge leaving the lone vertex is cut");
            let exit = face_roots[faces[(lone + 2) % 3]].expect("edge entering the lone vertex is cut");
            let tol = geom_tol * mesh.element_diameter(k).powi(2);
            let mut arc = Vec::new();
            let min_len = 1e-6 * mesh.element_diameter(k);
            subdivide_arc(ls.as_ref(), entry, exit, tol, min_len, 0, &mut arc)?;
            element_tags.push(ElementTag::Cut);
            cut_cells.push(Some(CutCell {
                lone_vertex: lone,
                entry,
                exit,
                arc,
            }));
        }

        let mut anchors = vec![[None, None]; mesh.num_elements()];
        for k in 0..mesh.num_elements() {
            match element_tags[k] {
                ElementTag::Interior(i) => anchors[k][i] = Some(k),
                ElementTag::Cut => {
                    let xk = mesh.barycenter(k);
                    for (side, anchor) in anchors[k].iter_mut().enumerate() {
                        let best = mesh
                            .moore_neighbors(k)
                            .into_iter()
                            .filter(|&j| element_tags[j] == ElementTag::Interior(side))
                            .map(|j| (mesh.nearness_key(&xk, j), j))
                            .min();
                        match best {
                            Some((_, j)) => *anchor = Some(j),
                            None => {
                                return Err(Error::AssumptionViolation {
                                    which: Assumption::InteriorNeighbour,
                                    detail: format!(
                                    "cut element {k} has no interior Moore neighbour on side {side}; refine the mesh"
                                ),
                                })
                            }
                        }
                    }
                }
            }
        }

        Ok(Self {
            mesh,
            level_set: ls,
            element_tags,
            face_tags,
            face_roots,
            cut_cells,
            anchors,
            geom_tol,
            perturbation,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// The level set actually used (including any vertex perturbation).
    pub fn level_set(&self) -> &dyn LevelSet {
        self.level_set.as_ref()
    }

    pub fn geom_tol(&self) -> f64 {
        self.geom_tol
    }

    /// Shift applied to the level set to move the interface off mesh vertices.
    pub fn perturbation(&self) -> Option<f64> {
        self.perturbation
    }

    pub fn element_tag(&self, k: usize) -> ElementTag {
        self.element_tags[k]
    }

    pub fn element_tags(&self) -> &[ElementTag] {
        &self.element_tags
    }

    pub fn face_tag(&self, e: usize) -> FaceTag {
        self.face_tags[e]
    }

    pub fn face_root(&self, e: usize) -> Option<Point> {
        self.face_roots[e]
    }

    pub fn cut_cell(&self, k: usize) -> Option<&CutCell> {
        self.cut_cells[k].as_ref()
    }

    pub fn is_cut(&self, k: usize) -> bool {
        self.element_tags[k] == ElementTag::Cut
    }

    /// Whether `|K^side| > 0`, i.e. `K` is in `T_h^side`.
    pub fn has_side(&self, k: usize, side: usize) -> bool {
        match self.element_tags[k] {
            ElementTag::Interior(i) => i == side,
            ElementTag::Cut => true,
        }
    }

    /// Whether `|e^side| > 0`.
    pub fn face_has_side(&self, e: usize, side: usize) -> bool {
        match self.face_tags[e] {
            FaceTag::Side(i) => i == side,
            FaceTag::Cut => true,
        }
    }

    /// `M^side(K)`: `K` itself for interior elements, the chosen interior
    /// Moore neighbour for cut elements, `None` if `K` has no part on `side`.
    pub fn anchor(&self, k: usize, side: usize) -> Option<usize> {
        self.anchors[k][side]
    }

    pub fn cut_elements(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.element_tags.len()).filter(|&k| self.is_cut(k))
    }

    pub fn interior_elements(&self, side: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.element_tags.len()).filter(move |&k| self.element_tags[k] == ElementTag::Interior(side))
    }

    /// Quadrature over `K^side`, exact to `order` on straight pieces.
    pub fn quad_bulk(&self, k: usize, side: usize, order: usize) -> Result<QuadratureRule> {
        let region = Region::Bulk { element: k, side };
        let mut rule = QuadratureRule::empty(region, order);
        let [a, b, c] = self.mesh.triangle_points(k);
        match self.element_tags[k] {
            ElementTag::Interior(i) if i == side => {
                push_triangle(a, b, c, order, &mut rule.points, &mut rule.weights);
            }
            ElementTag::Interior(_) => return Err(Error::EmptyRegion { element: k, side }),
            ElementTag::Cut => {
                let cell = self.cut_cells[k].as_ref().expect("cut element has geometry");
                let v = [a, b, c];
                let lone = cell.lone_vertex;
                let lone_side = usize::from(self.level_set.value(&v[lone]) > 0.0);
                let base_order = order + 2;
                if side == lone_side {
                    // Fan from the lone vertex over the arc entry -> exit.
                    for piece in &cell.arc {
                        let arc = ArcEval::new(self.level_set.as_ref(), piece);
                        push_fan(
                            v[lone],
                            |t| arc.eval(t),
                            order,
                            base_order,
                            &mut rule.points,
                            &mut rule.weights,
                        );
                    }
                } else {
                    // Quadrilateral-like part entry -> B -> C -> exit -> arc.
                    // The arc pieces before a split point q_j are fanned from B,
                    // the rest from C, and the triangle (B, C, q_j) fills the
                    // middle. The split maximises the worst fan angle so that
                    // no apex is nearly collinear with a piece it covers.
                    let vb = v[(lone + 1) % 3];
                    let vc = v[(lone + 2) % 3];
                    let arcs: Vec<ArcEval> = cell
                        .arc
                        .iter()
                        .map(|piece| ArcEval::new(self.level_set.as_ref(), piece))
                        .collect();
                    let split = best_split(&arcs, vb, vc);
                    let q = if split < arcs.len() {
                        cell.arc[split].start
                    } else {
                        cell.exit
                    };
                    push_triangle(vb, vc, q, order, &mut rule.points, &mut rule.weights);
                    for (i, arc) in arcs.iter().enumerate().rev() {
                        let apex = if i < split { vb } else { vc };
                        push_fan(
                            apex,
                            |t| {
                                let (p, d) = arc.eval(1.0 - t);
                                (p, -d)
                            },
                            order,
                            base_order,
                            &mut rule.points,
                            &mut rule.weights,
                        );
                    }
                }
            }
        }
        Ok(rule)
    }

    /// Quadrature over `Gamma_K` with normals `n_0`.
    pub fn quad_interface(&self, k: usize, order: usize) -> Result<QuadratureRule> {
        let cell = self.cut_cells[k]
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("interface quadrature requested on uncut element {k}")))?;
        let mut rule = QuadratureRule::empty(Region::Interface { element: k }, order);
        let (xt, wt) = gauss_legendre(points_for_order(order + 2));
        for piece in &cell.arc {
            let arc = ArcEval::new(self.level_set.as_ref(), piece);
            for (t, w) in xt.iter().zip(wt) {
                let (p, d) = arc.eval_checked(*t)?;
                rule.points.push(p);
                rule.weights.push(w * d.norm());
                rule.normals.push(interface_normal(self.level_set.as_ref(), &p)?);
            }
        }
        Ok(rule)
    }

    /// Quadrature over `e^side`, normals pointing out of the face's left element.
    pub fn quad_face(&self, e: usize, side: usize, order: usize) -> Result<QuadratureRule> {
        let mut rule = QuadratureRule::empty(Region::Face { face: e, side }, order);
        let [a, b] = self.mesh.face_points(e);
        match self.face_tags[e] {
            FaceTag::Side(s) if s == side => push_segment(a, b, order, &mut rule.points, &mut rule.weights),
            FaceTag::Side(_) => {
                return Err(Error::EmptyRegion {
                    element: self.mesh.face(e).left,
                    side,
                })
            }
            FaceTag::Cut => {
                let root = self.face_roots[e].expect("cut face has a root");
                let a_side = usize::from(self.level_set.value(&a) > 0.0);
                if a_side == side {
                    push_segment(a, root, order, &mut rule.points, &mut rule.weights);
                } else {
                    push_segment(root, b, order, &mut rule.points, &mut rule.weights);
                }
            }
        }
        let n = self.mesh.face_normal(e);
        rule.normals = vec![n; rule.points.len()];
        Ok(rule)
    }

    /// `|K^side|`.
    pub fn side_area(&self, k: usize, side: usize) -> Result<f64> {
        if !self.has_side(k, side) {
            return Ok(0.0);
        }
        Ok(self.quad_bulk(k, side, 1)?.measure())
    }

    /// `|Gamma_K|` (zero for uncut elements).
    pub fn interface_length(&self, k: usize) -> Result<f64> {
        if !self.is_cut(k) {
            return Ok(0.0);
        }
        Ok(self.quad_interface(k, 1)?.measure())
    }
}

/// Number of sign changes of `phi` over `EDGE_SAMPLES + 1` equispaced samples.
fn sign_changes(ls: &dyn LevelSet, a: &Point, b: &Point) -> usize {
    let mut changes = 0;
    let mut prev = ls.value(a) > 0.0;
    for s in 1..=EDGE_SAMPLES {
        let t = s as f64 / EDGE_SAMPLES as f64;
        let cur = ls.value(&(a + (b - a) * t)) > 0.0;
        if cur != prev {
            changes += 1;
        }
        prev = cur;
    }
    changes
}

/// Samples interior points of an element whose vertices all lie on `side` and
/// rejects it if the interface dips inside without crossing an edge.
fn check_uncut_interior(ls: &dyn LevelSet, mesh: &Mesh, k: usize, side: usize) -> Result<()> {
    const N: usize = 4;
    let [a, b, c] = mesh.triangle_points(k);
    for i in 1..N {
        for j in 1..(N - i) {
            let (s, t) = (i as f64 / N as f64, j as f64 / N as f64);
            let p = a + (b - a) * s + (c - a) * t;
            if usize::from(ls.value(&p) > 0.0) != side {
                return Err(Error::AssumptionViolation {
                    which: Assumption::SingleFaceCrossing,
                    detail: format!("interface enters element {k} without crossing its edges; refine the mesh"),
                });
            }
        }
    }
    Ok(())
}

fn subdivide_arc(
    ls: &dyn LevelSet,
    a: Point,
    b: Point,
    tol: f64,
    min_len: f64,
    depth: usize,
    out: &mut Vec<ArcPiece>,
) -> Result<()> {
    if (b - a).norm() < min_len {
        out.push(ArcPiece {
            start: a,
            end: b,
            straight: true,
        });
        return Ok(());
    }
    let piece = ArcPiece {
        start: a,
        end: b,
        straight: false,
    };
    let arc = ArcEval::new(ls, &piece);
    let (offset, _) = arc.offset(0.5)?;
    if offset.abs() <= tol || depth >= 24 {
        out.push(piece);
        return Ok(());
    }
    let (mid, _) = arc.eval_checked(0.5)?;
    subdivide_arc(ls, a, mid, tol, min_len, depth + 1, out)?;
    subdivide_arc(ls, mid, b, tol, min_len, depth + 1, out)
}

/// Evaluates `gamma(t)` and `gamma'(t)` for one arc piece.
/// Sine of the smallest angle, over a few sample points, between the ray
/// from `apex` and the arc traversed backwards; negative if the fan folds.
fn fan_quality(arc: &ArcEval<'_>, apex: Point) -> f64 {
    [0.02, 0.25, 0.5, 0.75, 0.98]
        .iter()
        .map(|&t| {
            let (p, d) = arc.eval(1.0 - t);
            let r = p - apex;
            let den = r.norm() * d.norm();
            if den > 0.0 {
                (r.y * d.x - r.x * d.y) / den
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Split index `j` in `0..=arcs.len()`: pieces `< j` are fanned from `b`,
/// the others from `c`. Ties prefer the largest `j`.
fn best_split(arcs: &[ArcEval<'_>], b: Point, c: Point) -> usize {
    let n = arcs.len();
    let qb: Vec<f64> = arcs.iter().map(|a| fan_quality(a, b)).collect();
    let qc: Vec<f64> = arcs.iter().map(|a| fan_quality(a, c)).collect();
    let mut suffix_c = vec![f64::INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix_c[i] = suffix_c[i + 1].min(qc[i]);
    }
    let mut best = (f64::NEG_INFINITY, n);
    let mut prefix_b = f64::INFINITY;
    for j in 0..=n {
        if j > 0 {
            prefix_b = prefix_b.min(qb[j - 1]);
        }
        let quality = prefix_b.min(suffix_c[j]);
        if quality >= best.0 {
            best = (quality, j);
        }
    }
    best.1
}

struct ArcEval<'a> {
    ls: &'a dyn LevelSet,
    start: Point,
    chord: Vector,
    normal: Vector,
    straight: bool,
}

impl<'a> ArcEval<'a> {
    fn new(ls: &'a dyn LevelSet, piece: &ArcPiece) -> Self {
        let chord = piece.end - piece.start;
        let len = chord.norm();
        Self {
            ls,
            start: piece.start,
            chord,
            normal: if len > 0.0 {
                Vector::new(-chord.y, chord.x) / len
            } else {
                Vector::zeros()
            },
            straight: piece.straight || len == 0.0,
        }
    }

    /// Offset `s` along the chord normal with `phi(c(t) + s n) = 0`, and `ds/dt`.
    fn offset(&self, t: f64) -> Result<(f64, f64)> {
        if self.straight {
            return Ok((0.0, 0.0));
        }
        let c = self.start + self.chord * t;
        let scale = self.chord.norm();
        let finish = |s: f64| {
            let g = self.ls.gradient(&(c + self.normal * s));
            (s, -g.dot(&self.chord) / g.dot(&self.normal))
        };
        let mut s = 0.0;
        for _ in 0..60 {
            let p = c + self.normal * s;
            let f = self.ls.value(&p);
            let dn = self.ls.gradient(&p).dot(&self.normal);
            if f == 0.0 {
                return Ok(finish(s));
            }
            if dn == 0.0 || !dn.is_finite() {
                break;
            }
            let step = f / dn;
            s -= step;
            if step.abs() <= 1e-9 * scale {
                // Quadratic convergence: one more step reaches roundoff.
                let p = c + self.normal * s;
                let dn = self.ls.gradient(&p).dot(&self.normal);
                if dn != 0.0 {
                    s -= self.ls.value(&p) / dn;
                }
                return Ok(finish(s));
            }
            if s.abs() > 2.0 * scale {
                break;
            }
        }
        Err(Error::NoConvergence(format!(
            "projection of chord point ({}, {}) onto the interface",
            c.x, c.y
        )))
    }

    fn eval_checked(&self, t: f64) -> Result<(Point, Vector)> {
        let (s, ds) = self.offset(t)?;
        Ok((
            self.start + self.chord * t + self.normal * s,
            self.chord + self.normal * ds,
        ))
    }

    fn eval(&self, t: f64) -> (Point, Vector) {
        // Chords were validated when the arc was built.
        self.eval_checked(t)
            .unwrap_or_else(|_| (self.start + self.chord * t, self.chord))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn circle_setup(n: usize) -> Classification {
        let mesh = Arc::new(Mesh::structured(Rect::symmetric_unit(), n).unwrap());
        Classification::new(mesh, Arc::new(Circle::new(Point::origin(), 0.5))).unwrap()
    }

    #[test]
    fn tags_follow_vertex_signs() {
        let cls = circle_setup(20);
        let mesh = cls.mesh();
        for k in 0..mesh.num_elements() {
            let signs: Vec<bool> = mesh
                .triangle_points(k)
                .iter()
                .map(|p| cls.level_set().value(p) < 0.0)
                .collect();
            match cls.element_tag(k) {
                ElementTag::Interior(0) => assert!(signs.iter().all(|&s| s)),
                ElementTag::Interior(_) => assert!(signs.iter().all(|&s| !s)),
                ElementTag::Cut => assert!(signs.iter().any(|&s| s) && signs.iter().any(|&s| !s)),
            }
        }
    }

    #[test]
    fn disk_area_and_circumference() {
        let cls = circle_setup(40);
        let mesh = cls.mesh();
        let mut inner = 0.0;
        let mut total = 0.0;
        let mut length = 0.0;
        for k in 0..mesh.num_elements() {
            let a0 = cls.side_area(k, 0).unwrap();
            let a1 = cls.side_area(k, 1).unwrap();
            inner += a0;
            total += a0 + a1;
            length += cls.interface_length(k).unwrap();
        }
        assert_relative_eq!(inner, PI / 4.0, epsilon = 1e-6);
        assert_relative_eq!(length, PI, epsilon = 1e-6);
        assert_relative_eq!(total, 4.0, max_relative = 1e-10);
    }

    #[test]
    fn uncut_bulk_rule_is_the_triangle_rule() {
        let cls = circle_setup(10);
        let k = cls.interior_elements(1).next().unwrap();
        let rule = cls.quad_bulk(k, 1, 4).unwrap();
        assert_relative_eq!(rule.measure(), cls.mesh().area(k), max_relative = 1e-14);
        assert!(matches!(cls.quad_bulk(k, 0, 4), Err(Error::EmptyRegion { .. })));
    }

    #[test]
    fn cut_pieces_recombine_to_the_triangle() {
        let cls = circle_setup(10);
        let f = |p: &Point| p.x * p.x * p.y;
        for k in cls.cut_elements() {
            let r0 = cls.quad_bulk(k, 0, 4).unwrap();
            let r1 = cls.quad_bulk(k, 1, 4).unwrap();
            assert!(r0.weights.iter().chain(&r1.weights).all(|&w| w > 0.0));
            let [a, b, c] = cls.mesh().triangle_points(k);
            let (mut p, mut w) = (Vec::new(), Vec::new());
            push_triangle(a, b, c, 4, &mut p, &mut w);
            let exact: f64 = p.iter().zip(&w).map(|(p, w)| w * f(p)).sum();
            assert_relative_eq!(
                r0.integrate(f) + r1.integrate(f),
                exact,
                epsilon = 1e-14,
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn interface_integrals_on_circle() {
        let cls = circle_setup(40);
        let (mut len, mut mx, mut x2) = (0.0, 0.0, 0.0);
        for k in cls.cut_elements() {
            let rule = cls.quad_interface(k, 6).unwrap();
            len += rule.measure();
            mx += rule.integrate(|p| p.x);
            x2 += rule.integrate(|p| p.x * p.x);
            for (p, n) in rule.points.iter().zip(&rule.normals) {
                assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-14);
                assert_relative_eq!(*n, p.coords / p.coords.norm(), epsilon = 1e-12);
            }
        }
        assert_relative_eq!(len, PI, epsilon = 1e-6);
        assert!(mx.abs() < 1e-8);
        assert_relative_eq!(x2, PI / 8.0, epsilon = 1e-6);
    }

    #[test]
    fn face_rules_split_at_the_root() {
        let cls = circle_setup(10);
        let mesh = cls.mesh();
        let mut seen_cut = false;
        for e in 0..mesh.num_faces() {
            match cls.face_tag(e) {
                FaceTag::Cut => {
                    seen_cut = true;
                    let r0 = cls.quad_face(e, 0, 5).unwrap();
                    let r1 = cls.quad_face(e, 1, 5).unwrap();
                    assert_relative_eq!(r0.measure() + r1.measure(), mesh.face_diameter(e), epsilon = 1e-12);
                }
                FaceTag::Side(s) => {
                    let r = cls.quad_face(e, s, 5).unwrap();
                    assert_relative_eq!(r.measure(), mesh.face_diameter(e), max_relative = 1e-14);
                    assert!(cls.quad_face(e, 1 - s, 5).is_err());
                }
            }
        }
        assert!(seen_cut);
    }

    #[test]
    fn cut_unit_segment_integrates_x() {
        // Two triangles sharing the edge (0,0)-(1,0), interface x = 0.5.
        let mesh = Mesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.3, 1.0),
                Point::new(0.6, -1.0),
            ],
            vec![[0, 1, 2], [0, 3, 1]],
        )
        .unwrap();
        let ls = HalfPlane {
            normal: Vector::new(1.0, 0.0),
            offset: 0.5,
        };
        // No interior neighbours exist, so only the face-level pieces are checked.
        let mesh = Arc::new(mesh);
        let err = Classification::new(mesh.clone(), Arc::new(ls));
        assert!(matches!(
            err,
            Err(Error::AssumptionViolation {
                which: Assumption::InteriorNeighbour,
                ..
            })
        ));
        let e = (0..mesh.num_faces())
            .find(|&e| {
                let [a, b] = mesh.face_points(e);
                a.y == 0.0 && b.y == 0.0
            })
            .unwrap();
        let [a, b] = mesh.face_points(e);
        let root = edge_root(&ls, &a, &b).unwrap();
        let (mut p0, mut w0, mut p1, mut w1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        push_segment(a, root, 3, &mut p0, &mut w0);
        push_segment(root, b, 3, &mut p1, &mut w1);
        let total: f64 = p0.iter().zip(&w0).chain(p1.iter().zip(&w1)).map(|(p, w)| w * p.x).sum();
        assert_relative_eq!(total, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn vertex_touching_interface_is_perturbed() {
        // The circle of radius 0.5 passes through the grid vertex (0.5, 0).
        let mesh = Arc::new(Mesh::structured(Rect::symmetric_unit(), 8).unwrap());
        let cls = Classification::new(mesh, Arc::new(Circle::new(Point::origin(), 0.5))).unwrap();
        assert!(cls.perturbation().is_some());
        for v in cls.mesh().vertices() {
            assert!(cls.level_set().value(v).abs() >= 1e-12);
        }
    }

    #[test]
    fn doubly_crossed_face_is_rejected() {
        // A small circle bulging through the middle of a single face.
        let mesh = Arc::new(Mesh::structured(Rect::symmetric_unit(), 2).unwrap());
        let ls = Circle::new(Point::new(0.5, -0.05), 0.2);
        assert!(matches!(
            Classification::new(mesh, Arc::new(ls)),
            Err(Error::AssumptionViolation {
                which: Assumption::SingleFaceCrossing,
                ..
            })
        ));
    }

    #[test]
    fn anchors_are_interior_moore_neighbours() {
        let cls = circle_setup(20);
        for k in cls.cut_elements() {
            for side in 0..2 {
                let m = cls.anchor(k, side).unwrap();
                assert_eq!(cls.element_tag(m), ElementTag::Interior(side));
                assert!(cls.mesh().moore_neighbors(k).contains(&m));
            }
        }
    }

    #[test]
    fn halving_the_sagitta_tolerance_does_not_hurt() {
        let mesh = Arc::new(Mesh::structured(Rect::symmetric_unit(), 20).unwrap());
        let ls: Arc<dyn LevelSet> = Arc::new(Circle::new(Point::origin(), 0.5));
        let mut prev_err: Option<(f64, f64)> = None;
        for tol in [1e-1, 5e-2, 2.5e-2, 1.25e-2] {
            let cls = Classification::with_tolerance(mesh.clone(), ls.clone(), tol).unwrap();
            let area: f64 = (0..mesh.num_elements()).map(|k| cls.side_area(k, 0).unwrap()).sum();
            let len: f64 = cls.cut_elements().map(|k| cls.interface_length(k).unwrap()).sum();
            let err = ((area - PI / 4.0).abs(), (len - PI).abs());
            if let Some(prev) = prev_err {
                assert!(err.0 <= prev.0 + 1e-14 && err.1 <= prev.1 + 1e-14);
            }
            prev_err = Some(err);
        }
    }

    #[test]
    fn classification_is_invariant_under_element_relabeling() {
        let base = Mesh::structured(Rect::symmetric_unit(), 12).unwrap();
        let n = base.num_elements();
        let perm: Vec<usize> = (0..n).map(|k| (k * 7 + 3) % n).collect();
        let mut tris = vec![[0; 3]; n];
        for (&p, t) in perm.iter().zip(base.triangles()) {
            tris[p] = *t;
        }
        let shuffled = Mesh::new(base.vertices().to_vec(), tris).unwrap();
        let ls: Arc<dyn LevelSet> = Arc::new(Ellipse { a: 2.0, b: 3.0 });
        let c0 = Classification::new(Arc::new(base), ls.clone()).unwrap();
        let c1 = Classification::new(Arc::new(shuffled), ls).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(c0.element_tag(k), c1.element_tag(p));
        }
    }
}
