//! Conforming triangular meshes of a rectangle, independent of any interface.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::{Point, Vector};

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Point::new(x0, y0),
            max: Point::new(x1, y1),
        }
    }

    /// The square `(-1, 1)^2` used by all benchmark problems.
    pub fn symmetric_unit() -> Self {
        Self::new(-1.0, -1.0, 1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }
}

/// A mesh edge. The vertex order follows the counterclockwise orientation of
/// the `left` element, so `normal()` points out of `left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// The element across this face from `element`, if any.
    pub fn neighbour_of(&self, element: usize) -> Option<usize> {
        if element == self.left {
            self.right
        } else if Some(element) == self.right {
            Some(self.left)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    vertex_elements: Vec<Vec<usize>>,
    element_diameter: Vec<f64>,
    face_diameter: Vec<f64>,
    inscribed_diameter: Vec<f64>,
    h: f64,
    nu: f64,
}

impl Mesh {
    /// Builds a mesh from raw vertex and triangle lists. Clockwise triangles are
    /// reoriented; degenerate or non-manifold input is rejected.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidInput("mesh has no triangles".into()));
        }
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!("triangle {k} references a missing vertex")));
            }
            let a = signed_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            if a.abs() <= f64::EPSILON * diameter_of(&vertices, t).powi(2) {
                return Err(Error::InvalidInput(format!("triangle {k} is degenerate")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }

        let mut faces: Vec<Face> = Vec::with_capacity(triangles.len() * 3 / 2 + 2);
        let mut element_faces = vec![[0usize; 3]; triangles.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.capacity());
        for (k, t) in triangles.iter().enumerate() {
            for j in 0..3 {
                let (a, b) = (t[j], t[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&f) => {
                        if faces[f].right.is_some() {
                            return Err(Error::InvalidInput(format!(
                                "edge ({a}, {b}) is shared by more than two triangles"
                            )));
                        }
                        faces[f].right = Some(k);
                        element_faces[k][j] = f;
                    }
                    None => {
                        lookup.insert(key, faces.len());
                        element_faces[k][j] = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            left: k,
                            right: None,
                        });
                    }
                }
            }
        }

        let mut vertex_elements = vec![Vec::new(); vertices.len()];
        for (k, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_elements[v].push(k);
            }
        }

        let element_diameter: Vec<f64> = triangles.iter().map(|t| diameter_of(&vertices, t)).collect();
        let face_diameter = faces
            .iter()
            .map(|f| (vertices[f.vertices[1]] - vertices[f.vertices[0]]).norm())
            .collect();
        let inscribed_diameter: Vec<f64> = triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
                let perimeter = (b - a).norm() + (c - b).norm() + (a - c).norm();
                4.0 * signed_area(&a, &b, &c) / perimeter
            })
            .collect();
        let h = element_diameter.iter().cloned().fold(0.0, f64::max);
        let rho_min = inscribed_diameter.iter().cloned().fold(f64::INFINITY, f64::min);

        Ok(Self {
            vertices,
            triangles,
            faces,
            element_faces,
            vertex_elements,
            element_diameter,
            face_diameter,
            inscribed_diameter,
            h,
            nu: h / rho_min,
        })
    }

    /// Uniform `n x n` grid of squares over `domain`, each split along the
    /// lower-left to upper-right diagonal.
    pub fn structured(domain: Rect, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "structured mesh needs n >= 2 subdivisions, got {n}"
            )));
        }
        if !(domain.max.x > domain.min.x && domain.max.y > domain.min.y) {
            return Err(Error::InvalidInput("empty domain rectangle".into()));
        }
        let dx = (domain.max.x - domain.min.x) / n as f64;
        let dy = (domain.max.y - domain.min.y) / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // Pin the last row/column to the exact rectangle bounds.
                let x = if i == n {
                    domain.max.x
                } else {
                    domain.min.x + i as f64 * dx
                };
                let y = if j == n {
                    domain.max.y
                } else {
                    domain.min.y + j as f64 * dy
                };
                vertices.push(Point::new(x, y));
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, triangles)
    }

    /// Red refinement: every triangle is split into four through its edge midpoints.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.faces.iter().map(|f| {
            let (a, b) = (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]);
            Point::from((a.coords + b.coords) * 0.5)
        }));
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, ef) in self.triangles.iter().zip(&self.element_faces) {
            let (a, b, c) = (t[0], t[1], t[2]);
            let (ab, bc, ca) = (nv + ef[0], nv + ef[1], nv + ef[2]);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Self::new(vertices, triangles).expect("refinement of a valid mesh is valid")
    }

    /// Parses the plain text format: `v x y` per vertex, `t i j k` per
    /// triangle (0-based), `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::MeshFormat {
                line: lineno + 1,
                message,
            };
            let mut tokens = line.split_whitespace();
            let tag = tokens.next().unwrap_or("");
            let rest: Vec<&str> = tokens.collect();
            match tag {
                "v" => {
                    if rest.len() != 2 {
                        return Err(bad(format!("expected `v x y`, got `{line}`")));
                    }
                    let x: f64 = rest[0].parse().map_err(|e| bad(format!("{e}")))?;
                    let y: f64 = rest[1].parse().map_err(|e| bad(format!("{e}")))?;
                    vertices.push(Point::new(x, y));
                }
                "t" => {
                    if rest.len() != 3 {
                        return Err(bad(format!("expected `t i j k`, got `{line}`")));
                    }
                    let mut t = [0usize; 3];
                    for (slot, tok) in t.iter_mut().zip(&rest) {
                        *slot = tok.parse().map_err(|e| bad(format!("{e}")))?;
                    }
                    triangles.push(t);
                }
                other => return Err(bad(format!("unknown record `{other}`"))),
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:e} {:e}", v.x, v.y);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, e: usize) -> &Face {
        &self.faces[e]
    }

    /// Faces of element `k`; entry `j` is the edge from local vertex `j` to `j + 1`.
    pub fn element_faces(&self, k: usize) -> [usize; 3] {
        self.element_faces[k]
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn face_points(&self, e: usize) -> [Point; 2] {
        let f = &self.faces[e];
        [self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]]
    }

    /// Unit normal of face `e` pointing out of its `left` element.
    pub fn face_normal(&self, e: usize) -> Vector {
        let [a, b] = self.face_points(e);
        let d = b - a;
        Vector::new(d.y, -d.x) / d.norm()
    }

    pub fn barycenter(&self, k: usize) -> Point {
        let [a, b, c] = self.triangle_points(k);
        Point::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Sort key ordering elements by barycenter distance from `centre`,
    /// ties broken by barycenter `y` then `x`. Quantised to `1e-9 h` so the
    /// order depends on the geometry only, not on element numbering or on
    /// rounding in how the vertices were produced.
    pub fn nearness_key(&self, centre: &Point, k: usize) -> [i64; 3] {
        let q = |v: f64| (v / (1e-9 * self.h)).round() as i64;
        let b = self.barycenter(k);
        [q((b - centre).norm()), q(b.y), q(b.x)]
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|k| self.area(k)).sum()
    }

    /// `h_K`, the element diameter (longest edge).
    pub fn element_diameter(&self, k: usize) -> f64 {
        self.element_diameter[k]
    }

    /// `h_e`, the face length.
    pub fn face_diameter(&self, e: usize) -> f64 {
        self.face_diameter[e]
    }

    /// `rho_K`, the diameter of the inscribed circle.
    pub fn inscribed_diameter(&self, k: usize) -> f64 {
        self.inscribed_diameter[k]
    }

    /// Global mesh size `h = max h_K`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Quasi-uniformity constant `nu = h / min rho_K`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elements[v]
    }

    /// Elements whose closure meets the closure of `k` (including `k`), sorted by id.
    pub fn moore_neighbors(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.triangles[k]
            .iter()
            .flat_map(|&v| self.vertex_elements[v].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether point `p` lies in the closed triangle `k` (with a small relative slack).
    pub fn contains(&self, k: usize, p: &Point) -> bool {
        let [a, b, c] = self.triangle_points(k);
        let tol = -1e-12 * self.element_diameter[k].powi(2);
        signed_area(&a, &b, p) >= tol && signed_area(&b, &c, p) >= tol && signed_area(&c, &a, p) >= tol
    }
}

pub(crate) fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn diameter_of(vertices: &[Point], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    (b - a).norm().max((c - b).norm()).max((a - c).norm())
}
