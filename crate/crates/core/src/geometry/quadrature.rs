//! Quadrature rules: Gauss-Legendre on segments and collapsed (Duffy) rules on
//! straight or curved-base triangles.

use std::sync::OnceLock;

use crate::{Point, Vector};

const MAX_GAUSS_POINTS: usize = 48;

/// Which part of the geometry a rule integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `K^side` (the whole element when uncut).
    Bulk { element: usize, side: usize },
    /// `Gamma_K`.
    Interface { element: usize },
    /// `e^side` (the whole face when uncut).
    Face { face: usize, side: usize },
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Unit normals at the points: `n_0` for interface rules, the normal out of
    /// the face's left element for face rules, empty for bulk rules.
    pub normals: Vec<Vector>,
    pub region: Region,
    /// Polynomial degree integrated exactly on straight pieces.
    pub order: usize,
}

impl QuadratureRule {
    pub(crate) fn empty(region: Region, order: usize) -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
            normals: Vec::new(),
            region,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of the weights: area, arc length or segment length of the region.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Gauss-Legendre nodes and weights with `n` points mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=MAX_GAUSS_POINTS).map(compute_gauss_legendre).collect());
    let (x, w) = &table[n.clamp(1, MAX_GAUSS_POINTS)];
    (x, w)
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points exact for degree `order` in one variable.
pub(crate) fn points_for_order(order: usize) -> usize {
    order / 2 + 1
}

/// Appends a Gauss-Legendre rule for the segment `[a, b]`.
pub(crate) fn push_segment(a: Point, b: Point, order: usize, points: &mut Vec<Point>, weights: &mut Vec<f64>) {
    let (x, w) = gauss_legendre(points_for_order(order));
    let len = (b - a).norm();
    for (t, wt) in x.iter().zip(w) {
        points.push(a + (b - a) * *t);
        weights.push(wt * len);
    }
}

/// Appends a collapsed rule for the straight triangle `(a, b, c)`, exact for
/// polynomials of degree `order`. The weights carry the signed area.
pub(crate) fn push_triangle(
    a: Point,
    b: Point,
    c: Point,
    order: usize,
    points: &mut Vec<Point>,
    weights: &mut Vec<f64>,
) {
    push_fan(a, |t| (b + (c - b) * t, c - b), order, order, points, weights);
}

/// Appends a rule for the region swept by segments from `apex` to a base
/// curve `t -> (gamma(t), gamma'(t))`, `t` in `[0, 1]`. The Jacobian
/// `s * cross(gamma - apex, gamma')` is signed, so pieces traversed clockwise
/// contribute negatively.
pub(crate) fn push_fan(
    apex: Point,
    base: impl Fn(f64) -> (Point, Vector),
    order: usize,
    base_order: usize,
    points: &mut Vec<Point>,
    weights: &mut Vec<f64>,
) {
    let (xs, ws) = gauss_legendre(points_for_order(order + 1));
    let (xt, wt) = gauss_legendre(points_for_order(base_order));
    for (t, w_t) in xt.iter().zip(wt) {
        let (g, dg) = base(*t);
        let r = g - apex;
        let jac = r.x * dg.y - r.y * dg.x;
        for (s, w_s) in xs.iter().zip(ws) {
            points.push(apex + r * *s);
            weights.push(w_t * w_s * s * jac);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for d in 0..(2 * n) {
                let q: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert_relative_eq!(q, 1.0 / (d as f64 + 1.0), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        let (a, b, c) = (Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0));
        for order in 0..=14 {
            let (mut p, mut w) = (Vec::new(), Vec::new());
            push_triangle(a, b, c, order, &mut p, &mut w);
            assert!(w.iter().all(|&w| w > 0.0));
            // int_T x^i y^j = i! j! / (i + j + 2)!
            for i in 0..=order {
                for j in 0..=(order - i) {
                    let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                    let q: f64 = p
                        .iter()
                        .zip(&w)
                        .map(|(p, w)| w * p.x.powi(i as i32) * p.y.powi(j as i32))
                        .sum();
                    assert_relative_eq!(q, exact, max_relative = 1e-12);
                }
            }
        }
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn curved_fan_gives_disk_sector() {
        // Quarter disk of radius 2 swept from the origin.
        let r = 2.0;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let (mut p, mut w) = (Vec::new(), Vec::new());
        push_fan(
            Point::origin(),
            |t| {
                let th = half_pi * t;
                (
                    Point::new(r * th.cos(), r * th.sin()),
                    Vector::new(-r * th.sin(), r * th.cos()) * half_pi,
                )
            },
            4,
            24,
            &mut p,
            &mut w,
        );
        let area: f64 = w.iter().sum();
        assert_relative_eq!(area, std::f64::consts::PI, max_relative = 1e-14);
    }
}
