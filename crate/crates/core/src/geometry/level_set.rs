//! Built-in level-set descriptions of the interface. Negative values lie in
//! `Omega_0`, positive values in `Omega_1`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::{Point, Vector};

pub trait LevelSet: Send + Sync + Debug {
    fn value(&self, p: &Point) -> f64;
    fn gradient(&self, p: &Point) -> Vector;
}

/// `|x - c|^2 - r^2`.
#[derive(Debug, Clone, Copy)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }
}

impl LevelSet for Circle {
    fn value(&self, p: &Point) -> f64 {
        (p - self.center).norm_squared() - self.radius * self.radius
    }

    fn gradient(&self, p: &Point) -> Vector {
        2.0 * (p - self.center)
    }
}

/// `a x^2 + b y^2 - 1`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub a: f64,
    pub b: f64,
}

impl LevelSet for Ellipse {
    fn value(&self, p: &Point) -> f64 {
        self.a * p.x * p.x + self.b * p.y * p.y - 1.0
    }

    fn gradient(&self, p: &Point) -> Vector {
        Vector::new(2.0 * self.a * p.x, 2.0 * self.b * p.y)
    }
}

/// Polar star `rho - (r0 + amplitude * sin(lobes * theta))` centred at the origin.
#[derive(Debug, Clone, Copy)]
pub struct Star {
    pub r0: f64,
    pub amplitude: f64,
    pub lobes: f64,
}

impl Star {
    /// Five-pointed star `r = 1/2 + sin(5 theta) / 7`.
    pub fn five_pointed() -> Self {
        Self {
            r0: 0.5,
            amplitude: 1.0 / 7.0,
            lobes: 5.0,
        }
    }

    pub fn radius_at(&self, theta: f64) -> f64 {
        self.r0 + self.amplitude * (self.lobes * theta).sin()
    }
}

impl LevelSet for Star {
    fn value(&self, p: &Point) -> f64 {
        let rho = p.coords.norm();
        rho - self.radius_at(p.y.atan2(p.x))
    }

    fn gradient(&self, p: &Point) -> Vector {
        let rho2 = p.coords.norm_squared();
        if rho2 == 0.0 {
            return Vector::zeros();
        }
        let rho = rho2.sqrt();
        let theta = p.y.atan2(p.x);
        let dr = self.amplitude * self.lobes * (self.lobes * theta).cos();
        p.coords / rho - dr * Vector::new(-p.y, p.x) / rho2
    }
}

/// `n . x - offset`; mostly useful in tests.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlane {
    pub normal: Vector,
    pub offset: f64,
}

impl LevelSet for HalfPlane {
    fn value(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    fn gradient(&self, _p: &Point) -> Vector {
        self.normal
    }
}

/// `inner + delta`; used to push the interface off mesh vertices.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub inner: Arc<dyn LevelSet>,
    pub delta: f64,
}

impl LevelSet for Shifted {
    fn value(&self, p: &Point) -> f64 {
        self.inner.value(p) + self.delta
    }

    fn gradient(&self, p: &Point) -> Vector {
        self.inner.gradient(p)
    }
}

/// Unit normal on the interface pointing from `Omega_0` to `Omega_1`.
pub fn interface_normal(ls: &dyn LevelSet, p: &Point) -> Result<Vector> {
    let g = ls.gradient(p);
    let norm = g.norm();
    if !(norm >= 1e-8) {
        return Err(Error::DegenerateGradient { x: p.x, y: p.y });
    }
    Ok(g / norm)
}

/// Root of the level set on the segment `[a, b]`, by bisection followed by a
/// safeguarded Newton polish along the segment.
pub fn edge_root(ls: &dyn LevelSet, a: &Point, b: &Point) -> Result<Point> {
    let (fa, fb) = (ls.value(a), ls.value(b));
    if fa == 0.0 {
        return Ok(*a);
    }
    if fb == 0.0 {
        return Ok(*b);
    }
    if fa * fb > 0.0 {
        return Err(Error::InvalidInput(format!(
            "no sign change on segment ({}, {}) -> ({}, {})",
            a.x, a.y, b.x, b.y
        )));
    }
    let d = b - a;
    // Local scale of phi: the end values, or the variation along the segment
    // when both ends lie close to the interface.
    let mid = a + d * 0.5;
    let scale = fa.abs().max(fb.abs()).max(ls.gradient(&mid).norm() * d.norm());
    let tol = 1e-12 * scale;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut f_lo = fa;
    let mut t = 0.5;
    let mut converged = false;
    for _ in 0..200 {
        t = 0.5 * (lo + hi);
        let f = ls.value(&(a + d * t));
        if f.abs() <= tol {
            converged = true;
            break;
        }
        if (f < 0.0) == (f_lo < 0.0) {
            lo = t;
            f_lo = f;
        } else {
            hi = t;
        }
        if hi - lo < 1e-6 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "edge root on ({}, {}) -> ({}, {}) after 200 bisections",
            a.x, a.y, b.x, b.y
        )));
    }
    // Safeguarded Newton polish: the bracket is updated from every iterate
    // and steps leaving it fall back to bisection.
    let mut best = (f64::INFINITY, t);
    for _ in 0..100 {
        let p = a + d * t;
        let f = ls.value(&p);
        if f.abs() < best.0 {
            best = (f.abs(), t);
        }
        if f == 0.0 || f.abs() <= tol * 1e-3 {
            break;
        }
        if (f < 0.0) == (f_lo < 0.0) {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1e-300) {
            break;
        }
        let df = ls.gradient(&p).dot(&d);
        let next = t - f / df;
        t = if next > lo && next < hi && next.is_finite() {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    let t = best.1;
    let p = a + d * t;
    if ls.value(&p).abs() > tol {
        return Err(Error::NoConvergence(format!(
            "edge root polish on ({}, {}) -> ({}, {})",
            a.x, a.y, b.x, b.y
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn edge_roots() {
        let circle = Circle::new(Point::origin(), 0.5);
        let p = edge_root(&circle, &Point::new(0.0, 0.0), &Point::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(p, Point::new(0.5, 0.0), epsilon = 1e-13);

        let line = HalfPlane {
            normal: Vector::new(1.0, 0.0),
            offset: 0.0,
        };
        let p = edge_root(&line, &Point::new(-1.0, 3.0), &Point::new(1.0, 3.0)).unwrap();
        assert_relative_eq!(p, Point::new(0.0, 3.0), epsilon = 1e-13);

        let ellipse = Ellipse { a: 2.0, b: 3.0 };
        let p = edge_root(&ellipse, &Point::new(0.0, 0.0), &Point::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(p, Point::new(0.5f64.sqrt(), 0.0), epsilon = 1e-13);
        assert!(ellipse.value(&p).abs() <= 1e-12);

        assert!(edge_root(&circle, &Point::new(0.0, 0.0), &Point::new(0.1, 0.0)).is_err());
    }

    #[test]
    fn normals_point_outward_on_circle() {
        let circle = Circle::new(Point::origin(), 0.5);
        let n = interface_normal(&circle, &Point::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(n, Vector::new(1.0, 0.0), epsilon = 1e-15);
        let n = interface_normal(&circle, &Point::new(0.0, -0.5)).unwrap();
        assert_relative_eq!(n, Vector::new(0.0, -1.0), epsilon = 1e-15);
        assert!(matches!(
            interface_normal(&circle, &Point::origin()),
            Err(Error::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn star_gradient_matches_finite_differences() {
        let star = Star::five_pointed();
        let eps = 1e-6;
        for k in 0..40 {
            let th = 0.157 * k as f64 + 0.01;
            let p = Point::new(0.6 * th.cos(), 0.6 * th.sin());
            let fd = Vector::new(
                (star.value(&(p + Vector::x() * eps)) - star.value(&(p - Vector::x() * eps))) / (2.0 * eps),
                (star.value(&(p + Vector::y() * eps)) - star.value(&(p - Vector::y() * eps))) / (2.0 * eps),
            );
            assert_relative_eq!(star.gradient(&p), fd, epsilon = 1e-7);
        }
    }
}
