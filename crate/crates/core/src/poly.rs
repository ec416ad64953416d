//! Scaled monomial basis `((x - c_x)/h)^a ((y - c_y)/h)^b`, ordered by total
//! degree, with the derivatives the discrete forms need (up to `grad Delta`).

use crate::{Point, Vector};

/// Number of monomials of total degree at most `m` in two variables.
pub fn dim(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Value, gradient, Laplacian and gradient of the Laplacian at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vector,
    pub lap: f64,
    pub grad_lap: Vector,
}

impl Jet {
    pub fn scaled(&self, s: f64) -> Jet {
        Jet {
            value: self.value * s,
            grad: self.grad * s,
            lap: self.lap * s,
            grad_lap: self.grad_lap * s,
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Jet) {
        self.value += s * other.value;
        self.grad += s * other.grad;
        self.lap += s * other.lap;
        self.grad_lap += s * other.grad_lap;
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;

    fn sub(self, rhs: Jet) -> Jet {
        Jet {
            value: self.value - rhs.value,
            grad: self.grad - rhs.grad,
            lap: self.lap - rhs.lap,
            grad_lap: self.grad_lap - rhs.grad_lap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMonomials {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    exponents: Vec<(usize, usize)>,
}

impl ScaledMonomials {
    pub fn new(center: Point, scale: f64, degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(dim(degree));
        for d in 0..=degree {
            for b in 0..=d {
                exponents.push((d - b, b));
            }
        }
        Self {
            center,
            scale,
            degree,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    fn powers(&self, p: &Point) -> ([f64; 16], [f64; 16]) {
        assert!(self.degree < 16, "polynomial degree {} too large", self.degree);
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        let (mut px, mut py) = ([0.0; 16], [0.0; 16]);
        px[0] = 1.0;
        py[0] = 1.0;
        for k in 1..=self.degree {
            px[k] = px[k - 1] * xi;
            py[k] = py[k - 1] * eta;
        }
        (px, py)
    }

    /// Basis values at `p`, written into `out` (length `dim()`).
    pub fn values(&self, p: &Point, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = px[a] * py[b];
        }
    }

    pub fn values_vec(&self, p: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.values(p, &mut out);
        out
    }

    /// Basis jets at `p`, written into `out` (length `dim()`).
    pub fn jets(&self, p: &Point, out: &mut [Jet]) {
        let (px, py) = self.powers(p);
        // x^e with the falling-factorial coefficient of its k-th derivative.
        let d = |pw: &[f64; 16], e: usize, k: usize| -> f64 {
            if e < k {
                0.0
            } else {
                let c: usize = ((e - k + 1)..=e).product();
                c as f64 * pw[e - k]
            }
        };
        let h = self.scale;
        let (h1, h2, h3) = (1.0 / h, 1.0 / (h * h), 1.0 / (h * h * h));
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            let lap = d(&px, a, 2) * py[b] + px[a] * d(&py, b, 2);
            let lap_x = d(&px, a, 3) * py[b] + d(&px, a, 1) * d(&py, b, 2);
            let lap_y = d(&px, a, 2) * d(&py, b, 1) + px[a] * d(&py, b, 3);
            *o = Jet {
                value: px[a] * py[b],
                grad: Vector::new(d(&px, a, 1) * py[b], px[a] * d(&py, b, 1)) * h1,
                lap: lap * h2,
                grad_lap: Vector::new(lap_x, lap_y) * h3,
            };
        }
    }

    pub fn jets_vec(&self, p: &Point) -> Vec<Jet> {
        let mut out = vec![Jet::default(); self.dim()];
        self.jets(p, &mut out);
        out
    }

    /// Value of the polynomial with the given coefficients.
    pub fn eval(&self, coeffs: &[f64], p: &Point) -> f64 {
        let (px, py) = self.powers(p);
        coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, &(a, b))| c * px[a] * py[b])
            .sum()
    }

    /// Jet of the polynomial with the given coefficients.
    pub fn eval_jet(&self, coeffs: &[f64], p: &Point) -> Jet {
        let jets = self.jets_vec(p);
        let mut out = Jet::default();
        for (c, j) in coeffs.iter().zip(&jets) {
            out.axpy(*c, j);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dimensions() {
        assert_eq!(dim(2), 6);
        assert_eq!(dim(3), 10);
        assert_eq!(dim(6), 28);
        assert_eq!(ScaledMonomials::new(Point::origin(), 1.0, 4).dim(), 15);
    }

    #[test]
    fn ordering_by_total_degree() {
        let b = ScaledMonomials::new(Point::origin(), 1.0, 2);
        assert_eq!(b.exponents(), &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
    }

    #[test]
    fn jets_match_finite_differences() {
        let b = ScaledMonomials::new(Point::new(0.3, -0.2), 0.17, 5);
        let p = Point::new(0.41, -0.05);
        let jets = b.jets_vec(&p);
        let eps = 1e-4;
        let val = |q: Point| b.values_vec(&q);
        let lap = |q: Point| -> Vec<f64> {
            let c = val(q);
            let (xp, xm) = (val(q + Vector::x() * eps), val(q - Vector::x() * eps));
            let (yp, ym) = (val(q + Vector::y() * eps), val(q - Vector::y() * eps));
            (0..c.len())
                .map(|i| (xp[i] + xm[i] + yp[i] + ym[i] - 4.0 * c[i]) / (eps * eps))
                .collect()
        };
        let (xp, xm) = (val(p + Vector::x() * eps), val(p - Vector::x() * eps));
        let (yp, ym) = (val(p + Vector::y() * eps), val(p - Vector::y() * eps));
        let e2 = 1e-3;
        let (lxp, lxm) = (lap(p + Vector::x() * e2), lap(p - Vector::x() * e2));
        let (lyp, lym) = (lap(p + Vector::y() * e2), lap(p - Vector::y() * e2));
        let l0 = lap(p);
        for i in 0..b.dim() {
            let j = jets[i];
            let scale = 1.0 + j.grad.norm() + j.lap.abs() + j.grad_lap.norm();
            assert_relative_eq!(j.grad.x, (xp[i] - xm[i]) / (2.0 * eps), epsilon = 1e-6 * scale);
            assert_relative_eq!(j.grad.y, (yp[i] - ym[i]) / (2.0 * eps), epsilon = 1e-6 * scale);
            assert_relative_eq!(j.lap, l0[i], epsilon = 1e-4 * scale);
            assert_relative_eq!(j.grad_lap.x, (lxp[i] - lxm[i]) / (2.0 * e2), epsilon = 1e-3 * scale);
            assert_relative_eq!(j.grad_lap.y, (lyp[i] - lym[i]) / (2.0 * e2), epsilon = 1e-3 * scale);
        }
    }

    #[test]
    fn biharmonic_like_combination() {
        // p = x^3 + y^3 around the origin with unit scale: Delta p = 6x + 6y.
        let b = ScaledMonomials::new(Point::origin(), 1.0, 3);
        let mut c = vec![0.0; b.dim()];
        c[6] = 1.0; // x^3
        c[9] = 1.0; // y^3
        let j = b.eval_jet(&c, &Point::new(0.5, -2.0));
        assert_relative_eq!(j.value, 0.125 - 8.0);
        assert_relative_eq!(j.lap, 3.0 - 12.0);
        assert_relative_eq!(j.grad_lap, Vector::new(6.0, 6.0));
        assert_relative_eq!(b.eval(&c, &Point::new(0.5, -2.0)), j.value);
    }
}
