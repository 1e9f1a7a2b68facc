//! Manufactured exact solutions for convergence studies.
//!
//! Each solution exposes arbitrary partial derivatives so the problem data
//! (sources, boundary traces) can be generated exactly from the same object
//! that the error norms compare against:
//!
//! * second order: `f = -Δu`,
//! * fourth order: `f = Δ²u`,
//! * sixth order: `f = -Δ³u`.

use crate::geometry::Point;

/// An exact solution with partial derivatives `∂^{dx+dy} u / ∂x^dx ∂y^dy`.
pub trait Manufactured {
    fn deriv(&self, p: Point, dx: usize, dy: usize) -> f64;

    fn value(&self, p: Point) -> f64 {
        self.deriv(p, 0, 0)
    }

    fn gradient(&self, p: Point) -> Point {
        Point::new(self.deriv(p, 1, 0), self.deriv(p, 0, 1))
    }

    fn normal_deriv(&self, p: Point, n: Point) -> f64 {
        let g = self.gradient(p);
        n.x * g.x + n.y * g.y
    }

    fn laplacian(&self, p: Point) -> f64 {
        self.deriv(p, 2, 0) + self.deriv(p, 0, 2)
    }

    /// `-Δu`, the second-order source.
    fn poisson_source(&self, p: Point) -> f64 {
        -self.laplacian(p)
    }

    /// `Δ²u`, the fourth-order source.
    fn biharmonic_source(&self, p: Point) -> f64 {
        self.deriv(p, 4, 0) + 2.0 * self.deriv(p, 2, 2) + self.deriv(p, 0, 4)
    }

    /// `-Δ³u`, the sixth-order source.
    fn triharmonic_source(&self, p: Point) -> f64 {
        -(self.deriv(p, 6, 0)
            + 3.0 * self.deriv(p, 4, 2)
            + 3.0 * self.deriv(p, 2, 4)
            + self.deriv(p, 0, 6))
    }
}

/// Polynomial in shifted coordinates: `Σ c[i][j] (x-cx)^i (y-cy)^j`, with
/// exact derivatives of every order.
#[derive(Clone, Debug)]
pub struct PolyXY {
    pub center: Point,
    /// `coefs[i][j]` multiplies `(x-cx)^i (y-cy)^j`.
    pub coefs: Vec<Vec<f64>>,
}

impl PolyXY {
    pub fn new(center: Point, coefs: Vec<Vec<f64>>) -> Self {
        PolyXY { center, coefs }
    }

    /// A constant function.
    pub fn constant(c: f64) -> Self {
        PolyXY::new(Point::new(0.0, 0.0), vec![vec![c]])
    }

    /// The clamped radial bump `(10³/64)(r₀² - r²)²` around `center`,
    /// which solves `Δ²u = 10³` with zero value and normal derivative on
    /// the circle of radius `r0`.
    pub fn biharmonic_bump(center: Point, r0: f64) -> Self {
        let k = 1e3 / 64.0;
        // (r0² - x² - y²)² = r0⁴ - 2r0²(x²+y²) + (x²+y²)²
        let r2 = r0 * r0;
        let mut c = vec![vec![0.0; 5]; 5];
        c[0][0] = k * r2 * r2;
        c[2][0] = -2.0 * k * r2;
        c[0][2] = -2.0 * k * r2;
        c[4][0] = k;
        c[0][4] = k;
        c[2][2] = 2.0 * k;
        PolyXY::new(center, c)
    }

    /// Phase-1 solution `-r²/5` of the standard two-phase test
    /// (`A₁ = 5I`, `A₂ = 2I`, `f = 4` in both phases).
    pub fn interface_phase1(center: Point) -> Self {
        let mut c = vec![vec![0.0; 3]; 3];
        c[2][0] = -0.2;
        c[0][2] = -0.2;
        PolyXY::new(center, c)
    }

    /// Phase-2 solution `-(r²/2 - r₀²/2 + r₀²/5)`, continuous with phase 1
    /// at `r = r₀` and flux-matched (`5 u₁' = 2 u₂'`).
    pub fn interface_phase2(center: Point, r0: f64) -> Self {
        let r2 = r0 * r0;
        let mut c = vec![vec![0.0; 3]; 3];
        c[0][0] = r2 / 2.0 - r2 / 5.0;
        c[2][0] = -0.5;
        c[0][2] = -0.5;
        PolyXY::new(center, c)
    }

    /// `10⁴ x³y³(x-1)³(y-1)³`: a sixth-order-clamped bump on the unit box
    /// (value, gradient and Laplacian vanish on all four edges).
    pub fn triharmonic_bump() -> Self {
        // t³(t-1)³ = t⁶ - 3t⁵ + 3t⁴ - t³
        let g = [0.0, 0.0, 0.0, -1.0, 3.0, -3.0, 1.0];
        let mut c = vec![vec![0.0; 7]; 7];
        for (i, gi) in g.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                c[i][j] = 1e4 * gi * gj;
            }
        }
        PolyXY::new(Point::new(0.0, 0.0), c)
    }
}

impl Manufactured for PolyXY {
    fn deriv(&self, p: Point, dx: usize, dy: usize) -> f64 {
        let xt = p.x - self.center.x;
        let yt = p.y - self.center.y;
        let fall = |i: usize, d: usize| -> f64 {
            // falling factorial i (i-1) ... (i-d+1)
            (0..d).map(|k| (i - k) as f64).product()
        };
        let mut total = 0.0;
        for (i, row) in self.coefs.iter().enumerate() {
            if i < dx {
                continue;
            }
            for (j, &cij) in row.iter().enumerate() {
                if j < dy || cij == 0.0 {
                    continue;
                }
                total += cij * fall(i, dx) * fall(j, dy) * xt.powi((i - dx) as i32) * yt.powi((j - dy) as i32);
            }
        }
        total
    }
}

/// `u = cos(π r)` around a center, with derivatives up to total order 2,
/// stable through `r = 0` (series expansions of `sin(πr)/r` and friends).
#[derive(Clone, Copy, Debug)]
pub struct RadialCos {
    pub center: Point,
}

impl RadialCos {
    pub fn new(center: Point) -> Self {
        RadialCos { center }
    }

    /// `sin(πr)/r`, smooth at the origin.
    fn s(r: f64) -> f64 {
        let z = std::f64::consts::PI * r;
        if z < 1e-4 {
            std::f64::consts::PI * (1.0 - z * z / 6.0 + z * z * z * z / 120.0)
        } else {
            z.sin() / r
        }
    }

    /// `(π r cos(πr) - sin(πr)) / r³ = d/dr[sin(πr)/r] / r`, smooth at 0.
    fn c2(r: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let z = pi * r;
        if z < 1e-3 {
            let z2 = z * z;
            -pi * pi * pi * (1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0)
        } else {
            (z * z.cos() - z.sin()) / (r * r * r)
        }
    }
}

impl Manufactured for RadialCos {
    fn deriv(&self, p: Point, dx: usize, dy: usize) -> f64 {
        let xt = p.x - self.center.x;
        let yt = p.y - self.center.y;
        let r = (xt * xt + yt * yt).sqrt();
        let pi = std::f64::consts::PI;
        match (dx, dy) {
            (0, 0) => (pi * r).cos(),
            // ∂x cos(πr) = -π sin(πr)·x̃/r, and one more chain rule for order two
            (1, 0) => -pi * Self::s(r) * xt,
            (0, 1) => -pi * Self::s(r) * yt,
            (2, 0) => -pi * (Self::c2(r) * xt * xt + Self::s(r)),
            (0, 2) => -pi * (Self::c2(r) * yt * yt + Self::s(r)),
            (1, 1) => -pi * Self::c2(r) * xt * yt,
            _ => panic!("RadialCos supports derivatives up to total order 2, got ({dx},{dy})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn biharmonic_bump_source_and_clamped_traces() {
        let c = pt(0.5, 0.5);
        let u = PolyXY::biharmonic_bump(c, 0.5);
        assert!((u.value(c) - 1e3 / 64.0 * 0.0625).abs() < 1e-13);
        for (x, y) in [(0.1, 0.9), (0.33, 0.21), (0.7, 0.7)] {
            assert!((u.biharmonic_source(pt(x, y)) - 1e3).abs() < 1e-9);
        }
        // zero value and normal derivative on r = r0
        for k in 0..12 {
            let th = 0.5 * k as f64;
            let p = pt(0.5 + 0.5 * th.cos(), 0.5 + 0.5 * th.sin());
            assert!(u.value(p).abs() < 1e-12);
            assert!(u.normal_deriv(p, pt(th.cos(), th.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn interface_phases_are_continuous_and_flux_matched() {
        let c = pt(0.5, 0.5);
        let r0 = 0.25;
        let u1 = PolyXY::interface_phase1(c);
        let u2 = PolyXY::interface_phase2(c, r0);
        for k in 0..8 {
            let th = 0.9 * k as f64;
            let n = pt(th.cos(), th.sin());
            let p = pt(0.5 + r0 * n.x, 0.5 + r0 * n.y);
            assert!((u1.value(p) - u2.value(p)).abs() < 1e-14, "continuity");
            let flux1 = 5.0 * u1.normal_deriv(p, n);
            let flux2 = 2.0 * u2.normal_deriv(p, n);
            assert!((flux1 - flux2).abs() < 1e-14, "flux match");
        }
        // both phases have source f = -div(A grad u) = 4
        assert!((-5.0 * u1.laplacian(pt(0.3, 0.8)) - 4.0).abs() < 1e-13);
        assert!((-2.0 * u2.laplacian(pt(0.9, 0.1)) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn triharmonic_bump_matches_the_product_form() {
        // independent oracle: u = 1e4 g(x) g(y) with g(t) = t³(t-1)³
        // evaluated through univariate Horner derivatives
        let u = PolyXY::triharmonic_bump();
        let g_deriv = |t: f64, d: usize| -> f64 {
            let mut coef = [0.0, 0.0, 0.0, -1.0, 3.0, -3.0, 1.0];
            for _ in 0..d {
                let mut next = [0.0; 7];
                for i in 1..7 {
                    next[i - 1] = coef[i] * i as f64;
                }
                coef = next;
            }
            coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
        };
        let mut worst = 0.0f64;
        for (x, y) in [(0.13, 0.77), (0.5, 0.5), (0.91, 0.08), (0.66, 0.34)] {
            for dx in 0..=6 {
                for dy in 0..=6 {
                    let a = u.deriv(pt(x, y), dx, dy);
                    let b = 1e4 * g_deriv(x, dx) * g_deriv(y, dy);
                    worst = worst.max((a - b).abs() / (1.0 + b.abs()));
                }
            }
        }
        assert!(worst < 1e-12, "product-form mismatch {worst:.3e}");
        assert!((u.value(pt(0.5, 0.5)) - 2.44140625).abs() < 1e-12);
    }

    #[test]
    fn triharmonic_bump_is_sixth_order_clamped() {
        let u = PolyXY::triharmonic_bump();
        // the zeros arise by cancellation among terms of size ~1e4, so the
        // attainable floor is ~1e4·ε per derivative order
        for t in [0.0, 0.21, 0.73, 1.0] {
            for edge in [pt(0.0, t), pt(1.0, t), pt(t, 0.0), pt(t, 1.0)] {
                assert!(u.value(edge).abs() < 1e-10);
                assert!(u.gradient(edge).x.abs() < 1e-9);
                assert!(u.gradient(edge).y.abs() < 1e-9);
                assert!(u.laplacian(edge).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn radial_cos_values_and_source() {
        let c = pt(0.0, 0.0);
        let u = RadialCos::new(c);
        assert_eq!(u.value(c), 1.0);
        // f = -Δu = π² cos(πr) + π sin(πr)/r → 2π² at the center
        let pi = std::f64::consts::PI;
        assert!((u.poisson_source(c) - 2.0 * pi * pi).abs() < 1e-8);
        // u = 0 on the disc boundary r = 1/2
        for k in 0..8 {
            let th = 0.8 * k as f64;
            assert!(u.value(pt(0.5 * th.cos(), 0.5 * th.sin())).abs() < 1e-14);
        }
    }

    #[test]
    fn radial_cos_derivatives_match_finite_differences() {
        let u = RadialCos::new(pt(0.2, -0.1));
        let h = 1e-3;
        let probes = [pt(0.5, 0.3), pt(0.2, -0.1), pt(0.21, -0.09), pt(-0.2, 0.4)];
        for p in probes {
            // fourth-order central differences
            let fx = (-u.value(pt(p.x + 2.0 * h, p.y)) + 8.0 * u.value(pt(p.x + h, p.y))
                - 8.0 * u.value(pt(p.x - h, p.y))
                + u.value(pt(p.x - 2.0 * h, p.y)))
                / (12.0 * h);
            assert!((u.deriv(p, 1, 0) - fx).abs() < 1e-9, "ux at {p:?}");
            let fxx = (-u.value(pt(p.x + 2.0 * h, p.y)) + 16.0 * u.value(pt(p.x + h, p.y)) - 30.0 * u.value(p)
                + 16.0 * u.value(pt(p.x - h, p.y))
                - u.value(pt(p.x - 2.0 * h, p.y)))
                / (12.0 * h * h);
            assert!((u.deriv(p, 2, 0) - fxx).abs() < 1e-6, "uxx at {p:?}");
            // fourth order in both directions: compose the 1D stencil
            let dy4 = |x: f64, y: f64| {
                (-u.value(pt(x, y + 2.0 * h)) + 8.0 * u.value(pt(x, y + h)) - 8.0 * u.value(pt(x, y - h))
                    + u.value(pt(x, y - 2.0 * h)))
                    / (12.0 * h)
            };
            let fxy = (-dy4(p.x + 2.0 * h, p.y) + 8.0 * dy4(p.x + h, p.y) - 8.0 * dy4(p.x - h, p.y)
                + dy4(p.x - 2.0 * h, p.y))
                / (12.0 * h);
            assert!((u.deriv(p, 1, 1) - fxy).abs() < 1e-8, "uxy at {p:?}");
        }
    }

    #[test]
    fn polyxy_derivatives_differentiate_the_grid() {
        // u = (x-1)²(y+2)³ via the coefficient grid against closed forms
        let mut c = vec![vec![0.0; 4]; 3];
        c[2][3] = 1.0;
        let u = PolyXY::new(pt(1.0, -2.0), c);
        let p = pt(1.7, -0.5);
        let (xt, yt) = (0.7, 1.5);
        assert!((u.deriv(p, 0, 0) - xt * xt * yt * yt * yt).abs() < 1e-13);
        assert!((u.deriv(p, 1, 0) - 2.0 * xt * yt * yt * yt).abs() < 1e-13);
        assert!((u.deriv(p, 2, 3) - 2.0 * 6.0).abs() < 1e-13);
        assert_eq!(u.deriv(p, 3, 0), 0.0);
        assert_eq!(u.deriv(p, 0, 4), 0.0);
    }
}
