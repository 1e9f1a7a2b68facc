//! Implicit geometry: level-set domains, exact cell classification, and
//! quadrature on cut cells.
//!
//! Domains are described by a level-set function with the convention
//! `value < 0` inside the domain.  Three shapes are supported — circles,
//! axis-aligned boxes and half-planes — plus the complement of any of them.
//! For all three the zero set admits an exact arc-length parametrization, so
//! both classification and quadrature are computed from closed-form
//! intersections rather than from point sampling.
//!
//! Volume rules on cut cells subdivide the cell a fixed number of quadtree
//! levels and integrate each leaf with a fan of cone patches spanned from an
//! interior apex to the pieces of the region boundary (straight runs of the
//! cell boundary and level-set segments or arcs).  With curved pieces enabled
//! (the default) the geometry is resolved exactly up to roundoff; with
//! `curved = false` arcs are replaced by their chords, which reproduces the
//! classical second-order clipping error and is kept for diagnostics.

use crate::{Error, Result};
use std::sync::OnceLock;

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }
    /// z-component of the cross product, `self × o`.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}
impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}
impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// An axis-aligned square cell of the background grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub x0: f64,
    pub y0: f64,
    pub size: f64,
}

impl Cell {
    pub fn new(x0: f64, y0: f64, size: f64) -> Self {
        Cell { x0, y0, size }
    }
    pub fn x1(&self) -> f64 {
        self.x0 + self.size
    }
    pub fn y1(&self) -> f64 {
        self.y0 + self.size
    }
    pub fn center(&self) -> Point {
        Point::new(self.x0 + 0.5 * self.size, self.y0 + 0.5 * self.size)
    }
    pub fn area(&self) -> f64 {
        self.size * self.size
    }
    /// Corners in counterclockwise order starting at `(x0, y0)`.
    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x0, self.y0),
            Point::new(self.x1(), self.y0),
            Point::new(self.x1(), self.y1()),
            Point::new(self.x0, self.y1()),
        ]
    }
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1() + tol && p.y >= self.y0 - tol && p.y <= self.y1() + tol
    }
    fn contains_strict(&self, p: Point) -> bool {
        let s = 1e-12 * self.size;
        p.x > self.x0 + s && p.x < self.x1() - s && p.y > self.y0 + s && p.y < self.y1() - s
    }
    /// Quadtree child `i` in counterclockwise corner order.
    fn child(&self, i: usize) -> Cell {
        let h = 0.5 * self.size;
        let (dx, dy) = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)][i];
        Cell::new(self.x0 + dx * h, self.y0 + dy * h, h)
    }
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Circle { center: Point, radius: f64 },
    AxisBox { lo: Point, hi: Point },
    HalfPlane { normal: Point, offset: f64 },
}

/// An implicitly described domain, `value < 0` inside.
#[derive(Clone, Copy, Debug)]
pub struct LevelSet {
    shape: Shape,
    inverted: bool,
}

impl LevelSet {
    pub fn circle(center: Point, radius: f64) -> Self {
        assert!(radius > 0.0, "circle radius must be positive");
        LevelSet { shape: Shape::Circle { center, radius }, inverted: false }
    }

    pub fn axis_box(lo: Point, hi: Point) -> Self {
        assert!(hi.x > lo.x && hi.y > lo.y, "box extents must be positive");
        LevelSet { shape: Shape::AxisBox { lo, hi }, inverted: false }
    }

    /// Half-plane `{ x : normal · x < offset }`; the normal is normalized.
    pub fn half_plane(normal: Point, offset: f64) -> Self {
        let len = normal.norm();
        assert!(len > 0.0, "half-plane normal must be nonzero");
        LevelSet {
            shape: Shape::HalfPlane { normal: normal * (1.0 / len), offset: offset / len },
            inverted: false,
        }
    }

    /// The complement domain: same zero set, sign flipped.
    pub fn complement(mut self) -> Self {
        self.inverted = !self.inverted;
        self
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    /// Level-set value; negative inside the domain.
    pub fn value(&self, p: Point) -> f64 {
        let v = match self.shape {
            Shape::Circle { center, radius } => p.dist(center) - radius,
            Shape::AxisBox { lo, hi } => {
                let qx = (lo.x - p.x).max(p.x - hi.x);
                let qy = (lo.y - p.y).max(p.y - hi.y);
                qx.max(qy)
            }
            Shape::HalfPlane { normal, offset } => normal.dot(p) - offset,
        };
        if self.inverted {
            -v
        } else {
            v
        }
    }

    /// Analytic gradient of `value`.  Nonzero everywhere on the zero set; on
    /// the measure-zero ridge lines of the box shape one of the adjoining
    /// branches is returned.
    pub fn gradient(&self, p: Point) -> Point {
        let g = match self.shape {
            Shape::Circle { center, radius: _ } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    Point::new(1.0, 0.0)
                } else {
                    d * (1.0 / n)
                }
            }
            Shape::AxisBox { lo, hi } => {
                let qx = (lo.x - p.x).max(p.x - hi.x);
                let qy = (lo.y - p.y).max(p.y - hi.y);
                if qx >= qy {
                    if lo.x - p.x >= p.x - hi.x {
                        Point::new(-1.0, 0.0)
                    } else {
                        Point::new(1.0, 0.0)
                    }
                } else if lo.y - p.y >= p.y - hi.y {
                    Point::new(0.0, -1.0)
                } else {
                    Point::new(0.0, 1.0)
                }
            }
            Shape::HalfPlane { normal, .. } => normal,
        };
        if self.inverted {
            g * -1.0
        } else {
            g
        }
    }

    /// Axis-aligned bounding box of the domain, `None` if unbounded (half-
    /// planes and all complements).
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        if self.inverted {
            return None;
        }
        match self.shape {
            Shape::Circle { center, radius } => Some((
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            )),
            Shape::AxisBox { lo, hi } => Some((lo, hi)),
            Shape::HalfPlane { .. } => None,
        }
    }

    /// Exact range of `value` over the closed cell.
    fn value_range(&self, cell: &Cell) -> (f64, f64) {
        let (mn, mx) = match self.shape {
            Shape::Circle { center, radius } => {
                let cx = center.x.clamp(cell.x0, cell.x1());
                let cy = center.y.clamp(cell.y0, cell.y1());
                let dmin = center.dist(Point::new(cx, cy));
                let dmax = cell
                    .corners()
                    .iter()
                    .map(|c| c.dist(center))
                    .fold(0.0_f64, f64::max);
                (dmin - radius, dmax - radius)
            }
            Shape::AxisBox { lo, hi } => {
                let range_1d = |a: f64, b: f64, l: f64, h: f64| {
                    let q = |x: f64| (l - x).max(x - h);
                    let mid = 0.5 * (l + h);
                    let qmin = if a <= mid && mid <= b { -(h - l) * 0.5 } else { q(a).min(q(b)) };
                    (qmin, q(a).max(q(b)))
                };
                let (nx, xx) = range_1d(cell.x0, cell.x1(), lo.x, hi.x);
                let (ny, xy) = range_1d(cell.y0, cell.y1(), lo.y, hi.y);
                (nx.max(ny), xx.max(xy))
            }
            Shape::HalfPlane { .. } => {
                let vals: Vec<f64> = cell
                    .corners()
                    .iter()
                    .map(|&c| {
                        // evaluate without the inversion flag; applied below
                        let Shape::HalfPlane { normal, offset } = self.shape else { unreachable!() };
                        normal.dot(c) - offset
                    })
                    .collect();
                (vals.iter().cloned().fold(f64::INFINITY, f64::min), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            }
        };
        if self.inverted {
            (-mx, -mn)
        } else {
            (mn, mx)
        }
    }

    /// True when the zero set contains an entire edge of the cell (possible
    /// only for straight boundaries aligned with the grid).
    fn zero_set_contains_cell_edge(&self, cell: &Cell, atol: f64) -> bool {
        match self.shape {
            Shape::Circle { .. } => false,
            _ => {
                let c = cell.corners();
                (0..4).any(|i| {
                    self.value(c[i]).abs() <= atol && self.value(c[(i + 1) % 4]).abs() <= atol
                })
            }
        }
    }
}

/// Classification of a cell against a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    /// The closed cell lies in the domain (up to zero-length grazing contact).
    Inside,
    /// The cell does not meet the open domain.
    Outside,
    /// The cell holds a positive-area part of the domain and a positive-area
    /// or positive-length part of its exterior or boundary.
    Cut,
}

/// Classify a cell by the exact value range of the level set on it.
///
/// Tangentially grazing contact (the zero set meets the cell in isolated
/// points) is resolved by the sign at the cell center: such cells count as
/// plain Inside/Outside, so surface rules never see zero-length cuts.
pub fn classify_cell(cell: &Cell, domain: &LevelSet) -> CellClass {
    let atol = 1e-12 * (1.0 + cell.size);
    let (mn, mx) = domain.value_range(cell);
    if mn > -atol {
        // no interior points of the domain in this cell
        return CellClass::Outside;
    }
    if mx < -atol {
        return CellClass::Inside;
    }
    if mx <= atol {
        // touches the boundary from inside: a full edge on the zero set is a
        // genuine positive-length cut, a corner touch is grazing
        if domain.zero_set_contains_cell_edge(cell, atol) {
            return CellClass::Cut;
        }
        return CellClass::Inside;
    }
    CellClass::Cut
}

/// Points, weights and (for surface rules) outward unit normals.
#[derive(Clone, Debug, Default)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Option<Vec<Point>>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    /// Sum of weights (area or length represented by the rule).
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
    /// Apply the rule to an integrand.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Controls for cut-cell volume rules.
#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    /// 1D Gauss order; rules are exact for polynomials of degree
    /// `2 * gauss_order - 1` on uncut cells.
    pub gauss_order: usize,
    /// Quadtree subdivision levels below the cell before leaf integration.
    pub depth: usize,
    /// Integrate circular boundary pieces exactly (default).  With `false`
    /// arcs are replaced by chords: second-order geometric error.
    pub curved: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { gauss_order: 4, depth: 2, curved: true }
    }
}

const MAX_GAUSS_ORDER: usize = 10;
/// Extra subdivision levels tried when a leaf produces negative cone weights.
const EXTRA_DEPTH: usize = 3;
/// Maximum angular sweep of a single arc panel.
const MAX_ARC_PANEL: f64 = 0.45;

/// Gauss–Legendre nodes and weights on [0, 1]; orders 1..=10.
pub fn gauss_01(order: usize) -> Result<(&'static [f64], &'static [f64])> {
    static TABLES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    if order == 0 || order > MAX_GAUSS_ORDER {
        return Err(Error::UnsupportedGaussOrder(order));
    }
    let tables = TABLES.get_or_init(|| (1..=MAX_GAUSS_ORDER).map(gauss_legendre_01).collect());
    let (x, w) = &tables[order - 1];
    Ok((x, w))
}

/// Newton iteration on the Legendre polynomial, mapped from [-1, 1] to [0, 1].
fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged node for the weight
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // descending cos order -> ascending node order
        xs[n - 1 - i] = 0.5 * (x + 1.0);
        ws[n - 1 - i] = 0.5 * w;
    }
    (xs, ws)
}

/// One oriented piece of the region boundary inside a cell.  The region lies
/// on the left of the direction of travel.
#[derive(Clone, Copy, Debug)]
enum Piece {
    Seg { a: Point, b: Point },
    /// Circular arc from angle `th0` to `th1` (sweep may be negative).
    Arc { center: Point, r: f64, th0: f64, th1: f64 },
}

impl Piece {
    fn endpoints(&self) -> (Point, Point) {
        match *self {
            Piece::Seg { a, b } => (a, b),
            Piece::Arc { center, r, th0, th1 } => (
                center + Point::new(th0.cos(), th0.sin()) * r,
                center + Point::new(th1.cos(), th1.sin()) * r,
            ),
        }
    }
}

/// Roots of the level set along the segment `a -> b`, as parameters `t` with
/// matching circle angles where applicable.
fn circle_segment_roots(a: Point, b: Point, center: Point, radius: f64) -> Vec<(f64, f64)> {
    // |a + t d - c|^2 = r^2  ->  quadratic in t
    let d = b - a;
    let m = a - center;
    let qa = d.dot(d);
    let qb = 2.0 * m.dot(d);
    let qc = m.dot(m) - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (qb + qb.signum() * s);
    let mut roots = vec![q / qa];
    if q != 0.0 {
        roots.push(qc / q);
    }
    roots
        .into_iter()
        .map(|t| {
            let p = a + d * t;
            (t, (p.y - center.y).atan2(p.x - center.x))
        })
        .collect()
}

/// Parameters in (0, 1) where the zero set crosses the segment, used to split
/// cell-boundary edges into sign-constant runs.
fn interior_edge_roots(a: Point, b: Point, ls: &LevelSet) -> Vec<f64> {
    let mut ts: Vec<f64> = match ls.shape {
        Shape::Circle { center, radius } => {
            circle_segment_roots(a, b, center, radius).into_iter().map(|(t, _)| t).collect()
        }
        Shape::HalfPlane { normal, offset } => {
            let fa = normal.dot(a) - offset;
            let fb = normal.dot(b) - offset;
            if (fa > 0.0) != (fb > 0.0) && fa != fb {
                vec![fa / (fa - fb)]
            } else {
                Vec::new()
            }
        }
        Shape::AxisBox { lo, hi } => {
            // crossings with the four face segments
            let mut out = Vec::new();
            let d = b - a;
            let mut face = |coord_a: f64, coord_d: f64, level: f64, other_a: f64, other_d: f64, o_lo: f64, o_hi: f64| {
                if coord_d != 0.0 {
                    let t = (level - coord_a) / coord_d;
                    let other = other_a + t * other_d;
                    if other >= o_lo - 1e-14 && other <= o_hi + 1e-14 {
                        out.push(t);
                    }
                }
            };
            face(a.x, d.x, lo.x, a.y, d.y, lo.y, hi.y);
            face(a.x, d.x, hi.x, a.y, d.y, lo.y, hi.y);
            face(a.y, d.y, lo.y, a.x, d.x, lo.x, hi.x);
            face(a.y, d.y, hi.y, a.x, d.x, lo.x, hi.x);
            out
        }
    };
    ts.retain(|&t| t > 1e-12 && t < 1.0 - 1e-12);
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    ts
}

/// Counterclockwise sub-segments of the cell boundary lying inside the domain.
fn square_runs(cell: &Cell, ls: &LevelSet) -> Vec<(Point, Point)> {
    let atol = 1e-13 * (1.0 + cell.size);
    let c = cell.corners();
    let mut runs = Vec::new();
    for e in 0..4 {
        let (a, b) = (c[e], c[(e + 1) % 4]);
        let mut cuts = vec![0.0];
        cuts.extend(interior_edge_roots(a, b, ls));
        cuts.push(1.0);
        for w in cuts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 < 1e-12 {
                continue;
            }
            let mid = a + (b - a) * (0.5 * (t0 + t1));
            if ls.value(mid) < -atol {
                runs.push((a + (b - a) * t0, a + (b - a) * t1));
            }
        }
    }
    runs
}

/// Level-set boundary pieces inside the cell, oriented with the domain on the
/// left of the direction of travel.
fn boundary_pieces(cell: &Cell, ls: &LevelSet) -> Vec<Piece> {
    match ls.shape {
        Shape::Circle { center, radius } => {
            let c = cell.corners();
            let mut angles: Vec<f64> = Vec::new();
            for e in 0..4 {
                for (t, th) in circle_segment_roots(c[e], c[(e + 1) % 4], center, radius) {
                    if (-1e-12..=1.0 + 1e-12).contains(&t) {
                        angles.push(th);
                    }
                }
            }
            angles.sort_by(f64::total_cmp);
            angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let mut arcs = Vec::new();
            if angles.is_empty() {
                // the full circle may sit inside the cell
                let inside = cell.contains(center, 0.0)
                    && center.x - radius >= cell.x0
                    && center.x + radius <= cell.x1()
                    && center.y - radius >= cell.y0
                    && center.y + radius <= cell.y1();
                if inside {
                    arcs.push((0.0, 2.0 * std::f64::consts::PI));
                }
            } else {
                let n = angles.len();
                for i in 0..n {
                    let th0 = angles[i];
                    let th1 = if i + 1 < n { angles[i + 1] } else { angles[0] + 2.0 * std::f64::consts::PI };
                    if th1 - th0 < 1e-12 {
                        continue;
                    }
                    let thm = 0.5 * (th0 + th1);
                    let pm = center + Point::new(thm.cos(), thm.sin()) * radius;
                    if cell.contains_strict(pm) {
                        arcs.push((th0, th1));
                    }
                }
            }
            arcs.into_iter()
                .map(|(th0, th1)| {
                    if ls.inverted {
                        // domain outside the circle: traverse clockwise
                        Piece::Arc { center, r: radius, th0: th1, th1: th0 }
                    } else {
                        Piece::Arc { center, r: radius, th0, th1 }
                    }
                })
                .collect()
        }
        Shape::HalfPlane { normal, offset } => {
            // clip the line against the cell along direction rot90(normal)
            let p0 = {
                let pc = cell.center();
                pc - normal * (normal.dot(pc) - offset)
            };
            let dir = Point::new(-normal.y, normal.x);
            let (mut smin, mut smax) = (f64::NEG_INFINITY, f64::INFINITY);
            for (p, d, lo, hi) in [
                (p0.x, dir.x, cell.x0, cell.x1()),
                (p0.y, dir.y, cell.y0, cell.y1()),
            ] {
                if d.abs() < 1e-300 {
                    if p < lo || p > hi {
                        return Vec::new();
                    }
                } else {
                    let (s0, s1) = ((lo - p) / d, (hi - p) / d);
                    smin = smin.max(s0.min(s1));
                    smax = smax.min(s0.max(s1));
                }
            }
            if smax - smin < 1e-13 * (1.0 + cell.size) {
                return Vec::new();
            }
            let (a, b) = (p0 + dir * smin, p0 + dir * smax);
            if ls.inverted {
                vec![Piece::Seg { a: b, b: a }]
            } else {
                vec![Piece::Seg { a, b }]
            }
        }
        Shape::AxisBox { lo, hi } => {
            let mut pieces = Vec::new();
            let tol = 1e-13 * (1.0 + cell.size);
            // counterclockwise around the box: bottom +x, right +y, top -x, left -y
            let faces = [
                (lo.y, lo.x, hi.x, true, false),  // bottom, along +x
                (hi.x, lo.y, hi.y, false, false), // right, along +y
                (hi.y, lo.x, hi.x, true, true),   // top, along -x
                (lo.x, lo.y, hi.y, false, true),  // left, along -y
            ];
            for (level, f_lo, f_hi, horizontal, reversed) in faces {
                let (c_lo, c_hi, l_lo, l_hi) = if horizontal {
                    (cell.x0, cell.x1(), cell.y0, cell.y1())
                } else {
                    (cell.y0, cell.y1(), cell.x0, cell.x1())
                };
                if level < l_lo - tol || level > l_hi + tol {
                    continue;
                }
                let s0 = f_lo.max(c_lo);
                let s1 = f_hi.min(c_hi);
                if s1 - s0 < tol {
                    continue;
                }
                let mk = |s: f64| if horizontal { Point::new(s, level) } else { Point::new(level, s) };
                let (mut a, mut b) = (mk(s0), mk(s1));
                if reversed {
                    std::mem::swap(&mut a, &mut b);
                }
                if ls.inverted {
                    std::mem::swap(&mut a, &mut b);
                }
                pieces.push(Piece::Seg { a, b });
            }
            pieces
        }
    }
}

/// Tensor Gauss rule over a full cell.
fn tensor_rule(cell: &Cell, order: usize, rule: &mut QuadratureRule) -> Result<()> {
    let (xs, ws) = gauss_01(order)?;
    for (xi, wi) in xs.iter().zip(ws) {
        for (yj, wj) in xs.iter().zip(ws) {
            rule.points.push(Point::new(cell.x0 + xi * cell.size, cell.y0 + yj * cell.size));
            rule.weights.push(wi * wj * cell.area());
        }
    }
    Ok(())
}

/// Cone-patch rule for a leaf cut cell.  Returns `false` if a patch came out
/// with significantly negative weights (non-star-shaped region), in which
/// case the caller subdivides further.
fn leaf_cut_rule(cell: &Cell, ls: &LevelSet, cfg: &QuadConfig, rule: &mut QuadratureRule) -> Result<bool> {
    let mut pieces: Vec<Piece> = square_runs(cell, ls)
        .into_iter()
        .map(|(a, b)| Piece::Seg { a, b })
        .collect();
    let mut curve = boundary_pieces(cell, ls);
    if !cfg.curved {
        curve = curve
            .into_iter()
            .map(|p| match p {
                Piece::Arc { .. } => {
                    let (a, b) = p.endpoints();
                    Piece::Seg { a, b }
                }
                seg => seg,
            })
            .collect();
    }
    pieces.extend(curve);
    if pieces.is_empty() {
        // degenerate leaf: resolve by the center sign
        if ls.value(cell.center()) < 0.0 {
            tensor_rule(cell, cfg.gauss_order, rule)?;
        }
        return Ok(true);
    }

    // apex of the cone fan: centroid of piece endpoints and arc midpoints
    let mut apex = Point::default();
    let mut n_pts = 0.0;
    for p in &pieces {
        let (a, b) = p.endpoints();
        apex = apex + a + b;
        n_pts += 2.0;
        if let Piece::Arc { center, r, th0, th1 } = *p {
            let thm = 0.5 * (th0 + th1);
            apex = apex + center + Point::new(thm.cos(), thm.sin()) * r;
            n_pts += 1.0;
        }
    }
    apex = apex * (1.0 / n_pts);

    let nu = cfg.gauss_order + 1;
    let (xu, wu) = gauss_01(nu)?;
    let neg_tol = -1e-13 * cell.area();
    let start = rule.points.len();
    for piece in &pieces {
        match *piece {
            Piece::Seg { a, b } => {
                let (xv, wv) = gauss_01(cfg.gauss_order)?;
                for (v, wv) in xv.iter().zip(wv) {
                    let g = a + (b - a) * *v;
                    let dg = b - a;
                    for (u, wu) in xu.iter().zip(wu) {
                        let p = apex + (g - apex) * *u;
                        let w = wu * wv * u * (g - apex).cross(dg);
                        rule.points.push(p);
                        rule.weights.push(w);
                    }
                }
            }
            Piece::Arc { center, r, th0, th1 } => {
                let sweep = th1 - th0;
                let panels = (sweep.abs() / MAX_ARC_PANEL).ceil().max(1.0) as usize;
                let nv = cfg.gauss_order.max(8);
                let (xv, wv) = gauss_01(nv)?;
                for p_i in 0..panels {
                    let pa = th0 + sweep * (p_i as f64 / panels as f64);
                    let pb = th0 + sweep * ((p_i + 1) as f64 / panels as f64);
                    let dth = pb - pa;
                    for (v, wv) in xv.iter().zip(wv) {
                        let th = pa + dth * v;
                        let e = Point::new(th.cos(), th.sin());
                        let g = center + e * r;
                        let dg = Point::new(-th.sin(), th.cos()) * (r * dth);
                        for (u, wu) in xu.iter().zip(wu) {
                            let p = apex + (g - apex) * *u;
                            let w = wu * wv * u * (g - apex).cross(dg);
                            rule.points.push(p);
                            rule.weights.push(w);
                        }
                    }
                }
            }
        }
    }
    if rule.weights[start..].iter().any(|&w| w < neg_tol) {
        rule.points.truncate(start);
        rule.weights.truncate(start);
        return Ok(false);
    }
    // clamp roundoff-level negatives so volume rules stay nonnegative
    for w in &mut rule.weights[start..] {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    Ok(true)
}

fn volume_recurse(
    cell: &Cell,
    ls: &LevelSet,
    cfg: &QuadConfig,
    level: usize,
    rule: &mut QuadratureRule,
) -> Result<()> {
    match classify_cell(cell, ls) {
        CellClass::Outside => Ok(()),
        CellClass::Inside => tensor_rule(cell, cfg.gauss_order, rule),
        CellClass::Cut => {
            if level < cfg.depth {
                for i in 0..4 {
                    volume_recurse(&cell.child(i), ls, cfg, level + 1, rule)?;
                }
                return Ok(());
            }
            if leaf_cut_rule(cell, ls, cfg, rule)? {
                return Ok(());
            }
            if level < cfg.depth + EXTRA_DEPTH {
                for i in 0..4 {
                    volume_recurse(&cell.child(i), ls, cfg, level + 1, rule)?;
                }
                Ok(())
            } else {
                // give up on the star-shape retry and keep the signed patches:
                // the integral value is still correct
                let _ = leaf_cut_rule_signed(cell, ls, cfg, rule)?;
                Ok(())
            }
        }
    }
}

/// Last-resort leaf rule that accepts signed cone weights.
fn leaf_cut_rule_signed(cell: &Cell, ls: &LevelSet, cfg: &QuadConfig, rule: &mut QuadratureRule) -> Result<bool> {
    // identical to `leaf_cut_rule` with the negativity bail-out disabled
    let relaxed = QuadConfig { ..*cfg };
    let start = rule.points.len();
    let ok = leaf_cut_rule(cell, ls, &relaxed, rule)?;
    if !ok {
        // rebuild without the check by integrating both signs
        rule.points.truncate(start);
        rule.weights.truncate(start);
        let mut pieces: Vec<Piece> = square_runs(cell, ls).into_iter().map(|(a, b)| Piece::Seg { a, b }).collect();
        pieces.extend(boundary_pieces(cell, ls));
        let mut apex = Point::default();
        let mut n_pts = 0.0;
        for p in &pieces {
            let (a, b) = p.endpoints();
            apex = apex + a + b;
            n_pts += 2.0;
        }
        if n_pts == 0.0 {
            return Ok(true);
        }
        apex = apex * (1.0 / n_pts);
        let (xu, wu) = gauss_01(cfg.gauss_order + 1)?;
        let (xv, wv) = gauss_01(cfg.gauss_order.max(8))?;
        for piece in &pieces {
            let eval: Box<dyn Fn(f64) -> (Point, Point)> = match *piece {
                Piece::Seg { a, b } => Box::new(move |v| (a + (b - a) * v, b - a)),
                Piece::Arc { center, r, th0, th1 } => Box::new(move |v| {
                    let th = th0 + (th1 - th0) * v;
                    (
                        center + Point::new(th.cos(), th.sin()) * r,
                        Point::new(-th.sin(), th.cos()) * (r * (th1 - th0)),
                    )
                }),
            };
            for (v, wv) in xv.iter().zip(wv) {
                let (g, dg) = eval(*v);
                for (u, wu) in xu.iter().zip(wu) {
                    rule.points.push(apex + (g - apex) * *u);
                    rule.weights.push(wu * wv * u * (g - apex).cross(dg));
                }
            }
        }
    }
    Ok(true)
}

/// Quadrature for `∫_{cell ∩ Ω} f` with default curved-boundary handling.
pub fn volume_quadrature(cell: &Cell, domain: &LevelSet, gauss_order: usize, subdivision_depth: usize) -> Result<QuadratureRule> {
    volume_quadrature_cfg(cell, domain, &QuadConfig { gauss_order, depth: subdivision_depth, curved: true })
}

/// Quadrature for `∫_{cell ∩ Ω} f` with full control over the cut treatment.
pub fn volume_quadrature_cfg(cell: &Cell, domain: &LevelSet, cfg: &QuadConfig) -> Result<QuadratureRule> {
    if cfg.gauss_order == 0 || cfg.gauss_order > MAX_GAUSS_ORDER {
        return Err(Error::UnsupportedGaussOrder(cfg.gauss_order));
    }
    let mut rule = QuadratureRule::default();
    volume_recurse(cell, domain, cfg, 0, &mut rule)?;
    Ok(rule)
}

/// Quadrature for `∫_{cell ∩ ∂Ω} f` with outward unit normals.
///
/// Points lie on the zero set exactly (circles are parametrized by angle,
/// straight boundaries by arc length).  A cut cell whose boundary intersection
/// degenerates to isolated points yields an empty rule.
pub fn surface_quadrature(cell: &Cell, domain: &LevelSet, gauss_order: usize) -> Result<QuadratureRule> {
    if gauss_order == 0 || gauss_order > MAX_GAUSS_ORDER {
        return Err(Error::UnsupportedGaussOrder(gauss_order));
    }
    let mut rule = QuadratureRule { normals: Some(Vec::new()), ..Default::default() };
    if classify_cell(cell, domain) != CellClass::Cut {
        return Ok(rule);
    }
    let (xs, ws) = gauss_01(gauss_order.max(8).min(MAX_GAUSS_ORDER))?;
    for piece in boundary_pieces(cell, domain) {
        match piece {
            Piece::Seg { a, b } => {
                let len = a.dist(b);
                let t = (b - a) * (1.0 / len);
                let n = Point::new(t.y, -t.x);
                for (x, w) in xs.iter().zip(ws) {
                    rule.points.push(a + (b - a) * *x);
                    rule.weights.push(w * len);
                    rule.normals.as_mut().unwrap().push(n);
                }
            }
            Piece::Arc { center, r, th0, th1 } => {
                let sweep = th1 - th0;
                let panels = (sweep.abs() / MAX_ARC_PANEL).ceil().max(1.0) as usize;
                let sign = sweep.signum();
                for p_i in 0..panels {
                    let pa = th0 + sweep * (p_i as f64 / panels as f64);
                    let pb = th0 + sweep * ((p_i + 1) as f64 / panels as f64);
                    for (x, w) in xs.iter().zip(ws) {
                        let th = pa + (pb - pa) * x;
                        let e = Point::new(th.cos(), th.sin());
                        rule.points.push(center + e * r);
                        rule.weights.push(w * r * (pb - pa).abs());
                        rule.normals.as_mut().unwrap().push(e * sign);
                    }
                }
            }
        }
    }
    Ok(rule)
}
