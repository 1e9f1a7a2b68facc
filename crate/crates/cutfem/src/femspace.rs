//! Tensor-product element families and their degree-of-freedom maps.
//!
//! Four families are supported: continuous Lagrange elements of degree 1
//! and 2 and Hermite elements of degree 3 and 5.  The Hermite families carry
//! derivative degrees of freedom — degree 3 couples value and first
//! derivative per endpoint (C¹), degree 5 adds the second derivative (C²).
//!
//! A degree of freedom is a *generalized node*: a position `ξ` together with
//! a derivative multi-index `α`; its dual functional is `v ↦ D^α v(ξ)`.
//! Global numbering is first-touch over active cells in ascending id order,
//! which is deterministic and clusters interior degrees of freedom early.
//!
//! Physical shape functions on a cell of size `s` are scaled as
//! `s^l φ̂((x-a)/s)` where `l` is the derivative order of the associated dual
//! functional, so dual pairing is exact on every cell size.

use crate::geometry::{Cell, Point};
use crate::mesh::ActiveMesh;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::OnceLock;

/// Supported element families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementFamily {
    /// Bilinear Lagrange, C⁰.
    LagrangeQ1,
    /// Biquadratic Lagrange, C⁰.
    LagrangeQ2,
    /// Bicubic Hermite, C¹ (value and first derivatives at corners).
    HermiteC1,
    /// Biquintic Hermite, C² (value, first and second derivatives).
    HermiteC2,
}

impl ElementFamily {
    /// Polynomial degree per coordinate direction.
    pub fn degree(self) -> usize {
        match self {
            ElementFamily::LagrangeQ1 => 1,
            ElementFamily::LagrangeQ2 => 2,
            ElementFamily::HermiteC1 => 3,
            ElementFamily::HermiteC2 => 5,
        }
    }

    /// Highest derivative order shared continuously across cells.
    pub fn continuity(self) -> usize {
        match self {
            ElementFamily::LagrangeQ1 | ElementFamily::LagrangeQ2 => 0,
            ElementFamily::HermiteC1 => 1,
            ElementFamily::HermiteC2 => 2,
        }
    }

    /// Map a polynomial order to the family of that order.
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(ElementFamily::LagrangeQ1),
            2 => Ok(ElementFamily::LagrangeQ2),
            3 => Ok(ElementFamily::HermiteC1),
            5 => Ok(ElementFamily::HermiteC2),
            k => Err(Error::UnsupportedFamily(format!(
                "order {k}: supported orders are 1, 2 (Lagrange) and 3, 5 (Hermite)"
            ))),
        }
    }

    /// 1D degrees of freedom as (reference node, derivative order).
    fn dofs_1d(self) -> &'static [(f64, usize)] {
        match self {
            ElementFamily::LagrangeQ1 => &[(0.0, 0), (1.0, 0)],
            ElementFamily::LagrangeQ2 => &[(0.0, 0), (0.5, 0), (1.0, 0)],
            ElementFamily::HermiteC1 => &[(0.0, 0), (0.0, 1), (1.0, 0), (1.0, 1)],
            ElementFamily::HermiteC2 => {
                &[(0.0, 0), (0.0, 1), (0.0, 2), (1.0, 0), (1.0, 1), (1.0, 2)]
            }
        }
    }

    /// Integer tick of each 1D dof inside a cell plus ticks per cell, for
    /// exact node identification across cells.
    fn ticks(self) -> (&'static [usize], usize) {
        match self {
            ElementFamily::LagrangeQ1 => (&[0, 1], 1),
            ElementFamily::LagrangeQ2 => (&[0, 1, 2], 2),
            ElementFamily::HermiteC1 => (&[0, 0, 1, 1], 1),
            ElementFamily::HermiteC2 => (&[0, 0, 0, 1, 1, 1], 1),
        }
    }

    pub fn n1d(self) -> usize {
        self.dofs_1d().len()
    }

    /// Degrees of freedom per cell.
    pub fn ndof_per_cell(self) -> usize {
        self.n1d() * self.n1d()
    }

    fn index(self) -> usize {
        match self {
            ElementFamily::LagrangeQ1 => 0,
            ElementFamily::LagrangeQ2 => 1,
            ElementFamily::HermiteC1 => 2,
            ElementFamily::HermiteC2 => 3,
        }
    }
}

/// Monomial coefficients of the 1D reference shape functions of a family:
/// `phi_i(t) = sum_k coefs[i][k] t^k`, dual to the (node, derivative) pairs.
struct Basis1d {
    coefs: Vec<Vec<f64>>,
}

/// `d`-th derivative of `t^k` evaluated at `t`: `k!/(k-d)! t^(k-d)`.
fn monomial_deriv(k: usize, d: usize, t: f64) -> f64 {
    if d > k {
        return 0.0;
    }
    let mut fall = 1.0;
    for j in 0..d {
        fall *= (k - j) as f64;
    }
    fall * t.powi((k - d) as i32)
}

fn build_basis_1d(dofs: &[(f64, usize)]) -> Basis1d {
    let n = dofs.len();
    // duality matrix M[j][k] = D^{l_j} (t^k) (t_j)
    let mut m = vec![vec![0.0; n]; n];
    for (j, &(t, l)) in dofs.iter().enumerate() {
        for (k, mk) in m[j].iter_mut().enumerate() {
            *mk = monomial_deriv(k, l, t);
        }
    }
    // invert by Gaussian elimination with partial pivoting on [M | I]
    let mut aug: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|k| if k == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p.abs() > 1e-12, "singular dual-condition matrix");
        for k in col..2 * n {
            aug[col][k] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for k in col..2 * n {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    // shape i solves M c = e_i, so c_k = (M^{-1})[k][i]
    let mut coefs: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|k| aug[k][n + i]).collect())
        .collect();
    // the dual bases of all supported families have half-integer monomial
    // coefficients; snapping removes elimination roundoff, which otherwise
    // gets amplified by extrapolation far outside the reference interval
    for row in &mut coefs {
        for c in row.iter_mut() {
            let snapped = (2.0 * *c).round() * 0.5;
            if (*c - snapped).abs() < 1e-9 {
                *c = snapped;
            }
        }
    }
    Basis1d { coefs }
}

fn basis_1d(family: ElementFamily) -> &'static Basis1d {
    static BASES: OnceLock<[Basis1d; 4]> = OnceLock::new();
    &BASES.get_or_init(|| {
        [
            build_basis_1d(ElementFamily::LagrangeQ1.dofs_1d()),
            build_basis_1d(ElementFamily::LagrangeQ2.dofs_1d()),
            build_basis_1d(ElementFamily::HermiteC1.dofs_1d()),
            build_basis_1d(ElementFamily::HermiteC2.dofs_1d()),
        ]
    })[family.index()]
}

/// Evaluate the `d`-th derivative of reference shape `i` at `t`.
fn eval_1d(family: ElementFamily, i: usize, t: f64, d: usize) -> f64 {
    let coefs = &basis_1d(family).coefs[i];
    if d >= coefs.len() {
        return 0.0;
    }
    // Horner on the derivative coefficients
    let mut acc = 0.0;
    for k in (d..coefs.len()).rev() {
        let mut fall = 1.0;
        for j in 0..d {
            fall *= (k - j) as f64;
        }
        acc = acc * t + coefs[k] * fall;
    }
    acc
}

/// Evaluate `∂_x^dx ∂_y^dy` of the physical shape function `local` of the
/// cell.  Any derivative order is accepted; orders beyond the polynomial
/// degree return zero.
pub fn evaluate_shape(
    family: ElementFamily,
    cell: &Cell,
    local: usize,
    p: Point,
    dx: usize,
    dy: usize,
) -> f64 {
    let n1 = family.n1d();
    debug_assert!(local < n1 * n1);
    let (i, j) = (local % n1, local / n1);
    let s = cell.size;
    let tx = (p.x - cell.x0) / s;
    let ty = (p.y - cell.y0) / s;
    let dofs = family.dofs_1d();
    let (lx, ly) = (dofs[i].1, dofs[j].1);
    let fx = eval_1d(family, i, tx, dx) * s.powi(lx as i32 - dx as i32);
    let fy = eval_1d(family, j, ty, dy) * s.powi(ly as i32 - dy as i32);
    fx * fy
}

/// A degree of freedom: position and derivative multi-index.  Its dual
/// functional is `v ↦ ∂_x^{α.0} ∂_y^{α.1} v(pos)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizedNode {
    pub pos: Point,
    pub alpha: (usize, usize),
}

/// A finite element space on an active mesh.
#[derive(Clone, Debug)]
pub struct FeSpace {
    pub family: ElementFamily,
    n_dofs: usize,
    cell_dofs: Vec<Vec<usize>>,
    nodes: Vec<GeneralizedNode>,
    dof_cells: Vec<Vec<usize>>,
    interior_mask: Vec<bool>,
}

impl FeSpace {
    /// Number degrees of freedom over the active cells (first touch wins).
    pub fn new(mesh: &ActiveMesh, family: ElementFamily) -> Self {
        let (ticks, m) = family.ticks();
        let dofs1 = family.dofs_1d();
        let n1 = family.n1d();
        let mut key_to_id: HashMap<(usize, usize, usize, usize), usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut dof_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_dofs = Vec::with_capacity(mesh.n_active());
        for (id, c) in mesh.cells().iter().enumerate() {
            let geom = mesh.cell_geom(id);
            let mut locals = Vec::with_capacity(n1 * n1);
            for j in 0..n1 {
                for i in 0..n1 {
                    let key = (c.ix * m + ticks[i], c.iy * m + ticks[j], dofs1[i].1, dofs1[j].1);
                    let g = *key_to_id.entry(key).or_insert_with(|| {
                        nodes.push(GeneralizedNode {
                            pos: Point::new(
                                geom.x0 + dofs1[i].0 * geom.size,
                                geom.y0 + dofs1[j].0 * geom.size,
                            ),
                            alpha: (dofs1[i].1, dofs1[j].1),
                        });
                        dof_cells.push(Vec::new());
                        nodes.len() - 1
                    });
                    dof_cells[g].push(id);
                    locals.push(g);
                }
            }
            cell_dofs.push(locals);
        }
        let mut interior_mask = vec![false; nodes.len()];
        for (id, locals) in cell_dofs.iter().enumerate() {
            if mesh.is_interior(id) {
                for &g in locals {
                    interior_mask[g] = true;
                }
            }
        }
        FeSpace {
            family,
            n_dofs: nodes.len(),
            cell_dofs,
            nodes,
            dof_cells,
            interior_mask,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Global dofs of active cell `id`, in local order (x fastest).
    pub fn cell_dofs(&self, id: usize) -> &[usize] {
        &self.cell_dofs[id]
    }

    pub fn node(&self, g: usize) -> GeneralizedNode {
        self.nodes[g]
    }

    /// Active cells sharing dof `g`, ascending.
    pub fn cells_of_dof(&self, g: usize) -> &[usize] {
        &self.dof_cells[g]
    }

    /// Whether dof `g` belongs to at least one interior cell.
    pub fn is_interior_dof(&self, g: usize) -> bool {
        self.interior_mask[g]
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.interior_mask.iter().filter(|&&b| b).count()
    }

    /// Nodal interpolant: coefficient of each dof is `D^α f(ξ)`.
    pub fn interpolate(&self, f: &dyn Fn(Point, usize, usize) -> f64) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|n| f(n.pos, n.alpha.0, n.alpha.1))
            .collect()
    }

    /// Evaluate `∂_x^dx ∂_y^dy` of a coefficient vector on active cell `id`.
    pub fn eval(&self, mesh: &ActiveMesh, coefs: &[f64], id: usize, p: Point, dx: usize, dy: usize) -> f64 {
        let geom = mesh.cell_geom(id);
        self.cell_dofs[id]
            .iter()
            .enumerate()
            .map(|(local, &g)| coefs[g] * evaluate_shape(self.family, &geom, local, p, dx, dy))
            .sum()
    }
}
