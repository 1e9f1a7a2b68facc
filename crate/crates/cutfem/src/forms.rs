//! Nitsche bilinear forms and load vectors for second-, fourth- and
//! sixth-order elliptic model problems, interface problems with
//! discontinuous diffusion, and mass matrices — plus the Galerkin reduction
//! onto the extended space.
//!
//! All Dirichlet-type boundary conditions on the unfitted boundary are
//! imposed weakly.  The forms follow the symmetrized integration-by-parts
//! identities
//!
//! * order 2: `(f, w) = (∇u, ∇w)_Ω − (∂_n u, w)_∂`, `f = −Δu`,
//! * order 4: `(f, w) = (Δu, Δw)_Ω − (Δu, ∂_n w)_∂ + (∂_nΔu, w)_∂`, `f = Δ²u`,
//! * order 6: `(f, w) = (∇Δu, ∇Δw)_Ω − (∂_nΔu, Δw)_∂ + (Δ²u, ∂_n w)_∂
//!   − (∂_nΔ²u, w)_∂`, `f = −Δ³u`,
//!
//! each completed with the transposed consistency terms and penalties
//! `β h^{1-2j}` on the j-th boundary trace, which makes every matrix
//! symmetric and, for β large enough, positive definite.  Penalties scale
//! with the background cell size (the trace-inequality scale).
//!
//! Assembly is elementwise over the active mesh with cut-cell quadrature;
//! matrices come out in full coordinates and are reduced with the extension
//! operator (`K_red = Eᵀ K E`).

use crate::extension::ExtensionOperator;
use crate::femspace::{evaluate_shape, ElementFamily, FeSpace};
use crate::geometry::{
    surface_quadrature, volume_quadrature_cfg, CellClass, Point, QuadConfig, QuadratureRule,
};
use crate::mesh::ActiveMesh;
use crate::solver::SparseMatrix;
use crate::{Error, Result};

/// Which dof set a system is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinates {
    /// All dofs of the active mesh.
    Full,
    /// Interior dofs only (image of the extension operator).
    Reduced,
}

/// How the interface averaging weights are chosen per cut cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaRule {
    /// `κ₁ = |T ∩ Ω₁| / |T|`, `κ₂ = 1 − κ₁`.
    AreaWeighted,
    /// Fixed `κ₁` on every cell.
    Fixed(f64),
}

/// Penalty and material parameters of the Nitsche forms.
#[derive(Clone, Copy, Debug)]
pub struct FormParams {
    /// Main penalty β.
    pub beta: f64,
    /// Secondary displacement penalty weight γ (fourth-order problem).
    pub gamma: f64,
    /// Interface averaging rule.
    pub kappa: KappaRule,
    /// Diffusion matrix of phase 1 (interface problem).
    pub a1: [[f64; 2]; 2],
    /// Diffusion matrix of phase 2 (interface problem).
    pub a2: [[f64; 2]; 2],
}

impl Default for FormParams {
    fn default() -> Self {
        FormParams {
            beta: 100.0,
            gamma: 1.0,
            kappa: KappaRule::AreaWeighted,
            a1: [[1.0, 0.0], [0.0, 1.0]],
            a2: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

impl FormParams {
    /// Defaults for the second-order problem (β = 100).
    pub fn poisson() -> Self {
        FormParams::default()
    }

    /// Defaults for the fourth-order problem (β = 800, γ = 1).  For the
    /// bicubic Hermite family the measured coercivity threshold on cut discs
    /// fluctuates with the cut configuration up to ≈ 4·10² (β = 100 already
    /// produces indefinite systems on moderately refined discs), so the
    /// default keeps a 2× margin above the worst measured threshold.
    pub fn biharmonic() -> Self {
        FormParams { beta: 800.0, ..Default::default() }
    }

    /// Defaults for the sixth-order problem.  The Nitsche coercivity
    /// threshold grows steeply with the element degree: for the bi-quintic
    /// Hermite family on mildly cut boxes the measured threshold sits near
    /// 1–2·10³ (β = 10³ leaves λ_min within roundoff of zero), so the
    /// default keeps a safety margin.  Strongly curved sliver cuts can
    /// require more.
    pub fn triharmonic() -> Self {
        FormParams { beta: 5e3, ..Default::default() }
    }

    /// Defaults for the interface problem (β = 10, area-weighted averages).
    pub fn interface() -> Self {
        FormParams { beta: 10.0, ..Default::default() }
    }

    fn validate(&self, needs_gamma: bool, needs_materials: bool) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::InvalidFormParams(format!("beta = {} must be positive", self.beta)));
        }
        if needs_gamma && !(self.gamma > 0.0) {
            return Err(Error::InvalidFormParams(format!("gamma = {} must be positive", self.gamma)));
        }
        if let KappaRule::Fixed(k1) = self.kappa {
            if !(k1 > 0.0 && k1 < 1.0) {
                return Err(Error::InvalidFormParams(format!("kappa1 = {k1} must lie in (0, 1)")));
            }
        }
        if needs_materials {
            for (name, a) in [("A1", self.a1), ("A2", self.a2)] {
                let sym = (a[0][1] - a[1][0]).abs() <= 1e-12 * (1.0 + a[0][1].abs());
                let spd = a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0;
                if !sym || !spd {
                    return Err(Error::InvalidFormParams(format!("{name} must be symmetric positive definite")));
                }
            }
        }
        Ok(())
    }
}

/// An assembled linear system.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub k: SparseMatrix,
    pub b: Vec<f64>,
    pub coordinates: Coordinates,
}

/// Reduce a full-coordinate system with the extension operator.  The
/// triple product is re-symmetrized: `Eᵀ K E` is symmetric exactly, and the
/// explicit `(·+·ᵀ)/2` removes the last-bit roundoff of the sparse product.
pub fn reduce(sys: &AssembledSystem, ext: &ExtensionOperator) -> AssembledSystem {
    assert_eq!(sys.coordinates, Coordinates::Full, "system already reduced");
    AssembledSystem {
        k: ext.reduce_matrix(&sys.k).symmetrized(),
        b: ext.restrict(&sys.b),
        coordinates: Coordinates::Reduced,
    }
}

/// Volume quadrature rules for every active cell.
pub fn cell_volume_rules(mesh: &ActiveMesh, quad: &QuadConfig) -> Result<Vec<QuadratureRule>> {
    (0..mesh.n_active())
        .map(|id| volume_quadrature_cfg(&mesh.cell_geom(id), &mesh.domain, quad))
        .collect()
}

/// Shape-function derivative bundle at one point, filled up to the needs of
/// a problem of order `2m`.
#[derive(Clone, Copy, Default)]
struct ShapeDerivs {
    v: f64,
    gx: f64,
    gy: f64,
    lap: f64,
    /// ∇Δ
    lx: f64,
    ly: f64,
    /// Δ²
    bilap: f64,
    /// ∇Δ²
    blx: f64,
    bly: f64,
}

fn shape_derivs(family: ElementFamily, cell: &crate::geometry::Cell, local: usize, p: Point, m: usize) -> ShapeDerivs {
    let d = |dx, dy| evaluate_shape(family, cell, local, p, dx, dy);
    let mut s = ShapeDerivs {
        v: d(0, 0),
        gx: d(1, 0),
        gy: d(0, 1),
        ..Default::default()
    };
    if m >= 2 {
        s.lap = d(2, 0) + d(0, 2);
        s.lx = d(3, 0) + d(1, 2);
        s.ly = d(2, 1) + d(0, 3);
    }
    if m >= 3 {
        s.bilap = d(4, 0) + 2.0 * d(2, 2) + d(0, 4);
        s.blx = d(5, 0) + 2.0 * d(3, 2) + d(1, 4);
        s.bly = d(4, 1) + 2.0 * d(2, 3) + d(0, 5);
    }
    s
}

impl ShapeDerivs {
    fn dn(&self, n: Point) -> f64 {
        n.x * self.gx + n.y * self.gy
    }
    fn dn_lap(&self, n: Point) -> f64 {
        n.x * self.lx + n.y * self.ly
    }
    fn dn_bilap(&self, n: Point) -> f64 {
        n.x * self.blx + n.y * self.bly
    }
}

/// Boundary data for the weak Dirichlet conditions of a problem of order 2m:
/// traces `u`, `∂_n u`, `Δu` as far as the problem uses them.
pub struct BoundaryData<'a> {
    /// g₀ = u on the boundary.
    pub g0: &'a dyn Fn(Point) -> f64,
    /// g₁ = ∂_n u; receives the point and the outward unit normal.
    pub g1: &'a dyn Fn(Point, Point) -> f64,
    /// g₂ = Δu.
    pub g2: &'a dyn Fn(Point) -> f64,
}

impl<'a> BoundaryData<'a> {
    /// Only g₀ is used (second-order problem).
    pub fn dirichlet(g0: &'a dyn Fn(Point) -> f64) -> Self {
        BoundaryData { g0, g1: &|_, _| 0.0, g2: &|_| 0.0 }
    }
}

/// Shared single-phase Nitsche assembly for problem order `2m`.
fn assemble_order_m(
    m: usize,
    mesh: &ActiveMesh,
    space: &FeSpace,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    bc: &BoundaryData,
) -> Result<AssembledSystem> {
    params.validate(m == 2, false)?;
    let n = space.n_dofs();
    let nd = space.family.ndof_per_cell();
    let h = mesh.grid.cell_size;
    let beta = params.beta;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = vec![0.0; n];
    let mut table: Vec<ShapeDerivs> = Vec::new();

    for id in 0..mesh.n_active() {
        let geom = mesh.cell_geom(id);
        let dofs = space.cell_dofs(id);
        let vol = volume_quadrature_cfg(&geom, &mesh.domain, quad)?;

        // volume terms: principal part and load
        table.clear();
        for &p in &vol.points {
            for l in 0..nd {
                table.push(shape_derivs(space.family, &geom, l, p, m));
            }
        }
        let mut ke = vec![0.0; nd * nd];
        let mut be = vec![0.0; nd];
        for (q, (&p, &w)) in vol.points.iter().zip(&vol.weights).enumerate() {
            let row = &table[q * nd..(q + 1) * nd];
            let fw = w * f(p);
            for a in 0..nd {
                be[a] += fw * row[a].v;
                for bb in 0..nd {
                    let e = match m {
                        1 => row[a].gx * row[bb].gx + row[a].gy * row[bb].gy,
                        2 => row[a].lap * row[bb].lap,
                        _ => row[a].lx * row[bb].lx + row[a].ly * row[bb].ly,
                    };
                    ke[a * nd + bb] += w * e;
                }
            }
        }

        // boundary terms on cut cells
        if mesh.cells()[id].class == CellClass::Cut {
            let surf = surface_quadrature(&geom, &mesh.domain, quad.gauss_order)?;
            let normals = surf.normals.as_ref().unwrap();
            table.clear();
            for &p in &surf.points {
                for l in 0..nd {
                    table.push(shape_derivs(space.family, &geom, l, p, m));
                }
            }
            for (q, (&p, &w)) in surf.points.iter().zip(&surf.weights).enumerate() {
                let nrm = normals[q];
                let row = &table[q * nd..(q + 1) * nd];
                match m {
                    1 => {
                        let g0 = (bc.g0)(p);
                        let pen = beta / h;
                        for a in 0..nd {
                            let (va, da) = (row[a].v, row[a].dn(nrm));
                            b[dofs[a]] += w * (-g0 * da + pen * g0 * va);
                            for bb in 0..nd {
                                let (vb, db) = (row[bb].v, row[bb].dn(nrm));
                                ke[a * nd + bb] += w * (-(da * vb + db * va) + pen * va * vb);
                            }
                        }
                    }
                    2 => {
                        let g0 = (bc.g0)(p);
                        let g1 = (bc.g1)(p, nrm);
                        let pen1 = beta / h;
                        let pen0 = beta * params.gamma / (h * h * h);
                        for a in 0..nd {
                            let (va, da, la, dla) = (row[a].v, row[a].dn(nrm), row[a].lap, row[a].dn_lap(nrm));
                            b[dofs[a]] += w * (-la * g1 + dla * g0 + pen1 * g1 * da + pen0 * g0 * va);
                            for bb in 0..nd {
                                let (vb, db, lb, dlb) = (row[bb].v, row[bb].dn(nrm), row[bb].lap, row[bb].dn_lap(nrm));
                                ke[a * nd + bb] += w
                                    * (-(la * db + lb * da)
                                        + (dla * vb + dlb * va)
                                        + pen1 * da * db
                                        + pen0 * va * vb);
                            }
                        }
                    }
                    _ => {
                        let g0 = (bc.g0)(p);
                        let g1 = (bc.g1)(p, nrm);
                        let g2 = (bc.g2)(p);
                        let pen2 = beta / h;
                        let pen1 = beta / (h * h * h);
                        let pen0 = beta / (h * h * h * h * h);
                        for a in 0..nd {
                            let (va, da, la) = (row[a].v, row[a].dn(nrm), row[a].lap);
                            let (dla, bla, dbla) = (row[a].dn_lap(nrm), row[a].bilap, row[a].dn_bilap(nrm));
                            b[dofs[a]] += w
                                * (-dla * g2 + bla * g1 - dbla * g0
                                    + pen2 * g2 * la
                                    + pen1 * g1 * da
                                    + pen0 * g0 * va);
                            for bb in 0..nd {
                                let (vb, db, lb) = (row[bb].v, row[bb].dn(nrm), row[bb].lap);
                                let (dlb, blb, dblb) = (row[bb].dn_lap(nrm), row[bb].bilap, row[bb].dn_bilap(nrm));
                                ke[a * nd + bb] += w
                                    * (-(dla * lb + dlb * la)
                                        + (bla * db + blb * da)
                                        - (dbla * vb + dblb * va)
                                        + pen2 * la * lb
                                        + pen1 * da * db
                                        + pen0 * va * vb);
                            }
                        }
                    }
                }
            }
        }

        for a in 0..nd {
            b[dofs[a]] += be[a];
            for bb in 0..nd {
                trip.push((dofs[a], dofs[bb], ke[a * nd + bb]));
            }
        }
    }
    Ok(AssembledSystem {
        k: SparseMatrix::from_triplets(n, n, trip),
        b,
        coordinates: Coordinates::Full,
    })
}

/// Poisson problem `-Δu = f`, `u = g` on the unfitted boundary; full
/// coordinates.
pub fn assemble_poisson_full(
    mesh: &ActiveMesh,
    space: &FeSpace,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    g: &dyn Fn(Point) -> f64,
) -> Result<AssembledSystem> {
    assemble_order_m(1, mesh, space, params, quad, f, &BoundaryData::dirichlet(g))
}

/// Poisson problem, reduced with the extension operator.
pub fn assemble_poisson(
    mesh: &ActiveMesh,
    space: &FeSpace,
    ext: &ExtensionOperator,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    g: &dyn Fn(Point) -> f64,
) -> Result<AssembledSystem> {
    Ok(reduce(&assemble_poisson_full(mesh, space, params, quad, f, g)?, ext))
}

/// Biharmonic problem `Δ²u = f` with clamped data `u = g₀`, `∂_n u = g₁`;
/// full coordinates.  Requires a C¹ family.
pub fn assemble_biharmonic_full(
    mesh: &ActiveMesh,
    space: &FeSpace,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    bc: &BoundaryData,
) -> Result<AssembledSystem> {
    if space.family.continuity() < 1 {
        return Err(Error::UnsupportedFamily(format!(
            "biharmonic requires a C1 family, got {:?}",
            space.family
        )));
    }
    assemble_order_m(2, mesh, space, params, quad, f, bc)
}

/// Biharmonic problem, reduced.
pub fn assemble_biharmonic(
    mesh: &ActiveMesh,
    space: &FeSpace,
    ext: &ExtensionOperator,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    bc: &BoundaryData,
) -> Result<AssembledSystem> {
    Ok(reduce(&assemble_biharmonic_full(mesh, space, params, quad, f, bc)?, ext))
}

/// Triharmonic problem `-Δ³u = f` with data `u = g₀`, `∂_n u = g₁`,
/// `Δu = g₂`; full coordinates.  Requires a C² family.
pub fn assemble_triharmonic_full(
    mesh: &ActiveMesh,
    space: &FeSpace,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    bc: &BoundaryData,
) -> Result<AssembledSystem> {
    if space.family.continuity() < 2 {
        return Err(Error::UnsupportedFamily(format!(
            "triharmonic requires a C2 family, got {:?}",
            space.family
        )));
    }
    assemble_order_m(3, mesh, space, params, quad, f, bc)
}

/// Triharmonic problem, reduced.
pub fn assemble_triharmonic(
    mesh: &ActiveMesh,
    space: &FeSpace,
    ext: &ExtensionOperator,
    params: &FormParams,
    quad: &QuadConfig,
    f: &dyn Fn(Point) -> f64,
    bc: &BoundaryData,
) -> Result<AssembledSystem> {
    Ok(reduce(&assemble_triharmonic_full(mesh, space, params, quad, f, bc)?, ext))
}

/// Mass matrix `(v, w)_Ω` in full coordinates.
pub fn assemble_mass_full(mesh: &ActiveMesh, space: &FeSpace, quad: &QuadConfig) -> Result<SparseMatrix> {
    let n = space.n_dofs();
    let nd = space.family.ndof_per_cell();
    let mut trip = Vec::new();
    for id in 0..mesh.n_active() {
        let geom = mesh.cell_geom(id);
        let dofs = space.cell_dofs(id);
        let vol = volume_quadrature_cfg(&geom, &mesh.domain, quad)?;
        let mut vals = vec![0.0; nd];
        let mut me = vec![0.0; nd * nd];
        for (&p, &w) in vol.points.iter().zip(&vol.weights) {
            for (l, v) in vals.iter_mut().enumerate() {
                *v = evaluate_shape(space.family, &geom, l, p, 0, 0);
            }
            for a in 0..nd {
                for bb in 0..nd {
                    me[a * nd + bb] += w * vals[a] * vals[bb];
                }
            }
        }
        for a in 0..nd {
            for bb in 0..nd {
                trip.push((dofs[a], dofs[bb], me[a * nd + bb]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, trip))
}

/// Mass matrix reduced with the extension operator (SPD on any cut
/// configuration — the stability payoff of the reduction).
pub fn assemble_mass(mesh: &ActiveMesh, space: &FeSpace, ext: &ExtensionOperator, quad: &QuadConfig) -> Result<SparseMatrix> {
    Ok(ext.reduce_matrix(&assemble_mass_full(mesh, space, quad)?).symmetrized())
}

/// Volume-only gradient stiffness `(∇v, ∇w)_{Ω∩T}` in full coordinates with
/// no boundary terms and no reduction — the raw cut matrix whose conditioning
/// degenerates with the cut.  Kept for stability studies; it is singular on
/// constants.
pub fn assemble_laplace_volume(mesh: &ActiveMesh, space: &FeSpace, quad: &QuadConfig) -> Result<SparseMatrix> {
    let n = space.n_dofs();
    let nd = space.family.ndof_per_cell();
    let mut trip = Vec::new();
    for id in 0..mesh.n_active() {
        let geom = mesh.cell_geom(id);
        let dofs = space.cell_dofs(id);
        let vol = volume_quadrature_cfg(&geom, &mesh.domain, quad)?;
        let mut me = vec![0.0; nd * nd];
        for (&p, &w) in vol.points.iter().zip(&vol.weights) {
            let sd: Vec<ShapeDerivs> = (0..nd).map(|l| shape_derivs(space.family, &geom, l, p, 1)).collect();
            for a in 0..nd {
                for bb in 0..nd {
                    me[a * nd + bb] += w * (sd[a].gx * sd[bb].gx + sd[a].gy * sd[bb].gy);
                }
            }
        }
        for a in 0..nd {
            for bb in 0..nd {
                trip.push((dofs[a], dofs[bb], me[a * nd + bb]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, trip).symmetrized())
}

/// Gram matrix of the value (`deriv_order = 0`) or gradient (`deriv_order =
/// 1`) over full cell extents, ignoring the cut, in full coordinates.  With
/// `interior_only` the quadratic form measures the norm over interior cells
/// alone.  These are the mesh-dependent norms in which the discrete extension
/// is stable uniformly in the cut configuration.
pub fn assemble_gram_full_cells(
    mesh: &ActiveMesh,
    space: &FeSpace,
    deriv_order: usize,
    interior_only: bool,
) -> Result<SparseMatrix> {
    assert!(deriv_order <= 1, "gram matrices cover derivative orders 0 and 1");
    let n = space.n_dofs();
    let nd = space.family.ndof_per_cell();
    let (gp, gw) = crate::geometry::gauss_01(space.family.degree() + 1)?;
    let mut trip = Vec::new();
    for id in 0..mesh.n_active() {
        if interior_only && mesh.cells()[id].class != CellClass::Inside {
            continue;
        }
        let geom = mesh.cell_geom(id);
        let dofs = space.cell_dofs(id);
        let mut me = vec![0.0; nd * nd];
        for (&xi, &wx) in gp.iter().zip(gw) {
            for (&eta, &wy) in gp.iter().zip(gw) {
                let p = Point::new(geom.x0 + geom.size * xi, geom.y0 + geom.size * eta);
                let w = geom.size * geom.size * wx * wy;
                let sd: Vec<ShapeDerivs> =
                    (0..nd).map(|l| shape_derivs(space.family, &geom, l, p, 1)).collect();
                for a in 0..nd {
                    for bb in 0..nd {
                        me[a * nd + bb] += w * if deriv_order == 0 {
                            sd[a].v * sd[bb].v
                        } else {
                            sd[a].gx * sd[bb].gx + sd[a].gy * sd[bb].gy
                        };
                    }
                }
            }
        }
        for a in 0..nd {
            for bb in 0..nd {
                trip.push((dofs[a], dofs[bb], me[a * nd + bb]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, trip).symmetrized())
}

fn mat_vec2(a: &[[f64; 2]; 2], v: (f64, f64)) -> (f64, f64) {
    (a[0][0] * v.0 + a[0][1] * v.1, a[1][0] * v.0 + a[1][1] * v.1)
}

/// One phase of an interface problem.
pub struct Phase<'a> {
    pub mesh: &'a ActiveMesh,
    pub space: &'a FeSpace,
    pub ext: &'a ExtensionOperator,
    /// Volume source of this phase.
    pub f: &'a dyn Fn(Point) -> f64,
    /// Exact trace on the outer box boundary (strong Dirichlet data).
    pub g_outer: &'a dyn Fn(Point) -> f64,
}

/// Interface problem `-div(A_i ∇u_i) = f_i` on two phases separated by the
/// boundary of the phase-1 domain, with continuity and flux matching imposed
/// weakly on the interface and Dirichlet data imposed strongly on the outer
/// (grid-fitted) box boundary.  Returns the reduced block system; block 1
/// occupies reduced indices `0..ext1.n_reduced()`.
pub fn assemble_interface(
    phase1: &Phase,
    phase2: &Phase,
    params: &FormParams,
    quad: &QuadConfig,
) -> Result<AssembledSystem> {
    params.validate(false, true)?;
    for ph in [phase1, phase2] {
        if ph.space.family.continuity() != 0 {
            return Err(Error::UnsupportedFamily(format!(
                "interface assembly supports Lagrange families, got {:?}",
                ph.space.family
            )));
        }
    }
    let (m1, m2) = (phase1.mesh, phase2.mesh);
    let (s1, s2) = (phase1.space, phase2.space);
    let g1 = m1.grid;
    let g2 = m2.grid;
    if (g1.origin.x - g2.origin.x).abs() > 1e-12
        || (g1.origin.y - g2.origin.y).abs() > 1e-12
        || (g1.cell_size - g2.cell_size).abs() > 1e-12
        || g1.nx != g2.nx
        || g1.ny != g2.ny
    {
        return Err(Error::DimensionMismatch("interface phases must share one background grid".into()));
    }
    let n1 = s1.n_dofs();
    let n = n1 + s2.n_dofs();
    let h = g1.cell_size;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = vec![0.0; n];

    // per-phase volume terms (A_i ∇v, ∇w) and loads
    for (phase, mesh, space, a_mat, offset) in [
        (phase1, m1, s1, params.a1, 0usize),
        (phase2, m2, s2, params.a2, n1),
    ] {
        let nd = space.family.ndof_per_cell();
        for id in 0..mesh.n_active() {
            let geom = mesh.cell_geom(id);
            let dofs = space.cell_dofs(id);
            let vol = volume_quadrature_cfg(&geom, &mesh.domain, quad)?;
            for (&p, &w) in vol.points.iter().zip(&vol.weights) {
                let sd: Vec<ShapeDerivs> = (0..nd).map(|l| shape_derivs(space.family, &geom, l, p, 1)).collect();
                let fw = w * (phase.f)(p);
                for a in 0..nd {
                    b[offset + dofs[a]] += fw * sd[a].v;
                    let agrad = mat_vec2(&a_mat, (sd[a].gx, sd[a].gy));
                    for bb in 0..nd {
                        trip.push((
                            offset + dofs[a],
                            offset + dofs[bb],
                            w * (agrad.0 * sd[bb].gx + agrad.1 * sd[bb].gy),
                        ));
                    }
                }
            }
        }
    }

    // interface terms: iterate the cut cells of phase 1 (their surface rules
    // tile the interface exactly once)
    let nd1 = s1.family.ndof_per_cell();
    let nd2 = s2.family.ndof_per_cell();
    let locate = |mesh: &ActiveMesh, p: Point| -> Option<usize> {
        let gx = ((p.x - mesh.grid.origin.x) / mesh.grid.cell_size).floor();
        let gy = ((p.y - mesh.grid.origin.y) / mesh.grid.cell_size).floor();
        let ix = (gx.max(0.0) as usize).min(mesh.grid.nx - 1);
        let iy = (gy.max(0.0) as usize).min(mesh.grid.ny - 1);
        mesh.active_id_at(ix, iy)
    };
    for id in 0..m1.n_active() {
        if m1.cells()[id].class != CellClass::Cut {
            continue;
        }
        let geom = m1.cell_geom(id);
        let surf = surface_quadrature(&geom, &m1.domain, quad.gauss_order)?;
        if surf.is_empty() {
            continue;
        }
        let normals = surf.normals.as_ref().unwrap();
        let vol = volume_quadrature_cfg(&geom, &m1.domain, quad)?;
        let kappa1 = match params.kappa {
            KappaRule::AreaWeighted => (vol.total_weight() / geom.area()).clamp(0.0, 1.0),
            KappaRule::Fixed(k1) => k1,
        };
        let kappa2 = 1.0 - kappa1;
        for (q, (&p, &w)) in surf.points.iter().zip(&surf.weights).enumerate() {
            let nrm = normals[q];
            let delta = 1e-3 * h;
            let shift = |sgn: f64| Point::new(p.x + sgn * delta * nrm.x, p.y + sgn * delta * nrm.y);
            let Some(id1) = locate(m1, shift(-1.0)) else {
                return Err(Error::EmptyActiveSet);
            };
            let Some(id2) = locate(m2, shift(1.0)) else {
                return Err(Error::EmptyActiveSet);
            };
            let geom1 = m1.cell_geom(id1);
            let geom2 = m2.cell_geom(id2);
            let d1 = s1.cell_dofs(id1);
            let d2 = s2.cell_dofs(id2);
            // jump vector [v] = v1 - v2 and phase fluxes n·A_i∇v_i over the
            // concatenated local dofs (phase 1 first)
            let nloc = nd1 + nd2;
            let mut jump = vec![0.0; nloc];
            let mut flux1 = vec![0.0; nloc];
            let mut flux2 = vec![0.0; nloc];
            let mut gdof = vec![0usize; nloc];
            for l in 0..nd1 {
                let sd = shape_derivs(s1.family, &geom1, l, p, 1);
                jump[l] = sd.v;
                let ag = mat_vec2(&params.a1, (sd.gx, sd.gy));
                flux1[l] = nrm.x * ag.0 + nrm.y * ag.1;
                gdof[l] = d1[l];
            }
            for l in 0..nd2 {
                let sd = shape_derivs(s2.family, &geom2, l, p, 1);
                jump[nd1 + l] = -sd.v;
                let ag = mat_vec2(&params.a2, (sd.gx, sd.gy));
                flux2[nd1 + l] = nrm.x * ag.0 + nrm.y * ag.1;
                gdof[nd1 + l] = n1 + d2[l];
            }
            // v_i - <v> = ±κ̄_i [v] with κ̄1 = κ2, κ̄2 = κ1; n_2 = -n_1; the
            // phase sums collapse to the flux average with swapped weights
            let norm_a = |a: &[[f64; 2]; 2]| {
                let an = mat_vec2(a, (nrm.x, nrm.y));
                (nrm.x * an.0 + nrm.y * an.1).sqrt()
            };
            let pen = params.beta / h * (kappa2 * kappa2 * norm_a(&params.a1) + kappa1 * kappa1 * norm_a(&params.a2));
            for a in 0..nloc {
                let fa = kappa2 * flux1[a] + kappa1 * flux2[a];
                for bb in 0..nloc {
                    let fb = kappa2 * flux1[bb] + kappa1 * flux2[bb];
                    trip.push((
                        gdof[a],
                        gdof[bb],
                        w * (-(fa * jump[bb] + fb * jump[a]) + pen * jump[a] * jump[bb]),
                    ));
                }
            }
        }
    }

    let full = AssembledSystem {
        k: SparseMatrix::from_triplets(n, n, trip),
        b,
        coordinates: Coordinates::Full,
    };

    // block-diagonal reduction
    let (e1, e2) = (phase1.ext.matrix(), phase2.ext.matrix());
    let (r1, r2) = (e1.ncols(), e2.ncols());
    let mut etrip = Vec::with_capacity(e1.nnz() + e2.nnz());
    for i in 0..e1.nrows() {
        let (cols, vals) = e1.row(i);
        for (c, v) in cols.iter().zip(vals) {
            etrip.push((i, *c, *v));
        }
    }
    for i in 0..e2.nrows() {
        let (cols, vals) = e2.row(i);
        for (c, v) in cols.iter().zip(vals) {
            etrip.push((n1 + i, r1 + c, *v));
        }
    }
    let eblk = SparseMatrix::from_triplets(n, r1 + r2, etrip);
    let mut k = full.k.rap(&eblk).symmetrized();
    let mut b = eblk.matvec_transpose(&full.b);

    // strong Dirichlet data on the outer (grid-fitted) box boundary
    let (lo, hi) = g1.extent();
    let tol = 1e-10 * (1.0 + h);
    let on_outer = |p: Point| {
        (p.x - lo.x).abs() < tol || (p.x - hi.x).abs() < tol || (p.y - lo.y).abs() < tol || (p.y - hi.y).abs() < tol
    };
    // Data is imposed at reduced (interior) dofs; a band dof that happens to
    // sit on the outer boundary stays slaved to interior dofs through the
    // extension, which reproduces the data there to the discretization order.
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    for (phase, space, offset_red) in [(phase1, s1, 0usize), (phase2, s2, r1)] {
        for r in 0..phase.ext.n_reduced() {
            let node = space.node(phase.ext.full_index(r));
            if on_outer(node.pos) {
                fixed.push((offset_red + r, (phase.g_outer)(node.pos)));
            }
        }
    }
    // symmetric elimination
    let nred = r1 + r2;
    let mut is_fixed = vec![None; nred];
    for &(r, val) in &fixed {
        is_fixed[r] = Some(val);
    }
    let mut trip2 = Vec::with_capacity(k.nnz());
    for i in 0..nred {
        let (cols, vals) = k.row(i);
        match is_fixed[i] {
            Some(_) => trip2.push((i, i, 1.0)),
            None => {
                for (j, v) in cols.iter().zip(vals) {
                    match is_fixed[*j] {
                        Some(gj) => b[i] -= v * gj,
                        None => trip2.push((i, *j, *v)),
                    }
                }
            }
        }
    }
    for &(r, val) in &fixed {
        b[r] = val;
    }
    k = SparseMatrix::from_triplets(nred, nred, trip2);
    Ok(AssembledSystem { k, b, coordinates: Coordinates::Reduced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::AveragingRule;
    use crate::geometry::LevelSet;
    use crate::mesh::{BackgroundGrid, ShMap};
    use crate::solver::{factor_ldlt, solve_spd};

    fn disc_problem(n: usize, family: ElementFamily) -> (ActiveMesh, FeSpace, ExtensionOperator) {
        // disc of radius 0.5 at the origin on a [-0.6, 0.6]^2 grid
        let grid = BackgroundGrid::new(Point::new(-0.6, -0.6), 1.2 / n as f64, n, n);
        let mesh = ActiveMesh::build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5)).unwrap();
        let space = FeSpace::new(&mesh, family);
        let sh = ShMap::build(&mesh).unwrap();
        let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).unwrap();
        (mesh, space, ext)
    }

    #[test]
    fn poisson_matrix_is_bitwise_symmetric() {
        let (mesh, space, ext) = disc_problem(8, ElementFamily::LagrangeQ1);
        let sys = assemble_poisson(&mesh, &space, &ext, &FormParams::default(), &QuadConfig::default(), &|_| 1.0, &|_| 0.0).unwrap();
        assert_eq!(sys.coordinates, Coordinates::Reduced);
        assert_eq!(sys.k.asymmetry(), 0.0);
    }

    #[test]
    fn poisson_patch_test_linear_solution() {
        // u = x solves -Δu = 0 with g = x; the discrete solution must
        // reproduce it to solver accuracy
        let (mesh, space, ext) = disc_problem(12, ElementFamily::LagrangeQ1);
        let sys = assemble_poisson(&mesh, &space, &ext, &FormParams::default(), &QuadConfig::default(), &|_| 0.0, &|p| p.x).unwrap();
        let u_red = solve_spd(&sys.k, &sys.b).unwrap();
        let u_full = ext.extend(&u_red);
        let mut worst = 0.0f64;
        for g in 0..space.n_dofs() {
            let node = space.node(g);
            worst = worst.max((u_full[g] - node.pos.x).abs());
        }
        assert!(worst < 1e-9, "patch-test error {worst:.3e}");
    }

    #[test]
    fn poisson_coercive_at_large_beta_indefinite_at_tiny_beta() {
        let (mesh, space, ext) = disc_problem(8, ElementFamily::LagrangeQ1);
        let quad = QuadConfig::default();
        let ok = assemble_poisson(&mesh, &space, &ext, &FormParams { beta: 100.0, ..Default::default() }, &quad, &|_| 1.0, &|_| 0.0).unwrap();
        assert!(factor_ldlt(&ok.k).is_ok());
        let bad = assemble_poisson(&mesh, &space, &ext, &FormParams { beta: 0.01, ..Default::default() }, &quad, &|_| 1.0, &|_| 0.0).unwrap();
        assert!(matches!(factor_ldlt(&bad.k), Err(Error::NotSpd(_))));
    }

    #[test]
    fn beta_must_be_positive() {
        let (mesh, space, ext) = disc_problem(4, ElementFamily::LagrangeQ1);
        let err = assemble_poisson(&mesh, &space, &ext, &FormParams { beta: 0.0, ..Default::default() }, &QuadConfig::default(), &|_| 0.0, &|_| 0.0);
        assert!(matches!(err, Err(Error::InvalidFormParams(_))));
    }

    #[test]
    fn mass_matrix_integrates_the_disc_area() {
        let (mesh, space, ext) = disc_problem(8, ElementFamily::LagrangeQ1);
        let m = assemble_mass(&mesh, &space, &ext, &QuadConfig::default()).unwrap();
        // 1ᵀ M 1 with the reduced interpolant of 1 = |Ω| = π/4; the value
        // dofs reproduce constants exactly under extension
        let ones = ext.reduced_interpolant(&space, &|_, dx, dy| if dx == 0 && dy == 0 { 1.0 } else { 0.0 });
        let m1 = m.matvec(&ones);
        let total: f64 = ones.iter().zip(&m1).map(|(a, b)| a * b).sum();
        assert!((total - std::f64::consts::PI / 4.0).abs() < 1e-10, "area {total}");
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn reduced_mass_is_spd_on_a_sliver() {
        // circle radius 0.5 + 1e-8 with grid lines exactly at ±0.5 produces
        // sliver cuts of measure ~1e-12; the reduced mass matrix must stay
        // SPD while the full one is numerically singular
        let eps = 1e-8;
        let grid = BackgroundGrid::new(Point::new(-0.75, -0.75), 0.125, 12, 12);
        let mesh = ActiveMesh::build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5 + eps)).unwrap();
        let space = FeSpace::new(&mesh, ElementFamily::LagrangeQ1);
        let sh = ShMap::build(&mesh).unwrap();
        let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).unwrap();
        let m_red = assemble_mass(&mesh, &space, &ext, &QuadConfig::default()).unwrap();
        assert!(factor_ldlt(&m_red).is_ok(), "reduced mass not SPD on sliver");
    }

    #[test]
    fn biharmonic_patch_test_bilinear_solution() {
        // u = xy is biharmonic with Δu = 0; boundary data g0 = xy,
        // g1 = n·(y, x)
        let grid = BackgroundGrid::new(Point::new(-0.1, -0.1), 1.2 / 12.0, 12, 12);
        let mesh = ActiveMesh::build(grid, LevelSet::circle(Point::new(0.5, 0.5), 0.5)).unwrap();
        let space = FeSpace::new(&mesh, ElementFamily::HermiteC1);
        let sh = ShMap::build(&mesh).unwrap();
        let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).unwrap();
        let bc = BoundaryData {
            g0: &|p: Point| p.x * p.y,
            g1: &|p: Point, n: Point| n.x * p.y + n.y * p.x,
            g2: &|_| 0.0,
        };
        let params = FormParams { beta: 100.0, gamma: 1.0, ..Default::default() };
        let quad = QuadConfig { gauss_order: 5, ..Default::default() };
        let sys = assemble_biharmonic(&mesh, &space, &ext, &params, &quad, &|_| 0.0, &bc).unwrap();
        assert_eq!(sys.k.asymmetry(), 0.0);
        let u_red = solve_spd(&sys.k, &sys.b).unwrap();
        let u_full = ext.extend(&u_red);
        let exact = space.interpolate(&|p, dx, dy| match (dx, dy) {
            (0, 0) => p.x * p.y,
            (1, 0) => p.y,
            (0, 1) => p.x,
            (1, 1) => 1.0,
            _ => 0.0,
        });
        let worst = u_full
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-8, "biharmonic patch-test error {worst:.3e}");
    }

    #[test]
    fn biharmonic_rejects_c0_families() {
        let (mesh, space, ext) = disc_problem(4, ElementFamily::LagrangeQ2);
        let bc = BoundaryData::dirichlet(&|_| 0.0);
        let err = assemble_biharmonic(&mesh, &space, &ext, &FormParams::default(), &QuadConfig::default(), &|_| 0.0, &bc);
        assert!(matches!(err, Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn triharmonic_patch_test_cubic_solution() {
        // u = x³ has Δu = 6x, Δ²u = 0, Δ³u = 0, posed on the unit box with a
        // shifted background grid so every boundary cell is genuinely cut.
        // Two assertions with very different sharpness: the assembled system
        // is consistent to near machine precision (the exact interpolant has
        // a tiny relative residual), while the solved dof error carries the
        // f64 conditioning floor of the sixth-order operator (κ ≈ 10¹¹ at
        // this level), placing it near 1e-4 — no f64 solver can do better.
        let s0: f64 = 1.41 / 8.0;
        let nx = ((1.0_f64 + 0.21) / s0).ceil() as usize;
        let ny = ((1.0_f64 + 0.31) / s0).ceil() as usize;
        let grid = BackgroundGrid::new(Point::new(-0.21, -0.31), s0, nx, ny);
        let mesh = ActiveMesh::build(grid, LevelSet::axis_box(Point::new(0.0, 0.0), Point::new(1.0, 1.0))).unwrap();
        let space = FeSpace::new(&mesh, ElementFamily::HermiteC2);
        let sh = ShMap::build(&mesh).unwrap();
        let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).unwrap();
        let bc = BoundaryData {
            g0: &|p: Point| p.x.powi(3),
            g1: &|p: Point, n: Point| n.x * 3.0 * p.x * p.x,
            g2: &|p: Point| 6.0 * p.x,
        };
        let params = FormParams::triharmonic();
        let quad = QuadConfig { gauss_order: 6, ..Default::default() };
        let sys = assemble_triharmonic(&mesh, &space, &ext, &params, &quad, &|_| 0.0, &bc).unwrap();
        assert_eq!(sys.k.asymmetry(), 0.0);
        let exact = space.interpolate(&|p, dx, dy| {
            if dy > 0 {
                return 0.0;
            }
            match dx {
                0 => p.x.powi(3),
                1 => 3.0 * p.x * p.x,
                2 => 6.0 * p.x,
                _ => 0.0,
            }
        });
        let exact_red: Vec<f64> = (0..ext.n_reduced()).map(|r| exact[ext.full_index(r)]).collect();
        let ku = sys.k.matvec(&exact_red);
        let res = ku.iter().zip(&sys.b).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        let bmax = sys.b.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        assert!(res / bmax < 1e-10, "consistency residual {:.3e} relative", res / bmax);
        let u_red = solve_spd(&sys.k, &sys.b).unwrap();
        let worst = u_red
            .iter()
            .zip(&exact_red)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-3, "triharmonic patch-test error {worst:.3e}");
    }

    #[test]
    fn triharmonic_rejects_c1_families() {
        let (mesh, space, ext) = disc_problem(4, ElementFamily::HermiteC1);
        let bc = BoundaryData::dirichlet(&|_| 0.0);
        let err = assemble_triharmonic(&mesh, &space, &ext, &FormParams::default(), &QuadConfig::default(), &|_| 0.0, &bc);
        assert!(matches!(err, Err(Error::UnsupportedFamily(_))));
    }

    fn interface_setup(
        n: usize,
        family: ElementFamily,
        domain1: LevelSet,
    ) -> ((ActiveMesh, FeSpace, ExtensionOperator), (ActiveMesh, FeSpace, ExtensionOperator)) {
        let grid = BackgroundGrid::new(Point::new(0.0, 0.0), 1.0 / n as f64, n, n);
        let build = |dom: LevelSet| {
            let mesh = ActiveMesh::build(grid, dom).unwrap();
            let space = FeSpace::new(&mesh, family);
            let sh = ShMap::build(&mesh).unwrap();
            let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).unwrap();
            (mesh, space, ext)
        };
        (build(domain1), build(domain1.complement()))
    }

    #[test]
    fn interface_patch_test_piecewise_linear() {
        // interface x = 0.53 (off the grid lines), A1 = 5I, A2 = 2I;
        // u1 = 2x and u2 = 5x - 3*0.53 are continuous at the interface with
        // matching flux 5*2 = 2*5 and f = 0 in both phases
        let xs = 0.53;
        let (p1, p2) = interface_setup(8, ElementFamily::LagrangeQ1, LevelSet::half_plane(Point::new(1.0, 0.0), xs));
        let u1 = move |p: Point| 2.0 * p.x;
        let u2 = move |p: Point| 5.0 * p.x - 3.0 * xs;
        let params = FormParams {
            beta: 10.0,
            a1: [[5.0, 0.0], [0.0, 5.0]],
            a2: [[2.0, 0.0], [0.0, 2.0]],
            ..Default::default()
        };
        let phase1 = Phase { mesh: &p1.0, space: &p1.1, ext: &p1.2, f: &|_| 0.0, g_outer: &u1 };
        let phase2 = Phase { mesh: &p2.0, space: &p2.1, ext: &p2.2, f: &|_| 0.0, g_outer: &u2 };
        let sys = assemble_interface(&phase1, &phase2, &params, &QuadConfig::default()).unwrap();
        let sol = solve_spd(&sys.k, &sys.b).unwrap();
        let r1 = p1.2.n_reduced();
        let full1 = p1.2.extend(&sol[..r1]);
        let full2 = p2.2.extend(&sol[r1..]);
        let mut worst = 0.0f64;
        for g in 0..p1.1.n_dofs() {
            worst = worst.max((full1[g] - u1(p1.1.node(g).pos)).abs());
        }
        for g in 0..p2.1.n_dofs() {
            worst = worst.max((full2[g] - u2(p2.1.node(g).pos)).abs());
        }
        assert!(worst < 1e-9, "interface patch-test error {worst:.3e}");
    }

    #[test]
    fn interface_area_weights_sum_to_one() {
        // a half-covered cell gets kappa1 = 1/2
        let grid = BackgroundGrid::new(Point::new(0.0, 0.0), 0.25, 4, 4);
        let mesh = ActiveMesh::build(grid, LevelSet::half_plane(Point::new(1.0, 0.0), 0.625)).unwrap();
        let id = mesh.active_id_at(2, 1).unwrap();
        let vol = volume_quadrature_cfg(&mesh.cell_geom(id), &mesh.domain, &QuadConfig::default()).unwrap();
        let kappa1 = vol.total_weight() / mesh.cell_geom(id).area();
        assert!((kappa1 - 0.5).abs() < 1e-13);
    }

    #[test]
    fn interface_rejects_non_spd_materials() {
        let (p1, p2) = interface_setup(8, ElementFamily::LagrangeQ1, LevelSet::circle(Point::new(0.5, 0.5), 0.25));
        let params = FormParams { a1: [[1.0, 3.0], [3.0, 1.0]], ..Default::default() };
        let phase1 = Phase { mesh: &p1.0, space: &p1.1, ext: &p1.2, f: &|_| 0.0, g_outer: &|_| 0.0 };
        let phase2 = Phase { mesh: &p2.0, space: &p2.1, ext: &p2.2, f: &|_| 0.0, g_outer: &|_| 0.0 };
        let err = assemble_interface(&phase1, &phase2, &params, &QuadConfig::default());
        assert!(matches!(err, Err(Error::InvalidFormParams(_))));
    }

    #[test]
    fn load_scales_linearly_with_the_source() {
        let (mesh, space, ext) = disc_problem(6, ElementFamily::LagrangeQ1);
        let quad = QuadConfig::default();
        let params = FormParams::default();
        let s1 = assemble_poisson(&mesh, &space, &ext, &params, &quad, &|p| p.x + 0.3, &|_| 0.0).unwrap();
        let s2 = assemble_poisson(&mesh, &space, &ext, &params, &quad, &|p| 2.0 * (p.x + 0.3), &|_| 0.0).unwrap();
        for (a, b) in s1.b.iter().zip(&s2.b) {
            assert!((2.0 * a - b).abs() < 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn volume_stiffness_of_a_linear_field_measures_the_cut_area() {
        // uᵀ K u = ∫_Ω |∇x|² = |Ω| = π/4 on the unit-radius… r = 0.5 disc
        let (mesh, space, _) = disc_problem(12, ElementFamily::LagrangeQ1);
        let k = assemble_laplace_volume(&mesh, &space, &QuadConfig::default()).unwrap();
        let u = space.interpolate(&|p, dx, dy| match (dx, dy) {
            (0, 0) => p.x,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let q = u.iter().zip(&k.matvec(&u)).map(|(a, b)| a * b).sum::<f64>();
        let area = std::f64::consts::PI * 0.25;
        assert!((q - area).abs() < 1e-6, "quadratic form {q} vs area {area}");
        // constants are in the kernel
        let ones = vec![1.0; space.n_dofs()];
        let kc = k.matvec(&ones);
        assert!(kc.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn full_cell_gram_matrices_measure_full_cell_norms() {
        let (mesh, space, _) = disc_problem(8, ElementFamily::LagrangeQ2);
        let size = mesh.grid.cell_size;
        let n_int = (0..mesh.n_active()).filter(|&id| mesh.cells()[id].class == CellClass::Inside).count();
        let ones = space.interpolate(&|_, dx, dy| if dx == 0 && dy == 0 { 1.0 } else { 0.0 });
        let linear = space.interpolate(&|p, dx, dy| match (dx, dy) {
            (0, 0) => p.x,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let g0 = assemble_gram_full_cells(&mesh, &space, 0, false).unwrap();
        let g1i = assemble_gram_full_cells(&mesh, &space, 1, true).unwrap();
        let q0 = ones.iter().zip(&g0.matvec(&ones)).map(|(a, b)| a * b).sum::<f64>();
        let q1 = linear.iter().zip(&g1i.matvec(&linear)).map(|(a, b)| a * b).sum::<f64>();
        let full_area = mesh.n_active() as f64 * size * size;
        let int_area = n_int as f64 * size * size;
        assert!((q0 - full_area).abs() < 1e-12 * full_area, "{q0} vs {full_area}");
        assert!((q1 - int_area).abs() < 1e-12 * int_area.max(1.0), "{q1} vs {int_area}");
    }
}
