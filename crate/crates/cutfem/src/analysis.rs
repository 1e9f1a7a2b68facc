//! Error norms against manufactured solutions and estimated orders of
//! convergence.

use crate::femspace::FeSpace;
use crate::geometry::{volume_quadrature_cfg, QuadConfig};
use crate::manufactured::Manufactured;
use crate::mesh::ActiveMesh;
use crate::Result;

/// Which energy seminorm accompanies a study.
#[derive(Clone, Copy, Debug)]
pub enum EnergyKind {
    /// `|∇e|²` (second-order problems).
    Grad,
    /// `(A∇e)·∇e` with a per-phase diffusion matrix (interface problems).
    GradA([[f64; 2]; 2]),
    /// `(Δe)²` (fourth-order problems).
    Laplacian,
    /// `|∇Δe|²` (sixth-order problems).
    GradLaplacian,
}

/// Integrated error norms of `u_h - u` over the physical domain.
#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    /// Present when second-derivative errors were requested.
    pub h2_semi: Option<f64>,
    /// Squared energy seminorm (summable across phases).
    pub energy_sq: f64,
}

impl ErrorNorms {
    pub fn energy(&self) -> f64 {
        self.energy_sq.sqrt()
    }

    /// Combine phase-wise norms (squares add).
    pub fn combined(&self, other: &ErrorNorms) -> ErrorNorms {
        let h2 = match (self.h2_semi, other.h2_semi) {
            (Some(a), Some(b)) => Some((a * a + b * b).sqrt()),
            _ => None,
        };
        ErrorNorms {
            l2: (self.l2 * self.l2 + other.l2 * other.l2).sqrt(),
            h1_semi: (self.h1_semi * self.h1_semi + other.h1_semi * other.h1_semi).sqrt(),
            h2_semi: h2,
            energy_sq: self.energy_sq + other.energy_sq,
        }
    }
}

/// Error norms of a discrete field (full coordinates) against an exact
/// solution, integrated with cut-cell quadrature.  `with_h2` additionally
/// accumulates the H² seminorm (requires second derivatives of `exact`).
pub fn error_norms(
    mesh: &ActiveMesh,
    space: &FeSpace,
    u_full: &[f64],
    exact: &dyn Manufactured,
    energy: EnergyKind,
    quad: &QuadConfig,
    with_h2: bool,
) -> Result<ErrorNorms> {
    assert_eq!(u_full.len(), space.n_dofs(), "coefficient vector length");
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut h2 = 0.0;
    let mut en = 0.0;
    for id in 0..mesh.n_active() {
        let vol = volume_quadrature_cfg(&mesh.cell_geom(id), &mesh.domain, quad)?;
        for (&p, &w) in vol.points.iter().zip(&vol.weights) {
            let e0 = space.eval(mesh, u_full, id, p, 0, 0) - exact.deriv(p, 0, 0);
            let ex = space.eval(mesh, u_full, id, p, 1, 0) - exact.deriv(p, 1, 0);
            let ey = space.eval(mesh, u_full, id, p, 0, 1) - exact.deriv(p, 0, 1);
            l2 += w * e0 * e0;
            h1 += w * (ex * ex + ey * ey);
            if with_h2 {
                let exx = space.eval(mesh, u_full, id, p, 2, 0) - exact.deriv(p, 2, 0);
                let exy = space.eval(mesh, u_full, id, p, 1, 1) - exact.deriv(p, 1, 1);
                let eyy = space.eval(mesh, u_full, id, p, 0, 2) - exact.deriv(p, 0, 2);
                h2 += w * (exx * exx + 2.0 * exy * exy + eyy * eyy);
            }
            en += w * match energy {
                EnergyKind::Grad => ex * ex + ey * ey,
                EnergyKind::GradA(a) => {
                    let ax = a[0][0] * ex + a[0][1] * ey;
                    let ay = a[1][0] * ex + a[1][1] * ey;
                    ax * ex + ay * ey
                }
                EnergyKind::Laplacian => {
                    let el = space.eval(mesh, u_full, id, p, 2, 0) + space.eval(mesh, u_full, id, p, 0, 2)
                        - exact.laplacian(p);
                    el * el
                }
                EnergyKind::GradLaplacian => {
                    let elx = space.eval(mesh, u_full, id, p, 3, 0) + space.eval(mesh, u_full, id, p, 1, 2)
                        - (exact.deriv(p, 3, 0) + exact.deriv(p, 1, 2));
                    let ely = space.eval(mesh, u_full, id, p, 2, 1) + space.eval(mesh, u_full, id, p, 0, 3)
                        - (exact.deriv(p, 2, 1) + exact.deriv(p, 0, 3));
                    elx * elx + ely * ely
                }
            };
        }
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
        h2_semi: with_h2.then(|| h2.sqrt()),
        energy_sq: en,
    })
}

/// Estimated order of convergence between a coarse `(h, e)` pair and a
/// fine one: `log(e_c/e_f) / log(h_c/h_f)`.
pub fn eoc(coarse: (f64, f64), fine: (f64, f64)) -> f64 {
    (coarse.1 / fine.1).ln() / (coarse.0 / fine.0).ln()
}
