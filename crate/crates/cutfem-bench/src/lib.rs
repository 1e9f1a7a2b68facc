//! Shared fixtures for the pipeline benchmarks: small disc configurations
//! sized so a full criterion run stays in seconds, not minutes.

use cutfem::extension::{AveragingRule, ExtensionOperator};
use cutfem::femspace::{ElementFamily, FeSpace};
use cutfem::forms::{assemble_poisson, FormParams};
use cutfem::geometry::{LevelSet, Point, QuadConfig};
use cutfem::mesh::{ActiveMesh, BackgroundGrid, ShMap};
use cutfem::AssembledSystem;

pub struct Setup {
    pub mesh: ActiveMesh,
    pub space: FeSpace,
    pub ext: ExtensionOperator,
}

/// Disc of radius 1/2 on an n×n grid over [-0.6, 0.6]².
pub fn disc_setup(n: usize, family: ElementFamily) -> Setup {
    let grid = BackgroundGrid::new(Point::new(-0.6, -0.6), 1.2 / n as f64, n, n);
    let mesh = ActiveMesh::build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5)).expect("mesh");
    let space = FeSpace::new(&mesh, family);
    let sh = ShMap::build(&mesh).expect("donor map");
    let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).expect("extension");
    Setup { mesh, space, ext }
}

/// A Poisson system with constant load and homogeneous boundary data.
pub fn poisson_system(s: &Setup) -> AssembledSystem {
    assemble_poisson(
        &s.mesh,
        &s.space,
        &s.ext,
        &FormParams::poisson(),
        &QuadConfig::default(),
        &|_| 1.0,
        &|_| 0.0,
    )
    .expect("assembly")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let s = disc_setup(8, ElementFamily::LagrangeQ2);
        assert!(s.ext.n_reduced() < s.space.n_dofs());
        let sys = poisson_system(&s);
        assert_eq!(sys.k.nrows(), s.ext.n_reduced());
    }
}
