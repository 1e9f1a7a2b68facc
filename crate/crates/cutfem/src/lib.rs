//! Unfitted (cut) finite elements on Cartesian background grids.
//!
//! The background grid is laid over the computational domain without fitting
//! it; cells are classified against an implicitly described geometry and the
//! resulting active mesh carries standard tensor-product elements.  Stability
//! on arbitrarily small cut fragments is restored algebraically by a discrete
//! extension operator that expresses every degree of freedom near the boundary
//! through well-covered interior degrees of freedom.  All system matrices are
//! first assembled in the full nodal basis and then reduced with that
//! operator.
//!
//! Modules, bottom up:
//!
//! * [`geometry`] — implicit domains, cell classification, cut-cell volume and
//!   surface quadrature,
//! * [`mesh`] — background grid, active mesh, donor-cell map,
//! * [`femspace`] — tensor Lagrange and Hermite elements and their DOF maps,
//! * [`extension`] — the discrete extension operator,
//! * [`solver`] — CSR matrices, a skyline LDL^T factorization, CG, condition
//!   estimation,
//! * [`forms`] — Nitsche bilinear forms for second-, fourth- and sixth-order
//!   problems plus mass matrices and the reduction step,
//! * [`analysis`] — errors in cut norms and observed convergence orders,
//! * [`manufactured`] — closed-form solutions used by tests and the CLI,
//! * [`timestep`] — an implicit Euler stepper on the reduced system.

pub mod analysis;
pub mod extension;
pub mod femspace;
pub mod forms;
pub mod geometry;
pub mod manufactured;
pub mod mesh;
pub mod solver;
pub mod timestep;

pub use analysis::{eoc, error_norms, EnergyKind, ErrorNorms};
pub use extension::{AveragingRule, ExtensionOperator};
pub use femspace::{ElementFamily, FeSpace, GeneralizedNode};
pub use forms::{AssembledSystem, Coordinates, FormParams};
pub use manufactured::{Manufactured, PolyXY, RadialCos};
pub use solver::SparseMatrix;
pub use geometry::{classify_cell, Cell, CellClass, LevelSet, Point, QuadConfig, QuadratureRule};
pub use mesh::{ActiveMesh, BackgroundGrid, ShMap};
pub use timestep::BackwardEuler;

/// Error type shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("gauss order {0} unsupported (tables cover 1..=10)")]
    UnsupportedGaussOrder(usize),
    #[error("domain does not meet the grid: active cell set is empty")]
    EmptyActiveSet,
    #[error("domain is not covered by the grid (bounding box exceeds grid extents)")]
    DomainOutsideGrid,
    #[error("no interior cell available ({0})")]
    NoInteriorCells(String),
    #[error("unsupported element family: {0}")]
    UnsupportedFamily(String),
    #[error("averaging weights invalid: {0}")]
    InvalidWeights(String),
    #[error("form parameters invalid: {0}")]
    InvalidFormParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric positive definite ({0})")]
    NotSpd(String),
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("eigenvalue estimate did not settle within {0} iterations")]
    EigenNonConvergence(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
