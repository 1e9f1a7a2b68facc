//! Backward-Euler time stepping on the reduced system.
//!
//! One step of the heat-type problem `M u' + K u = l(t)` reads
//! `(M + τK) u^{n+1} = M u^n + τ l(t^{n+1})`; the matrix is factorized once
//! and reused for every step.

use crate::solver::{ScaledFactor, SparseMatrix};
use crate::{Error, Result};

/// Implicit Euler stepper with a single factorization of `M + τK`.
pub struct BackwardEuler {
    m: SparseMatrix,
    tau: f64,
    factor: ScaledFactor,
}

impl BackwardEuler {
    pub fn new(m: &SparseMatrix, k: &SparseMatrix, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidFormParams(format!("time step {tau} must be positive")));
        }
        if m.nrows() != k.nrows() || m.ncols() != k.ncols() || m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "mass {}x{} vs stiffness {}x{}",
                m.nrows(),
                m.ncols(),
                k.nrows(),
                k.ncols()
            )));
        }
        let a = m.add_scaled(1.0, k, tau);
        Ok(BackwardEuler {
            m: m.clone(),
            tau,
            factor: ScaledFactor::new(&a)?,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advance one step: `u^{n+1}` from `u^n` and the load at `t^{n+1}`.
    pub fn step(&self, u: &[f64], load_next: &[f64]) -> Vec<f64> {
        let mu = self.m.matvec(u);
        let rhs: Vec<f64> = mu.iter().zip(load_next).map(|(a, l)| a + self.tau * l).collect();
        self.factor.solve(&rhs).0
    }

    /// The discrete energy `uᵀ M u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mu = self.m.matvec(u);
        u.iter().zip(&mu).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::{AveragingRule, ExtensionOperator};
    use crate::femspace::{ElementFamily, FeSpace};
    use crate::forms::{assemble_mass, assemble_poisson, FormParams};
    use crate::geometry::{LevelSet, Point, QuadConfig};
    use crate::mesh::{ActiveMesh, BackgroundGrid, ShMap};
    use crate::solver::solve_spd;

    fn disc_heat_setup() -> (SparseMatrix, SparseMatrix, Vec<f64>) {
        let n = 8;
        let grid = BackgroundGrid::new(Point::new(-0.6, -0.6), 1.2 / n as f64, n, n);
        let mesh = ActiveMesh::build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5)).unwrap();
        let space = FeSpace::new(&mesh, ElementFamily::LagrangeQ1);
        let sh = ShMap::build(&mesh).unwrap();
        let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default()).unwrap();
        let quad = QuadConfig::default();
        let sys = assemble_poisson(&mesh, &space, &ext, &FormParams::default(), &quad, &|_| 1.0, &|_| 0.0).unwrap();
        let m = assemble_mass(&mesh, &space, &ext, &quad).unwrap();
        (m, sys.k, sys.b)
    }

    #[test]
    fn stationary_solutions_are_preserved() {
        let (m, k, b) = disc_heat_setup();
        let u_star = solve_spd(&k, &b).unwrap();
        let stepper = BackwardEuler::new(&m, &k, 0.05).unwrap();
        let mut u = u_star.clone();
        for _ in 0..100 {
            u = stepper.step(&u, &b);
        }
        let drift = u.iter().zip(&u_star).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(drift < 1e-8, "stationary drift {drift:.3e} after 100 steps");
    }

    #[test]
    fn unforced_flow_is_dissipative() {
        let (m, k, _) = disc_heat_setup();
        let n = m.nrows();
        // deterministic wiggly start
        let u0: Vec<f64> = (0..n).map(|i| ((i * 2654435761 + 1) % 1000) as f64 / 500.0 - 1.0).collect();
        let zero = vec![0.0; n];
        let stepper = BackwardEuler::new(&m, &k, 0.02).unwrap();
        let mut u = u0;
        let mut prev = stepper.energy(&u);
        for _ in 0..20 {
            u = stepper.step(&u, &zero);
            let e = stepper.energy(&u);
            assert!(e <= prev * (1.0 + 1e-12), "energy grew: {prev} -> {e}");
            prev = e;
        }
        assert!(prev < 1e-3, "energy should decay strongly, got {prev}");
    }

    #[test]
    fn scalar_model_problem_converges_first_order_in_tau() {
        // u' + u = 0, u(0) = 1 → u(1) = e⁻¹; backward Euler error is O(τ)
        let m = SparseMatrix::identity(1);
        let k = SparseMatrix::identity(1);
        let mut errs = Vec::new();
        for steps in [10usize, 20, 40] {
            let tau = 1.0 / steps as f64;
            let stepper = BackwardEuler::new(&m, &k, tau).unwrap();
            let mut u = vec![1.0];
            for _ in 0..steps {
                u = stepper.step(&u, &[0.0]);
            }
            errs.push((u[0] - (-1.0f64).exp()).abs());
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!((r1 - 2.0).abs() < 0.2, "tau-halving ratio {r1}");
        assert!((r2 - 2.0).abs() < 0.1, "tau-halving ratio {r2}");
    }

    #[test]
    fn invalid_time_step_and_shapes_are_rejected() {
        let m = SparseMatrix::identity(3);
        let k = SparseMatrix::identity(3);
        assert!(matches!(BackwardEuler::new(&m, &k, 0.0), Err(Error::InvalidFormParams(_))));
        let k2 = SparseMatrix::identity(4);
        assert!(matches!(BackwardEuler::new(&m, &k2, 0.1), Err(Error::DimensionMismatch(_))));
    }
}
