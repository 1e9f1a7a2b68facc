//! The experiment cases behind `cutfem run <case>`.
//!
//! Each runner produces result rows for the pinned CSV schema, plot series
//! for the convergence SVG, flat metadata notes, and a list of named checks
//! evaluated when `--check` is given.
//!
//! Two rate conventions appear side by side, on purpose:
//!
//! * the `eoc_*` table columns use the reported mesh parameter
//!   h = 1/√NNO (or τ for the heat case), i.e. log(e_c/e_f)/log(h_c/h_f);
//! * the `--check` bands use log2 of the error ratio between consecutive
//!   levels, which reads the O(h^p) exponent directly because every level
//!   sequence halves the cell size exactly.  On coarse cut meshes the node
//!   count grows sub-geometrically, so the table EOCs sit slightly above
//!   the check rates.

use cutfem::extension::{AveragingRule, ExtensionOperator};
use cutfem::femspace::{ElementFamily, FeSpace};
use cutfem::forms::{
    assemble_biharmonic, assemble_gram_full_cells, assemble_interface, assemble_laplace_volume,
    assemble_mass, assemble_poisson, assemble_triharmonic, BoundaryData, FormParams, Phase,
};
use cutfem::geometry::{LevelSet, Point, QuadConfig};
use cutfem::manufactured::{Manufactured, PolyXY, RadialCos};
use cutfem::mesh::{ActiveMesh, BackgroundGrid, ShMap};
use cutfem::solver::{estimate_condition, solve_spd, ScaledFactor, SparseMatrix};
use cutfem::timestep::BackwardEuler;
use cutfem::{eoc, error_norms, EnergyKind, ErrorNorms};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Options;
use crate::svg::{RefLine, Series};

pub const CASES: &str = "poisson | interface | biharmonic | triharmonic | heat | sliver | extension-props";

pub const CSV_HEADER: &str =
    "level,h,nno,dofs_full,dofs_reduced,err_l2,err_h1,err_h2,err_energy,eoc_l2,eoc_h1,eoc_h2,eoc_energy,cond_est";

/// One results row; `None` renders as an empty CSV field.
#[derive(Default, Clone)]
pub struct Row {
    pub level: usize,
    pub h: Option<f64>,
    pub nno: Option<usize>,
    pub dofs_full: Option<usize>,
    pub dofs_reduced: Option<usize>,
    pub err_l2: Option<f64>,
    pub err_h1: Option<f64>,
    pub err_h2: Option<f64>,
    pub err_energy: Option<f64>,
    pub eoc_l2: Option<f64>,
    pub eoc_h1: Option<f64>,
    pub eoc_h2: Option<f64>,
    pub eoc_energy: Option<f64>,
    pub cond_est: Option<f64>,
}

impl Row {
    pub fn csv_fields(&self) -> Vec<String> {
        let num = |o: Option<f64>| o.map(|v| format!("{v:.6e}")).unwrap_or_default();
        let rate = |o: Option<f64>| o.map(|v| format!("{v:.3}")).unwrap_or_default();
        let int = |o: Option<usize>| o.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.level.to_string(),
            num(self.h),
            int(self.nno),
            int(self.dofs_full),
            int(self.dofs_reduced),
            num(self.err_l2),
            num(self.err_h1),
            num(self.err_h2),
            num(self.err_energy),
            rate(self.eoc_l2),
            rate(self.eoc_h1),
            rate(self.eoc_h2),
            rate(self.eoc_energy),
            self.cond_est.map(|v| format!("{v:.3e}")).unwrap_or_default(),
        ]
    }
}

/// A named acceptance check, evaluated under `--check`.
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub struct CaseOutput {
    pub title: String,
    pub x_label: String,
    pub rows: Vec<Row>,
    pub series: Vec<Series>,
    pub ref_lines: Vec<RefLine>,
    pub checks: Vec<Check>,
    /// Flat key → value metadata for run.json (resolved options included).
    pub notes: Vec<(String, String)>,
}

pub fn run_case(case: &str, opts: &Options) -> Result<CaseOutput, String> {
    match case {
        "poisson" => poisson(opts),
        "interface" => interface(opts),
        "biharmonic" => biharmonic(opts),
        "triharmonic" => triharmonic(opts),
        "heat" => heat(opts),
        "sliver" => sliver(opts),
        "extension-props" => extension_props(opts),
        other => Err(format!("unknown case `{other}` (expected {CASES})")),
    }
}

// ------------------------------------------------------------------ shared

struct Setup {
    mesh: ActiveMesh,
    space: FeSpace,
    ext: ExtensionOperator,
}

fn build(grid: BackgroundGrid, domain: LevelSet, family: ElementFamily) -> Result<Setup, String> {
    let mesh = ActiveMesh::build(grid, domain).map_err(|e| format!("mesh build: {e}"))?;
    let space = FeSpace::new(&mesh, family);
    let sh = ShMap::build(&mesh).map_err(|e| format!("donor map: {e}"))?;
    let ext = ExtensionOperator::build(&mesh, &space, &sh, AveragingRule::default())
        .map_err(|e| format!("extension operator: {e}"))?;
    Ok(Setup { mesh, space, ext })
}

/// The disc benchmark geometry: Ω = {r < 1/2} on a grid over [-0.6, 0.6]².
fn disc_setup(n: usize, family: ElementFamily) -> Result<Setup, String> {
    let grid = BackgroundGrid::new(Point::new(-0.6, -0.6), 1.2 / n as f64, n, n);
    build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5), family)
}

fn quad_form(m: &SparseMatrix, x: &[f64]) -> f64 {
    x.iter().zip(&m.matvec(x)).map(|(a, b)| a * b).sum()
}

/// Observed order between consecutive levels of an exactly-halving mesh
/// sequence (the `--check` convention).
fn log2_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Mean log2 rate over the last two level pairs (or the single pair when
/// only two levels were run).
fn mean_rate(errors: &[f64]) -> f64 {
    let n = errors.len();
    if n >= 3 {
        (log2_rate(errors[n - 3], errors[n - 2]) + log2_rate(errors[n - 2], errors[n - 1])) / 2.0
    } else {
        log2_rate(errors[n - 2], errors[n - 1])
    }
}

fn band_check(name: &str, measured: f64, target: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        pass: (measured - target).abs() <= tol,
        detail: format!("measured {measured:.2}, want {target}±{tol}"),
    }
}

/// Table-convention EOC between consecutive rows, left empty for
/// non-positive errors (undefined pair).
fn table_eoc(prev: Option<(f64, f64)>, h: f64, e: f64) -> Option<f64> {
    let (hp, ep) = prev?;
    (ep > 0.0 && e > 0.0 && hp > h).then(|| eoc((hp, ep), (h, e)))
}

fn levels_of(opts: &Options, default: usize) -> usize {
    opts.levels.unwrap_or(default)
}

fn echo(notes: &mut Vec<(String, String)>, key: &str, value: impl ToString) {
    notes.push((key.into(), value.to_string()));
}

struct NormSeq {
    hs: Vec<f64>,
    l2: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    energy: Vec<f64>,
}

impl NormSeq {
    fn new() -> Self {
        NormSeq { hs: Vec::new(), l2: Vec::new(), h1: Vec::new(), h2: Vec::new(), energy: Vec::new() }
    }

    fn push(&mut self, h: f64, n: &ErrorNorms) {
        self.hs.push(h);
        self.l2.push(n.l2);
        self.h1.push(n.h1_semi);
        if let Some(h2) = n.h2_semi {
            self.h2.push(h2);
        }
        self.energy.push(n.energy());
    }

    fn fill_row(&self, row: &mut Row, i: usize) {
        let pair = |v: &Vec<f64>| (i > 0 && i < v.len()).then(|| (self.hs[i - 1], v[i - 1]));
        row.err_l2 = Some(self.l2[i]);
        row.err_h1 = Some(self.h1[i]);
        row.err_h2 = self.h2.get(i).copied();
        row.err_energy = Some(self.energy[i]);
        row.eoc_l2 = table_eoc(pair(&self.l2), self.hs[i], self.l2[i]);
        row.eoc_h1 = table_eoc(pair(&self.h1), self.hs[i], self.h1[i]);
        row.eoc_h2 = self.h2.get(i).and_then(|&e| table_eoc(pair(&self.h2), self.hs[i], e));
        row.eoc_energy = table_eoc(pair(&self.energy), self.hs[i], self.energy[i]);
    }

    fn error_series(&self) -> Vec<Series> {
        let mk = |name: &str, v: &Vec<f64>| Series {
            name: name.into(),
            points: self.hs.iter().copied().zip(v.iter().copied()).collect(),
        };
        let mut out = vec![mk("L2 error", &self.l2), mk("H1 error", &self.h1)];
        if self.h2.len() == self.hs.len() {
            out.push(mk("H2 error", &self.h2));
        }
        out.push(mk("energy error", &self.energy));
        out
    }
}

// ------------------------------------------------------------------ poisson

/// Second-order model problem on the disc with a radial cosine solution.
fn poisson(opts: &Options) -> Result<CaseOutput, String> {
    let levels = levels_of(opts, 4);
    let order = opts.order.unwrap_or(2);
    let family = match order {
        1 => ElementFamily::LagrangeQ1,
        2 => ElementFamily::LagrangeQ2,
        _ => return Err(format!("case poisson supports --order 1 or 2, got {order}")),
    };
    let beta = opts.beta.unwrap_or(FormParams::poisson().beta);
    let gamma = opts.gamma.unwrap_or(FormParams::poisson().gamma);
    let depth = opts.depth.unwrap_or(QuadConfig::default().depth);
    let params = FormParams { beta, gamma, ..FormParams::poisson() };
    let quad = QuadConfig { depth, ..QuadConfig::default() };
    let exact = RadialCos::new(Point::new(0.0, 0.0));

    let mut seq = NormSeq::new();
    let mut rows = Vec::new();
    for i in 0..levels {
        let n = 8usize << i;
        let s = disc_setup(n, family)?;
        let sys = assemble_poisson(
            &s.mesh,
            &s.space,
            &s.ext,
            &params,
            &quad,
            &|p| exact.poisson_source(p),
            &|p| exact.value(p),
        )
        .map_err(|e| format!("assembly at level {}: {e}", i + 1))?;
        let u_red = solve_spd(&sys.k, &sys.b).map_err(|e| format!("solve at level {}: {e}", i + 1))?;
        let u_full = s.ext.extend(&u_red);
        let norms = error_norms(&s.mesh, &s.space, &u_full, &exact, EnergyKind::Grad, &quad, false)
            .map_err(|e| format!("error norms at level {}: {e}", i + 1))?;
        let h = s.mesh.mesh_parameter();
        seq.push(h, &norms);
        let mut row = Row {
            level: i + 1,
            h: Some(h),
            nno: Some(s.mesh.nno()),
            dofs_full: Some(s.space.n_dofs()),
            dofs_reduced: Some(s.ext.n_reduced()),
            cond_est: estimate_condition(&sys.k).ok(),
            ..Row::default()
        };
        seq.fill_row(&mut row, i);
        rows.push(row);
    }

    let t_l2 = (order + 1) as f64;
    let t_h1 = order as f64;
    let checks = vec![
        band_check("eoc_l2", mean_rate(&seq.l2), t_l2, 0.4),
        band_check("eoc_h1", mean_rate(&seq.h1), t_h1, 0.4),
    ];
    let ref_lines = vec![RefLine { slope: t_l2, anchor: 0 }, RefLine { slope: t_h1, anchor: 1 }];

    let mut notes = Vec::new();
    echo(&mut notes, "levels", levels);
    echo(&mut notes, "order", order);
    echo(&mut notes, "beta", beta);
    echo(&mut notes, "gamma", gamma);
    echo(&mut notes, "depth", depth);
    echo(&mut notes, "geometry", "disc r=0.5 centred in [-0.6,0.6]^2, grid n=8..8*2^(levels-1)");
    echo(&mut notes, "exact", "u = cos(pi*r)");
    Ok(CaseOutput {
        title: format!("Poisson on the disc (Q{order})"),
        x_label: "h = 1/sqrt(NNO)".into(),
        rows,
        series: seq.error_series(),
        ref_lines,
        checks,
        notes,
    })
}

// ---------------------------------------------------------------- interface

/// Two-phase diffusion with a circular interface and area-weighted fluxes.
fn interface(opts: &Options) -> Result<CaseOutput, String> {
    let levels = levels_of(opts, 4);
    let order = opts.order.unwrap_or(1);
    if order != 1 {
        return Err(format!("case interface supports --order 1 only, got {order}"));
    }
    let beta = opts.beta.unwrap_or(FormParams::interface().beta);
    let gamma = opts.gamma.unwrap_or(FormParams::interface().gamma);
    let depth = opts.depth.unwrap_or(QuadConfig::default().depth);
    let params = FormParams {
        beta,
        gamma,
        a1: [[5.0, 0.0], [0.0, 5.0]],
        a2: [[2.0, 0.0], [0.0, 2.0]],
        ..FormParams::interface()
    };
    let quad = QuadConfig { depth, ..QuadConfig::default() };

    let center = Point::new(0.5, 0.5);
    let r0 = 0.25;
    let exact1 = PolyXY::interface_phase1(center);
    let exact2 = PolyXY::interface_phase2(center, r0);

    let mut seq = NormSeq::new();
    let mut rows = Vec::new();
    for i in 0..levels {
        let n = 8usize << i;
        let grid = BackgroundGrid::new(Point::new(0.0, 0.0), 1.0 / n as f64, n, n);
        let dom1 = LevelSet::circle(center, r0);
        let s1 = build(grid, dom1, ElementFamily::LagrangeQ1)?;
        let s2 = build(grid, dom1.complement(), ElementFamily::LagrangeQ1)?;
        let g1 = |p: Point| exact1.value(p);
        let g2 = |p: Point| exact2.value(p);
        let phase1 = Phase { mesh: &s1.mesh, space: &s1.space, ext: &s1.ext, f: &|_| 4.0, g_outer: &g1 };
        let phase2 = Phase { mesh: &s2.mesh, space: &s2.space, ext: &s2.ext, f: &|_| 4.0, g_outer: &g2 };
        let sys = assemble_interface(&phase1, &phase2, &params, &quad)
            .map_err(|e| format!("assembly at level {}: {e}", i + 1))?;
        let sol = solve_spd(&sys.k, &sys.b).map_err(|e| format!("solve at level {}: {e}", i + 1))?;
        let r1 = s1.ext.n_reduced();
        let full1 = s1.ext.extend(&sol[..r1]);
        let full2 = s2.ext.extend(&sol[r1..]);
        let n1 = error_norms(&s1.mesh, &s1.space, &full1, &exact1, EnergyKind::Grad, &quad, false)
            .map_err(|e| format!("error norms at level {}: {e}", i + 1))?;
        let n2 = error_norms(&s2.mesh, &s2.space, &full2, &exact2, EnergyKind::Grad, &quad, false)
            .map_err(|e| format!("error norms at level {}: {e}", i + 1))?;
        let norms = n1.combined(&n2);
        let nno = s1.mesh.nno() + s2.mesh.nno();
        let h = 1.0 / (nno as f64).sqrt();
        seq.push(h, &norms);
        let mut row = Row {
            level: i + 1,
            h: Some(h),
            nno: Some(nno),
            dofs_full: Some(s1.space.n_dofs() + s2.space.n_dofs()),
            dofs_reduced: Some(r1 + s2.ext.n_reduced()),
            cond_est: estimate_condition(&sys.k).ok(),
            ..Row::default()
        };
        seq.fill_row(&mut row, i);
        rows.push(row);
    }

    let checks = vec![
        band_check("eoc_l2", mean_rate(&seq.l2), 2.0, 0.4),
        band_check("eoc_h1", mean_rate(&seq.h1), 1.0, 0.4),
    ];
    let ref_lines = vec![RefLine { slope: 2.0, anchor: 0 }, RefLine { slope: 1.0, anchor: 1 }];

    let mut notes = Vec::new();
    echo(&mut notes, "levels", levels);
    echo(&mut notes, "order", order);
    echo(&mut notes, "beta", beta);
    echo(&mut notes, "gamma", gamma);
    echo(&mut notes, "depth", depth);
    echo(&mut notes, "coefficients", "a1 = 5 I inside r=0.25, a2 = 2 I outside, f = 4");
    echo(&mut notes, "column_semantics", "nno/dofs/norms combine both phases; h = 1/sqrt(nno1+nno2)");
    Ok(CaseOutput {
        title: "Two-phase interface problem (Q1)".into(),
        x_label: "h = 1/sqrt(NNO)".into(),
        rows,
        series: seq.error_series(),
        ref_lines,
        checks,
        notes,
    })
}

// --------------------------------------------------------------- biharmonic

/// Fourth-order clamped-plate analogue on the disc with C1 Hermite elements.
fn biharmonic(opts: &Options) -> Result<CaseOutput, String> {
    let levels = levels_of(opts, 4);
    let order = opts.order.unwrap_or(3);
    if order != 3 {
        return Err(format!("case biharmonic supports --order 3 only (bicubic C1 Hermite), got {order}"));
    }
    let beta = opts.beta.unwrap_or(FormParams::biharmonic().beta);
    let gamma = opts.gamma.unwrap_or(FormParams::biharmonic().gamma);
    let depth = opts.depth.unwrap_or(QuadConfig::default().depth);
    let params = FormParams { beta, gamma, ..FormParams::biharmonic() };
    let quad = QuadConfig { gauss_order: 5, depth, curved: true };

    let center = Point::new(0.5, 0.5);
    let exact = PolyXY::biharmonic_bump(center, 0.5);

    let mut seq = NormSeq::new();
    let mut rows = Vec::new();
    for i in 0..levels {
        let n = 8usize << i;
        let grid = BackgroundGrid::new(Point::new(-0.1, -0.1), 1.2 / n as f64, n, n);
        let s = build(grid, LevelSet::circle(center, 0.5), ElementFamily::HermiteC1)?;
        let bc = BoundaryData {
            g0: &|p| exact.value(p),
            g1: &|p, nrm| exact.normal_deriv(p, nrm),
            g2: &|_| 0.0,
        };
        let sys = assemble_biharmonic(
            &s.mesh,
            &s.space,
            &s.ext,
            &params,
            &quad,
            &|p| exact.biharmonic_source(p),
            &bc,
        )
        .map_err(|e| format!("assembly at level {}: {e}", i + 1))?;
        let u_red = solve_spd(&sys.k, &sys.b).map_err(|e| format!("solve at level {}: {e}", i + 1))?;
        let u_full = s.ext.extend(&u_red);
        let norms = error_norms(&s.mesh, &s.space, &u_full, &exact, EnergyKind::Laplacian, &quad, true)
            .map_err(|e| format!("error norms at level {}: {e}", i + 1))?;
        let h = s.mesh.mesh_parameter();
        seq.push(h, &norms);
        let mut row = Row {
            level: i + 1,
            h: Some(h),
            nno: Some(s.mesh.nno()),
            dofs_full: Some(s.space.n_dofs()),
            dofs_reduced: Some(s.ext.n_reduced()),
            cond_est: estimate_condition(&sys.k).ok(),
            ..Row::default()
        };
        seq.fill_row(&mut row, i);
        rows.push(row);
    }

    let checks = vec![
        band_check("eoc_l2", mean_rate(&seq.l2), 4.0, 0.5),
        band_check("eoc_h1", mean_rate(&seq.h1), 3.0, 0.5),
        band_check("eoc_h2", mean_rate(&seq.h2), 2.0, 0.5),
    ];
    let ref_lines = vec![
        RefLine { slope: 4.0, anchor: 0 },
        RefLine { slope: 3.0, anchor: 1 },
        RefLine { slope: 2.0, anchor: 2 },
    ];

    let mut notes = Vec::new();
    echo(&mut notes, "levels", levels);
    echo(&mut notes, "order", order);
    echo(&mut notes, "beta", beta);
    echo(&mut notes, "gamma", gamma);
    echo(&mut notes, "depth", depth);
    echo(&mut notes, "geometry", "disc r=0.5 centred at (0.5,0.5) in [-0.1,1.1]^2");
    echo(&mut notes, "exact", "u = (r0^2 - r^2)^2 bump, clamped boundary data");
    Ok(CaseOutput {
        title: "Biharmonic on the disc (C1 Hermite)".into(),
        x_label: "h = 1/sqrt(NNO)".into(),
        rows,
        series: seq.error_series(),
        ref_lines,
        checks,
        notes,
    })
}

// -------------------------------------------------------------- triharmonic

/// Sixth-order problem on the unit square, unfitted in a shifted grid, with
/// C2 quintic Hermite elements and a direct scaled factorization.
fn triharmonic(opts: &Options) -> Result<CaseOutput, String> {
    let levels = levels_of(opts, 3);
    let order = opts.order.unwrap_or(5);
    if order != 5 {
        return Err(format!("case triharmonic supports --order 5 only (quintic C2 Hermite), got {order}"));
    }
    let beta = opts.beta.unwrap_or(FormParams::triharmonic().beta);
    let gamma = opts.gamma.unwrap_or(FormParams::triharmonic().gamma);
    let depth = opts.depth.unwrap_or(QuadConfig::default().depth);
    let params = FormParams { beta, gamma, ..FormParams::triharmonic() };
    let quad = QuadConfig { gauss_order: 6, depth, curved: true };
    let exact = PolyXY::triharmonic_bump();

    let mut seq = NormSeq::new();
    let mut rows = Vec::new();
    let mut worst_res = 0.0f64;
    for i in 0..levels {
        let level = 8usize << i;
        let s0 = 1.41 / level as f64;
        let nx = (1.21_f64 / s0).ceil() as usize;
        let ny = (1.31_f64 / s0).ceil() as usize;
        let grid = BackgroundGrid::new(Point::new(-0.21, -0.31), s0, nx, ny);
        let s = build(
            grid,
            LevelSet::axis_box(Point::new(0.0, 0.0), Point::new(1.0, 1.0)),
            ElementFamily::HermiteC2,
        )?;
        let bc = BoundaryData {
            g0: &|p| exact.value(p),
            g1: &|p, nrm| exact.normal_deriv(p, nrm),
            g2: &|p| exact.laplacian(p),
        };
        let sys = assemble_triharmonic(
            &s.mesh,
            &s.space,
            &s.ext,
            &params,
            &quad,
            &|p| exact.triharmonic_source(p),
            &bc,
        )
        .map_err(|e| format!("assembly at level {}: {e}", i + 1))?;
        let factor = ScaledFactor::new(&sys.k).map_err(|e| format!("factorization at level {}: {e}", i + 1))?;
        let (u_red, res) = factor.solve(&sys.b);
        worst_res = worst_res.max(res);
        let u_full = s.ext.extend(&u_red);
        let norms = error_norms(&s.mesh, &s.space, &u_full, &exact, EnergyKind::GradLaplacian, &quad, true)
            .map_err(|e| format!("error norms at level {}: {e}", i + 1))?;
        let h = s.mesh.mesh_parameter();
        seq.push(h, &norms);
        let mut row = Row {
            level: i + 1,
            h: Some(h),
            nno: Some(s.mesh.nno()),
            dofs_full: Some(s.space.n_dofs()),
            dofs_reduced: Some(s.ext.n_reduced()),
            cond_est: estimate_condition(&sys.k).ok(),
            ..Row::default()
        };
        seq.fill_row(&mut row, i);
        rows.push(row);
    }

    let mut checks: Vec<Check> = (1..seq.energy.len())
        .map(|i| {
            let r = log2_rate(seq.energy[i - 1], seq.energy[i]);
            Check {
                name: format!("eoc_energy_pair_{i}"),
                pass: r >= 2.5,
                detail: format!("measured {r:.2}, want >= 2.5"),
            }
        })
        .collect();
    let monotone = seq.energy.windows(2).all(|w| w[0] > w[1]);
    checks.push(Check {
        name: "energy_monotone".into(),
        pass: monotone,
        detail: format!("errors strictly decreasing: {monotone}"),
    });
    let ref_lines = vec![RefLine { slope: 3.0, anchor: 3 }];

    let mut notes = Vec::new();
    echo(&mut notes, "levels", levels);
    echo(&mut notes, "order", order);
    echo(&mut notes, "beta", beta);
    echo(&mut notes, "gamma", gamma);
    echo(&mut notes, "depth", depth);
    echo(&mut notes, "geometry", "unit square unfitted in a grid shifted to (-0.21,-0.31)");
    echo(&mut notes, "exact", "u = 1e4 * x^3 y^3 (x-1)^3 (y-1)^3");
    echo(&mut notes, "worst_solver_residual", format!("{worst_res:.3e}"));
    echo(
        &mut notes,
        "solver",
        "direct scaled LDLT with iterative refinement (condition grows like h^-6)",
    );
    Ok(CaseOutput {
        title: "Triharmonic on the square (C2 Hermite)".into(),
        x_label: "h = 1/sqrt(NNO)".into(),
        rows,
        series: seq.error_series(),
        ref_lines,
        checks,
        notes,
    })
}

// --------------------------------------------------------------------- heat

/// Exact-in-space manufactured solution scaled by a time factor.
struct Scaled<'a> {
    factor: f64,
    inner: &'a dyn Manufactured,
}

impl Manufactured for Scaled<'_> {
    fn deriv(&self, p: Point, dx: usize, dy: usize) -> f64 {
        self.factor * self.inner.deriv(p, dx, dy)
    }
}

/// Backward-Euler heat equation on the disc, u(t,x) = e^{-t} cos(pi r),
/// marching to T = 1 and halving τ per level at fixed spatial mesh.
fn heat(opts: &Options) -> Result<CaseOutput, String> {
    const GRID_N: usize = 64;
    const TAU0: f64 = 0.1;
    let levels = levels_of(opts, 4);
    let order = opts.order.unwrap_or(2);
    let family = match order {
        1 => ElementFamily::LagrangeQ1,
        2 => ElementFamily::LagrangeQ2,
        _ => return Err(format!("case heat supports --order 1 or 2, got {order}")),
    };
    let beta = opts.beta.unwrap_or(FormParams::poisson().beta);
    let gamma = opts.gamma.unwrap_or(FormParams::poisson().gamma);
    let depth = opts.depth.unwrap_or(QuadConfig::default().depth);
    let params = FormParams { beta, gamma, ..FormParams::poisson() };
    let quad = QuadConfig { depth, ..QuadConfig::default() };

    let exact = RadialCos::new(Point::new(0.0, 0.0));
    let s = disc_setup(GRID_N, family)?;
    // u(t) = e^{-t} v with v = cos(pi r) solves u_t - Δu = e^{-t}(-Δv - v)
    // with homogeneous Dirichlet data (v vanishes at r = 1/2), so the load
    // vector is a fixed spatial assembly scaled by e^{-t}.
    let sys = assemble_poisson(
        &s.mesh,
        &s.space,
        &s.ext,
        &params,
        &quad,
        &|p| exact.poisson_source(p) - exact.value(p),
        &|_| 0.0,
    )
    .map_err(|e| format!("assembly: {e}"))?;
    let m = assemble_mass(&s.mesh, &s.space, &s.ext, &quad).map_err(|e| format!("mass assembly: {e}"))?;
    let u0 = s.ext.reduced_interpolant(&s.space, &|p, dx, dy| exact.deriv(p, dx, dy));

    let mut rows = Vec::new();
    let mut errs_l2 = Vec::new();
    let mut taus = Vec::new();
    let mut prev: Option<(f64, ErrorNorms)> = None;
    for i in 0..levels {
        let steps = 10usize << i;
        let tau = TAU0 / (1 << i) as f64;
        let stepper = BackwardEuler::new(&m, &sys.k, tau).map_err(|e| format!("stepper at level {}: {e}", i + 1))?;
        let mut u = u0.clone();
        for k in 0..steps {
            let t_next = (k + 1) as f64 * tau;
            let scale = (-t_next).exp();
            let load: Vec<f64> = sys.b.iter().map(|b| scale * b).collect();
            u = stepper.step(&u, &load);
        }
        let u_full = s.ext.extend(&u);
        let target = Scaled { factor: (-1.0f64).exp(), inner: &exact };
        let norms = error_norms(&s.mesh, &s.space, &u_full, &target, EnergyKind::Grad, &quad, false)
            .map_err(|e| format!("error norms at level {}: {e}", i + 1))?;
        let mut row = Row {
            level: i + 1,
            h: Some(tau),
            nno: Some(s.mesh.nno()),
            dofs_full: Some(s.space.n_dofs()),
            dofs_reduced: Some(s.ext.n_reduced()),
            err_l2: Some(norms.l2),
            err_h1: Some(norms.h1_semi),
            ..Row::default()
        };
        if let Some((tp, np)) = &prev {
            row.eoc_l2 = table_eoc(Some((*tp, np.l2)), tau, norms.l2);
            row.eoc_h1 = table_eoc(Some((*tp, np.h1_semi)), tau, norms.h1_semi);
        }
        errs_l2.push(norms.l2);
        taus.push(tau);
        prev = Some((tau, norms));
        rows.push(row);
    }

    let checks: Vec<Check> = errs_l2
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let ratio = w[0] / w[1];
            Check {
                name: format!("tau_halving_ratio_{}", i + 1),
                pass: (1.6..=2.4).contains(&ratio),
                detail: format!("final-time L2 ratio {ratio:.3}, want within [1.6, 2.4]"),
            }
        })
        .collect();

    let series = vec![
        Series { name: "L2 error at T=1".into(), points: taus.iter().copied().zip(errs_l2.iter().copied()).collect() },
    ];
    let ref_lines = vec![RefLine { slope: 1.0, anchor: 0 }];

    let mut notes = Vec::new();
    echo(&mut notes, "levels", levels);
    echo(&mut notes, "order", order);
    echo(&mut notes, "beta", beta);
    echo(&mut notes, "gamma", gamma);
    echo(&mut notes, "depth", depth);
    echo(&mut notes, "grid_n", GRID_N);
    echo(&mut notes, "tau0", TAU0);
    echo(&mut notes, "final_time", 1.0);
    echo(&mut notes, "exact", "u(t,x) = e^{-t} cos(pi*r)");
    echo(
        &mut notes,
        "column_semantics",
        "h column holds the time step tau; the spatial mesh is fixed, so eoc_* are rates in tau",
    );
    Ok(CaseOutput {
        title: format!("Backward-Euler heat equation (Q{order}, fixed mesh)"),
        x_label: "tau".into(),
        rows,
        series,
        ref_lines,
        checks,
        notes,
    })
}

// ------------------------------------------------------------------- sliver

/// Sliver family: circle radius 1/2 + ε on a grid with lines exactly at
/// ±1/2, so the four axis tangencies produce cut fragments of width ε.
fn sliver_setup(eps: f64) -> Result<Setup, String> {
    let grid = BackgroundGrid::new(Point::new(-0.75, -0.75), 0.125, 12, 12);
    build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5 + eps), ElementFamily::LagrangeQ2)
}

/// λ_max of a symmetric positive semidefinite matrix with constants deflated.
fn lambda_max_deflated(k: &SparseMatrix, iters: usize) -> f64 {
    let n = k.nrows();
    let deflate = |v: &mut Vec<f64>| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|a| *a -= mean);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    deflate(&mut x);
    let mut lam = 0.0;
    for _ in 0..iters {
        let mut y = k.matvec(&x);
        deflate(&mut y);
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        y.iter_mut().for_each(|v| *v /= nrm);
        lam = quad_form(k, &y);
        x = y;
    }
    lam
}

/// Conditioning indicator for the singular (Neumann-type) raw cut stiffness:
/// λ_max over a smallest-nonzero-eigenvalue bound from the smallest diagonal
/// Rayleigh quotient, constants deflated.
fn raw_cond_indicator(k: &SparseMatrix) -> f64 {
    let n = k.nrows();
    let lam_max = lambda_max_deflated(k, 80);
    let min_diag = (0..n).map(|i| k.get(i, i)).fold(f64::INFINITY, f64::min);
    if min_diag <= 0.0 {
        return f64::INFINITY;
    }
    lam_max / (min_diag / (1.0 - 1.0 / n as f64))
}

/// Conditioning and extension-stability sweep over cut severity ε.
fn sliver(opts: &Options) -> Result<CaseOutput, String> {
    const N_RANDOM: usize = 50;
    const GENERIC_EPS: f64 = 0.017;
    let eps_user = opts.eps.unwrap_or(1e-8);
    if let Some(order) = opts.order {
        if order != 2 {
            return Err(format!("case sliver uses --order 2, got {order}"));
        }
    }
    let depth = opts.depth.unwrap_or(QuadConfig::default().depth);
    let quad = QuadConfig { depth, ..QuadConfig::default() };
    let params = FormParams {
        beta: opts.beta.unwrap_or(FormParams::poisson().beta),
        gamma: opts.gamma.unwrap_or(FormParams::poisson().gamma),
        ..FormParams::poisson()
    };

    let mut sweep = vec![0.0, 1e-3, 1e-6];
    if !sweep.contains(&eps_user) {
        sweep.push(eps_user);
    }

    let mut rows = Vec::new();
    let mut ratio0 = Vec::new();
    let mut ratio1 = Vec::new();
    let mut conds: Vec<Option<f64>> = Vec::new();
    let mut cond_pts = Vec::new();
    let mut r0_pts = Vec::new();
    let mut r1_pts = Vec::new();
    for (i, &eps) in sweep.iter().enumerate() {
        let s = sliver_setup(eps)?;
        let g0_all = assemble_gram_full_cells(&s.mesh, &s.space, 0, false).map_err(|e| e.to_string())?;
        let g0_int = assemble_gram_full_cells(&s.mesh, &s.space, 0, true).map_err(|e| e.to_string())?;
        let g1_all = assemble_gram_full_cells(&s.mesh, &s.space, 1, false).map_err(|e| e.to_string())?;
        let g1_int = assemble_gram_full_cells(&s.mesh, &s.space, 1, true).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mut worst0, mut worst1) = (0.0f64, 0.0f64);
        for _ in 0..N_RANDOM {
            let v: Vec<f64> = (0..s.ext.n_reduced()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ev = s.ext.extend(&v);
            worst0 = worst0.max((quad_form(&g0_all, &ev) / quad_form(&g0_int, &ev)).sqrt());
            worst1 = worst1.max((quad_form(&g1_all, &ev) / quad_form(&g1_int, &ev)).sqrt());
        }
        let sys = assemble_poisson(&s.mesh, &s.space, &s.ext, &params, &quad, &|_| 1.0, &|_| 0.0)
            .map_err(|e| format!("assembly at eps {eps:e}: {e}"))?;
        let cond = estimate_condition(&sys.k).ok();
        ratio0.push(worst0);
        ratio1.push(worst1);
        conds.push(cond);
        // ε = 0 has no logarithm; clamp for the plot only.
        let eps_plot = if eps > 0.0 { eps } else { 1e-10 };
        if let Some(c) = cond {
            cond_pts.push((eps_plot, c));
        }
        r0_pts.push((eps_plot, worst0));
        r1_pts.push((eps_plot, worst1));
        rows.push(Row {
            level: i + 1,
            h: Some(eps),
            nno: Some(s.mesh.nno()),
            dofs_full: Some(s.space.n_dofs()),
            dofs_reduced: Some(s.ext.n_reduced()),
            err_l2: Some(worst0),
            err_h1: Some(worst1),
            cond_est: cond,
            ..Row::default()
        });
    }

    // Raw, penalty-free cut stiffness: the user's ε against a generic cut.
    let user = sliver_setup(eps_user)?;
    let raw_user =
        raw_cond_indicator(&assemble_laplace_volume(&user.mesh, &user.space, &quad).map_err(|e| e.to_string())?);
    let generic = sliver_setup(GENERIC_EPS)?;
    let raw_generic = raw_cond_indicator(
        &assemble_laplace_volume(&generic.mesh, &generic.space, &quad).map_err(|e| e.to_string())?,
    );
    let blowup = raw_user / raw_generic;

    let spread = |v: &[f64]| {
        v.iter().cloned().fold(0.0f64, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let spread0 = spread(&ratio0);
    let spread1 = spread(&ratio1);
    let cond_vals: Vec<f64> = conds.iter().filter_map(|c| *c).collect();
    let cond_ok = cond_vals.len() == conds.len();
    let cond_spread = if cond_ok { spread(&cond_vals) } else { f64::INFINITY };

    let checks = vec![
        Check {
            name: "ratio_spread_l2".into(),
            pass: spread0 < 2.0,
            detail: format!("worst extension L2 ratio spread {spread0:.3}x over the sweep, want < 2x"),
        },
        Check {
            name: "ratio_spread_h1".into(),
            pass: spread1 < 2.0,
            detail: format!("worst extension H1 ratio spread {spread1:.3}x over the sweep, want < 2x"),
        },
        Check {
            name: "cond_spread".into(),
            pass: cond_ok && cond_spread < 10.0,
            detail: format!("stabilized condition spread {cond_spread:.2}x over the sweep, want < 10x"),
        },
        Check {
            name: "raw_blowup".into(),
            pass: blowup > 1e3,
            detail: format!(
                "raw cut-stiffness indicator eps={eps_user:.1e} vs generic {GENERIC_EPS}: {blowup:.3e}, want > 1e3"
            ),
        },
    ];

    let series = vec![
        Series { name: "cond(K_red)".into(), points: cond_pts },
        Series { name: "extension L2 ratio".into(), points: r0_pts },
        Series { name: "extension H1 ratio".into(), points: r1_pts },
    ];

    let mut notes = Vec::new();
    echo(&mut notes, "eps", format!("{eps_user:e}"));
    echo(&mut notes, "depth", depth);
    echo(&mut notes, "beta", params.beta);
    echo(&mut notes, "gamma", params.gamma);
    echo(&mut notes, "sweep", sweep.iter().map(|e| format!("{e:e}")).collect::<Vec<_>>().join(" "));
    echo(&mut notes, "raw_blowup_vs_generic", format!("{blowup:.3e}"));
    echo(
        &mut notes,
        "column_semantics",
        "h column holds eps; err_l2/err_h1 are worst extension-norm ratios over 50 seeded vectors",
    );
    Ok(CaseOutput {
        title: "Sliver-cut stability sweep (Q2, 12x12 grid)".into(),
        x_label: "eps".into(),
        rows,
        series,
        ref_lines: Vec::new(),
        checks,
        notes,
    })
}

// --------------------------------------------------------------- extension

/// Frozen forward-error tolerance for polynomial reproduction through the
/// extension: a 1e-12 target relative to the dof scale plus the rigorous f64
/// floor of evaluating the extension row.
fn reproduction_tol(ext: &ExtensionOperator, d: &[f64], g: usize) -> f64 {
    let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (cols, vals) = ext.matrix().row(g);
    let amp: f64 = cols.iter().zip(vals).map(|(&c, &v)| (v * d[ext.full_index(c)]).abs()).sum();
    1e-12 * scale + 64.0 * f64::EPSILON * amp
}

/// Polynomial-reproduction audit of the extension operator, one row per
/// element family.
fn extension_props(opts: &Options) -> Result<CaseOutput, String> {
    const N_POLYS: usize = 20;
    const FAMILIES: [ElementFamily; 4] = [
        ElementFamily::LagrangeQ1,
        ElementFamily::LagrangeQ2,
        ElementFamily::HermiteC1,
        ElementFamily::HermiteC2,
    ];
    if let Some(order) = opts.order {
        return Err(format!("case extension-props sweeps all element families; drop --order {order}"));
    }

    let grid = BackgroundGrid::new(Point::new(-0.75, -0.75), 0.25, 6, 6);
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for (i, family) in FAMILIES.into_iter().enumerate() {
        let s = build(grid, LevelSet::circle(Point::new(0.0, 0.0), 0.5), family)?;
        let k = family.degree();
        let mut rng = ChaCha8Rng::seed_from_u64(7 + k as u64);
        let mut worst_excess = 0.0f64;
        let mut worst_abs = 0.0f64;
        for _ in 0..N_POLYS {
            let coefs: Vec<Vec<f64>> =
                (0..=k).map(|_| (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let poly = PolyXY::new(Point::new(0.1, -0.2), coefs);
            let f = |p: Point, dx: usize, dy: usize| poly.deriv(p, dx, dy);
            let full = s.space.interpolate(&f);
            let reduced = s.ext.reduced_interpolant(&s.space, &f);
            let extended = s.ext.extend(&reduced);
            for g in 0..s.space.n_dofs() {
                let err = (extended[g] - full[g]).abs();
                worst_abs = worst_abs.max(err);
                worst_excess = worst_excess.max(err / reproduction_tol(&s.ext, &full, g));
            }
        }
        rows.push(Row {
            level: i + 1,
            h: Some(s.mesh.mesh_parameter()),
            nno: Some(s.mesh.nno()),
            dofs_full: Some(s.space.n_dofs()),
            dofs_reduced: Some(s.ext.n_reduced()),
            err_l2: Some(worst_abs),
            ..Row::default()
        });
        pts.push((k as f64, worst_abs));
        checks.push(Check {
            name: format!("reproduction_{family:?}"),
            pass: worst_excess <= 1.0,
            detail: format!("worst |err| {worst_abs:.2e}, {worst_excess:.2} of the f64 budget (want <= 1)"),
        });
        echo(&mut notes, &format!("family_level_{}", i + 1), format!("{family:?} (degree {k})"));
    }

    echo(&mut notes, "polys_per_family", N_POLYS);
    echo(
        &mut notes,
        "column_semantics",
        "one row per element family; err_l2 is the worst nodal reproduction error of extended degree-k interpolants",
    );
    Ok(CaseOutput {
        title: "Extension operator polynomial reproduction".into(),
        x_label: "polynomial degree".into(),
        rows,
        series: vec![Series { name: "worst nodal error".into(), points: pts }],
        ref_lines: Vec::new(),
        checks,
        notes,
    })
}
