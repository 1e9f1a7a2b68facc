//! Background grid, active mesh and the donor-cell map.
//!
//! The background grid is a uniform Cartesian grid laid over the domain
//! without fitting it.  Cells meeting the domain form the *active mesh*; the
//! active cells split into *interior* cells (fully inside) and *cut* cells.
//! Every active cell is assigned a donor interior cell — the interior cell
//! with the nearest centroid — from which polynomial data can be extended
//! onto poorly covered cut cells.
//!
//! Active cells are numbered row-major (x fastest), which makes every
//! derived enumeration in the crate deterministic.

use crate::geometry::{classify_cell, Cell, CellClass, LevelSet, Point};
use crate::{Error, Result};

/// A uniform Cartesian grid of square cells.
#[derive(Clone, Copy, Debug)]
pub struct BackgroundGrid {
    pub origin: Point,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

impl BackgroundGrid {
    pub fn new(origin: Point, cell_size: f64, nx: usize, ny: usize) -> Self {
        assert!(cell_size > 0.0 && nx > 0 && ny > 0, "grid must be nonempty");
        BackgroundGrid { origin, cell_size, nx, ny }
    }

    /// Grid covering `[lo, hi]` with `n` cells along the longer side.
    pub fn covering(lo: Point, hi: Point, n: usize) -> Self {
        let w = (hi.x - lo.x).max(hi.y - lo.y);
        let s = w / n as f64;
        let nx = ((hi.x - lo.x) / s - 1e-9).ceil().max(1.0) as usize;
        let ny = ((hi.y - lo.y) / s - 1e-9).ceil().max(1.0) as usize;
        BackgroundGrid::new(lo, s, nx, ny)
    }

    pub fn cell(&self, ix: usize, iy: usize) -> Cell {
        debug_assert!(ix < self.nx && iy < self.ny);
        Cell::new(
            self.origin.x + ix as f64 * self.cell_size,
            self.origin.y + iy as f64 * self.cell_size,
            self.cell_size,
        )
    }

    pub fn extent(&self) -> (Point, Point) {
        (
            self.origin,
            Point::new(
                self.origin.x + self.nx as f64 * self.cell_size,
                self.origin.y + self.ny as f64 * self.cell_size,
            ),
        )
    }
}

/// One active cell: its grid coordinates and classification.
#[derive(Clone, Copy, Debug)]
pub struct ActiveCell {
    pub ix: usize,
    pub iy: usize,
    pub class: CellClass,
}

/// The set of background cells meeting the domain.
#[derive(Clone, Debug)]
pub struct ActiveMesh {
    pub grid: BackgroundGrid,
    pub domain: LevelSet,
    cells: Vec<ActiveCell>,
    /// row-major grid cell -> active id
    active_id: Vec<Option<usize>>,
    n_interior: usize,
}

impl ActiveMesh {
    /// Classify all grid cells and collect the active ones.
    ///
    /// Fails if the domain's bounding box (when it has one) sticks out of the
    /// grid, or if no cell meets the domain.  Unbounded domains are silently
    /// truncated to the grid.
    pub fn build(grid: BackgroundGrid, domain: LevelSet) -> Result<Self> {
        if let Some((lo, hi)) = domain.bounding_box() {
            let (glo, ghi) = grid.extent();
            let tol = 1e-12 * (1.0 + grid.cell_size);
            if lo.x < glo.x - tol || lo.y < glo.y - tol || hi.x > ghi.x + tol || hi.y > ghi.y + tol {
                return Err(Error::DomainOutsideGrid);
            }
        }
        let mut cells = Vec::new();
        let mut active_id = vec![None; grid.nx * grid.ny];
        let mut n_interior = 0;
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let class = classify_cell(&grid.cell(ix, iy), &domain);
                if class == CellClass::Outside {
                    continue;
                }
                active_id[iy * grid.nx + ix] = Some(cells.len());
                if class == CellClass::Inside {
                    n_interior += 1;
                }
                cells.push(ActiveCell { ix, iy, class });
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyActiveSet);
        }
        Ok(ActiveMesh { grid, domain, cells, active_id, n_interior })
    }

    pub fn cells(&self) -> &[ActiveCell] {
        &self.cells
    }

    pub fn n_active(&self) -> usize {
        self.cells.len()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_cut(&self) -> usize {
        self.cells.len() - self.n_interior
    }

    /// Geometry of active cell `id`.
    pub fn cell_geom(&self, id: usize) -> Cell {
        let c = self.cells[id];
        self.grid.cell(c.ix, c.iy)
    }

    /// Active id of the grid cell `(ix, iy)`, if active.
    pub fn active_id_at(&self, ix: usize, iy: usize) -> Option<usize> {
        if ix >= self.grid.nx || iy >= self.grid.ny {
            return None;
        }
        self.active_id[iy * self.grid.nx + ix]
    }

    pub fn is_interior(&self, id: usize) -> bool {
        self.cells[id].class == CellClass::Inside
    }

    /// Number of distinct corner nodes of active cells.
    pub fn nno(&self) -> usize {
        let w = self.grid.nx + 1;
        let mut seen = vec![false; w * (self.grid.ny + 1)];
        let mut count = 0;
        for c in &self.cells {
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let k = (c.iy + dy) * w + c.ix + dx;
                if !seen[k] {
                    seen[k] = true;
                    count += 1;
                }
            }
        }
        count
    }

    /// Mesh parameter `h = 1 / sqrt(NNO)` used for reporting and convergence
    /// rates.  (Penalty scalings use the actual cell size instead.)
    pub fn mesh_parameter(&self) -> f64 {
        1.0 / (self.nno() as f64).sqrt()
    }
}

/// Donor map: for every active cell, the interior cell with the nearest
/// centroid (ties broken towards the lowest active id).  Interior cells are
/// their own donors.
#[derive(Clone, Debug)]
pub struct ShMap {
    donor: Vec<usize>,
}

impl ShMap {
    pub fn build(mesh: &ActiveMesh) -> Result<Self> {
        if mesh.n_interior == 0 {
            return Err(Error::NoInteriorCells(format!(
                "active mesh has {} cells, all cut",
                mesh.n_active()
            )));
        }
        let nx = mesh.grid.nx as i64;
        let ny = mesh.grid.ny as i64;
        let mut donor = vec![0usize; mesh.n_active()];
        for (id, c) in mesh.cells.iter().enumerate() {
            if c.class == CellClass::Inside {
                donor[id] = id;
                continue;
            }
            // expanding ring search in grid coordinates; centroid distances
            // are exact integers in units of the cell size
            let (cx, cy) = (c.ix as i64, c.iy as i64);
            let mut best: Option<(i64, usize)> = None;
            let max_ring = (nx.max(ny)) as i64;
            for ring in 1..=max_ring {
                if let Some((best_r2, _)) = best {
                    // cells on ring k are at squared distance >= k^2
                    if best_r2 <= ring * ring {
                        break;
                    }
                }
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs().max(dy.abs()) != ring {
                            continue;
                        }
                        let (jx, jy) = (cx + dx, cy + dy);
                        if jx < 0 || jy < 0 || jx >= nx || jy >= ny {
                            continue;
                        }
                        let Some(jid) = mesh.active_id_at(jx as usize, jy as usize) else {
                            continue;
                        };
                        if !mesh.is_interior(jid) {
                            continue;
                        }
                        let r2 = dx * dx + dy * dy;
                        let better = match best {
                            None => true,
                            Some((br2, bid)) => r2 < br2 || (r2 == br2 && jid < bid),
                        };
                        if better {
                            best = Some((r2, jid));
                        }
                    }
                }
            }
            donor[id] = best
                .map(|(_, jid)| jid)
                .ok_or_else(|| Error::NoInteriorCells("ring search exhausted the grid".into()))?;
        }
        Ok(ShMap { donor })
    }

    /// Donor interior cell of active cell `id`.
    pub fn donor(&self, id: usize) -> usize {
        self.donor[id]
    }

    pub fn len(&self) -> usize {
        self.donor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.donor.is_empty()
    }
}
