//! Sparse matrices and direct/iterative solvers.
//!
//! Matrices are stored in CSR with sorted, unique column indices.  Assembly
//! goes through triplets which are combined with a stable sort, so repeated
//! builds produce bit-identical matrices.  Symmetric positive definite
//! systems are solved by a skyline (envelope) LDLᵀ factorization under a
//! reverse Cuthill–McKee ordering, polished by a few steps of iterative
//! refinement; conjugate gradients and eigenvalue-based condition estimation
//! round out the toolbox.

use crate::{Error, Result};

/// Compressed sparse row matrix; possibly rectangular.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed in
    /// insertion order (stable sort), so repeated assembly is bit-identical.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut rows: Vec<usize> = Vec::new();
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            if rows.last() == Some(&i) && col_idx.last() == Some(&j) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// Entry (i, j), zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`; summation ascends column indices per row, deterministically.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = Aᵀ x`.
    /// Residual `b - A x` with compensated (two-product + Neumaier)
    /// accumulation, giving near-double-double accuracy.  Used by iterative
    /// refinement, where residual accuracy sets the attainable forward error.
    pub fn residual_compensated(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(b.len(), self.nrows);
        let mut r = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut sum = b[i];
            let mut comp = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                let p = -v * x[*c];
                let perr = f64::mul_add(-v, x[*c], -p);
                for term in [p, perr] {
                    let t = sum + term;
                    comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
                    sum = t;
                }
            }
            r[i] = sum + comp;
        }
        r
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "matvec_transpose dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((*c, i, *v));
            }
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, triplets)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows, "product dimension mismatch");
        let mut scratch = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (k, v) in cols.iter().zip(vals) {
                let (bcols, bvals) = other.row(*k);
                for (j, bv) in bcols.iter().zip(bvals) {
                    if scratch[*j] == 0.0 && !touched.contains(j) {
                        touched.push(*j);
                    }
                    scratch[*j] += v * bv;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(scratch[j]);
                scratch[j] = 0.0;
            }
            touched.clear();
            row_ptr[i + 1] = col_idx.len();
        }
        SparseMatrix { nrows: self.nrows, ncols: other.ncols, row_ptr, col_idx, values }
    }

    /// Galerkin triple product `Eᵀ A E` with `A = self`.
    pub fn rap(&self, e: &SparseMatrix) -> SparseMatrix {
        e.transpose().mul(&self.mul(e))
    }

    /// `alpha * self + beta * other` (matching shapes, union sparsity).
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((i, *c, alpha * v));
            }
            let (cols, vals) = other.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((i, *c, beta * v));
            }
        }
        SparseMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    /// `(A + Aᵀ)/2`, exactly symmetric entry by entry (both halves of a pair
    /// see the same two summands in the same order).
    pub fn symmetrized(&self) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        let mut triplets = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((i, *c, 0.5 * v));
                triplets.push((*c, i, 0.5 * v));
            }
        }
        SparseMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }

    /// Largest asymmetry `|a_ij - a_ji|`, for diagnostics.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, i)).abs());
            }
        }
        worst
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reverse Cuthill–McKee ordering of a square matrix's sparsity graph.
/// Returns `perm` with `perm[k] = original index placed at position k`.
pub fn rcm_ordering(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // lowest-degree unvisited seed, ties to the lowest index
        let Some(seed) = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
        else {
            break;
        };
        visited[seed] = true;
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = a.row(u).0.iter().copied().filter(|&v| v != u && !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Skyline LDLᵀ factorization of an SPD matrix under a fill-reducing
/// permutation.  Storage covers the envelope (per column, rows from the first
/// structural nonzero to the diagonal).
pub struct SkylineFactor {
    n: usize,
    /// perm[k] = original index at permuted position k
    perm: Vec<usize>,
    /// first profile row of each permuted column
    fr: Vec<usize>,
    col_ptr: Vec<usize>,
    /// strictly-above-diagonal envelope entries of Lᵀ, packed per column
    vals: Vec<f64>,
    d: Vec<f64>,
}

/// Factor an SPD matrix; fails with [`Error::NotSpd`] on a nonpositive pivot.
pub fn factor_ldlt(a: &SparseMatrix) -> Result<SkylineFactor> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "factorization needs a square matrix");
    let perm = rcm_ordering(a);
    let mut iperm = vec![0usize; n];
    for (k, &p) in perm.iter().enumerate() {
        iperm[p] = k;
    }
    // envelope: first permuted row index per permuted column
    let mut fr: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for &j in a.row(i).0 {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (lo, hi) = if pi < pj { (pi, pj) } else { (pj, pi) };
            if lo < fr[hi] {
                fr[hi] = lo;
            }
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        col_ptr[j + 1] = col_ptr[j] + (j - fr[j]);
    }
    let mut vals = vec![0.0; col_ptr[n]];
    // scatter the (permuted) upper triangle into the envelope
    for i in 0..n {
        let (cols, avals) = a.row(i);
        for (jj, v) in cols.iter().zip(avals) {
            let (pi, pj) = (iperm[i], iperm[*jj]);
            if pi < pj {
                vals[col_ptr[pj] + (pi - fr[pj])] = *v;
            }
        }
    }
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[iperm[i]] = a.get(i, i);
    }
    // Crout-style envelope factorization
    for j in 0..n {
        let f = fr[j];
        // u_i = A_ij - sum_m L'_mi u_m, column values updated in place
        for i in f..j {
            let s0 = col_ptr[i];
            let fi = fr[i];
            let lo = fi.max(f);
            let mut s = vals[col_ptr[j] + (i - f)];
            for m in lo..i {
                s -= vals[s0 + (m - fi)] / d[m] * vals[col_ptr[j] + (m - f)];
            }
            vals[col_ptr[j] + (i - f)] = s; // stores u_i = d_i * L'_ij
        }
        let mut dj = d[j];
        for m in f..j {
            let u = vals[col_ptr[j] + (m - f)];
            dj -= u * u / d[m];
        }
        if dj <= 0.0 {
            return Err(Error::NotSpd(format!(
                "pivot {dj:.3e} at permuted column {j} of {n}"
            )));
        }
        d[j] = dj;
    }
    // normalize the stored u values to L'_ij = u_i / d_i
    for j in 0..n {
        for i in fr[j]..j {
            vals[col_ptr[j] + (i - fr[j])] /= d[i];
        }
    }
    Ok(SkylineFactor { n, perm, fr, col_ptr, vals, d })
}

impl SkylineFactor {
    /// Solve `A x = b` using the factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // forward: (I + U)ᵀ y = b with U = strictly upper envelope
        for j in 0..self.n {
            let f = self.fr[j];
            let base = self.col_ptr[j];
            let mut acc = y[j];
            for m in f..j {
                acc -= self.vals[base + (m - f)] * y[m];
            }
            y[j] = acc;
        }
        for j in 0..self.n {
            y[j] /= self.d[j];
        }
        // back: (I + U) x = y, column sweep
        for j in (0..self.n).rev() {
            let f = self.fr[j];
            let base = self.col_ptr[j];
            let xj = y[j];
            for m in f..j {
                y[m] -= self.vals[base + (m - f)] * xj;
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// An SPD factorization with symmetric Jacobi scaling, reusable across many
/// right-hand sides (e.g. one factorization per time-stepping run).
///
/// The system is solved as `(D^{-1/2} A D^{-1/2}) y = D^{-1/2} b`,
/// `x = D^{-1/2} y`, which equilibrates strongly graded penalty systems and
/// keeps the forward error near the scaled (much smaller) condition number.
/// Each solve runs compensated-residual iterative refinement.
pub struct ScaledFactor {
    s: Vec<f64>,
    asc: SparseMatrix,
    factor: SkylineFactor,
}

impl ScaledFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut s = vec![1.0_f64; n];
        for (i, si) in s.iter_mut().enumerate() {
            let d = a.get(i, i);
            if d <= 0.0 {
                return Err(Error::NotSpd(format!("diagonal entry {d:.3e} at row {i}")));
            }
            *si = 1.0 / d.sqrt();
        }
        let mut trip = Vec::with_capacity(a.nnz());
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                trip.push((i, *c, v * s[i] * s[*c]));
            }
        }
        let asc = SparseMatrix::from_triplets(n, n, trip);
        let factor = factor_ldlt(&asc)?;
        Ok(ScaledFactor { s, asc, factor })
    }

    /// Solve, returning the iterate with the smallest relative residual and
    /// that residual (in the scaled system).
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let bsc: Vec<f64> = b.iter().zip(&self.s).map(|(bi, si)| bi * si).collect();
        let bnorm = norm2(&bsc).max(f64::MIN_POSITIVE);
        let mut x = self.factor.solve(&bsc);
        let mut best = x.clone();
        let mut best_res = f64::INFINITY;
        for _ in 0..=8 {
            let r = self.asc.residual_compensated(&bsc, &x);
            let res = norm2(&r) / bnorm;
            if res < best_res {
                best_res = res;
                best.copy_from_slice(&x);
            }
            if res < 1e-14 {
                break;
            }
            let dx = self.factor.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        for (xi, si) in best.iter_mut().zip(&self.s) {
            *xi *= si;
        }
        (best, best_res)
    }
}

/// Direct SPD solve: Jacobi-scaled factorization plus compensated-residual
/// refinement.  The post-condition `|Ax - b| / |b| < 1e-10` (in the scaled
/// system) is enforced and violated only for effectively singular systems.
pub fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.nrows(), b.len());
    let (x, res) = ScaledFactor::new(a)?.solve(b);
    if res >= 1e-10 {
        return Err(Error::NonConvergence { residual: res, iterations: 8 });
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_cg(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let dinv: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d.abs() > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotSpd(format!("curvature {pap:.3e} in CG iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) / bnorm < tol {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence { residual: norm2(&r) / bnorm, iterations: max_iter })
}

/// Deterministic pseudo-random start vector for eigenvalue iterations.
fn eigen_start(n: usize) -> Vec<f64> {
    let mut state = 0x9e3779b97f4a7c15u64;
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect()
}

const EIGEN_MAX_ITER: usize = 200;
const EIGEN_RTOL: f64 = 1e-8;

fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> Result<f64> {
    let mut x = eigen_start(n);
    let nrm = norm2(&x);
    for xi in &mut x {
        *xi /= nrm;
    }
    let mut lambda = 0.0;
    for _ in 0..EIGEN_MAX_ITER {
        let y = apply(&x);
        let l = dot(&x, &y);
        let ynorm = norm2(&y);
        if ynorm == 0.0 {
            return Ok(0.0);
        }
        let settled = (l - lambda).abs() <= EIGEN_RTOL * l.abs().max(f64::MIN_POSITIVE);
        lambda = l;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ynorm;
        }
        if settled {
            return Ok(lambda);
        }
    }
    Err(Error::EigenNonConvergence(EIGEN_MAX_ITER))
}

/// Spectral condition number estimate of an SPD matrix: extreme eigenvalues
/// by power iteration on `A` and on `A⁻¹` (via the LDLᵀ factorization).
pub fn estimate_condition(a: &SparseMatrix) -> Result<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return Ok(1.0);
    }
    let lambda_max = power_iteration(|x| a.matvec(x), n)?;
    let factor = factor_ldlt(a)?;
    let mu_max = power_iteration(|x| factor.solve(x), n)?;
    if mu_max <= 0.0 || lambda_max <= 0.0 {
        return Err(Error::NotSpd(format!(
            "eigenvalue estimates {lambda_max:.3e}, inverse {mu_max:.3e}"
        )));
    }
    Ok(lambda_max * mu_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn dense_from(a: &SparseMatrix) -> Vec<Vec<f64>> {
        (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| a.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn triplets_merge_duplicates_in_order() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.get(1, 1), 2.0);
    }

    #[test]
    fn two_by_two_solve_is_exact() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let x = solve_spd(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        // eigenvalues 3 and -1
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(factor_ldlt(&a), Err(Error::NotSpd(_))));
    }

    #[test]
    fn matvec_equals_dense_oracle_bitwise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (n, m) = (150, 120);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.gen_bool(0.05) {
                    triplets.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, m, triplets);
        let dense = dense_from(&a);
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.matvec(&x);
        for i in 0..n {
            // same ascending-column summation order as the sparse kernel
            let mut acc = 0.0;
            for j in 0..m {
                if dense[i][j] != 0.0 {
                    acc += dense[i][j] * x[j];
                }
            }
            assert_eq!(y[i], acc, "row {i} differs from dense oracle");
        }
    }

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn condition_of_the_laplacian_tridiagonal() {
        // eigenvalues 2 - 2 cos(k pi / (n+1)) are known exactly
        let n = 20;
        let a = tridiag(n);
        let t = std::f64::consts::PI / (n as f64 + 1.0);
        let exact = (2.0 - 2.0 * ((n as f64) * t).cos()) / (2.0 - 2.0 * t.cos());
        let est = estimate_condition(&a).unwrap();
        assert!((est - exact).abs() / exact < 1e-4, "estimate {est}, exact {exact}");
    }

    #[test]
    fn condition_of_a_diagonal_matrix() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 10.0)]);
        let est = estimate_condition(&a).unwrap();
        assert!((est - 10.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_reaches_tight_residuals_on_hilbert() {
        // Hilbert matrix, condition ~ 1e13 at n = 10
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, 1.0 / (i + j + 1) as f64));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let xstar: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let b = a.matvec(&xstar);
        let x = solve_spd(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(norm2(&r) / norm2(&b) < 1e-10);
    }

    #[test]
    fn cg_matches_the_direct_solver() {
        let n = 40;
        let a = tridiag(n);
        let b: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sqrt()).collect();
        let xd = solve_spd(&a, &b).unwrap();
        let (xc, iters) = solve_cg(&a, &b, 1e-12, 20 * n).unwrap();
        assert!(iters <= 20 * n);
        let diff: Vec<f64> = xd.iter().zip(&xc).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) / norm2(&xd) < 1e-8);
    }

    #[test]
    fn rcm_shrinks_the_envelope_of_a_shuffled_path() {
        // a path graph under a deterministic shuffle has a huge envelope;
        // RCM restores a bandwidth of one
        let n = 60;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut label: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            label.swap(i, j);
        }
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label[i], label[i], 2.5));
            if i + 1 < n {
                t.push((label[i], label[i + 1], -1.0));
                t.push((label[i + 1], label[i], -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let perm = rcm_ordering(&a);
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        let mut bandwidth = 0usize;
        for i in 0..n {
            for &j in a.row(i).0 {
                bandwidth = bandwidth.max(iperm[i].abs_diff(iperm[j]));
            }
        }
        assert!(bandwidth <= 2, "rcm bandwidth {bandwidth}");
        // and the factorization still solves correctly
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = solve_spd(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(norm2(&r) / norm2(&b) < 1e-12);
    }

    #[test]
    fn rap_matches_a_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (n, m) = (12, 5);
        let mut at = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                if rng.gen_bool(0.4) {
                    let v = rng.gen_range(-1.0..1.0);
                    at.push((i, j, v));
                    if i != j {
                        at.push((j, i, v));
                    }
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, at);
        let mut et = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.gen_bool(0.3) {
                    et.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let e = SparseMatrix::from_triplets(n, m, et);
        let red = a.rap(&e);
        let (da, de) = (dense_from(&a), dense_from(&e));
        for p in 0..m {
            for q in 0..m {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += de[i][p] * da[i][j] * de[j][q];
                    }
                }
                assert!((red.get(p, q) - acc).abs() < 1e-12, "rap entry ({p},{q})");
            }
        }
    }

    proptest! {
        #[test]
        fn transpose_pairing_is_consistent(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (rng.gen_range(1..25), rng.gen_range(1..25));
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..m {
                    if rng.gen_bool(0.2) {
                        t.push((i, j, rng.gen_range(-2.0..2.0)));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(n, m, t);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // <Ax, y> == <x, Aᵀy>
            let lhs = dot(&a.matvec(&x), &y);
            let rhs = dot(&x, &a.matvec_transpose(&y));
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn random_spd_systems_solve_to_tight_residuals(seed in 0u64..200) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..30);
            // SPD via diagonally dominant symmetric matrix
            let mut t = Vec::new();
            let mut diag = vec![1.0; n];
            for i in 0..n {
                for j in 0..i {
                    if rng.gen_bool(0.3) {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        t.push((i, j, v));
                        t.push((j, i, v));
                        diag[i] += v.abs();
                        diag[j] += v.abs();
                    }
                }
            }
            for (i, d) in diag.iter().enumerate() {
                t.push((i, i, *d));
            }
            let a = SparseMatrix::from_triplets(n, n, t);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
            prop_assert!(norm2(&r) <= 1e-10 * norm2(&b).max(1e-300));
        }
    }
}
