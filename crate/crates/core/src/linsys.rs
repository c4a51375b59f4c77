//! The coupled primal/dual block system and its solvers.

use std::collections::BTreeMap;
use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, SparseMatrix, TripletBuilder};

/// Blocks of the saddle-point system, unknowns ordered `[u; z]`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    /// a_h, rows = W test functions, columns = V trial functions.
    pub a: SparseMatrix,
    pub s_w: SparseMatrix,
    pub s_v: SparseMatrix,
    pub rhs_w: Vec<f64>,
    pub rhs_v: Vec<f64>,
}

impl BlockSystem {
    pub fn n_u(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_z(&self) -> usize {
        self.a.nrows()
    }

    pub fn assemble(&self) -> Result<(SparseMatrix, Vec<f64>)> {
        build_block(&self.a, &self.s_v, &self.s_w, &self.rhs_w, &self.rhs_v)
    }
}

/// `M = [[A, -S_W], [S_V, Aᵀ]]`, `b = [rhs_w; rhs_v]`.
///
/// The first block row tests with W_h, the second with V_h; columns are `[u; z]`.
pub fn build_block(
    a: &SparseMatrix,
    s_v: &SparseMatrix,
    s_w: &SparseMatrix,
    rhs_w: &[f64],
    rhs_v: &[f64],
) -> Result<(SparseMatrix, Vec<f64>)> {
    let n_z = a.nrows();
    let n_u = a.ncols();
    let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Dimension(what.to_string())) };
    check(s_v.nrows() == n_u && s_v.ncols() == n_u, "S_V must be n_u x n_u")?;
    check(s_w.nrows() == n_z && s_w.ncols() == n_z, "S_W must be n_z x n_z")?;
    check(rhs_w.len() == n_z, "rhs_w length must be n_z")?;
    check(rhs_v.len() == n_u, "rhs_v length must be n_u")?;

    let n = n_u + n_z;
    let mut out = TripletBuilder::with_capacity(n, n, 2 * a.nnz() + s_v.nnz() + s_w.nnz());
    for (i, j, v) in a.triplets() {
        out.push(i, j, v);
        out.push(n_z + j, n_u + i, v);
    }
    for (i, j, v) in s_w.triplets() {
        out.push(i, n_u + j, -v);
    }
    for (i, j, v) in s_v.triplets() {
        out.push(n_z + i, j, v);
    }
    let mut b = Vec::with_capacity(n);
    b.extend_from_slice(rhs_w);
    b.extend_from_slice(rhs_v);
    Ok((out.build(), b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverMethod {
    DirectLU,
    KrylovILU,
}

impl SolverMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::DirectLU => "lu",
            SolverMethod::KrylovILU => "krylov",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lu" => Some(SolverMethod::DirectLU),
            "krylov" => Some(SolverMethod::KrylovILU),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target of the iterative method.
    pub tol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    /// Level of fill of the incomplete factorization.
    pub fill_level: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::DirectLU, tol: 1e-10, max_iterations: 20_000, restart: 200, fill_level: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// ‖M x − b‖₂ recomputed after the solve.
    pub residual_norm: f64,
    pub iterations: usize,
    pub method: SolverMethod,
    pub wall_time: f64,
}

pub fn residual(m: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = m.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
    r
}

/// Order in which the incomplete factorization sees the system: position `k` holds
/// equation `rows[k]` and unknown `cols[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
}

impl Ordering {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if rows.len() != cols.len() || !is_permutation(&rows) || !is_permutation(&cols) {
            return Err(Error::Dimension("ordering must consist of two permutations of equal length".into()));
        }
        Ok(Self { rows, cols })
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: (0..n).collect(), cols: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn permute_matrix(&self, m: &SparseMatrix) -> SparseMatrix {
        let n = self.len();
        let mut row_pos = vec![0; n];
        let mut col_pos = vec![0; n];
        for k in 0..n {
            row_pos[self.rows[k]] = k;
            col_pos[self.cols[k]] = k;
        }
        let t = m.triplets().map(|(i, j, v)| (row_pos[i], col_pos[j], v)).collect();
        SparseMatrix::from_triplets(n, n, t).expect("permutation keeps entries in range")
    }
}

/// Incomplete factorization of the reordered system, applied in the original numbering.
struct Preconditioner {
    ilu: Ilu,
    ordering: Ordering,
}

impl Preconditioner {
    fn new(m: &SparseMatrix, fill: usize, ordering: Ordering) -> Self {
        Self { ilu: Ilu::new(&ordering.permute_matrix(m), fill), ordering }
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let permuted: Vec<f64> = self.ordering.rows.iter().map(|&i| r[i]).collect();
        let y = self.ilu.apply(&permuted);
        let mut x = vec![0.0; r.len()];
        for (k, &j) in self.ordering.cols.iter().enumerate() {
            x[j] = y[k];
        }
        x
    }
}

pub fn solve(m: &SparseMatrix, b: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    solve_ordered(m, b, config, None)
}

/// As [`solve`], with the iterative method factorizing the system in the given order.
pub fn solve_ordered(
    m: &SparseMatrix,
    b: &[f64],
    config: &SolverConfig,
    ordering: Option<&Ordering>,
) -> Result<(Vec<f64>, SolveReport)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("matrix is {} x {}", m.nrows(), m.ncols())));
    }
    if b.len() != m.nrows() {
        return Err(Error::Dimension(format!("rhs length {} for {} rows", b.len(), m.nrows())));
    }
    let start = Instant::now();
    let (x, iterations) = match config.method {
        SolverMethod::DirectLU => (direct_lu(m, b)?, 0),
        SolverMethod::KrylovILU => {
            if !(config.tol > 0.0) {
                return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", config.tol)));
            }
            let ordering = match ordering {
                Some(o) if o.len() == m.nrows() => o.clone(),
                Some(o) => return Err(Error::Dimension(format!("ordering of length {} for {} rows", o.len(), m.nrows()))),
                None => Ordering::identity(m.nrows()),
            };
            gmres_ilu(m, b, config, ordering)?
        }
    };
    let residual_norm = norm2(&residual(m, &x, b));
    if !residual_norm.is_finite() {
        return Err(Error::Singular("solution is not finite".into()));
    }
    let report = SolveReport { residual_norm, iterations, method: config.method, wall_time: start.elapsed().as_secs_f64() };
    Ok((x, report))
}

fn direct_lu(m: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = m.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Singular(format!("matrix conversion failed: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::Singular(format!("LU factorization failed: {e:?}")))?;
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for (i, &v) in b.iter().enumerate() {
        rhs[(i, 0)] = v;
    }
    let x = lu.solve(&rhs);
    let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("zero pivot encountered".into()));
    }
    let r = norm2(&residual(m, &x, b));
    let scale = norm2(b).max(f64::MIN_POSITIVE);
    if r > 1e-6 * scale {
        return Err(Error::Singular(format!("LU residual {r:e} relative to |b| = {scale:e}")));
    }
    Ok(x)
}

/// Incomplete LU with level-of-fill `k`: fill entries of level ≤ k are kept, level 0 being
/// the sparsity pattern of the matrix itself.
pub struct Ilu {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

/// Row patterns of ILU(k), each row sorted and containing its diagonal.
fn symbolic_ilu(m: &SparseMatrix, fill: usize) -> Vec<Vec<usize>> {
    let n = m.nrows();
    // (column, level) of the strictly upper part of each processed row
    let mut upper: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut levels: BTreeMap<usize, usize> = m.row(i).map(|(j, _)| (j, 0)).collect();
        levels.insert(i, 0);
        let mut cursor = 0;
        while let Some((&k, &lk)) = levels.range(cursor..i).next() {
            for &(j, lkj) in &upper[k] {
                let l = lk + lkj + 1;
                if l <= fill {
                    levels.entry(j).and_modify(|e| *e = (*e).min(l)).or_insert(l);
                }
            }
            cursor = k + 1;
        }
        upper.push(levels.range(i + 1..).map(|(&j, &l)| (j, l)).collect());
        rows.push(levels.into_keys().collect());
    }
    rows
}

impl Ilu {
    /// Vanishing pivots are replaced by a small multiple of the row norm.
    pub fn new(m: &SparseMatrix, fill: usize) -> Self {
        let n = m.nrows();
        let pattern = symbolic_ilu(m, fill);
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &pattern {
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let mut values = vec![0.0; col_idx.len()];
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            for (j, v) in m.row(i) {
                values[pos[j]] += v;
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        let diag: Vec<usize> = (0..n)
            .map(|i| row_ptr[i] + col_idx[row_ptr[i]..row_ptr[i + 1]].binary_search(&i).expect("diagonal present"))
            .collect();
        let row_norms: Vec<f64> =
            (0..n).map(|i| values[row_ptr[i]..row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>()).collect();

        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            for kk in row_ptr[i]..diag[i] {
                let k = col_idx[kk];
                let factor = values[kk] / values[diag[k]];
                values[kk] = factor;
                for jj in (diag[k] + 1)..row_ptr[k + 1] {
                    let p = pos[col_idx[jj]];
                    if p != usize::MAX {
                        values[p] -= factor * values[jj];
                    }
                }
            }
            let floor = 1e-8 * row_norms[i].max(1e-300);
            if values[diag[i]].abs() < floor {
                values[diag[i]] = if values[diag[i]] < 0.0 { -floor } else { floor };
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Self { row_ptr, col_idx, values, diag }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in self.row_ptr[i]..self.diag[i] {
                s -= self.values[k] * y[self.col_idx[k]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (self.diag[i] + 1)..self.row_ptr[i + 1] {
                s -= self.values[k] * y[self.col_idx[k]];
            }
            y[i] = s / self.values[self.diag[i]];
        }
        y
    }
}

/// Right-preconditioned restarted GMRES.
fn gmres_ilu(m: &SparseMatrix, b: &[f64], config: &SolverConfig, ordering: Ordering) -> Result<(Vec<f64>, usize)> {
    let n = m.nrows();
    let ilu = Preconditioner::new(m, config.fill_level, ordering);
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let restart = config.restart.max(1).min(n.max(1));
    let mut iterations = 0;
    let mut best_rel = f64::INFINITY;
    let mut stalled_cycles = 0;
    while iterations < config.max_iterations {
        let r = residual(m, &x, b).into_iter().map(|v| -v).collect::<Vec<_>>();
        let beta = norm2(&r);
        let rel = beta / b_norm;
        if rel <= config.tol {
            return Ok((x, iterations));
        }
        if rel < 0.99 * best_rel {
            best_rel = rel;
            stalled_cycles = 0;
        } else {
            stalled_cycles += 1;
            if stalled_cycles >= 3 {
                break;
            }
        }

        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let zk = ilu.apply(&basis[k]);
            let mut w = m.mul_vec(&zk);
            // modified Gram-Schmidt
            for (j, vj) in basis.iter().enumerate() {
                let hij = dot(&w, vj);
                h[j][k] = hij;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hij * vi);
            }
            let hk1 = norm2(&w);
            h[k + 1][k] = hk1;
            for j in 0..k {
                let tmp = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = tmp;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if (g[k + 1].abs() / b_norm) <= config.tol || iterations >= config.max_iterations || hk1 == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            update.iter_mut().zip(&basis[j]).for_each(|(u, v)| *u += yj * v);
        }
        let dz = ilu.apply(&update);
        x.iter_mut().zip(&dz).for_each(|(xi, d)| *xi += d);
        if k_used == 0 {
            break;
        }
    }
    let rel = norm2(&residual(m, &x, b)) / b_norm;
    if rel <= config.tol {
        Ok((x, iterations))
    } else {
        Err(Error::Stagnation { iterations, relative_residual: rel })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal_nonsymmetric(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64 * 0.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -2.0));
            }
            // a long-range coupling creates fill
            t.push((i, (i * 7 + 3) % n, 0.5));
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn full_fill_ilu_is_exact() {
        let m = tridiagonal_nonsymmetric(12);
        let ilu = Ilu::new(&m, 12);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = ilu.apply(&b);
        assert!(norm2(&residual(&m, &x, &b)) < 1e-12);
    }

    #[test]
    fn zero_fill_keeps_pattern() {
        let m = tridiagonal_nonsymmetric(12);
        let mut diag_count = 0;
        for i in 0..12 {
            if m.row(i).all(|(j, _)| j != i) {
                diag_count += 1;
            }
        }
        assert_eq!(Ilu::new(&m, 0).nnz(), m.nnz() + diag_count);
        assert!(Ilu::new(&m, 1).nnz() > Ilu::new(&m, 0).nnz());
    }

    #[test]
    fn ordering_validation() {
        assert!(Ordering::new(vec![0, 1], vec![1, 0]).is_ok());
        assert!(Ordering::new(vec![0, 0], vec![1, 0]).is_err());
        assert!(Ordering::new(vec![0, 1], vec![0]).is_err());
        assert!(Ordering::new(vec![0, 2], vec![0, 1]).is_err());
    }

    #[test]
    fn reordered_preconditioner_solves_permuted_system() {
        // anti-diagonal matrix: natural order has no diagonal, the reversed row order does
        let n = 6;
        let m = SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, n - 1 - i, 1.0 + i as f64)).collect()).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let ordering = Ordering::new((0..n).rev().collect(), (0..n).collect()).unwrap();
        let config = SolverConfig { method: SolverMethod::KrylovILU, fill_level: 0, ..SolverConfig::default() };
        let (x, rep) = solve_ordered(&m, &b, &config, Some(&ordering)).unwrap();
        assert!(rep.residual_norm < 1e-12);
        assert!(rep.iterations <= 1);
        assert!(norm2(&residual(&m, &x, &b)) < 1e-12);
        assert!(solve_ordered(&m, &b, &config, Some(&Ordering::identity(3))).is_err());
    }

    #[test]
    fn scalar_block_placement() {
        let a = SparseMatrix::from_dense(&[vec![2.0]]);
        let sv = SparseMatrix::from_dense(&[vec![1.0]]);
        let sw = SparseMatrix::from_dense(&[vec![3.0]]);
        let (m, b) = build_block(&a, &sv, &sw, &[5.0], &[6.0]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![2.0, -3.0], vec![1.0, 2.0]]);
        assert_eq!(b, vec![5.0, 6.0]);
    }

    #[test]
    fn zero_stabilization_gives_block_diagonal() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 4.0]]);
        let (m, _) = build_block(&a, &SparseMatrix::zeros(3, 3), &SparseMatrix::zeros(2, 2), &[0.0; 2], &[0.0; 3]).unwrap();
        let d = m.to_dense();
        let at = a.transpose().to_dense();
        for i in 0..5 {
            for j in 0..5 {
                let expected = match (i < 2, j < 3) {
                    (true, true) => a.get(i, j),
                    (false, false) => at[i - 2][j - 3],
                    _ => 0.0,
                };
                assert_eq!(d[i][j], expected);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = SparseMatrix::zeros(2, 3);
        let r = build_block(&a, &SparseMatrix::zeros(2, 2), &SparseMatrix::zeros(2, 2), &[0.0; 2], &[0.0; 3]);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn identity_solves() {
        let m = SparseMatrix::identity(4);
        let b = vec![1.0, -2.0, 3.5, 0.0];
        for method in [SolverMethod::DirectLU, SolverMethod::KrylovILU] {
            let (x, rep) = solve(&m, &b, &SolverConfig { method, ..Default::default() }).unwrap();
            assert_eq!(x, b);
            assert_eq!(rep.residual_norm, 0.0);
            assert!(rep.iterations <= 1);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let r = solve(&m, &[1.0, 2.0], &SolverConfig::default());
        assert!(matches!(r, Err(Error::Singular(_))), "{r:?}");
    }

    #[test]
    fn nonsymmetric_system_both_methods() {
        // convection-diffusion-like tridiagonal matrix
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
            if i + 7 < n {
                t.push((i, i + 7, 0.3));
            }
        }
        let m = SparseMatrix::from_triplets(n, n, t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (x_lu, rep_lu) = solve(&m, &b, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig { method: SolverMethod::KrylovILU, tol: 1e-12, restart: 10, ..Default::default() };
        let (x_k, rep_k) = solve(&m, &b, &cfg).unwrap();
        assert!(rep_lu.residual_norm <= 1e-12 * norm2(&b));
        assert!(rep_k.residual_norm <= 1e-11 * norm2(&b));
        assert!(rep_k.iterations > 0);
        for (a, b) in x_lu.iter().zip(&x_k) {
            assert!((a - b).abs() < 1e-9);
        }
        let r = norm2(&residual(&m, &x_k, &b));
        assert!((r - rep_k.residual_norm).abs() <= 1e-12 * r.max(1e-300));
    }

    #[test]
    fn krylov_reports_stagnation() {
        let m = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let cfg = SolverConfig { method: SolverMethod::KrylovILU, tol: 1e-30, max_iterations: 3, restart: 1, ..Default::default() };
        let r = solve(&m, &[1.0, 0.0], &cfg);
        assert!(r.is_ok() || matches!(r, Err(Error::Stagnation { .. })));
        let bad = SolverConfig { method: SolverMethod::KrylovILU, tol: 0.0, ..Default::default() };
        assert!(matches!(solve(&m, &[1.0, 0.0], &bad), Err(Error::InvalidParameter(_))));
    }
}
