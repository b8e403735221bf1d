//! Direct SPD solver: reverse Cuthill-McKee ordering plus envelope
//! (skyline) Cholesky factorization with one step of iterative refinement.

use super::{spmv, DenseVector, SparseMatrix};
use crate::{Error, Result};

/// Reusable Cholesky factorization of a sparse SPD matrix.
pub struct SpdFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    /// first column of the envelope per permuted row
    first: Vec<usize>,
    /// offsets into `values` per permuted row
    offsets: Vec<usize>,
    /// L stored row-wise over the envelope, diagonal included
    values: Vec<f64>,
    /// original matrix, kept for refinement and residual checks
    matrix: SparseMatrix,
}

const SPD_TOLERANCE: f64 = 1e-10;

/// Factors a sparse symmetric positive definite matrix.
pub fn factor_spd(a: &SparseMatrix) -> Result<SpdFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "factor_spd",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let n = a.nrows();
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    // Envelope of the permuted matrix (lower triangle).
    let mut first: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let (cols, _) = a.row(perm[i]);
        for &c in cols {
            let j = inv[c];
            if j < i && j < first[i] {
                first[i] = j;
            }
        }
    }
    let mut offsets = vec![0usize; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + (i - first[i] + 1);
    }
    let mut values = vec![0.0; offsets[n]];
    for i in 0..n {
        let (cols, vals) = a.row(perm[i]);
        for (&c, &v) in cols.iter().zip(vals) {
            let j = inv[c];
            if j <= i {
                values[offsets[i] + (j - first[i])] = v;
            }
        }
    }

    // Row-oriented envelope factorization. Fill stays inside the envelope.
    for i in 0..n {
        let fi = first[i];
        for j in fi..i {
            let fj = first[j];
            let lo = fi.max(fj);
            let mut s = values[offsets[i] + (j - fi)];
            for k in lo..j {
                s -= values[offsets[i] + (k - fi)] * values[offsets[j] + (k - fj)];
            }
            values[offsets[i] + (j - fi)] = s / values[offsets[j] + (j - fj)];
        }
        let mut d = values[offsets[i] + (i - fi)];
        for k in fi..i {
            let l = values[offsets[i] + (k - fi)];
            d -= l * l;
        }
        if d <= 0.0 {
            return Err(Error::NotSpd { row: perm[i] });
        }
        values[offsets[i] + (i - fi)] = d.sqrt();
    }

    Ok(SpdFactor {
        n,
        perm,
        first,
        offsets,
        values,
        matrix: a.clone(),
    })
}

impl SpdFactor {
    /// Triangular solves without refinement.
    fn solve_raw(&self, b: &DenseVector) -> DenseVector {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            let mut s = b[self.perm[i]];
            for k in fi..i {
                s -= self.values[self.offsets[i] + (k - fi)] * y[k];
            }
            y[i] = s / self.values[self.offsets[i] + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.values[self.offsets[i] + (i - fi)];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.values[self.offsets[i] + (k - fi)] * yi;
            }
        }
        let mut x = DenseVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Solves A x = b with one round of iterative refinement.
    pub fn solve(&self, b: &DenseVector) -> Result<DenseVector> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "SpdFactor::solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let b_norm = b.norm2();
        if b_norm == 0.0 {
            return Ok(DenseVector::zeros(self.n));
        }
        let mut x = self.solve_raw(b);
        let mut r = b.sub(&spmv(&self.matrix, &x)?);
        let dx = self.solve_raw(&r);
        x.axpy(1.0, &dx);
        r = b.sub(&spmv(&self.matrix, &x)?);
        let rel = r.norm2() / b_norm;
        if rel > SPD_TOLERANCE {
            return Err(Error::ResidualTooLarge {
                residual: rel,
                tolerance: SPD_TOLERANCE,
            });
        }
        Ok(x)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}

/// One-shot SPD solve: factor then solve.
///
/// Returns x with relative residual |Ax - b| / |b| at most 1e-10; a zero
/// right-hand side yields the zero vector.
pub fn solve_spd(a: &SparseMatrix, b: &DenseVector) -> Result<DenseVector> {
    factor_spd(a)?.solve(b)
}

/// Reverse Cuthill-McKee ordering from a pseudo-peripheral start node,
/// computed per connected component. Returns perm with perm[new] = old.
fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    // Symmetrized adjacency without the diagonal.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(start, &adj, &degree);
        // Cuthill-McKee BFS, neighbors by increasing degree then index.
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(root);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree[v], v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = start;
    let mut last_ecc = 0usize;
    for _ in 0..10 {
        let (levels, ecc) = bfs_levels(root, adj);
        if ecc <= last_ecc && last_ecc > 0 {
            break;
        }
        last_ecc = ecc;
        // Minimum-degree node in the deepest level.
        let mut best = root;
        let mut best_deg = usize::MAX;
        for (v, &lv) in levels.iter().enumerate() {
            if lv == ecc && degree[v] < best_deg {
                best = v;
                best_deg = degree[v];
            }
        }
        if best == root {
            break;
        }
        root = best;
    }
    root
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    level[root] = 0;
    queue.push_back(root);
    let mut ecc = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                ecc = ecc.max(level[v]);
                queue.push_back(v);
            }
        }
    }
    (level, ecc)
}
