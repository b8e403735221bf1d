//! Dense kernels for small systems: Cholesky, rank-revealing pivoted
//! Cholesky for semidefinite matrices, Jacobi eigendecomposition, and a
//! Bunch-Parlett LDL' factorization for symmetric indefinite systems.

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols);
            data.extend_from_slice(r);
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len());
        let mut out = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let row = &self.data[i * self.ncols..(i + 1) * self.ncols];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Cholesky factorization of a dense SPD matrix; returns the lower factor.
pub fn cholesky_factor(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotSpd { row: i });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves L L' x = b given the lower Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[(i, k)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[(k, i)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Rank-revealing pivoted Cholesky of a symmetric PSD matrix.
///
/// Produces a permutation and a lower-trapezoidal factor of the detected
/// numerical rank. Used to solve consistent singular Schur systems.
pub struct PivotedCholesky {
    perm: Vec<usize>,
    l: DenseMatrix,
    rank: usize,
    n: usize,
}

impl PivotedCholesky {
    pub fn new(a: &DenseMatrix, rel_tol: f64) -> Self {
        let n = a.nrows();
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = DenseMatrix::zeros(n, n);
        let scale = (0..n).fold(0.0f64, |m, i| m.max(work[(i, i)].abs()));
        let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
        let mut rank = 0;
        for s in 0..n {
            // Pick the largest remaining diagonal entry.
            let mut best = s;
            for i in s + 1..n {
                if work[(i, i)] > work[(best, best)] {
                    best = i;
                }
            }
            if work[(best, best)] <= tol {
                break;
            }
            swap_sym(&mut work, s, best);
            perm.swap(s, best);
            for j in 0..s {
                let tmp = l[(s, j)];
                l[(s, j)] = l[(best, j)];
                l[(best, j)] = tmp;
            }
            let d = work[(s, s)].sqrt();
            l[(s, s)] = d;
            for i in s + 1..n {
                l[(i, s)] = work[(i, s)] / d;
            }
            for i in s + 1..n {
                for j in s + 1..=i {
                    work[(i, j)] -= l[(i, s)] * l[(j, s)];
                    work[(j, i)] = work[(i, j)];
                }
            }
            rank = s + 1;
        }
        Self { perm, l, rank, n }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Solves A x = b for a consistent system; dropped pivots get zero
    /// coefficients. Returns an error with `context` if the permuted
    /// trailing equations are inconsistent beyond `tol`.
    pub fn solve_consistent(&self, b: &[f64], tol: f64, context: &str) -> Result<Vec<f64>> {
        let r = self.rank;
        let pb: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward solve on the leading r x r block.
        let mut y = vec![0.0; r];
        for i in 0..r {
            let mut s = pb[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        // Consistency of the dropped rows: L[r.., ..r] * y must match pb[r..].
        for i in r..self.n {
            let mut s = pb[i];
            for k in 0..r {
                s -= self.l[(i, k)] * y[k];
            }
            if s.abs() > tol {
                return Err(Error::Singular {
                    context: format!("{context}: inconsistent redundant equation ({:.3e})", s),
                });
            }
        }
        let mut z = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = y[i];
            for k in i + 1..r {
                s -= self.l[(k, i)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        let mut x = vec![0.0; self.n];
        for i in 0..r {
            x[self.perm[i]] = z[i];
        }
        Ok(x)
    }
}

fn swap_sym(a: &mut DenseMatrix, p: usize, q: usize) {
    if p == q {
        return;
    }
    let n = a.nrows();
    for j in 0..n {
        let tmp = a[(p, j)];
        a[(p, j)] = a[(q, j)];
        a[(q, j)] = tmp;
    }
    for i in 0..n {
        let tmp = a[(i, p)];
        a[(i, p)] = a[(i, q)];
        a[(i, q)] = tmp;
    }
}

/// Jacobi eigendecomposition of a small symmetric matrix.
///
/// Returns (eigenvalues, eigenvectors as columns); deterministic sweep
/// order, converged to machine precision.
pub fn jacobi_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut q = DenseMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = 1.0;
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return ((0..n).map(|i| m[(i, i)]).collect(), q);
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apq = m[(p, r)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, r)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, r)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(r, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(r, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkq = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkq;
                    q[(k, r)] = s * qkp + c * qkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), q)
}

/// Bunch-Parlett LDL' factorization of a dense symmetric indefinite matrix
/// with complete pivoting (1x1 and 2x2 pivot blocks).
pub struct BunchParlett {
    n: usize,
    perm: Vec<usize>,
    l: DenseMatrix,
    /// Pivot blocks in elimination order: (start, size) with size 1 or 2.
    blocks: Vec<(usize, usize)>,
    d11: Vec<f64>,
    d21: Vec<f64>,
    d22: Vec<f64>,
}

impl BunchParlett {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut m = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            l[(i, i)] = 1.0;
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let tol = 1e-14 * scale;
        let alpha = (1.0 + 17.0f64.sqrt()) / 8.0;
        let mut blocks = Vec::new();
        let mut d11 = vec![0.0; n];
        let mut d21 = vec![0.0; n];
        let mut d22 = vec![0.0; n];
        let mut s = 0;
        while s < n {
            // Largest diagonal and off-diagonal magnitudes in the active block.
            let mut r_diag = s;
            for i in s + 1..n {
                if m[(i, i)].abs() > m[(r_diag, r_diag)].abs() {
                    r_diag = i;
                }
            }
            let mu_diag = m[(r_diag, r_diag)].abs();
            let (mut p_off, mut q_off, mut mu_off) = (s, s, 0.0f64);
            for i in s..n {
                for j in s..i {
                    if m[(i, j)].abs() > mu_off {
                        mu_off = m[(i, j)].abs();
                        p_off = i;
                        q_off = j;
                    }
                }
            }
            if mu_diag <= tol && mu_off <= tol {
                return Err(Error::Singular {
                    context: format!("LDL' factorization: rank deficiency at step {s}"),
                });
            }
            if mu_diag >= alpha * mu_off {
                // 1x1 pivot at r_diag.
                pivot_swap(&mut m, &mut l, &mut perm, s, r_diag);
                let d = m[(s, s)];
                d11[s] = d;
                blocks.push((s, 1));
                for i in s + 1..n {
                    let lis = m[(i, s)] / d;
                    l[(i, s)] = lis;
                    for j in s + 1..=i {
                        m[(i, j)] -= lis * m[(j, s)];
                        m[(j, i)] = m[(i, j)];
                    }
                }
                s += 1;
            } else {
                // 2x2 pivot with rows/cols (q_off, p_off) brought to (s, s+1).
                pivot_swap(&mut m, &mut l, &mut perm, s, q_off);
                let p_now = if p_off == s { q_off } else { p_off };
                pivot_swap(&mut m, &mut l, &mut perm, s + 1, p_now);
                let (a11, a21, a22) = (m[(s, s)], m[(s + 1, s)], m[(s + 1, s + 1)]);
                let det = a11 * a22 - a21 * a21;
                if det.abs() <= tol * tol {
                    return Err(Error::Singular {
                        context: format!("LDL' factorization: singular 2x2 pivot at step {s}"),
                    });
                }
                d11[s] = a11;
                d21[s] = a21;
                d22[s] = a22;
                blocks.push((s, 2));
                for i in s + 2..n {
                    let b1 = m[(i, s)];
                    let b2 = m[(i, s + 1)];
                    let l1 = (a22 * b1 - a21 * b2) / det;
                    let l2 = (a11 * b2 - a21 * b1) / det;
                    l[(i, s)] = l1;
                    l[(i, s + 1)] = l2;
                    for j in s + 2..=i {
                        m[(i, j)] -= l1 * m[(j, s)] + l2 * m[(j, s + 1)];
                        m[(j, i)] = m[(i, j)];
                    }
                }
                s += 2;
            }
        }
        Ok(Self {
            n,
            perm,
            l,
            blocks,
            d11,
            d21,
            d22,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // L z = P b
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                if lik != 0.0 {
                    y[i] -= lik * y[k];
                }
            }
        }
        // D w = z, blockwise
        for &(s, size) in &self.blocks {
            if size == 1 {
                y[s] /= self.d11[s];
            } else {
                let (a11, a21, a22) = (self.d11[s], self.d21[s], self.d22[s]);
                let det = a11 * a22 - a21 * a21;
                let (b1, b2) = (y[s], y[s + 1]);
                y[s] = (a22 * b1 - a21 * b2) / det;
                y[s + 1] = (a11 * b2 - a21 * b1) / det;
            }
        }
        // L' x = w
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[(k, i)];
                if lki != 0.0 {
                    y[i] -= lki * y[k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

fn pivot_swap(m: &mut DenseMatrix, l: &mut DenseMatrix, perm: &mut [usize], s: usize, t: usize) {
    if s == t {
        return;
    }
    swap_sym(m, s, t);
    perm.swap(s, t);
    // Swap already-computed L rows (columns 0..s only hold factors).
    for j in 0..s {
        let tmp = l[(s, j)];
        l[(s, j)] = l[(t, j)];
        l[(t, j)] = tmp;
    }
}
