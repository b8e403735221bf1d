//! Minimal sparse/dense linear algebra: compressed sparse symmetric
//! matrices, direct SPD factorization, KKT (saddle-point) solves, norms,
//! and convergence-rate utilities.
//!
//! Solvers are direct and fully deterministic: a fixed accumulation order
//! is used everywhere and a single solve never spawns threads.

mod cholesky;
pub mod dense;
mod saddle;

pub use cholesky::{factor_spd, solve_spd, SpdFactor};
pub use saddle::{factor_saddle, solve_saddle, SaddleFactor, SaddleSystem};

use crate::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices
/// per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets. Duplicate
    /// entries are summed in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
        }
        // Stable sort keeps input order within each (row, col) group, so
        // duplicate summation is left to right over the input.
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        for &i in &order {
            let (r, c, v) = triplets[i];
            if row_offsets[r + 1] > 0 {
                // Row already has entries; check if this extends the last one.
                let last = col_indices.len() - 1;
                if col_indices[last] == c && row_offsets[r + 1] == col_indices.len() {
                    values[last] += v;
                    continue;
                }
            }
            // New entry for row r. Rows arrive in nondecreasing order.
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] = col_indices.len();
        }
        // Fill offsets for empty rows.
        for r in 0..nrows {
            row_offsets[r + 1] = row_offsets[r + 1].max(row_offsets[r]);
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Matrix of size `nrows` x `ncols` with no stored entries.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at (i, j), or zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// Sum of two matrices with identical shape.
    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                context: "sparse add",
                expected: self.nrows,
                found: other.nrows,
            });
        }
        let mut row_offsets = vec![0usize; self.nrows + 1];
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0usize, 0usize);
            while p < ca.len() || q < cb.len() {
                if q == cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    col_indices.push(ca[p]);
                    values.push(va[p]);
                    p += 1;
                } else if p == ca.len() || cb[q] < ca[p] {
                    col_indices.push(cb[q]);
                    values.push(vb[q]);
                    q += 1;
                } else {
                    col_indices.push(ca[p]);
                    values.push(va[p] + vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_offsets[i + 1] = col_indices.len();
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Transposed copy.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = row_offsets[c];
                col_indices[slot] = i;
                values[slot] = v;
                row_offsets[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Maximum relative asymmetry max |a_ij - a_ji| / max |a_ij| over the
    /// stored pattern; zero for an empty matrix.
    pub fn symmetry_error(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
        }
        worst / scale
    }

    /// Extracts the square submatrix with the given (sorted, unique) index
    /// set on both rows and columns, reindexed to 0..len.
    pub fn principal_submatrix(&self, indices: &[usize]) -> SparseMatrix {
        let mut local_of = vec![usize::MAX; self.ncols.max(self.nrows)];
        for (local, &g) in indices.iter().enumerate() {
            local_of[g] = local;
        }
        let mut row_offsets = vec![0usize; indices.len() + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for (local_row, &g) in indices.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if local_of[c] != usize::MAX {
                    col_indices.push(local_of[c]);
                    values.push(v);
                }
            }
            row_offsets[local_row + 1] = col_indices.len();
        }
        SparseMatrix {
            nrows: indices.len(),
            ncols: indices.len(),
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Dense copy, for small matrices and tests.
    pub fn to_dense(&self) -> dense::DenseMatrix {
        let mut out = dense::DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Coefficient vector over a dof set.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: f64, other: &DenseVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.len(), other.len());
        DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Sparse vector as parallel sorted index/value arrays.
#[derive(Debug, Clone, Default)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    /// Combines unsorted (index, value) pairs: stable-sorts by index and
    /// sums runs left to right.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        Self { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Dot product against a dense slice.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * dense[i])
            .sum()
    }

    /// Scatter into a dense vector: out[i] += alpha * v_i.
    pub fn add_into(&self, alpha: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] += alpha * v;
        }
    }

    pub fn to_dense(&self, n: usize) -> DenseVector {
        let mut out = DenseVector::zeros(n);
        self.add_into(1.0, out.as_mut_slice());
        out
    }
}

/// Sparse matrix-vector product with a fixed left-to-right accumulation
/// order per row.
pub fn spmv(a: &SparseMatrix, x: &DenseVector) -> Result<DenseVector> {
    if a.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "spmv",
            expected: a.ncols(),
            found: x.len(),
        });
    }
    let mut out = DenseVector::zeros(a.nrows());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let mut acc = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            acc += v * x[j];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Energy norm sqrt(v'Av) induced by a symmetric positive semidefinite A.
///
/// Small negative round-off is clamped to zero; a quadratic form below
/// -1e-12 * |v|^2 is reported as a non-PSD error.
pub fn energy_norm(a: &SparseMatrix, v: &DenseVector) -> Result<f64> {
    let av = spmv(a, v)?;
    let q = v.dot(&av);
    let norm_sq = v.dot(v);
    if q < -1e-12 * norm_sq {
        return Err(Error::NotPsd { value: q, norm_sq });
    }
    Ok(q.max(0.0).sqrt())
}

/// Experimental orders of convergence:
/// eoc_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1}).
pub fn estimate_eoc(errors: &[f64], mesh_sizes: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != mesh_sizes.len() {
        return Err(Error::DimensionMismatch {
            context: "estimate_eoc",
            expected: errors.len(),
            found: mesh_sizes.len(),
        });
    }
    if errors.len() < 2 {
        return Err(Error::InvalidParameter(
            "estimate_eoc needs at least two levels".into(),
        ));
    }
    for (&e, &h) in errors.iter().zip(mesh_sizes) {
        if !(e > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "estimate_eoc requires positive entries, got error {e}, h {h}"
            )));
        }
    }
    Ok(errors
        .windows(2)
        .zip(mesh_sizes.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}
