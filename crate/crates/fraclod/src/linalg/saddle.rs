//! Direct saddle-point (KKT) solver for systems
//!
//! ```text
//!   [ K  C' ] [ w  ]   [ f ]
//!   [ C  0  ] [ mu ] = [ g ]
//! ```
//!
//! with K symmetric positive (semi)definite and C a constraint block.
//! When K factors as SPD the system is reduced to a dense Schur complement
//! S = C K^-1 C', solved by rank-revealing pivoted Cholesky so redundant
//! constraints are tolerated. Otherwise the assembled KKT matrix is
//! factored by a dense symmetric-indefinite LDL'.

use super::dense::{BunchParlett, DenseMatrix, PivotedCholesky};
use super::{factor_spd, spmv, DenseVector, SparseMatrix, SpdFactor};
use crate::{Error, Result};

const BLOCK_TOLERANCE: f64 = 1e-9;

/// Constrained symmetric system: minimize 1/2 w'Kw - f'w subject to Cw = g.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub stiffness: SparseMatrix,
    pub constraints: SparseMatrix,
    pub rhs_primal: DenseVector,
    pub rhs_dual: DenseVector,
}

enum SaddleKernel {
    /// K SPD: Schur-complement reduction with K^-1 C' cached column-wise.
    Schur {
        k_factor: SpdFactor,
        kinv_ct: Vec<DenseVector>,
        schur: PivotedCholesky,
        c: SparseMatrix,
    },
    /// Fallback: dense LDL' of the full KKT matrix.
    Dense {
        factor: BunchParlett,
        k: SparseMatrix,
        c: SparseMatrix,
    },
}

/// Reusable factorization of the KKT operator for a fixed (K, C) pair.
pub struct SaddleFactor {
    n: usize,
    m: usize,
    kernel: SaddleKernel,
}

/// Factors the KKT operator. Constraint rows with norm below 1e-14 are
/// dropped before factorization; `context` names the originating problem
/// in error messages.
pub fn factor_saddle(k: &SparseMatrix, c: &SparseMatrix, context: &str) -> Result<SaddleFactor> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "factor_saddle: K not square",
            expected: n,
            found: k.ncols(),
        });
    }
    if c.ncols() != n && c.nrows() > 0 {
        return Err(Error::DimensionMismatch {
            context: "factor_saddle: C columns",
            expected: n,
            found: c.ncols(),
        });
    }
    let m = c.nrows();

    match factor_spd(k) {
        Ok(k_factor) => {
            // X = K^-1 C' column by column (deterministic order).
            let mut kinv_ct = Vec::with_capacity(m);
            for j in 0..m {
                let mut col = DenseVector::zeros(n);
                let (cols, vals) = c.row(j);
                for (&i, &v) in cols.iter().zip(vals) {
                    col[i] = v;
                }
                kinv_ct.push(k_factor.solve(&col)?);
            }
            let mut s = DenseMatrix::zeros(m, m);
            for i in 0..m {
                let (cols, vals) = c.row(i);
                for j in 0..m {
                    let mut acc = 0.0;
                    for (&col, &v) in cols.iter().zip(vals) {
                        acc += v * kinv_ct[j][col];
                    }
                    s[(i, j)] = acc;
                }
            }
            // Symmetrize against round-off.
            for i in 0..m {
                for j in 0..i {
                    let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
                    s[(i, j)] = avg;
                    s[(j, i)] = avg;
                }
            }
            let schur = PivotedCholesky::new(&s, 1e-12);
            if m > 0 && schur.rank() == 0 {
                return Err(Error::Singular {
                    context: format!("{context}: constraint block is numerically zero"),
                });
            }
            Ok(SaddleFactor {
                n,
                m,
                kernel: SaddleKernel::Schur {
                    k_factor,
                    kinv_ct,
                    schur,
                    c: c.clone(),
                },
            })
        }
        Err(Error::NotSpd { .. }) => {
            // Assemble the full KKT matrix densely. Only small systems are
            // expected on this path.
            let size = n + m;
            if size > 4000 {
                return Err(Error::Singular {
                    context: format!(
                        "{context}: K block not SPD and KKT too large for the dense fallback ({size})"
                    ),
                });
            }
            let mut kkt = DenseMatrix::zeros(size, size);
            for i in 0..n {
                let (cols, vals) = k.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    kkt[(i, j)] = v;
                }
            }
            for i in 0..m {
                let (cols, vals) = c.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    kkt[(n + i, j)] = v;
                    kkt[(j, n + i)] = v;
                }
            }
            let factor = BunchParlett::factor(&kkt).map_err(|e| Error::Singular {
                context: format!("{context}: {e}"),
            })?;
            Ok(SaddleFactor {
                n,
                m,
                kernel: SaddleKernel::Dense {
                    factor,
                    k: k.clone(),
                    c: c.clone(),
                },
            })
        }
        Err(e) => Err(e),
    }
}

impl SaddleFactor {
    /// Solves for one right-hand side pair, verifying both KKT blocks.
    pub fn solve(
        &self,
        rhs_primal: &DenseVector,
        rhs_dual: &DenseVector,
        context: &str,
    ) -> Result<(DenseVector, DenseVector)> {
        if rhs_primal.len() != self.n || rhs_dual.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "SaddleFactor::solve",
                expected: self.n + self.m,
                found: rhs_primal.len() + rhs_dual.len(),
            });
        }
        let (w, mu) = match &self.kernel {
            SaddleKernel::Schur {
                k_factor,
                kinv_ct,
                schur,
                c,
            } => {
                let t = k_factor.solve(rhs_primal)?;
                let ct_minus_g = {
                    let mut v = spmv(c, &t)?;
                    for i in 0..self.m {
                        v[i] -= rhs_dual[i];
                    }
                    v
                };
                let mu_raw = schur.solve_consistent(
                    ct_minus_g.as_slice(),
                    BLOCK_TOLERANCE * ct_minus_g.norm_inf().max(1.0),
                    context,
                )?;
                let mu = DenseVector::from_vec(mu_raw);
                let mut w = t;
                for j in 0..self.m {
                    if mu[j] != 0.0 {
                        w.axpy(-mu[j], &kinv_ct[j]);
                    }
                }
                (w, mu)
            }
            SaddleKernel::Dense { factor, .. } => {
                let mut rhs = Vec::with_capacity(self.n + self.m);
                rhs.extend_from_slice(rhs_primal.as_slice());
                rhs.extend_from_slice(rhs_dual.as_slice());
                let sol = factor.solve(&rhs);
                let w = DenseVector::from_vec(sol[..self.n].to_vec());
                let mu = DenseVector::from_vec(sol[self.n..].to_vec());
                (w, mu)
            }
        };
        let (k, c) = match &self.kernel {
            SaddleKernel::Schur { k_factor, c, .. } => (k_factor.matrix(), c),
            SaddleKernel::Dense { k, c, .. } => (k, c),
        };

        // Blockwise residual check.
        let mut r1 = spmv(k, &w)?;
        if self.m > 0 {
            for i in 0..self.m {
                let (cols, vals) = c.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    r1[j] += v * mu[i];
                }
            }
        }
        r1.axpy(-1.0, rhs_primal);
        let scale1 = rhs_primal.norm2().max(w.norm2()).max(1e-300);
        if r1.norm2() > BLOCK_TOLERANCE * scale1.max(1.0) {
            return Err(Error::ResidualTooLarge {
                residual: r1.norm2() / scale1,
                tolerance: BLOCK_TOLERANCE,
            });
        }
        if self.m > 0 {
            let cw = spmv(c, &w)?;
            for i in 0..self.m {
                if (cw[i] - rhs_dual[i]).abs() > BLOCK_TOLERANCE * w.norm2().max(1.0) {
                    return Err(Error::ResidualTooLarge {
                        residual: (cw[i] - rhs_dual[i]).abs(),
                        tolerance: BLOCK_TOLERANCE,
                    });
                }
            }
        }
        Ok((w, mu))
    }
}

/// Drops constraint rows with norm below 1e-14, returning the reduced
/// matrix and the kept row indices.
pub fn drop_zero_rows(c: &SparseMatrix) -> (SparseMatrix, Vec<usize>) {
    let mut kept = Vec::new();
    let mut triplets = Vec::new();
    for i in 0..c.nrows() {
        let (cols, vals) = c.row(i);
        let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= 1e-14 {
            let new_row = kept.len();
            kept.push(i);
            for (&col, &v) in cols.iter().zip(vals) {
                triplets.push((new_row, col, v));
            }
        }
    }
    let reduced = SparseMatrix::from_triplets(kept.len(), c.ncols(), &triplets)
        .expect("row filter preserves validity");
    (reduced, kept)
}

/// One-shot KKT solve with zero-row elimination.
pub fn solve_saddle(system: &SaddleSystem) -> Result<(DenseVector, DenseVector)> {
    let (c_reduced, kept) = drop_zero_rows(&system.constraints);
    let reduced_dual = DenseVector::from_vec(kept.iter().map(|&i| system.rhs_dual[i]).collect());
    // Dropped rows must carry a zero right-hand side to stay consistent.
    for i in 0..system.constraints.nrows() {
        if !kept.contains(&i) && system.rhs_dual[i].abs() > BLOCK_TOLERANCE {
            return Err(Error::Singular {
                context: format!("constraint row {i} is zero but has nonzero rhs"),
            });
        }
    }
    let factor = factor_saddle(&system.stiffness, &c_reduced, "solve_saddle")?;
    let (w, mu_reduced) = factor.solve(&system.rhs_primal, &reduced_dual, "solve_saddle")?;
    let mut mu = DenseVector::zeros(system.constraints.nrows());
    for (slot, &orig) in kept.iter().enumerate() {
        mu[orig] = mu_reduced[slot];
    }
    Ok((w, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eliminate_constraint_by_hand() {
        // K = I2, C = [1, 0], f = (1,1), g = (0): w = (0, 1).
        let system = SaddleSystem {
            stiffness: SparseMatrix::identity(2),
            constraints: SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap(),
            rhs_primal: DenseVector::from_vec(vec![1.0, 1.0]),
            rhs_dual: DenseVector::from_vec(vec![0.0]),
        };
        let (w, mu) = solve_saddle(&system).unwrap();
        assert!((w[0]).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        // K w + C' mu = f: mu = 1.
        assert!((mu[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_constraints_reduce_to_spd() {
        let system = SaddleSystem {
            stiffness: SparseMatrix::from_triplets(
                2,
                2,
                &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)],
            )
            .unwrap(),
            constraints: SparseMatrix::zeros(0, 2),
            rhs_primal: DenseVector::from_vec(vec![3.0, 4.0]),
            rhs_dual: DenseVector::zeros(0),
        };
        let (w, mu) = solve_saddle(&system).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        assert_eq!(mu.len(), 0);
    }

    #[test]
    fn homogeneous_system_is_zero() {
        let system = SaddleSystem {
            stiffness: SparseMatrix::identity(3),
            constraints: SparseMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 2, -1.0)]).unwrap(),
            rhs_primal: DenseVector::zeros(3),
            rhs_dual: DenseVector::zeros(1),
        };
        let (w, mu) = solve_saddle(&system).unwrap();
        assert!(w.norm2() < 1e-14);
        assert!(mu.norm2() < 1e-14);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        // Second constraint row is identically zero.
        let system = SaddleSystem {
            stiffness: SparseMatrix::identity(2),
            constraints: SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap(),
            rhs_primal: DenseVector::from_vec(vec![1.0, 1.0]),
            rhs_dual: DenseVector::zeros(2),
        };
        let (w, _) = solve_saddle(&system).unwrap();
        assert!((w[0]).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_constraints_stay_consistent() {
        // The same constraint twice: rank-deficient but consistent.
        let system = SaddleSystem {
            stiffness: SparseMatrix::identity(2),
            constraints: SparseMatrix::from_triplets(
                2,
                2,
                &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
            )
            .unwrap(),
            rhs_primal: DenseVector::from_vec(vec![2.0, 0.0]),
            rhs_dual: DenseVector::zeros(2),
        };
        let (w, _) = solve_saddle(&system).unwrap();
        // w minimizes 1/2|w|^2 - f'w subject to w0 + w1 = 0: w = (1, -1).
        assert!((w[0] - 1.0).abs() < 1e-10);
        assert!((w[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn semidefinite_k_uses_dense_fallback() {
        // K = [[0]] with C = [1]: w = g, mu = f.
        let system = SaddleSystem {
            stiffness: SparseMatrix::zeros(1, 1),
            constraints: SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap(),
            rhs_primal: DenseVector::from_vec(vec![3.0]),
            rhs_dual: DenseVector::from_vec(vec![2.0]),
        };
        let (w, mu) = solve_saddle(&system).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
        assert!((mu[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_rank_deficiency_errors() {
        // Same constraint row twice with incompatible right-hand sides.
        let system = SaddleSystem {
            stiffness: SparseMatrix::identity(2),
            constraints: SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap(),
            rhs_primal: DenseVector::zeros(2),
            rhs_dual: DenseVector::from_vec(vec![0.0, 1.0]),
        };
        assert!(solve_saddle(&system).is_err());
    }
}
