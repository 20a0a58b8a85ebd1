//! Sparse symmetric storage and a direct LDLᵀ factorization.

mod ldl;
mod ordering;

pub use ldl::LdlFactor;
pub use ordering::{nested_dissection, reverse_cuthill_mckee};

use crate::error::LinearSolveError;

/// Compressed sparse rows with sorted column indices. Symmetric matrices are
/// stored with both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Zero-valued matrix with the given sorted row patterns.
    pub fn from_pattern(n_cols: usize, pattern: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(pattern.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in pattern {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            n_rows: pattern.len(),
            n_cols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Storage position of entry `(r, c)` if it is in the pattern.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|p| self.row_ptr[r] + p)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.values[p])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum()
            })
            .collect()
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, r)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m[(r, *c)] = *v;
            }
        }
        m
    }
}

/// Factorizes and solves `K x = rhs` once with a reverse Cuthill–McKee
/// ordering. Repeated solves with a fixed pattern should keep an
/// [`LdlFactor`] instead.
pub fn linear_solve(k: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    if k.n_rows != k.n_cols {
        return Err(LinearSolveError::NotSquare {
            rows: k.n_rows,
            cols: k.n_cols,
        });
    }
    if rhs.len() != k.n_rows {
        return Err(LinearSolveError::Dimension {
            rows: k.n_rows,
            cols: k.n_cols,
            rhs: rhs.len(),
        });
    }
    let adjacency: Vec<Vec<usize>> = (0..k.n_rows).map(|r| k.row(r).0.to_vec()).collect();
    let perm = reverse_cuthill_mckee(&adjacency);
    let mut f = LdlFactor::symbolic(k, perm)?;
    f.factor(k)?;
    Ok(f.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random sparse SPD matrix: a banded plus scattered symmetric pattern made
    /// diagonally dominant.
    pub(crate) fn random_spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for _ in 0..4 {
                let j = rng.gen_range(0..n);
                if j == i {
                    continue;
                }
                let v: f64 = rng.gen_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            }
        }
        for (i, d) in diag.iter().enumerate() {
            t.push((i, i, d + 1.0 + rng.gen_range(0.0..1.0)));
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 2);
        assert!(m.asymmetry() == 0.0);
    }

    #[test]
    fn identity_solve() {
        let rhs: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        assert_eq!(linear_solve(&CsrMatrix::identity(7), &rhs).unwrap(), rhs);
    }

    #[test]
    fn spd_matches_dense_oracle() {
        let k = random_spd(100, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rhs: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = linear_solve(&k, &rhs).unwrap();
        let dense = k.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(rhs.clone()));
        let err: f64 = x.iter().zip(dense.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * dense.norm());
        let r = k.mul_vec(&x);
        let res: f64 = r.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * nb);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        // two decoupled blocks, one of them rank deficient
        let k = CsrMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 2.0), (1, 1, 1.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0), (3, 3, 5.0)],
        );
        match linear_solve(&k, &[1.0; 4]) {
            Err(LinearSolveError::Singular { dof, .. }) => assert!(dof == 1 || dof == 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_errors() {
        let k = CsrMatrix::identity(3);
        assert!(matches!(linear_solve(&k, &[1.0; 2]), Err(LinearSolveError::Dimension { .. })));
        let r = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0)]);
        assert!(matches!(linear_solve(&r, &[1.0; 2]), Err(LinearSolveError::NotSquare { .. })));
    }
}
