//! Up-looking sparse LDLᵀ without pivoting, driven by the elimination tree.
//! Suitable for the symmetric systems produced by the assembly, which are
//! positive definite away from instabilities.

use super::CsrMatrix;
use crate::error::LinearSolveError;

const NONE: usize = usize::MAX;

/// Symbolic and numeric factors of `P K Pᵀ = L D Lᵀ`. The symbolic part
/// depends only on the pattern and is reused across numeric factorizations.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// `perm[k]` is the original row eliminated at step `k`.
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    parent: Vec<usize>,
    /// Column pointers of L (strictly lower part, stored by columns).
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    pattern_nnz: usize,
}

impl LdlFactor {
    pub fn symbolic(k: &CsrMatrix, perm: Vec<usize>) -> Result<Self, LinearSolveError> {
        let n = k.n_rows;
        if k.n_cols != n {
            return Err(LinearSolveError::NotSquare { rows: n, cols: k.n_cols });
        }
        assert_eq!(perm.len(), n, "permutation length");
        let mut inv_perm = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        assert!(inv_perm.iter().all(|&p| p != NONE), "not a permutation");

        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for kk in 0..n {
            flag[kk] = kk;
            let (cols, _) = k.row(perm[kk]);
            for &c in cols {
                let mut i = inv_perm[c];
                if i < kk {
                    while flag[i] != kk {
                        if parent[i] == NONE {
                            parent[i] = kk;
                        }
                        lnz[i] += 1;
                        flag[i] = kk;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz = lp[n];
        Ok(LdlFactor {
            n,
            perm,
            inv_perm,
            parent,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            pattern_nnz: k.nnz(),
        })
    }

    /// Nonzeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of a matrix with the pattern given to
    /// [`LdlFactor::symbolic`]. A pivot that vanishes relative to the
    /// matrix scale is reported with its original row index.
    pub fn factor(&mut self, k: &CsrMatrix) -> Result<(), LinearSolveError> {
        let n = self.n;
        debug_assert_eq!(k.nnz(), self.pattern_nnz);
        let scale = (0..n).map(|r| k.get(r, r).abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        let tiny = scale * 1e-14;

        let mut y = vec![0.0f64; n];
        let mut flag = vec![NONE; n];
        let mut pattern = vec![0usize; n];
        let mut lnz = vec![0usize; n];
        for kk in 0..n {
            let mut top = n;
            flag[kk] = kk;
            let (cols, vals) = k.row(self.perm[kk]);
            for (&c, &v) in cols.iter().zip(vals) {
                let mut i = self.inv_perm[c];
                if i <= kk {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != kk {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = kk;
                        i = self.parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            let mut dk = y[kk];
            y[kk] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = self.lp[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[self.li[p]] -= self.lx[p] * yi;
                }
                let l_ki = yi / self.d[i];
                dk -= l_ki * yi;
                self.li[end] = kk;
                self.lx[end] = l_ki;
                lnz[i] += 1;
            }
            if !(dk.abs() > tiny) || !dk.is_finite() {
                return Err(LinearSolveError::Singular {
                    dof: self.perm[kk],
                    pivot: dk,
                });
            }
            self.d[kk] = dk;
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| rhs[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.perm[k]] = x[k];
        }
        out
    }

    /// Number of negative pivots, i.e. the count of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v < 0.0).count()
    }
}
