use std::sync::Arc;

use super::{check_len, minimum_degree, LinalgError, SparseSpdMatrix};

const NONE: usize = usize::MAX;

/// Ordering, elimination tree and factor structure for one sparsity pattern.
///
/// Matrices assembled on the same mesh share their pattern, so one symbolic
/// analysis serves every numeric factorisation of a run.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    dim: usize,
    /// `perm[k]` is the original index of permuted row `k`.
    perm: Vec<usize>,
    /// Pattern of the analysed matrix, kept to validate later inputs.
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Upper triangle of the permuted matrix by column: row index and source value slot.
    upper_ptr: Vec<usize>,
    upper_rows: Vec<usize>,
    upper_src: Vec<usize>,
    parent: Vec<usize>,
    /// Factor `L` in compressed columns, diagonal entry first in each column.
    l_ptr: Vec<usize>,
    l_rows: Vec<usize>,
}

/// Numeric Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    l_values: Vec<f64>,
}

/// Nonzero pattern of row `k` of `L` in topological order, using `marks` as scratch.
fn ereach(
    k: usize,
    column_rows: &[usize],
    parent: &[usize],
    marks: &mut [usize],
    out: &mut Vec<usize>,
) {
    out.clear();
    marks[k] = k;
    for &i in column_rows {
        let mut node = i;
        let start = out.len();
        while node != NONE && node < k && marks[node] != k {
            out.push(node);
            marks[node] = k;
            node = parent[node];
        }
        out[start..].reverse();
    }
    out.reverse();
}

impl SymbolicCholesky {
    pub fn analyze(a: &SparseSpdMatrix) -> Self {
        let n = a.dim();
        let perm = minimum_degree(a);
        let mut inverse = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }

        let mut counts = vec![0usize; n + 1];
        for i in 0..n {
            for (j, _) in a.row(i) {
                if inverse[i] <= inverse[j] {
                    counts[inverse[j] + 1] += 1;
                }
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let upper_ptr = counts.clone();
        let mut next = counts;
        let mut upper_rows = vec![0; upper_ptr[n]];
        let mut upper_src = vec![0; upper_ptr[n]];
        for i in 0..n {
            for pos in a.row_ptr()[i]..a.row_ptr()[i + 1] {
                let j = a.col_idx()[pos];
                let (pi, pj) = (inverse[i], inverse[j]);
                if pi <= pj {
                    upper_rows[next[pj]] = pi;
                    upper_src[next[pj]] = pos;
                    next[pj] += 1;
                }
            }
        }

        // elimination tree with path-compressed ancestors
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i in &upper_rows[upper_ptr[k]..upper_ptr[k + 1]] {
                let mut node = i;
                while node != NONE && node < k {
                    let next = ancestor[node];
                    ancestor[node] = k;
                    if next == NONE {
                        parent[node] = k;
                    }
                    node = next;
                }
            }
        }

        // row patterns give column counts and row indices of L
        let mut marks = vec![NONE; n];
        let mut pattern = Vec::new();
        let mut col_counts = vec![1usize; n];
        for k in 0..n {
            ereach(
                k,
                &upper_rows[upper_ptr[k]..upper_ptr[k + 1]],
                &parent,
                &mut marks,
                &mut pattern,
            );
            for &i in &pattern {
                col_counts[i] += 1;
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + col_counts[k];
        }
        let mut l_rows = vec![0; l_ptr[n]];
        let mut fill: Vec<usize> = l_ptr[..n].to_vec();
        marks.fill(NONE);
        for k in 0..n {
            ereach(
                k,
                &upper_rows[upper_ptr[k]..upper_ptr[k + 1]],
                &parent,
                &mut marks,
                &mut pattern,
            );
            for &i in &pattern {
                l_rows[fill[i]] = k;
                fill[i] += 1;
            }
            l_rows[fill[k]] = k;
            fill[k] += 1;
        }
        // diagonal first: row k is the first entry appended to column k
        Self {
            dim: n,
            perm,
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
            upper_ptr,
            upper_rows,
            upper_src,
            parent,
            l_ptr,
            l_rows,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.l_rows.len()
    }

    pub fn matches_pattern(&self, a: &SparseSpdMatrix) -> bool {
        a.dim() == self.dim && a.row_ptr() == self.row_ptr && a.col_idx() == self.col_idx
    }

    /// Numeric factorisation of a matrix with the analysed pattern (up-looking).
    pub fn factor(self: &Arc<Self>, a: &SparseSpdMatrix) -> Result<CholeskyFactor, LinalgError> {
        check_len(self.dim, a.dim())?;
        if !self.matches_pattern(a) {
            return Err(LinalgError::DimensionMismatch {
                expected: self.row_ptr[self.dim],
                found: a.nnz(),
            });
        }
        let n = self.dim;
        let values = a.values();
        let mut l_values = vec![0.0; self.l_rows.len()];
        let mut next: Vec<usize> = self.l_ptr[..n].iter().map(|p| p + 1).collect();
        let mut x = vec![0.0; n];
        let mut marks = vec![NONE; n];
        let mut pattern = Vec::new();
        for k in 0..n {
            let rows = &self.upper_rows[self.upper_ptr[k]..self.upper_ptr[k + 1]];
            ereach(k, rows, &self.parent, &mut marks, &mut pattern);
            for (&i, &src) in rows
                .iter()
                .zip(&self.upper_src[self.upper_ptr[k]..self.upper_ptr[k + 1]])
            {
                x[i] += values[src];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &pattern {
                let lki = x[i] / l_values[self.l_ptr[i]];
                x[i] = 0.0;
                for p in self.l_ptr[i] + 1..next[i] {
                    x[self.l_rows[p]] -= l_values[p] * lki;
                }
                d -= lki * lki;
                l_values[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) {
                return Err(LinalgError::NotSpd {
                    pivot: self.perm[k],
                    value: d,
                });
            }
            l_values[self.l_ptr[k]] = d.sqrt();
        }
        Ok(CholeskyFactor {
            symbolic: Arc::clone(self),
            l_values,
        })
    }
}

impl CholeskyFactor {
    /// Analyses and factors `a` in one go.
    pub fn new(a: &SparseSpdMatrix) -> Result<Self, LinalgError> {
        Arc::new(SymbolicCholesky::analyze(a)).factor(a)
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    /// Plain forward/backward substitution without refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let s = &*self.symbolic;
        check_len(s.dim, b.len())?;
        let mut y: Vec<f64> = s.perm.iter().map(|&p| b[p]).collect();
        for j in 0..s.dim {
            let start = s.l_ptr[j];
            y[j] /= self.l_values[start];
            let yj = y[j];
            for p in start + 1..s.l_ptr[j + 1] {
                y[s.l_rows[p]] -= self.l_values[p] * yj;
            }
        }
        for j in (0..s.dim).rev() {
            let start = s.l_ptr[j];
            let mut acc = y[j];
            for p in start + 1..s.l_ptr[j + 1] {
                acc -= self.l_values[p] * y[s.l_rows[p]];
            }
            y[j] = acc / self.l_values[start];
        }
        let mut x = vec![0.0; s.dim];
        for (k, &p) in s.perm.iter().enumerate() {
            x[p] = y[k];
        }
        Ok(x)
    }
}
