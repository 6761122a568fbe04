use super::{check_len, LinalgError};

/// Symmetric matrix in compressed sparse row form with sorted column indices.
///
/// Both triangles are stored, so rows double as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpdMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpdMatrix {
    /// Builds a matrix from raw CSR arrays; column indices must be sorted per row.
    pub fn from_csr(
        dim: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        check_len(dim + 1, row_ptr.len())?;
        check_len(col_idx.len(), values.len())?;
        check_len(row_ptr[dim], col_idx.len())?;
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate entries; rejects entries that are not mirrored with equal values.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if i >= dim || j >= dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    found: i.max(j) + 1,
                });
            }
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = Self {
            dim,
            row_ptr,
            col_idx,
            values,
        };
        m.check_symmetric()?;
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Same sparsity pattern with all values set to zero.
    pub fn zeroed_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.dim, v.len())?;
        Ok(self.mul(v))
    }

    pub(crate) fn mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, a)| a * v[j]).sum())
            .collect()
    }

    /// `v^T A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim, "vector length");
        self.bilinear(v, v)
    }

    /// `v^T A w`.
    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| v[i] * self.row(i).map(|(j, a)| a * w[j]).sum::<f64>())
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Largest `|A_ij - A_ji|` over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                let mirrored = self.position(j, i).map_or(f64::INFINITY, |p| self.values[p]);
                worst = worst.max((a - mirrored).abs());
            }
        }
        worst
    }

    pub fn check_symmetric(&self) -> Result<(), LinalgError> {
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                if self.position(j, i).map(|p| self.values[p]) != Some(a) {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, a) in self.row(i) {
                row[j] = a;
            }
        }
        dense
    }
}
