use std::collections::BTreeSet;

use serde::Serialize;

use super::DofMap;

/// Compressed sparse row matrix with a fixed structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    /// Sorted within each row.
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with one structural entry per (test dof, trial dof) pair
    /// sharing a cell.
    pub fn from_dofmaps(test: &DofMap, trial: &DofMap) -> CsrMatrix {
        let mut pattern: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); test.global_dim];
        for (rows, cols) in test.cell_dofs.iter().zip(&trial.cell_dofs) {
            for &r in rows {
                pattern[r].extend(cols.iter().copied());
            }
        }
        let mut row_ptr = Vec::with_capacity(test.global_dim + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for p in pattern {
            col_idx.extend(p);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows: test.global_dim,
            cols: trial.global_dim,
            values: vec![0.0; col_idx.len()],
            row_ptr,
            col_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        row.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }

    /// Adds to an existing structural entry.
    ///
    /// # Panics
    /// If `(r, c)` is not part of the structure.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self.position(r, c).expect("entry outside the sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum())
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}
