//! Compressed sparse row matrices, triplet assembly buffers, block layout
//! bookkeeping and symmetric Dirichlet elimination.

use crate::error::{Error, Result};

/// Coordinate-format assembly buffer. Entries with equal position are
/// summed on compression in a fixed order, so assembly is deterministic.
#[derive(Debug, Clone)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Scatter an entire matrix into this buffer at a block offset.
    pub fn add_block(&mut self, row_offset: usize, col_offset: usize, block: &CsrMatrix, scale: f64) {
        for row in 0..block.nrows {
            for (col, value) in block.row(row) {
                self.push(row_offset + row, col_offset + col, scale * value);
            }
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        // Stable sort keeps insertion order within equal positions, making
        // the duplicate summation order reproducible.
        order.sort_by_key(|&k| (self.entries[k].0, self.entries[k].1));

        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = self.entries[k];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(x, 1.0, &mut y);
        y
    }

    /// `y += scale * A x`.
    pub fn matvec_add(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] += scale * acc;
        }
    }

    pub fn scaled(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push(c, r, v);
            }
        }
        t.to_csr()
    }

    /// Largest absolute entry of `A - A^T`; zero for symmetric matrices.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.max_abs_diff(&t)
    }

    /// Largest absolute entry difference against another matrix of the same
    /// shape (union of sparsity patterns).
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut diff: f64 = 0.0;
        let mut dense_row = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                dense_row[c] = v;
            }
            for (c, v) in other.row(r) {
                diff = diff.max((dense_row[c] - v).abs());
                dense_row[c] = 0.0;
            }
            for (c, v) in self.row(r) {
                if dense_row[c] != 0.0 {
                    diff = diff.max(v.abs());
                    dense_row[c] = 0.0;
                }
            }
        }
        diff
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                dense[r][c] += v;
            }
        }
        dense
    }
}

/// Dof-block layout of a composite system: block labels and offsets.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub labels: Vec<&'static str>,
    /// `offsets.len() == labels.len() + 1`; last entry is the total size.
    pub offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(blocks: &[(&'static str, usize)]) -> Self {
        let mut offsets = vec![0];
        let mut labels = Vec::new();
        for &(label, size) in blocks {
            labels.push(label);
            offsets.push(offsets.last().unwrap() + size);
        }
        BlockLayout { labels, offsets }
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, label: &str) -> usize {
        let i = self
            .labels
            .iter()
            .position(|&l| l == label)
            .unwrap_or_else(|| panic!("unknown block {label}"));
        self.offsets[i]
    }

    pub fn range(&self, label: &str) -> std::ops::Range<usize> {
        let i = self.labels.iter().position(|&l| l == label).unwrap();
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// A sparse linear system `A x = b` with a block layout descriptor.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: BlockLayout,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, layout: BlockLayout) -> Result<Self> {
        if matrix.nrows != rhs.len() || matrix.nrows != matrix.ncols {
            return Err(Error::Dimension(format!(
                "system matrix {}x{} with rhs length {}",
                matrix.nrows,
                matrix.ncols,
                rhs.len()
            )));
        }
        if layout.total() != matrix.nrows {
            return Err(Error::Dimension(
                "block layout does not cover the system".into(),
            ));
        }
        Ok(SparseSystem {
            matrix,
            rhs,
            layout,
        })
    }
}

/// Symmetric elimination of Dirichlet rows and columns: constrained rows and
/// columns are zeroed and the diagonal set to one. Value-independent, so the
/// result can be factored once and reused for any boundary data.
pub fn constrain_matrix(matrix: &CsrMatrix, dofs: &[usize]) -> CsrMatrix {
    let mut constrained = vec![false; matrix.nrows];
    for &d in dofs {
        constrained[d] = true;
    }
    let mut t = Triplets::new(matrix.nrows, matrix.ncols);
    for r in 0..matrix.nrows {
        if constrained[r] {
            continue;
        }
        for (c, v) in matrix.row(r) {
            if !constrained[c] {
                t.push(r, c, v);
            }
        }
    }
    for &d in dofs {
        t.push(d, d, 1.0);
    }
    t.to_csr()
}

/// Apply boundary values to a raw right-hand side: subtract the lift
/// `A[:, c] * g_c` from free equations and pin constrained entries to their
/// values. `matrix` must be the unconstrained matrix.
pub fn apply_dirichlet_rhs(matrix: &CsrMatrix, rhs: &mut [f64], dofs: &[usize], values: &[f64]) {
    assert_eq!(dofs.len(), values.len());
    assert_eq!(rhs.len(), matrix.nrows);
    let mut bound = vec![f64::NAN; matrix.nrows];
    let mut constrained = vec![false; matrix.nrows];
    for (&d, &g) in dofs.iter().zip(values) {
        constrained[d] = true;
        bound[d] = g;
    }
    for r in 0..matrix.nrows {
        if constrained[r] {
            continue;
        }
        let mut lift = 0.0;
        for (c, v) in matrix.row(r) {
            if constrained[c] {
                lift += v * bound[c];
            }
        }
        rhs[r] -= lift;
    }
    for (&d, &g) in dofs.iter().zip(values) {
        rhs[d] = g;
    }
}
