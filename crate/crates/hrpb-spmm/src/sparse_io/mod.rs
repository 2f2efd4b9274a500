//! Sparse-matrix ingestion and the canonical in-memory representations.
//!
//! `A` is held as [`CooMatrix`] straight after parsing and as [`CsrMatrix`]
//! everywhere else; `B` and `C` are row-major [`DenseMatrix`] values. All
//! values are 32-bit floats.

mod matrix_market;
mod synth;

pub use matrix_market::{parse_matrix_market, read_matrix_market, write_matrix_market};
pub use synth::{generate_synthetic, SyntheticKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseIoError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("entry ({row}, {col}) out of bounds for a {num_rows}x{num_cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        num_rows: usize,
        num_cols: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coordinate-format sparse matrix, canonicalized on construction:
/// entries sorted by `(row, col)` with duplicate coordinates summed.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub entries: Vec<(usize, usize, f32)>,
}

impl CooMatrix {
    /// Builds a canonical COO matrix: bounds-checks every entry, sorts by
    /// `(row, col)`, and sums duplicate coordinates.
    pub fn from_entries(
        num_rows: usize,
        num_cols: usize,
        mut entries: Vec<(usize, usize, f32)>,
    ) -> Result<Self, SparseIoError> {
        for &(row, col, _) in &entries {
            if row >= num_rows || col >= num_cols {
                return Err(SparseIoError::OutOfBounds {
                    row,
                    col,
                    num_rows,
                    num_cols,
                });
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f32)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        Ok(Self {
            num_rows,
            num_cols,
            entries: merged,
        })
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Converts to CSR. The nonzero set and the 32-bit values carry over
    /// bit-identically.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.num_rows + 1];
        for &(r, _, _) in &self.entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..self.num_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        for &(_, c, v) in &self.entries {
            col_idx.push(c);
            values.push(v);
        }
        CsrMatrix {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix (M x K). `row_ptr` has length M+1 and within
/// each row the column indices are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f32>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f32]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn to_coo(&self) -> CooMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for i in 0..self.num_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                entries.push((i, c, v));
            }
        }
        CooMatrix {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            entries,
        }
    }
}

/// Row-major dense matrix of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub data: Vec<f32>,
}

impl DenseMatrix {
    pub fn zeros(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            data: vec![0.0; num_rows * num_cols],
        }
    }

    pub fn from_data(num_rows: usize, num_cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), num_rows * num_cols);
        Self {
            num_rows,
            num_cols,
            data,
        }
    }

    /// Deterministic seeded fill: ChaCha8 keyed with `seed`, values drawn
    /// uniformly from [-1, 1) in row-major order. This is the generator the
    /// CLI uses for `B`, so seeded runs reproduce across platforms.
    pub fn seeded_uniform(num_rows: usize, num_cols: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..num_rows * num_cols)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect();
        Self {
            num_rows,
            num_cols,
            data,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.num_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.num_cols..(row + 1) * self.num_cols]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_canonicalization_sorts_and_sums() {
        let coo = CooMatrix::from_entries(
            3,
            3,
            vec![(2, 1, -1.0), (0, 0, 2.0), (2, 1, 3.0), (0, 0, 1.0)],
        )
        .unwrap();
        assert_eq!(coo.entries, vec![(0, 0, 3.0), (2, 1, 2.0)]);
    }

    #[test]
    fn coo_rejects_out_of_bounds() {
        let err = CooMatrix::from_entries(2, 2, vec![(0, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, SparseIoError::OutOfBounds { col: 2, .. }));
    }

    #[test]
    fn empty_coo_to_csr() {
        let coo = CooMatrix::from_entries(4, 4, vec![]).unwrap();
        let csr = coo.to_csr();
        assert_eq!(csr.row_ptr, vec![0, 0, 0, 0, 0]);
        assert!(csr.col_idx.is_empty());
    }

    #[test]
    fn identity_coo_to_csr() {
        let coo = CooMatrix::from_entries(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let csr = coo.to_csr();
        assert_eq!(csr.row_ptr, vec![0, 1, 2]);
        assert_eq!(csr.col_idx, vec![0, 1]);
        assert_eq!(csr.values, vec![1.0, 1.0]);
    }

    #[test]
    fn csr_round_trips_coordinate_set() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut entries = Vec::new();
        for r in 0..64 {
            for c in 0..64 {
                if rng.gen::<f64>() < 0.05 {
                    entries.push((r, c, rng.gen_range(-1.0f32..1.0)));
                }
            }
        }
        let coo = CooMatrix::from_entries(64, 64, entries).unwrap();
        assert_eq!(coo.to_csr().to_coo(), coo);
    }

    #[test]
    fn csr_preserves_value_multiset() {
        let coo =
            CooMatrix::from_entries(3, 5, vec![(1, 4, 0.25), (1, 0, -0.5), (2, 2, 7.0)]).unwrap();
        let csr = coo.to_csr();
        assert_eq!(csr.nnz(), 3);
        assert_eq!(csr.row(1), (&[0usize, 4][..], &[-0.5f32, 0.25][..]));
        assert_eq!(csr.row(0), (&[][..], &[][..]));
    }

    #[test]
    fn seeded_uniform_is_reproducible() {
        let a = DenseMatrix::seeded_uniform(17, 9, 42);
        let b = DenseMatrix::seeded_uniform(17, 9, 42);
        assert_eq!(a, b);
        assert!(a.data.iter().all(|v| (-1.0..1.0).contains(v)));
        assert_ne!(a, DenseMatrix::seeded_uniform(17, 9, 43));
    }
}
