//! Compressed sparse row storage for superoperators.

use ndarray::Array2;

use crate::fock::{C64, ZERO};

/// Entries with modulus at or below this are dropped on construction.
pub const PRUNE_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Builds the matrix one row at a time. `fill_row(r, buf)` pushes
    /// unsorted, possibly repeated `(column, value)` pairs for row `r`.
    pub fn from_row_fn<F>(nrows: usize, ncols: usize, mut fill_row: F) -> Self
    where
        F: FnMut(usize, &mut Vec<(usize, C64)>),
    {
        assert!(ncols <= u32::MAX as usize, "column index overflow");
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut buf = Vec::new();
        indptr.push(0);
        for r in 0..nrows {
            buf.clear();
            fill_row(r, &mut buf);
            buf.sort_unstable_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < buf.len() {
                let col = buf[k].0;
                let mut acc = ZERO;
                while k < buf.len() && buf[k].0 == col {
                    acc += buf[k].1;
                    k += 1;
                }
                if acc.norm() > PRUNE_TOL {
                    debug_assert!(col < ncols);
                    indices.push(col as u32);
                    data.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_dense(m: &Array2<C64>) -> Self {
        Self::from_row_fn(m.nrows(), m.ncols(), |r, buf| {
            buf.extend(m.row(r).iter().enumerate().map(|(c, &v)| (c, v)));
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .zip(&self.data[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(col, _)| col == c).map_or(ZERO, |(_, v)| v)
    }

    /// y ← A x.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let span = self.indptr[r]..self.indptr[r + 1];
            let mut acc = ZERO;
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.data[span]) {
                acc += v * x[c as usize];
            }
            *out = acc;
        }
    }

    /// Like [`matvec_into`](Self::matvec_into) but only writes the listed rows.
    pub fn matvec_rows_into(&self, rows: &[u32], x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for &r in rows {
            let r = r as usize;
            let span = self.indptr[r]..self.indptr[r + 1];
            let mut acc = ZERO;
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.data[span]) {
                acc += v * x[c as usize];
            }
            y[r] = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Row-wise merge of `self + scale · other`.
    pub fn add_scaled(&self, other: &Self, scale: C64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_row_fn(self.nrows, self.ncols, |r, buf| {
            buf.extend(self.row(r));
            buf.extend(other.row(r).map(|(c, v)| (c, scale * v)));
        })
    }

    pub fn scaled(&self, scale: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut worst = 0.0f64;
        let mut buf: Vec<(usize, C64)> = Vec::new();
        for r in 0..self.nrows {
            buf.clear();
            buf.extend(self.row(r));
            buf.extend(other.row(r).map(|(c, v)| (c, -v)));
            buf.sort_unstable_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < buf.len() {
                let col = buf[k].0;
                let mut acc = ZERO;
                while k < buf.len() && buf[k].0 == col {
                    acc += buf[k].1;
                    k += 1;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[[r, c]] = v;
            }
        }
        m
    }
}
