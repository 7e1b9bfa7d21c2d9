//! Row-major time series.
//!
//! Two indexing conventions are used throughout the crate. Input series are
//! indexed from 0: row `t` holds `x^t`, which drives the hidden state at step
//! `t + 1`. Every other series (readout outputs, targets, loss partials,
//! learning signals) covers steps `1..=T` and stores step `t` in row `t - 1`;
//! use [`Series::at`] for those.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl Series {
    pub fn zeros(rows: usize, width: usize) -> Self {
        Self { rows, width, data: vec![0.0; rows * width] }
    }

    /// Builds a series from a flat row-major buffer.
    ///
    /// Panics if `data.len()` is not a multiple of `width`, or if `width` is
    /// zero (use [`Series::zeros`] for zero-width series).
    pub fn from_flat(width: usize, data: Vec<f64>) -> Self {
        assert!(width > 0, "zero-width series need an explicit row count");
        assert!(data.len().is_multiple_of(width), "buffer length {} is not a multiple of width {width}", data.len());
        Self { rows: data.len() / width, width, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(width: usize, rows: &[R]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * width);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), width, "ragged row");
            data.extend_from_slice(row);
        }
        Self { rows: rows.len(), width, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    /// Row for step `t >= 1` of a step-indexed series.
    pub fn at(&self, t: usize) -> &[f64] {
        self.row(t - 1)
    }

    pub fn at_mut(&mut self, t: usize) -> &mut [f64] {
        self.row_mut(t - 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }
}
