//! Forward-difference image gradient and its adjoint.
//!
//! The difference across the last column (horizontal) and the last row
//! (vertical) is zero, i.e. the image is extended by edge replication.

use crate::grid::{DualField, ImageGrid};

/// Squared operator norm bound of the 2-D forward-difference gradient.
pub const GRADIENT_NORM_SQ_BOUND: f64 = 8.0;

pub fn grad(x: &ImageGrid) -> DualField {
    let (rows, cols) = x.shape();
    let mut w = DualField::zeros(rows, cols);
    grad_into(x.as_slice(), rows, cols, &mut w.horizontal, &mut w.vertical);
    w
}

/// Exact adjoint of [`grad`] (the negative divergence).
pub fn grad_adjoint(w: &DualField) -> ImageGrid {
    let (rows, cols) = w.shape();
    let mut out = vec![0.0; rows * cols];
    grad_adjoint_into(&w.horizontal, &w.vertical, rows, cols, &mut out);
    ImageGrid::from_vec_unchecked(rows, cols, out)
}

pub(crate) fn grad_into(x: &[f64], rows: usize, cols: usize, h: &mut [f64], v: &mut [f64]) {
    debug_assert_eq!(x.len(), rows * cols);
    for r in 0..rows {
        let base = r * cols;
        for c in 0..cols - 1 {
            h[base + c] = x[base + c + 1] - x[base + c];
        }
        h[base + cols - 1] = 0.0;
        if r + 1 < rows {
            for c in 0..cols {
                v[base + c] = x[base + cols + c] - x[base + c];
            }
        } else {
            v[base..base + cols].iter_mut().for_each(|e| *e = 0.0);
        }
    }
}

pub(crate) fn grad_adjoint_into(h: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        let base = r * cols;
        let (hr, or) = (&h[base..base + cols], &mut out[base..base + cols]);
        if cols == 1 {
            or[0] = 0.0;
        } else {
            or[0] = -hr[0];
            for c in 1..cols - 1 {
                or[c] = hr[c - 1] - hr[c];
            }
            or[cols - 1] = hr[cols - 2];
        }
        if r >= 1 {
            let above = &v[base - cols..base];
            or.iter_mut().zip(above).for_each(|(o, a)| *o += a);
        }
        if r + 1 < rows {
            let here = &v[base..base + cols];
            or.iter_mut().zip(here).for_each(|(o, a)| *o -= a);
        }
    }
}
