//! Separable 2-D DCT-II / DCT-III pair on row-major buffers.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

/// Planned 2-D type-II transform and its exact inverse for a fixed grid shape.
///
/// `forward` is the unnormalized DCT-II along both axes; `inverse` undoes it
/// exactly (the DCT-III output is rescaled by `4 / (rows * cols)`).
#[derive(Clone)]
pub struct Dct2d {
    rows: usize,
    cols: usize,
    along_rows: Arc<dyn TransformType2And3<f64>>,
    along_cols: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for Dct2d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dct2d")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Dct2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            rows,
            cols,
            along_rows: planner.plan_dct2(cols),
            along_cols: planner.plan_dct2(rows),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&self, data: &mut [f64]) {
        self.separable(data, |plan, buf, scratch| plan.process_dct2_with_scratch(buf, scratch));
    }

    pub fn inverse(&self, data: &mut [f64]) {
        self.separable(data, |plan, buf, scratch| plan.process_dct3_with_scratch(buf, scratch));
        let norm = 4.0 / (self.rows * self.cols) as f64;
        data.iter_mut().for_each(|v| *v *= norm);
    }

    fn separable(
        &self,
        data: &mut [f64],
        op: impl Fn(&dyn TransformType2And3<f64>, &mut [f64], &mut [f64]),
    ) {
        assert_eq!(data.len(), self.rows * self.cols);
        let scratch_len = self
            .along_rows
            .get_scratch_len()
            .max(self.along_cols.get_scratch_len());
        let mut scratch = vec![0.0; scratch_len];

        for row in data.chunks_exact_mut(self.cols) {
            let s = &mut scratch[..self.along_rows.get_scratch_len()];
            op(self.along_rows.as_ref(), row, s);
        }

        let mut column = vec![0.0; self.rows];
        for c in 0..self.cols {
            for (r, slot) in column.iter_mut().enumerate() {
                *slot = data[r * self.cols + c];
            }
            let s = &mut scratch[..self.along_cols.get_scratch_len()];
            op(self.along_cols.as_ref(), &mut column, s);
            for (r, value) in column.iter().enumerate() {
                data[r * self.cols + c] = *value;
            }
        }
    }
}
