//! Dense image and dual-field containers.

use std::ops::{Index, IndexMut};

use crate::error::{check_shape, Error, Result};

/// A row-major 2-D array of `f64` with explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Wraps `data`, rejecting a wrong length, an empty shape or non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty grid {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite entry at index {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        assert!(value.is_finite());
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Internal constructor for results of arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Entrywise combination of two grids of equal shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_shape(self.shape(), other.shape())?;
        Ok(Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        check_shape(self.shape(), other.shape())?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_shape(self.shape(), other.shape())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

impl Index<(usize, usize)> for ImageGrid {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ImageGrid {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

/// Per-pixel 2-vectors `(horizontal, vertical)`, the range space of the image gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField {
    rows: usize,
    cols: usize,
    pub(crate) horizontal: Vec<f64>,
    pub(crate) vertical: Vec<f64>,
}

impl DualField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            horizontal: vec![0.0; rows * cols],
            vertical: vec![0.0; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, horizontal: Vec<f64>, vertical: Vec<f64>) -> Result<Self> {
        let n = rows * cols;
        if n == 0 || horizontal.len() != n || vertical.len() != n {
            return Err(Error::Dimension(format!(
                "dual field components must both have {rows}x{cols} entries"
            )));
        }
        if horizontal.iter().chain(&vertical).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite dual field entry".into()));
        }
        Ok(Self {
            rows,
            cols,
            horizontal,
            vertical,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.horizontal
    }

    pub fn vertical(&self) -> &[f64] {
        &self.vertical
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        check_shape(self.shape(), other.shape())?;
        let h: f64 = self.horizontal.iter().zip(&other.horizontal).map(|(a, b)| a * b).sum();
        let v: f64 = self.vertical.iter().zip(&other.vertical).map(|(a, b)| a * b).sum();
        Ok(h + v)
    }

    pub fn norm_sq(&self) -> f64 {
        self.horizontal.iter().chain(&self.vertical).map(|v| v * v).sum()
    }

    /// Euclidean length of the 2-vector at each pixel.
    pub fn pixel_norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.horizontal
            .iter()
            .zip(&self.vertical)
            .map(|(h, v)| (h * h + v * v).sqrt())
    }

    pub fn max_pixel_norm(&self) -> f64 {
        self.pixel_norms().fold(0.0, f64::max)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        check_shape(self.shape(), other.shape())?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            horizontal: self
                .horizontal
                .iter()
                .zip(&other.horizontal)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            vertical: self
                .vertical
                .iter()
                .zip(&other.vertical)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// Projects each pixel's 2-vector onto the closed Euclidean ball of `radius`.
    ///
    /// The result satisfies `sqrt(h^2 + v^2) <= radius` exactly in floating point.
    pub fn project_ball(&mut self, radius: f64) {
        let r_sq = radius * radius;
        for (h, v) in self.horizontal.iter_mut().zip(self.vertical.iter_mut()) {
            let n_sq = *h * *h + *v * *v;
            if n_sq <= r_sq {
                continue;
            }
            let s = radius / n_sq.sqrt();
            *h *= s;
            *v *= s;
            while (*h * *h + *v * *v).sqrt() > radius {
                *h *= 1.0 - f64::EPSILON;
                *v *= 1.0 - f64::EPSILON;
            }
        }
    }
}
