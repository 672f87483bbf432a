//! Dense-tensor arithmetic and the numeric kernels shared by every
//! learnable component: 2D cross-correlation (direct and FFT), SGD with
//! momentum, and a central finite-difference gradient checker.
//!
//! Everything here is `f64`; 8-bit integers exist only at the image
//! boundary in [`crate::features`].

mod fft;
mod optim;
mod xcorr;

pub use fft::Complex;
pub use optim::{finite_diff_check, sgd_momentum_step, SgdMomentumState};
pub use xcorr::{mult_count_direct, mult_count_fft, xcorr_valid, xcorr_valid_fft};

use crate::{Error, Result};

/// Row-major `height x width x channels` tensor of `f64`. The channel index
/// varies fastest: element `(i, j, c)` lives at `(i * width + j) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        debug_assert!(i < self.height && j < self.width && c < self.channels);
        self.data[(i * self.width + j) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        debug_assert!(i < self.height && j < self.width && c < self.channels);
        self.data[(i * self.width + j) * self.channels + c] = v;
    }

    /// Channel vector at spatial position `(i, j)`.
    #[inline]
    pub fn pixel(&self, i: usize, j: usize) -> &[f64] {
        let base = (i * self.width + j) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Row-major `height x width` grid of `f64`; the similarity-map currency.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid2 {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid data".into()));
        }
        Ok(Grid2 {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Grid2 {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.height && j < self.width);
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.height && j < self.width);
        self.data[i * self.width + j] = v;
    }

    /// Position and value of the maximum, row-major first on ties.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for i in 0..self.height {
            for j in 0..self.width {
                let v = self.get(i, j);
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }

    /// Uniform scale of every cell (used to express mean-correlation maps).
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}
