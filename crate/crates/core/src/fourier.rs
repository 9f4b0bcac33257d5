//! Two-dimensional DFTs over row-major planes.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::kernel::BorderRule;

/// Length of the whole-sample mirror extension of `n` samples: `2n - 2`, the
/// period of reflecting without repeating the edge sample.
pub fn mirror_len(n: usize) -> usize {
    if n <= 1 {
        n
    } else {
        2 * n - 2
    }
}

/// Mirror-extends a row-major plane to one full period on each axis.
pub fn mirror_extend(data: &[f64], width: usize, height: usize) -> Vec<f64> {
    let (ew, eh) = (mirror_len(width), mirror_len(height));
    let mut ext = Vec::with_capacity(ew * eh);
    for y in 0..eh {
        let sy = BorderRule::Mirror.index(y as isize, height);
        ext.extend((0..ew).map(|x| data[sy * width + BorderRule::Mirror.index(x as isize, width)]));
    }
    ext
}

pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.apply(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the `1 / (width * height)` normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(buf, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (self.width * self.height) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    fn apply(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.len(), self.width * self.height);
        rows.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); self.height];
        for x in 0..self.width {
            for (y, c) in column.iter_mut().enumerate() {
                *c = buf[y * self.width + x];
            }
            cols.process(&mut column);
            for (y, c) in column.iter().enumerate() {
                buf[y * self.width + x] = *c;
            }
        }
    }
}

/// Signed frequency of DFT bin `k` out of `n`, in cycles per sample.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}
