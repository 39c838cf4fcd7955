//! Dense complex matrix storage shared by the fibre simulator (transmission
//! matrix) and the learned inverse model.
//!
//! Entries are stored as two planar `f32` buffers (real and imaginary parts,
//! row-major). All reductions accumulate in `f64` with a fixed evaluation
//! order, so results are bit-identical regardless of thread count.

use num_complex::Complex32;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense complex-valued matrix, row-major, `f32` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f32>,
    im: Vec<f32>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    /// Build from planar real/imaginary buffers. Rejects length mismatches
    /// and non-finite entries.
    pub fn from_planar(rows: usize, cols: usize, re: Vec<f32>, im: Vec<f32>) -> Result<Self> {
        if re.len() != rows * cols || im.len() != rows * cols {
            return Err(Error::argument(format!(
                "matrix buffers have {}/{} entries, expected {}",
                re.len(),
                im.len(),
                rows * cols
            )));
        }
        if !re.iter().chain(im.iter()).all(|v| v.is_finite()) {
            return Err(Error::Numeric("matrix contains non-finite entries".into()));
        }
        Ok(ComplexMatrix { rows, cols, re, im })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn re(&self) -> &[f32] {
        &self.re
    }

    pub fn im(&self) -> &[f32] {
        &self.im
    }

    pub fn row_re(&self, r: usize) -> &[f32] {
        &self.re[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_im(&self, r: usize) -> &[f32] {
        &self.im[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> Complex32 {
        let idx = r * self.cols + c;
        Complex32::new(self.re[idx], self.im[idx])
    }

    pub fn set(&mut self, r: usize, c: usize, value: Complex32) {
        let idx = r * self.cols + c;
        self.re[idx] = value.re;
        self.im[idx] = value.im;
    }

    pub(crate) fn planar_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.re, &mut self.im)
    }

    /// `self * x` for a real vector `x`; returns planar (re, im) parts.
    pub fn mul_real(&self, x: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        if x.len() != self.cols {
            return Err(Error::argument(format!(
                "vector length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out_re = vec![0.0f32; self.rows];
        let mut out_im = vec![0.0f32; self.rows];
        out_re
            .par_iter_mut()
            .zip(out_im.par_iter_mut())
            .enumerate()
            .for_each(|(r, (ore, oim))| {
                *ore = dot_f32(self.row_re(r), x) as f32;
                *oim = dot_f32(self.row_im(r), x) as f32;
            });
        Ok((out_re, out_im))
    }

    /// Complex matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::argument(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = ComplexMatrix::zeros(m, n);
        out.re
            .par_chunks_mut(n)
            .zip(out.im.par_chunks_mut(n))
            .enumerate()
            .for_each(|(i, (row_re, row_im))| {
                let mut acc_re = vec![0.0f64; n];
                let mut acc_im = vec![0.0f64; n];
                let are = self.row_re(i);
                let aim = self.row_im(i);
                for p in 0..k {
                    let ar = are[p] as f64;
                    let ai = aim[p] as f64;
                    let bre = rhs.row_re(p);
                    let bim = rhs.row_im(p);
                    for j in 0..n {
                        let br = bre[j] as f64;
                        let bi = bim[j] as f64;
                        acc_re[j] += ar * br - ai * bi;
                        acc_im[j] += ar * bi + ai * br;
                    }
                }
                for j in 0..n {
                    row_re[j] = acc_re[j] as f32;
                    row_im[j] = acc_im[j] as f32;
                }
            });
        Ok(out)
    }

    /// `ca * a + cb * b`, entry-wise. Used for drift interpolation between
    /// two transmission matrices.
    pub fn scaled_add(a: &ComplexMatrix, ca: f32, b: &ComplexMatrix, cb: f32) -> Result<ComplexMatrix> {
        if a.rows != b.rows || a.cols != b.cols {
            return Err(Error::argument("scaled_add requires equal shapes"));
        }
        let re = a
            .re
            .iter()
            .zip(&b.re)
            .map(|(&x, &y)| ca * x + cb * y)
            .collect();
        let im = a
            .im
            .iter()
            .zip(&b.im)
            .map(|(&x, &y)| ca * x + cb * y)
            .collect();
        Ok(ComplexMatrix {
            rows: a.rows,
            cols: a.cols,
            re,
            im,
        })
    }

    /// Identity matrix (real part 1 on the diagonal).
    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.re[i * n + i] = 1.0;
        }
        m
    }

    /// Sum of squared moduli of all entries, accumulated in `f64`.
    pub fn frobenius_sq(&self) -> f64 {
        let mut acc = 0.0f64;
        for (&r, &i) in self.re.iter().zip(&self.im) {
            acc += r as f64 * r as f64 + i as f64 * i as f64;
        }
        acc
    }
}

/// Dot product of two `f32` slices accumulated in `f64`.
///
/// Four independent accumulator lanes, combined in a fixed order; the result
/// does not depend on thread count or call site.
#[inline]
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        lanes[0] += a[i] as f64 * b[i] as f64;
        lanes[1] += a[i + 1] as f64 * b[i + 1] as f64;
        lanes[2] += a[i + 2] as f64 * b[i + 2] as f64;
        lanes[3] += a[i + 3] as f64 * b[i + 3] as f64;
    }
    let mut tail = 0.0f64;
    for i in chunks * 4..a.len() {
        tail += a[i] as f64 * b[i] as f64;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}
