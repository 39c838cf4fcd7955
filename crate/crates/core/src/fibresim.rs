//! Multimode fibre surrogate: a fixed random complex transmission matrix
//! that scrambles an input field into an output speckle pattern, plus a
//! camera model (noise, normalization, quantization).
//!
//! The transmission matrix is a rank-limited factor product `T = A * B`
//! with circular complex Gaussian entries; the factor rank (`mode_count`)
//! controls speckle grain size: more modes, finer grain.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataset::{crop_speckle, intensity_to_amplitude, Frame, ImagePlane, PairSet};
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Simulator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FibreConfig {
    /// Input field pixel count (image side squared).
    pub input_pixels: usize,
    /// Output speckle pixel count (speckle side squared).
    pub output_pixels: usize,
    /// Effective number of guided modes (rank of the transmission matrix).
    pub mode_count: usize,
    /// Additive camera noise, as a fraction of the frame maximum.
    pub noise_floor: f32,
    /// Camera quantization levels.
    pub quant_levels: u32,
    pub rng_seed: u64,
}

impl FibreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_pixels == 0 || self.output_pixels == 0 {
            return Err(Error::argument("pixel counts must be nonzero"));
        }
        if self.mode_count < 1 {
            return Err(Error::argument("mode count must be at least 1"));
        }
        if self.quant_levels < 2 {
            return Err(Error::argument("quantization needs at least 2 levels"));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::argument("noise floor must be nonnegative"));
        }
        Ok(())
    }
}

/// Draw the transmission matrix `T = A * B`.
///
/// `B` (`mode_count x input_pixels`) carries per-mode input coupling with
/// i.i.d. circular complex Gaussian entries of variance `1/mode_count`.
/// Column `k` of `A` (`output_pixels x mode_count`) is mode `k`'s
/// camera-plane profile: a band-limited random field whose entries are
/// circular complex Gaussian with variance `1/output_pixels` (independent
/// across modes, spatially correlated within a mode). The field bandwidth
/// grows as `sqrt(mode_count)`, so more excited modes produce finer speckle
/// grain while the expected output energy always matches the input field
/// energy. Deterministic per seed; rank is at most `mode_count`.
pub fn generate_fibre(cfg: &FibreConfig) -> Result<ComplexMatrix> {
    cfg.validate()?;
    let side = exact_square_side(cfg.output_pixels).ok_or_else(|| {
        Error::argument("output pixel count must be a perfect square")
    })?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
    let a = draw_mode_profiles(&mut rng, side, cfg.mode_count)?;
    let b = draw_gaussian_matrix(
        &mut rng,
        cfg.mode_count,
        cfg.input_pixels,
        1.0 / cfg.mode_count as f64,
    )?;
    a.matmul(&b)
}

fn exact_square_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Half-bandwidth of a mode profile: smallest `f` with `(2f+1)^2 >=
/// mode_count`, capped so every frequency fits the camera grid.
pub(crate) fn mode_bandwidth(mode_count: usize, side: usize) -> i64 {
    let mut f = 0i64;
    while ((2 * f + 1) * (2 * f + 1)) < mode_count as i64 {
        f += 1;
    }
    f.min((side as i64 - 1) / 2)
}

/// Mode-to-camera matrix: one band-limited random field per mode, drawn as
/// Gaussian weights over the integer-frequency plane-wave basis. Weights are
/// drawn mode-major, frequency row-major, real part first.
fn draw_mode_profiles(
    rng: &mut ChaCha12Rng,
    side: usize,
    mode_count: usize,
) -> Result<ComplexMatrix> {
    let pixels = side * side;
    let f = mode_bandwidth(mode_count, side);
    let band = (2 * f + 1) as usize;
    let q = band * band;
    // Per-coefficient variance so that each pixel has E|A|^2 = 1/pixels.
    let component_std = (1.0 / (q as f64 * pixels as f64) / 2.0).sqrt();
    let normal = Normal::new(0.0f64, component_std)
        .map_err(|e| Error::argument(format!("bad gaussian parameters: {e}")))?;

    let mut weights = Vec::with_capacity(mode_count * q);
    for _ in 0..mode_count * q {
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        weights.push((re, im));
    }

    // Phase tables for exp(2*pi*i * freq * coord / side).
    let angle = |freq: i64, coord: usize| {
        2.0 * std::f64::consts::PI * freq as f64 * coord as f64 / side as f64
    };

    let mut a = ComplexMatrix::zeros(pixels, mode_count);
    let (a_re, a_im) = a.planar_mut();
    let columns: Vec<(Vec<f32>, Vec<f32>)> = (0..mode_count)
        .into_par_iter()
        .map(|k| {
            let mut col_re = vec![0.0f64; pixels];
            let mut col_im = vec![0.0f64; pixels];
            for (w_idx, (g_re, g_im)) in
                weights[k * q..(k + 1) * q].iter().enumerate()
            {
                let fy = w_idx as i64 / band as i64 - f;
                let fx = w_idx as i64 % band as i64 - f;
                for y in 0..side {
                    let ay = angle(fy, y);
                    for x in 0..side {
                        let phase = ay + angle(fx, x);
                        let (sin, cos) = phase.sin_cos();
                        let idx = y * side + x;
                        col_re[idx] += g_re * cos - g_im * sin;
                        col_im[idx] += g_re * sin + g_im * cos;
                    }
                }
            }
            (
                col_re.iter().map(|&v| v as f32).collect(),
                col_im.iter().map(|&v| v as f32).collect(),
            )
        })
        .collect();
    for (k, (col_re, col_im)) in columns.iter().enumerate() {
        for i in 0..pixels {
            a_re[i * mode_count + k] = col_re[i];
            a_im[i * mode_count + k] = col_im[i];
        }
    }
    Ok(a)
}

/// I.i.d. circular complex Gaussian matrix with per-entry variance
/// `variance` (split evenly between real and imaginary parts). Entries are
/// drawn row-major, real part first.
fn draw_gaussian_matrix(
    rng: &mut ChaCha12Rng,
    rows: usize,
    cols: usize,
    variance: f64,
) -> Result<ComplexMatrix> {
    let component_std = (variance / 2.0).sqrt();
    let normal = Normal::new(0.0f64, component_std)
        .map_err(|e| Error::argument(format!("bad gaussian parameters: {e}")))?;
    let n = rows * cols;
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for _ in 0..n {
        re.push(normal.sample(rng) as f32);
        im.push(normal.sample(rng) as f32);
    }
    ComplexMatrix::from_planar(rows, cols, re, im)
}

/// Push an image through the fibre: take the zero-phase field `s = sqrt(I)`,
/// apply `T`, and return the output intensity `|T s|^2`.
///
/// The frame is square when the matrix row count is a perfect square,
/// otherwise a single row.
pub fn propagate(t: &ComplexMatrix, image: &ImagePlane) -> Result<Frame> {
    if t.cols() != image.pixel_count() {
        return Err(Error::argument(format!(
            "matrix expects {} input pixels, image has {}",
            t.cols(),
            image.pixel_count()
        )));
    }
    let field = intensity_to_amplitude(image);
    let (re, im) = t.mul_real(&field)?;
    let intensity: Vec<f32> = re
        .iter()
        .zip(&im)
        .map(|(&r, &i)| (r as f64 * r as f64 + i as f64 * i as f64) as f32)
        .collect();
    let rows = t.rows();
    let side = (rows as f64).sqrt().round() as usize;
    if side * side == rows {
        Frame::new(side, side, intensity)
    } else {
        Frame::new(rows, 1, intensity)
    }
}

/// Camera model: add Gaussian noise of standard deviation
/// `noise_floor * max(frame)`, clamp to zero, normalize the frame maximum to
/// one, and quantize onto `quant_levels` uniform levels. An all-zero frame
/// passes through unchanged.
pub fn measure(frame: &Frame, cfg: &FibreConfig) -> Frame {
    let mut values: Vec<f64> = frame.values().iter().map(|&v| v as f64).collect();
    let raw_max = values.iter().cloned().fold(0.0f64, f64::max);

    if cfg.noise_floor > 0.0 && raw_max > 0.0 {
        let std = cfg.noise_floor as f64 * raw_max;
        let normal = Normal::new(0.0f64, std).expect("validated noise floor");
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let q = (cfg.quant_levels - 1) as f64;
    let out: Vec<f32> = if max > 0.0 {
        values
            .iter()
            .map(|&v| ((v / max * q).round() / q) as f32)
            .collect()
    } else {
        values.iter().map(|&v| v as f32).collect()
    };
    Frame::new(frame.width(), frame.height(), out).expect("nonnegative by construction")
}

/// Transmit a batch of images: propagate, measure, and convert each output
/// frame to a speckle record paired with its ground-truth image.
///
/// Per-record measurement noise uses an independent stream seeded
/// `cfg.rng_seed ^ record_index`, so results do not depend on scheduling.
pub fn batch_transmit(
    t: &ComplexMatrix,
    images: &[ImagePlane],
    cfg: &FibreConfig,
) -> Result<PairSet> {
    cfg.validate()?;
    let records: Vec<_> = images
        .par_iter()
        .enumerate()
        .map(|(idx, image)| {
            let raw = propagate(t, image)?;
            let record_cfg = FibreConfig {
                rng_seed: cfg.rng_seed ^ idx as u64,
                ..*cfg
            };
            let measured = measure(&raw, &record_cfg);
            if !measured.is_square() {
                return Err(Error::argument(
                    "batch_transmit requires a square speckle output",
                ));
            }
            let crop_dim = measured.width();
            let mut rec = crop_speckle(&measured, crop_dim)?;
            rec = crate::dataset::SpeckleRecord::new(
                rec.amplitudes().to_vec(),
                rec.source_dim(),
                rec.crop_dim(),
                format!("sim#{idx}"),
            )?;
            Ok((rec, image.clone()))
        })
        .collect::<Result<_>>()?;
    PairSet::new(records)
}
