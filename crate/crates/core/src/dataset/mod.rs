//! Image and speckle ingestion: normalized image planes, RGB handling,
//! amplitude conversion, random pattern generation, and camera-frame
//! preprocessing into model-ready speckle records.

mod spkl;

pub use spkl::{read_spkl, write_spkl, SPKL_MAGIC, SPKL_VERSION};

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, FormatError, Result};

/// BT.601 luma weights used for grayscale conversion.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// A 2-D nonnegative intensity image with values normalized to `[0, 1]`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("image dimensions must be nonzero"));
        }
        if values.len() != width * height {
            return Err(Error::argument(format!(
                "image has {} values, expected {}x{}={}",
                values.len(),
                width,
                height,
                width * height
            )));
        }
        if !values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::argument("image values must lie in [0, 1]"));
        }
        Ok(ImagePlane {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self> {
        ImagePlane::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }
}

/// Three equally sized channels (R, G, B).
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    r: ImagePlane,
    g: ImagePlane,
    b: ImagePlane,
}

impl RgbImage {
    pub fn new(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<Self> {
        if r.width != g.width || r.width != b.width || r.height != g.height || r.height != b.height
        {
            return Err(Error::argument("RGB channels must share dimensions"));
        }
        Ok(RgbImage { r, g, b })
    }

    pub fn width(&self) -> usize {
        self.r.width
    }

    pub fn height(&self) -> usize {
        self.r.height
    }

    pub fn r(&self) -> &ImagePlane {
        &self.r
    }

    pub fn g(&self) -> &ImagePlane {
        &self.g
    }

    pub fn b(&self) -> &ImagePlane {
        &self.b
    }
}

/// Raw nonnegative intensity frame, unbounded above (pre-normalization
/// simulator or camera output).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::argument(format!(
                "frame has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::argument(
                "frame values must be finite and nonnegative",
            ));
        }
        Ok(Frame {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    /// Reinterpret as an image plane; fails when any value exceeds 1.
    pub fn into_plane(self) -> Result<ImagePlane> {
        ImagePlane::new(self.width, self.height, self.values)
    }
}

/// Flattened speckle amplitude vector (square root of recorded intensity)
/// with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleRecord {
    amplitudes: Vec<f32>,
    source_dim: u32,
    crop_dim: u32,
    tag: String,
}

impl SpeckleRecord {
    pub fn new(amplitudes: Vec<f32>, source_dim: u32, crop_dim: u32, tag: String) -> Result<Self> {
        if amplitudes.len() != (crop_dim as usize).pow(2) {
            return Err(Error::argument(format!(
                "{} amplitudes do not fill a {crop_dim}x{crop_dim} record",
                amplitudes.len()
            )));
        }
        if !amplitudes.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::argument("amplitudes must be nonnegative"));
        }
        Ok(SpeckleRecord {
            amplitudes,
            source_dim,
            crop_dim,
            tag,
        })
    }

    pub fn amplitudes(&self) -> &[f32] {
        &self.amplitudes
    }

    pub fn source_dim(&self) -> u32 {
        self.source_dim
    }

    pub fn crop_dim(&self) -> u32 {
        self.crop_dim
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }
}

/// Training/validation partition sizes for a [`PairSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub train: usize,
    pub validation: usize,
}

impl Split {
    /// Default 9:1 partition (validation = floor(n/10)).
    pub fn proportional(total: usize) -> Split {
        let validation = total / 10;
        Split {
            train: total - validation,
            validation,
        }
    }
}

/// Ordered (speckle, image) pairs with a train/validation split.
#[derive(Debug, Clone)]
pub struct PairSet {
    records: Vec<(SpeckleRecord, ImagePlane)>,
    split: Split,
}

impl PairSet {
    /// Build a set with the default proportional split, enforcing uniform
    /// speckle length and image dimensions.
    pub fn new(records: Vec<(SpeckleRecord, ImagePlane)>) -> Result<Self> {
        let split = Split::proportional(records.len());
        PairSet::with_split(records, split)
    }

    pub fn with_split(records: Vec<(SpeckleRecord, ImagePlane)>, split: Split) -> Result<Self> {
        if split.train + split.validation != records.len() {
            return Err(Error::argument(format!(
                "split {}+{} does not cover {} records",
                split.train,
                split.validation,
                records.len()
            )));
        }
        if let Some((first_rec, first_img)) = records.first() {
            let speckle_len = first_rec.amplitudes.len();
            let (w, h) = (first_img.width, first_img.height);
            for (rec, img) in &records {
                if rec.amplitudes.len() != speckle_len || img.width != w || img.height != h {
                    return Err(Error::argument(
                        "all pairs must share speckle length and image dimensions",
                    ));
                }
            }
        }
        Ok(PairSet { records, split })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn records(&self) -> &[(SpeckleRecord, ImagePlane)] {
        &self.records
    }

    pub fn train_records(&self) -> &[(SpeckleRecord, ImagePlane)] {
        &self.records[..self.split.train]
    }

    pub fn validation_records(&self) -> &[(SpeckleRecord, ImagePlane)] {
        &self.records[self.split.train..]
    }

    pub fn speckle_len(&self) -> usize {
        self.records
            .first()
            .map(|(r, _)| r.amplitudes.len())
            .unwrap_or(0)
    }

    pub fn image_dims(&self) -> Option<(usize, usize)> {
        self.records.first().map(|(_, i)| (i.width, i.height))
    }

    /// Overwrite the split, keeping record order.
    pub fn set_split(&mut self, split: Split) -> Result<()> {
        if split.train + split.validation != self.records.len() {
            return Err(Error::argument("split sizes must sum to record count"));
        }
        self.split = split;
        Ok(())
    }

    /// A new set holding the first `n` records (proportional split).
    pub fn head(&self, n: usize) -> Result<PairSet> {
        if n > self.records.len() {
            return Err(Error::argument("head larger than set"));
        }
        PairSet::new(self.records[..n].to_vec())
    }
}

/// Channel selection for [`load_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    Grayscale,
    Rgb,
}

/// Result of [`load_image`].
#[derive(Debug, Clone)]
pub enum LoadedImage {
    Gray(ImagePlane),
    Rgb(RgbImage),
}

impl LoadedImage {
    pub fn into_gray(self) -> Result<ImagePlane> {
        match self {
            LoadedImage::Gray(p) => Ok(p),
            LoadedImage::Rgb(_) => Err(Error::argument("expected a grayscale image")),
        }
    }

    pub fn into_rgb(self) -> Result<RgbImage> {
        match self {
            LoadedImage::Rgb(i) => Ok(i),
            LoadedImage::Gray(_) => Err(Error::argument("expected an RGB image")),
        }
    }
}

/// Load an 8-bit PNG, scale to `[0, 1]`, and box-resample to
/// `target_side x target_side`. Grayscale conversion uses BT.601 luma
/// weights 0.299/0.587/0.114.
pub fn load_image(path: &Path, target_side: usize, mode: ColorMode) -> Result<LoadedImage> {
    if target_side == 0 {
        return Err(Error::argument("target side must be nonzero"));
    }
    let decoded = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(FormatError::Decode(other.to_string())),
    })?;
    let (channels, w, h) = decode_channels(decoded)?;
    let [r, g, b] = channels;
    match mode {
        ColorMode::Grayscale => {
            let mut gray = vec![0.0f32; w * h];
            for i in 0..gray.len() {
                let y = LUMA[0] * r[i] as f64 + LUMA[1] * g[i] as f64 + LUMA[2] * b[i] as f64;
                gray[i] = y.clamp(0.0, 1.0) as f32;
            }
            let resized = resize_area(&gray, w, h, target_side, target_side);
            Ok(LoadedImage::Gray(ImagePlane::new(
                target_side,
                target_side,
                resized,
            )?))
        }
        ColorMode::Rgb => {
            let planes: Vec<ImagePlane> = [r, g, b]
                .into_iter()
                .map(|ch| {
                    ImagePlane::new(
                        target_side,
                        target_side,
                        resize_area(&ch, w, h, target_side, target_side),
                    )
                })
                .collect::<Result<_>>()?;
            let mut it = planes.into_iter();
            RgbImage::new(
                it.next().unwrap(),
                it.next().unwrap(),
                it.next().unwrap(),
            )
            .map(LoadedImage::Rgb)
        }
    }
}

fn decode_channels(img: image::DynamicImage) -> Result<([Vec<f32>; 3], usize, usize)> {
    use image::DynamicImage::*;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale = |v: u8| v as f32 / 255.0;
    match img {
        ImageLuma8(buf) => {
            let g: Vec<f32> = buf.into_raw().into_iter().map(scale).collect();
            Ok(([g.clone(), g.clone(), g], w, h))
        }
        ImageLumaA8(buf) => {
            let raw = buf.into_raw();
            let g: Vec<f32> = raw.chunks_exact(2).map(|px| scale(px[0])).collect();
            Ok(([g.clone(), g.clone(), g], w, h))
        }
        ImageRgb8(buf) => {
            let raw = buf.into_raw();
            let mut ch = [
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
            ];
            for px in raw.chunks_exact(3) {
                for c in 0..3 {
                    ch[c].push(scale(px[c]));
                }
            }
            Ok((ch, w, h))
        }
        ImageRgba8(buf) => {
            let raw = buf.into_raw();
            let mut ch = [
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
            ];
            for px in raw.chunks_exact(4) {
                for c in 0..3 {
                    ch[c].push(scale(px[c]));
                }
            }
            Ok((ch, w, h))
        }
        _ => Err(Error::Format(FormatError::Decode(
            "unsupported pixel format; 8-bit PNG expected".into(),
        ))),
    }
}

/// Exact area-average (box) resampling; handles fractional scale factors and
/// preserves mean intensity.
pub fn resize_area(
    values: &[f32],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f32> {
    assert!(src_w > 0 && src_h > 0 && dst_w > 0 && dst_h > 0);
    assert_eq!(values.len(), src_w * src_h);
    if src_w == dst_w && src_h == dst_h {
        return values.to_vec();
    }
    let sx = src_w as f64 / dst_w as f64;
    let sy = src_h as f64 / dst_h as f64;
    let mut out = vec![0.0f32; dst_w * dst_h];
    for ty in 0..dst_h {
        let y0 = ty as f64 * sy;
        let y1 = (ty + 1) as f64 * sy;
        for tx in 0..dst_w {
            let x0 = tx as f64 * sx;
            let x1 = (tx + 1) as f64 * sx;
            let mut acc = 0.0f64;
            let mut area = 0.0f64;
            let iy0 = y0.floor() as usize;
            let iy1 = (y1.ceil() as usize).min(src_h);
            for sy_i in iy0..iy1 {
                let wy = overlap(y0, y1, sy_i as f64, (sy_i + 1) as f64);
                if wy <= 0.0 {
                    continue;
                }
                let row = &values[sy_i * src_w..(sy_i + 1) * src_w];
                let ix0 = x0.floor() as usize;
                let ix1 = (x1.ceil() as usize).min(src_w);
                for sx_i in ix0..ix1 {
                    let wx = overlap(x0, x1, sx_i as f64, (sx_i + 1) as f64);
                    if wx <= 0.0 {
                        continue;
                    }
                    acc += row[sx_i] as f64 * wx * wy;
                    area += wx * wy;
                }
            }
            out[ty * dst_w + tx] = if area > 0.0 {
                (acc / area).clamp(0.0, 1.0) as f32
            } else {
                0.0
            };
        }
    }
    out
}

#[inline]
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Element-wise square root of an intensity plane, flattened row-major.
pub fn intensity_to_amplitude(plane: &ImagePlane) -> Vec<f32> {
    plane.values.iter().map(|v| v.sqrt()).collect()
}

/// Split an RGB image into its three channels.
pub fn split_rgb(img: &RgbImage) -> (ImagePlane, ImagePlane, ImagePlane) {
    (img.r.clone(), img.g.clone(), img.b.clone())
}

/// Stack three equally sized planes into an RGB image.
pub fn merge_rgb(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<RgbImage> {
    RgbImage::new(r, g, b)
}

/// Random grayscale pattern: each pixel i.i.d. uniform on the 100-level grid
/// `{0, 1/99, ..., 1}`. Deterministic for a fixed seed.
pub fn random_pattern(side: usize, rng_seed: u64) -> ImagePlane {
    assert!(side >= 1, "pattern side must be at least 1");
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let values: Vec<f32> = (0..side * side)
        .map(|_| {
            let level: u32 = rng.random_range(0..100);
            level as f32 / 99.0
        })
        .collect();
    ImagePlane {
        width: side,
        height: side,
        values,
    }
}

/// Spatially structured synthetic pattern: a random pattern smoothed by
/// repeated 3x3 box blurs and stretched back to full `[0, 1]` contrast.
/// Stands in for natural-image-like test content.
pub fn smooth_pattern(side: usize, rng_seed: u64, blur_passes: usize) -> ImagePlane {
    let base = random_pattern(side, rng_seed);
    let mut cur: Vec<f64> = base.values.iter().map(|&v| v as f64).collect();
    let mut next = vec![0.0f64; cur.len()];
    for _ in 0..blur_passes {
        for y in 0..side {
            for x in 0..side {
                let mut acc = 0.0;
                let mut n = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let yy = y as i64 + dy;
                        let xx = x as i64 + dx;
                        if yy >= 0 && yy < side as i64 && xx >= 0 && xx < side as i64 {
                            acc += cur[yy as usize * side + xx as usize];
                            n += 1.0;
                        }
                    }
                }
                next[y * side + x] = acc / n;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let lo = cur.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f32> = if hi > lo {
        cur.iter()
            .map(|v| (((v - lo) / (hi - lo)).clamp(0.0, 1.0)) as f32)
            .collect()
    } else {
        vec![0.5; cur.len()]
    };
    ImagePlane {
        width: side,
        height: side,
        values,
    }
}

/// Preprocess a raw square camera frame into a speckle record: center-crop to
/// the largest multiple of `crop_dim`, area-average each block down to
/// `crop_dim x crop_dim`, then convert intensity to amplitude.
pub fn crop_speckle(raw: &Frame, crop_dim: usize) -> Result<SpeckleRecord> {
    if !raw.is_square() {
        return Err(Error::argument("crop_speckle expects a square frame"));
    }
    let side = raw.width;
    if crop_dim == 0 {
        return Err(Error::argument("crop dimension must be nonzero"));
    }
    if crop_dim > side {
        return Err(Error::argument(format!(
            "crop dimension {crop_dim} exceeds frame side {side}"
        )));
    }
    let factor = side / crop_dim;
    let crop_side = factor * crop_dim;
    let offset = (side - crop_side) / 2;
    let inv_block = 1.0f64 / (factor * factor) as f64;
    let mut amplitudes = vec![0.0f32; crop_dim * crop_dim];
    for ty in 0..crop_dim {
        for tx in 0..crop_dim {
            let mut acc = 0.0f64;
            for by in 0..factor {
                let sy = offset + ty * factor + by;
                let row = &raw.values[sy * side..(sy + 1) * side];
                for bx in 0..factor {
                    acc += row[offset + tx * factor + bx] as f64;
                }
            }
            amplitudes[ty * crop_dim + tx] = (acc * inv_block).sqrt() as f32;
        }
    }
    SpeckleRecord::new(amplitudes, side as u32, crop_dim as u32, String::new())
}

/// Load grayscale planes listed in a manifest file (one relative path per
/// line, UTF-8), resolved against the manifest's directory.
pub fn load_manifest_gray(manifest: &Path, target_side: usize) -> Result<Vec<ImagePlane>> {
    let text = fs::read_to_string(manifest)?;
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let rel: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    rel.par_iter()
        .map(|line| load_image(&dir.join(line), target_side, ColorMode::Grayscale)?.into_gray())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plane(values: &[f32], w: usize, h: usize) -> ImagePlane {
        ImagePlane::new(w, h, values.to_vec()).unwrap()
    }

    #[test]
    fn plane_rejects_out_of_range() {
        assert!(ImagePlane::new(1, 1, vec![1.5]).is_err());
        assert!(ImagePlane::new(1, 1, vec![-0.1]).is_err());
        assert!(ImagePlane::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn amplitude_examples() {
        let p = plane(&[0.25, 0.0, 1.0, 0.5], 2, 2);
        let a = intensity_to_amplitude(&p);
        assert_eq!(a[0], 0.5);
        assert_eq!(a[1], 0.0);
        assert_eq!(a[2], 1.0);
    }

    #[test]
    fn amplitude_round_trip_within_one_ulp() {
        let p = plane(&[0.1, 0.33, 0.77, 0.999], 2, 2);
        for (&v, a) in p.values().iter().zip(intensity_to_amplitude(&p)) {
            let back = a * a;
            let ulps = (back.to_bits() as i64 - v.to_bits() as i64).abs();
            assert!(ulps <= 1, "{v} -> {back} differs by {ulps} ulps");
        }
    }

    #[test]
    fn rgb_split_merge_round_trip() {
        let r = plane(&[1.0, 0.0, 0.25, 0.5], 2, 2);
        let g = plane(&[0.0, 1.0, 0.75, 0.5], 2, 2);
        let b = plane(&[0.0, 0.0, 1.0, 0.125], 2, 2);
        let img = merge_rgb(r.clone(), g.clone(), b.clone()).unwrap();
        let (r2, g2, b2) = split_rgb(&img);
        assert_eq!(r, r2);
        assert_eq!(g, g2);
        assert_eq!(b, b2);
    }

    #[test]
    fn merge_rejects_dimension_mismatch() {
        let a = plane(&[0.0; 4], 2, 2);
        let b = plane(&[0.0; 2], 2, 1);
        assert!(merge_rgb(a.clone(), a.clone(), b).is_err());
    }

    #[test]
    fn random_pattern_is_deterministic_and_on_grid() {
        let a = random_pattern(28, 7);
        let b = random_pattern(28, 7);
        assert_eq!(a, b);
        assert_eq!(a.pixel_count(), 784);
        for &v in a.values() {
            let level = (v * 99.0).round();
            assert_relative_eq!(v as f64, level as f64 / 99.0, epsilon = 1e-6);
            assert!((0.0..=99.0).contains(&level));
        }
        assert_ne!(random_pattern(28, 8), a);
    }

    #[test]
    fn random_pattern_mean_near_half() {
        // Law of large numbers: 1e6 pixels, tolerance 3 sigma of the mean.
        let p = random_pattern(1000, 20240601);
        let mean: f64 = p.values().iter().map(|&v| v as f64).sum::<f64>() / 1e6;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn resize_constant_field_preserves_value() {
        let src = vec![0.37f32; 184 * 184];
        let out = resize_area(&src, 184, 184, 92, 92);
        assert_eq!(out.len(), 92 * 92);
        for v in out {
            assert_relative_eq!(v, 0.37, epsilon = 1e-6);
        }
    }

    #[test]
    fn resize_fractional_preserves_mean() {
        let src: Vec<f32> = (0..30 * 30).map(|i| (i % 97) as f32 / 96.0).collect();
        let out = resize_area(&src, 30, 30, 7, 7);
        let mean_in: f64 = src.iter().map(|&v| v as f64).sum::<f64>() / src.len() as f64;
        let mean_out: f64 = out.iter().map(|&v| v as f64).sum::<f64>() / out.len() as f64;
        assert_relative_eq!(mean_in, mean_out, epsilon = 1e-3);
    }

    #[test]
    fn crop_speckle_constant_field() {
        let raw = Frame::new(350, 350, vec![0.04; 350 * 350]).unwrap();
        let rec = crop_speckle(&raw, 120).unwrap();
        assert_eq!(rec.amplitudes().len(), 14400);
        assert_eq!(rec.source_dim(), 350);
        assert_eq!(rec.crop_dim(), 120);
        for &a in rec.amplitudes() {
            assert_relative_eq!(a, 0.2, epsilon = 1e-6);
        }
    }

    #[test]
    fn crop_speckle_identity_when_equal() {
        let values: Vec<f32> = (0..16).map(|i| i as f32 / 15.0).collect();
        let raw = Frame::new(4, 4, values.clone()).unwrap();
        let rec = crop_speckle(&raw, 4).unwrap();
        for (a, v) in rec.amplitudes().iter().zip(values) {
            assert_relative_eq!(*a, v.sqrt(), epsilon = 1e-6);
        }
    }

    #[test]
    fn crop_speckle_matches_indexing_oracle() {
        // Off-center bright quadrant; oracle recomputes the centered crop and
        // block averages by direct index arithmetic.
        let side = 10;
        let crop = 4;
        let mut values = vec![0.1f32; side * side];
        for y in 0..5 {
            for x in 5..10 {
                values[y * side + x] = 0.9;
            }
        }
        let raw = Frame::new(side, side, values.clone()).unwrap();
        let rec = crop_speckle(&raw, crop).unwrap();

        let factor = side / crop; // 2
        let offset = (side - factor * crop) / 2; // 1
        for ty in 0..crop {
            for tx in 0..crop {
                let mut acc = 0.0f64;
                for by in 0..factor {
                    for bx in 0..factor {
                        acc += values[(offset + ty * factor + by) * side
                            + (offset + tx * factor + bx)] as f64;
                    }
                }
                let want = (acc / (factor * factor) as f64).sqrt();
                assert_relative_eq!(
                    rec.amplitudes()[ty * crop + tx] as f64,
                    want,
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn crop_speckle_rejects_oversized_crop() {
        let raw = Frame::new(8, 8, vec![0.0; 64]).unwrap();
        assert!(crop_speckle(&raw, 9).is_err());
        assert!(crop_speckle(&raw, 0).is_err());
    }

    #[test]
    fn pairset_split_and_consistency() {
        let rec = |v: f32| SpeckleRecord::new(vec![v; 4], 2, 2, String::new()).unwrap();
        let img = |v: f32| ImagePlane::constant(2, 2, v).unwrap();
        let records: Vec<_> = (0..20).map(|i| (rec(i as f32), img(0.5))).collect();
        let set = PairSet::new(records).unwrap();
        assert_eq!(set.split(), Split { train: 18, validation: 2 });
        assert_eq!(set.train_records().len(), 18);
        assert_eq!(set.validation_records().len(), 2);

        let bad = vec![
            (rec(0.0), img(0.1)),
            (
                SpeckleRecord::new(vec![0.0; 9], 3, 3, String::new()).unwrap(),
                img(0.1),
            ),
        ];
        assert!(PairSet::new(bad).is_err());
    }

    #[test]
    fn smooth_pattern_is_deterministic_and_full_range() {
        let a = smooth_pattern(28, 3, 2);
        let b = smooth_pattern(28, 3, 2);
        assert_eq!(a, b);
        let lo = a.values().iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = a.values().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
    }
}
