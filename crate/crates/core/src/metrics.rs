//! Image quality metrics: whole-image SSIM, Pearson correlation, and MSE.
//!
//! SSIM is computed globally (single window over the full image) with
//! population statistics. The standard additive-denominator form is the
//! default; the multiplicative variant sometimes seen in print is available
//! behind [`MetricParams::printed_denominator`] for auditing.

use crate::dataset::ImagePlane;
use crate::error::{Error, Result};

/// SSIM stabilization constants and dynamic range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of pixel values (1.0 for normalized images, 255 for
    /// 8-bit data).
    pub dynamic_range: f64,
    /// Use the multiplicative denominator `(mx^2 my^2 + C1)(sx^2 sy^2 + C2)`
    /// instead of the standard additive form.
    pub printed_denominator: bool,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            printed_denominator: false,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0 {
            Ok(())
        } else {
            Err(Error::argument("metric parameters must be positive"))
        }
    }
}

fn check_dims(x: &ImagePlane, y: &ImagePlane) -> Result<()> {
    if x.width() != y.width() || x.height() != y.height() {
        Err(Error::argument(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            x.width(),
            x.height(),
            y.width(),
            y.height()
        )))
    } else {
        Ok(())
    }
}

/// Global structural similarity of two equally sized images.
pub fn ssim(x: &ImagePlane, y: &ImagePlane, p: &MetricParams) -> Result<f64> {
    check_dims(x, y)?;
    if x.pixel_count() < 2 {
        return Err(Error::argument("ssim requires at least 2 pixels"));
    }
    p.validate()?;
    Ok(ssim_slices(x.values(), y.values(), p))
}

/// SSIM on raw value slices; callers guarantee equal lengths >= 2.
pub(crate) fn ssim_slices(x: &[f32], y: &[f32], p: &MetricParams) -> f64 {
    let n = x.len() as f64;
    let mut sum_x = 0.0f64;
    let mut sum_y = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        sum_x += a as f64;
        sum_y += b as f64;
    }
    let mean_x = sum_x / n;
    let mean_y = sum_y / n;

    let mut var_x = 0.0f64;
    let mut var_y = 0.0f64;
    let mut cov = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a as f64 - mean_x;
        let dy = b as f64 - mean_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    // Population statistics.
    var_x /= n;
    var_y /= n;
    cov /= n;

    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let numerator = (2.0 * mean_x * mean_y + c1) * (2.0 * cov + c2);
    let denominator = if p.printed_denominator {
        (mean_x * mean_x * mean_y * mean_y + c1) * (var_x * var_y + c2)
    } else {
        (mean_x * mean_x + mean_y * mean_y + c1) * (var_x + var_y + c2)
    };
    let value = numerator / denominator;
    if p.printed_denominator {
        value
    } else {
        value.clamp(-1.0, 1.0)
    }
}

/// Pearson correlation coefficient of two equally sized, non-constant images.
pub fn pcc(x: &ImagePlane, y: &ImagePlane) -> Result<f64> {
    check_dims(x, y)?;
    pcc_slices(x.values(), y.values())
}

pub(crate) fn pcc_slices(x: &[f32], y: &[f32]) -> Result<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mean_y = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut sxx = 0.0f64;
    let mut syy = 0.0f64;
    let mut sxy = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a as f64 - mean_x;
        let dy = b as f64 - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let constant_x = sxx == 0.0 || range_is_zero(x);
    let constant_y = syy == 0.0 || range_is_zero(y);
    if constant_x || constant_y {
        return Err(Error::UndefinedMetric(
            "pearson correlation of a constant image".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn range_is_zero(v: &[f32]) -> bool {
    match v.split_first() {
        Some((&first, rest)) => rest.iter().all(|&x| x == first),
        None => true,
    }
}

/// Mean squared difference of two equally sized images.
pub fn mse(x: &ImagePlane, y: &ImagePlane) -> Result<f64> {
    check_dims(x, y)?;
    let n = x.pixel_count() as f64;
    let mut acc = 0.0f64;
    for (&a, &b) in x.values().iter().zip(y.values()) {
        let d = a as f64 - b as f64;
        acc += d * d;
    }
    Ok(acc / n)
}
