//! The learned inverse model: a single fully connected complex matrix
//! mapping speckle amplitudes to image amplitudes, trained by stochastic
//! gradient descent with an L2 weight penalty.
//!
//! The forward pass is `a = |W x|`; reconstructed intensity is `a^2`. The
//! default cost compares amplitudes, `mean((|Wx|_i - t_i)^2)`; an
//! intensity-domain variant comparing `|Wx|^2` against `t^2` is selectable
//! through [`LossDomain`]. Weights and activations are `f32`; every
//! reduction accumulates in `f64` with a fixed order, so training is
//! bit-reproducible for a fixed seed at any thread count.

mod schedule;

pub use schedule::{EarlyStopper, PlateauScheduler};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot_f32, ComplexMatrix};

/// Guard for the modulus derivative at zero.
const MODULUS_EPS: f64 = 1e-12;

/// Which domain the data term of the cost compares in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossDomain {
    /// `(|Wx| - t)^2` on amplitudes (default).
    #[default]
    Amplitude,
    /// `(|Wx|^2 - t^2)^2` on intensities.
    Intensity,
}

impl LossDomain {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(LossDomain::Amplitude),
            "intensity" => Ok(LossDomain::Intensity),
            other => Err(Error::argument(format!(
                "unknown loss domain `{other}` (expected amplitude|intensity)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LossDomain::Amplitude => "amplitude",
            LossDomain::Intensity => "intensity",
        }
    }
}

/// All training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// L2 weight penalty.
    pub lambda: f64,
    /// Initial learning rate.
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Half-width of the uniform weight initialization.
    pub init_bound: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_threshold: f64,
    pub min_lr: f64,
    pub stop_min_delta: f64,
    pub stop_patience: usize,
    pub rng_seed: u64,
    pub loss_domain: LossDomain,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.03,
            lr: 1e-5,
            batch_size: 32,
            max_epochs: 850,
            init_bound: 0.002,
            plateau_factor: 0.1,
            plateau_patience: 2,
            plateau_threshold: 1e-4,
            min_lr: 1e-8,
            stop_min_delta: 1e-4,
            stop_patience: 8,
            rng_seed: 42,
            loss_domain: LossDomain::Amplitude,
        }
    }
}

impl TrainConfig {
    /// Set the learning rate, keeping the conventional `min_lr = lr / 1e3`.
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.lr = lr;
        self.min_lr = lr * 1e-3;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda >= 0.0),
            ("lr", self.lr > 0.0),
            ("init_bound", self.init_bound > 0.0),
            ("plateau_factor", self.plateau_factor > 0.0),
            ("plateau_threshold", self.plateau_threshold > 0.0),
            ("min_lr", self.min_lr > 0.0),
            ("stop_min_delta", self.stop_min_delta > 0.0),
        ];
        for (name, ok) in positive {
            if !ok {
                return Err(Error::argument(format!("{name} must be positive")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::argument("batch size must be at least 1"));
        }
        if self.plateau_patience < 1 || self.stop_patience < 1 {
            return Err(Error::argument("patience values must be at least 1"));
        }
        Ok(())
    }
}

/// One epoch's losses and the learning rate in effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub epoch: usize,
    /// Training cost including the L2 penalty.
    pub train_loss: f64,
    /// Validation data-term MSE (NaN when the validation split is empty).
    pub val_loss: f64,
    pub learning_rate: f64,
}

/// The inverse model: `W` of shape `out_side^2 x in_side^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseModel {
    out_side: usize,
    in_side: usize,
    w: ComplexMatrix,
}

impl InverseModel {
    /// Random initialization: real and imaginary parts i.i.d. uniform on
    /// `[-init_bound, +init_bound]`, drawn row-major (real part first).
    pub fn init(out_side: usize, in_side: usize, cfg: &TrainConfig) -> Result<Self> {
        if out_side == 0 || in_side == 0 {
            return Err(Error::argument("model sides must be at least 1"));
        }
        cfg.validate()?;
        let w = init_matrix(
            out_side * out_side,
            in_side * in_side,
            cfg.init_bound,
            cfg.rng_seed,
        )?;
        Ok(InverseModel {
            out_side,
            in_side,
            w,
        })
    }

    pub fn from_matrix(w: ComplexMatrix, out_side: usize, in_side: usize) -> Result<Self> {
        if w.rows() != out_side * out_side || w.cols() != in_side * in_side {
            return Err(Error::argument(format!(
                "matrix {}x{} does not match sides {out_side}/{in_side}",
                w.rows(),
                w.cols()
            )));
        }
        Ok(InverseModel {
            out_side,
            in_side,
            w,
        })
    }

    pub fn out_side(&self) -> usize {
        self.out_side
    }

    pub fn in_side(&self) -> usize {
        self.in_side
    }

    pub fn weights(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.w
    }

    /// `a = |W x|`, element-wise modulus of the complex matvec.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        amplitude_forward(&self.w, x)
    }
}

/// Uniform random complex matrix on `[-bound, +bound]` per component.
pub fn init_matrix(rows: usize, cols: usize, bound: f64, seed: u64) -> Result<ComplexMatrix> {
    let dist = Uniform::new_inclusive(-(bound as f32), bound as f32)
        .map_err(|e| Error::argument(format!("bad init bound: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = rows * cols;
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for _ in 0..n {
        re.push(dist.sample(&mut rng));
        im.push(dist.sample(&mut rng));
    }
    ComplexMatrix::from_planar(rows, cols, re, im)
}

/// Amplitude forward pass on a raw weight matrix.
pub fn amplitude_forward(w: &ComplexMatrix, x: &[f32]) -> Result<Vec<f32>> {
    if x.len() != w.cols() {
        return Err(Error::argument(format!(
            "input length {} does not match {} weights columns",
            x.len(),
            w.cols()
        )));
    }
    let mut out = vec![0.0f32; w.rows()];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let yre = dot_f32(w.row_re(i), x);
        let yim = dot_f32(w.row_im(i), x);
        *o = (yre * yre + yim * yim).sqrt() as f32;
    });
    Ok(out)
}

fn check_batch(w: &ComplexMatrix, batch: &[(&[f32], &[f32])]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::argument("batch must be nonempty"));
    }
    for (x, t) in batch {
        if x.len() != w.cols() || t.len() != w.rows() {
            return Err(Error::argument(format!(
                "batch element has lengths {}/{}, expected {}/{}",
                x.len(),
                t.len(),
                w.cols(),
                w.rows()
            )));
        }
    }
    Ok(())
}

/// Training cost: mean over batch and pixels of the squared data residual
/// plus `lambda * sum(|w|^2)`.
pub fn loss(
    w: &ComplexMatrix,
    batch: &[(&[f32], &[f32])],
    lambda: f64,
    domain: LossDomain,
) -> Result<f64> {
    check_batch(w, batch)?;
    let mut acc = 0.0f64;
    for &(x, t) in batch {
        for i in 0..w.rows() {
            let yre = dot_f32(w.row_re(i), x);
            let yim = dot_f32(w.row_im(i), x);
            let d = residual(yre, yim, t[i] as f64, domain);
            acc += d * d;
        }
    }
    let denom = (batch.len() * w.rows()) as f64;
    Ok(acc / denom + lambda * w.frobenius_sq())
}

#[inline]
fn residual(yre: f64, yim: f64, t: f64, domain: LossDomain) -> f64 {
    let sq = yre * yre + yim * yim;
    match domain {
        LossDomain::Amplitude => sq.sqrt() - t,
        LossDomain::Intensity => sq - t * t,
    }
}

/// Per-sample gradient coefficients for one output row: the residual scaled
/// by the partial of the residual with respect to (Re y, Im y).
#[inline]
fn coefficients(yre: f64, yim: f64, t: f64, domain: LossDomain) -> (f64, f64, f64) {
    let sq = yre * yre + yim * yim;
    match domain {
        LossDomain::Amplitude => {
            let a = sq.sqrt();
            let d = a - t;
            let denom = a.max(MODULUS_EPS);
            (d * yre / denom, d * yim / denom, d)
        }
        LossDomain::Intensity => {
            let d = sq - t * t;
            (2.0 * d * yre, 2.0 * d * yim, d)
        }
    }
}

/// Real/imaginary gradient of the training cost with respect to every weight.
#[derive(Debug, Clone)]
pub struct WeightGradient {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl WeightGradient {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> (f64, f64) {
        let idx = r * self.cols + c;
        (self.re[idx], self.im[idx])
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }
}

/// Analytic gradient of [`loss`] over a batch.
pub fn gradient(
    w: &ComplexMatrix,
    batch: &[(&[f32], &[f32])],
    lambda: f64,
    domain: LossDomain,
) -> Result<WeightGradient> {
    check_batch(w, batch)?;
    let rows = w.rows();
    let cols = w.cols();
    let scale = 2.0 / (batch.len() * rows) as f64;
    let two_lambda = 2.0 * lambda;

    let mut g = WeightGradient {
        rows,
        cols,
        re: vec![0.0; rows * cols],
        im: vec![0.0; rows * cols],
    };
    g.re
        .par_chunks_mut(cols)
        .zip(g.im.par_chunks_mut(cols))
        .enumerate()
        .for_each(|(i, (gre, gim))| {
            let wre = w.row_re(i);
            let wim = w.row_im(i);
            for &(x, t) in batch {
                let yre = dot_f32(wre, x);
                let yim = dot_f32(wim, x);
                let (cre, cim, _) = coefficients(yre, yim, t[i] as f64, domain);
                for j in 0..cols {
                    let xv = x[j] as f64;
                    gre[j] += cre * xv;
                    gim[j] += cim * xv;
                }
            }
            for j in 0..cols {
                gre[j] = scale * gre[j] + two_lambda * wre[j] as f64;
                gim[j] = scale * gim[j] + two_lambda * wim[j] as f64;
            }
        });
    Ok(g)
}

/// `w <- w - lr * grad`, applied to real and imaginary parts independently.
pub fn sgd_step(w: &mut ComplexMatrix, grad: &WeightGradient, lr: f64) -> Result<()> {
    if grad.rows != w.rows() || grad.cols != w.cols() {
        return Err(Error::argument("gradient shape does not match weights"));
    }
    let (re, im) = w.planar_mut();
    for (v, g) in re.iter_mut().zip(&grad.re) {
        *v = (*v as f64 - lr * g) as f32;
    }
    for (v, g) in im.iter_mut().zip(&grad.im) {
        *v = (*v as f64 - lr * g) as f32;
    }
    Ok(())
}

/// Fused mini-batch step used by the training loop: computes the pre-update
/// batch cost, applies the SGD update in place, and refreshes the per-row
/// weight-norm cache (`row_sq`).
///
/// Row-parallel with sequential inner reductions: results are bit-identical
/// for any thread count.
pub(crate) fn train_batch_step(
    w: &mut ComplexMatrix,
    xs: &[&[f32]],
    ts: &[&[f32]],
    lambda: f64,
    lr: f64,
    domain: LossDomain,
    row_sq: &mut [f64],
) -> f64 {
    let rows = w.rows();
    let cols = w.cols();
    let bsize = xs.len();
    debug_assert!(bsize > 0 && ts.len() == bsize && row_sq.len() == rows);

    let reg_pre: f64 = row_sq.iter().sum();
    let scale = 2.0 / (bsize * rows) as f64;
    let two_lambda = 2.0 * lambda;

    let mut loss_parts = vec![0.0f64; rows];
    let (w_re, w_im) = w.planar_mut();
    w_re.par_chunks_mut(cols)
        .zip(w_im.par_chunks_mut(cols))
        .zip(row_sq.par_iter_mut().zip(loss_parts.par_iter_mut()))
        .enumerate()
        .for_each_init(
            || Scratch::new(bsize, cols),
            |scratch, (i, ((wre, wim), (sq, part)))| {
                let mut data_acc = 0.0f64;
                for (b, &x) in xs.iter().enumerate() {
                    let yre = dot_f32(wre, x);
                    let yim = dot_f32(wim, x);
                    let (cre, cim, d) = coefficients(yre, yim, ts[b][i] as f64, domain);
                    scratch.cre[b] = cre;
                    scratch.cim[b] = cim;
                    data_acc += d * d;
                }
                scratch.gre.fill(0.0);
                scratch.gim.fill(0.0);
                for (b, &x) in xs.iter().enumerate() {
                    let cre = scratch.cre[b];
                    let cim = scratch.cim[b];
                    for j in 0..cols {
                        let xv = x[j] as f64;
                        scratch.gre[j] += cre * xv;
                        scratch.gim[j] += cim * xv;
                    }
                }
                let mut sq_acc = 0.0f64;
                for j in 0..cols {
                    let gre = scale * scratch.gre[j] + two_lambda * wre[j] as f64;
                    let gim = scale * scratch.gim[j] + two_lambda * wim[j] as f64;
                    wre[j] = (wre[j] as f64 - lr * gre) as f32;
                    wim[j] = (wim[j] as f64 - lr * gim) as f32;
                    let r = wre[j] as f64;
                    let im_v = wim[j] as f64;
                    sq_acc += r * r + im_v * im_v;
                }
                *sq = sq_acc;
                *part = data_acc;
            },
        );

    let data: f64 = loss_parts.iter().sum();
    data / (bsize * rows) as f64 + lambda * reg_pre
}

struct Scratch {
    cre: Vec<f64>,
    cim: Vec<f64>,
    gre: Vec<f64>,
    gim: Vec<f64>,
}

impl Scratch {
    fn new(bsize: usize, cols: usize) -> Self {
        Scratch {
            cre: vec![0.0; bsize],
            cim: vec![0.0; bsize],
            gre: vec![0.0; cols],
            gim: vec![0.0; cols],
        }
    }
}

/// Data-term MSE over a batch (no regularizer, no updates); used for
/// validation passes.
pub(crate) fn batch_data_mse(
    w: &ComplexMatrix,
    xs: &[&[f32]],
    ts: &[&[f32]],
    domain: LossDomain,
) -> f64 {
    let rows = w.rows();
    let mut parts = vec![0.0f64; rows];
    parts.par_iter_mut().enumerate().for_each(|(i, part)| {
        let wre = w.row_re(i);
        let wim = w.row_im(i);
        let mut acc = 0.0f64;
        for (b, &x) in xs.iter().enumerate() {
            let yre = dot_f32(wre, x);
            let yim = dot_f32(wim, x);
            let d = residual(yre, yim, ts[b][i] as f64, domain);
            acc += d * d;
        }
        *part = acc;
    });
    parts.iter().sum::<f64>() / (xs.len() * rows) as f64
}

/// Sum of squared moduli per output row; cache feeding the regularizer term
/// in [`train_batch_step`].
pub(crate) fn row_squared_norms(w: &ComplexMatrix) -> Vec<f64> {
    (0..w.rows())
        .map(|i| {
            let mut acc = 0.0f64;
            for (&r, &im) in w.row_re(i).iter().zip(w.row_im(i)) {
                acc += r as f64 * r as f64 + im as f64 * im as f64;
            }
            acc
        })
        .collect()
}
