//! Training, reconstruction, evaluation, persistence, and the speckle
//! decorrelation study.

mod checkpoint;
mod report;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use report::{read_history, write_history, EvalReport, EvalRow};

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dataset::{intensity_to_amplitude, Frame, ImagePlane, PairSet, RgbImage, SpeckleRecord};
use crate::error::{Error, FormatError, Result};
use crate::inversion::{
    batch_data_mse, row_squared_norms, train_batch_step, EarlyStopper, InverseModel, LossReport,
    PlateauScheduler, TrainConfig,
};
use crate::metrics::{self, MetricParams};

/// Training-run side effects and knobs beyond [`TrainConfig`].
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory receiving one checkpoint per epoch plus `history.csv`.
    pub checkpoint_dir: Option<PathBuf>,
    /// Retain only the most recent N epoch checkpoints (all are kept when
    /// unset).
    pub keep_last: Option<usize>,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

/// Train a fresh model on the pair set's training partition.
///
/// Runs up to `cfg.max_epochs` epochs of shuffled mini-batches, with plateau
/// learning-rate scheduling and early stopping driven by the training loss.
/// Validation loss is computed each epoch without weight updates; validation
/// records never contribute a gradient.
pub fn train(
    pairs: &PairSet,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<(InverseModel, Vec<LossReport>)> {
    cfg.validate()?;
    let (out_side, in_side) = model_dims(pairs)?;
    let model = InverseModel::init(out_side, in_side, cfg)?;
    run_epochs(pairs, cfg, opts, model, Vec::new(), 0)
}

/// Continue a checkpointed run: loads the newest `epoch_*.mmfw` in the
/// checkpoint directory, replays `history.csv` through the scheduler and
/// stopper, and trains the remaining epochs. The continuation reproduces an
/// uninterrupted run bit for bit.
pub fn resume(
    pairs: &PairSet,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<(InverseModel, Vec<LossReport>)> {
    cfg.validate()?;
    let dir = opts
        .checkpoint_dir
        .as_deref()
        .ok_or_else(|| Error::argument("resume requires a checkpoint directory"))?;
    let (last_epoch, path) = latest_checkpoint(dir)?;
    let ckpt = load_checkpoint(&path)?;
    let model = ckpt.into_model()?;

    let (out_side, in_side) = model_dims(pairs)?;
    if model.out_side() != out_side || model.in_side() != in_side {
        return Err(FormatError::Dimension(format!(
            "checkpoint is {}x{} sides, pairs need {}x{}",
            model.out_side(),
            model.in_side(),
            out_side,
            in_side
        ))
        .into());
    }

    let history = report::read_history(&dir.join("history.csv"))?;
    if history.len() <= last_epoch {
        return Err(FormatError::Header(format!(
            "history has {} rows, checkpoint is at epoch {last_epoch}",
            history.len()
        ))
        .into());
    }
    let replay = history[..=last_epoch].to_vec();
    run_epochs(pairs, cfg, opts, model, replay, last_epoch + 1)
}

/// Model side lengths implied by a pair set.
fn model_dims(pairs: &PairSet) -> Result<(usize, usize)> {
    let (rec, img) = pairs
        .records()
        .first()
        .ok_or_else(|| Error::argument("pair set is empty"))?;
    if !img.is_square() {
        return Err(Error::argument("training images must be square"));
    }
    Ok((img.width(), rec.crop_dim() as usize))
}

fn epoch_seed(run_seed: u64, epoch: usize) -> u64 {
    // Per-epoch stream so a resumed run replays identical shuffles.
    run_seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn run_epochs(
    pairs: &PairSet,
    cfg: &TrainConfig,
    opts: &TrainOptions,
    mut model: InverseModel,
    mut history: Vec<LossReport>,
    start_epoch: usize,
) -> Result<(InverseModel, Vec<LossReport>)> {
    let n_train = pairs.split().train;
    if n_train == 0 {
        return Err(Error::argument("training split is empty"));
    }

    let records = pairs.records();
    let targets: Vec<Vec<f32>> = records
        .iter()
        .map(|(_, img)| intensity_to_amplitude(img))
        .collect();
    let xs: Vec<&[f32]> = records.iter().map(|(rec, _)| rec.amplitudes()).collect();
    let ts: Vec<&[f32]> = targets.iter().map(|t| t.as_slice()).collect();

    if let Some(dir) = opts.checkpoint_dir.as_deref() {
        fs::create_dir_all(dir)?;
    }

    let mut plateau = PlateauScheduler::new(
        cfg.lr,
        cfg.plateau_factor,
        cfg.plateau_patience,
        cfg.plateau_threshold,
        cfg.min_lr,
    );
    let mut stopper = EarlyStopper::new(cfg.stop_min_delta, cfg.stop_patience);
    let mut stopped = false;
    for past in &history {
        plateau.observe(past.train_loss);
        stopped = stopper.observe(past.train_loss);
    }
    let mut row_sq = row_squared_norms(model.weights());

    for epoch in start_epoch..cfg.max_epochs {
        if stopped {
            break;
        }
        let lr = plateau.lr();

        let mut order: Vec<usize> = (0..n_train).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(epoch_seed(cfg.rng_seed, epoch));
        order.shuffle(&mut rng);

        let mut loss_acc = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            debug_assert!(chunk.iter().all(|&i| i < n_train));
            let bx: Vec<&[f32]> = chunk.iter().map(|&i| xs[i]).collect();
            let bt: Vec<&[f32]> = chunk.iter().map(|&i| ts[i]).collect();
            let batch_loss = train_batch_step(
                model.weights_mut(),
                &bx,
                &bt,
                cfg.lambda,
                lr,
                cfg.loss_domain,
                &mut row_sq,
            );
            loss_acc += batch_loss * chunk.len() as f64;
        }
        let train_loss = loss_acc / n_train as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss diverged at epoch {epoch}"
            )));
        }

        let val_loss = validation_loss(&model, &xs[n_train..], &ts[n_train..], cfg);

        let entry = LossReport {
            epoch,
            train_loss,
            val_loss,
            learning_rate: lr,
        };
        history.push(entry);

        if let Some(dir) = opts.checkpoint_dir.as_deref() {
            let ckpt = Checkpoint::from_model(
                &model,
                CheckpointMeta {
                    epoch: epoch as u32,
                    lambda: cfg.lambda as f32,
                    lr: lr as f32,
                    rng_seed: cfg.rng_seed,
                },
            );
            save_checkpoint(&dir.join(checkpoint_name(epoch)), &ckpt)?;
            if let Some(keep) = opts.keep_last {
                if keep > 0 && epoch + 1 > keep {
                    let _ = fs::remove_file(dir.join(checkpoint_name(epoch + 1 - keep - 1)));
                }
            }
            report::write_history(&dir.join("history.csv"), &history)?;
        }
        if opts.verbose {
            eprintln!(
                "epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e} lr {lr:.3e}"
            );
        }

        plateau.observe(train_loss);
        stopped = stopper.observe(train_loss);
    }

    Ok((model, history))
}

fn validation_loss(model: &InverseModel, xs: &[&[f32]], ts: &[&[f32]], cfg: &TrainConfig) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut acc = 0.0f64;
    for (cx, ct) in xs.chunks(cfg.batch_size).zip(ts.chunks(cfg.batch_size)) {
        acc += batch_data_mse(model.weights(), cx, ct, cfg.loss_domain) * cx.len() as f64;
    }
    acc / xs.len() as f64
}

fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:05}.mmfw")
}

/// Newest `epoch_*.mmfw` in a directory.
fn latest_checkpoint(dir: &Path) -> Result<(usize, PathBuf)> {
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(num) = name
            .strip_prefix("epoch_")
            .and_then(|s| s.strip_suffix(".mmfw"))
        {
            if let Ok(epoch) = num.parse::<usize>() {
                if best.as_ref().map(|(e, _)| epoch > *e).unwrap_or(true) {
                    best = Some((epoch, entry.path()));
                }
            }
        }
    }
    best.ok_or_else(|| Error::argument(format!("no checkpoints found in {}", dir.display())))
}

/// Invert one speckle record into an intensity image: `a = |W x|`, intensity
/// `a^2`, rescaled by the maximum only when it exceeds one, clamped to
/// `[0, 1]`.
pub fn reconstruct(model: &InverseModel, record: &SpeckleRecord) -> Result<ImagePlane> {
    let amplitudes = model.forward(record.amplitudes())?;
    let mut intensity: Vec<f64> = amplitudes.iter().map(|&a| a as f64 * a as f64).collect();
    let max = intensity.iter().cloned().fold(0.0f64, f64::max);
    if max > 1.0 {
        for v in intensity.iter_mut() {
            *v /= max;
        }
    }
    let values: Vec<f32> = intensity.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
    ImagePlane::new(model.out_side(), model.out_side(), values)
}

/// Per-channel reconstruction with a single shared model.
pub fn reconstruct_rgb(
    model: &InverseModel,
    xr: &SpeckleRecord,
    xg: &SpeckleRecord,
    xb: &SpeckleRecord,
) -> Result<RgbImage> {
    let r = reconstruct(model, xr)?;
    let g = reconstruct(model, xg)?;
    let b = reconstruct(model, xb)?;
    crate::dataset::merge_rgb(r, g, b)
}

/// Reconstruct every pair and score it against its ground truth.
///
/// Undefined Pearson correlations (constant reconstructions) are recorded
/// per image and excluded from the aggregate mean with a count.
pub fn evaluate(model: &InverseModel, pairs: &PairSet, params: &MetricParams) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::argument("evaluation set is empty"));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    let mut sum_ssim = 0.0f64;
    let mut sum_mse = 0.0f64;
    let mut sum_pcc = 0.0f64;
    let mut defined_pcc = 0usize;
    for (index, (rec, truth)) in pairs.records().iter().enumerate() {
        let recon = reconstruct(model, rec)?;
        let ssim = metrics::ssim(&recon, truth, params)?;
        let mse = metrics::mse(&recon, truth)?;
        let pcc = match metrics::pcc(&recon, truth) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        sum_ssim += ssim;
        sum_mse += mse;
        if let Some(v) = pcc {
            sum_pcc += v;
            defined_pcc += 1;
        }
        rows.push(EvalRow {
            index,
            ssim,
            pcc,
            mse,
        });
    }
    let n = rows.len() as f64;
    Ok(EvalReport {
        undefined_pcc: rows.len() - defined_pcc,
        mean_ssim: sum_ssim / n,
        mean_pcc: (defined_pcc > 0).then(|| sum_pcc / defined_pcc as f64),
        mean_mse: sum_mse / n,
        model_dims: (model.out_side(), model.in_side()),
        rows,
    })
}

/// SSIM of every frame against the first; the first entry is exactly 1.
pub fn decorrelation_series(frames: &[Frame], params: &MetricParams) -> Result<Vec<(usize, f64)>> {
    if frames.len() < 2 {
        return Err(Error::argument("decorrelation needs at least 2 frames"));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if w * h < 2 {
        return Err(Error::argument("frames need at least 2 pixels"));
    }
    for f in frames {
        if f.width() != w || f.height() != h {
            return Err(Error::argument("all frames must share dimensions"));
        }
    }
    params.validate()?;
    let reference = frames[0].values();
    Ok(frames
        .iter()
        .enumerate()
        .map(|(i, f)| (i, metrics::ssim_slices(reference, f.values(), params)))
        .collect())
}

/// Write a plane as an 8-bit grayscale PNG (`value = round(v * 255)`).
pub fn write_png_gray(path: &Path, plane: &ImagePlane) -> Result<()> {
    let bytes: Vec<u8> = plane
        .values()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf = image::GrayImage::from_raw(plane.width() as u32, plane.height() as u32, bytes)
        .expect("buffer sized from plane");
    buf.save(path)
        .map_err(|e| Error::Format(FormatError::Decode(e.to_string())))
}

/// Write an RGB image as an 8-bit PNG.
pub fn write_png_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut bytes = Vec::with_capacity((w * h * 3) as usize);
    for i in 0..(w * h) as usize {
        for plane in [img.r(), img.g(), img.b()] {
            bytes.push((plane.values()[i] * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let buf = image::RgbImage::from_raw(w, h, bytes).expect("buffer sized from image");
    buf.save(path)
        .map_err(|e| Error::Format(FormatError::Decode(e.to_string())))
}
