//! MMFW checkpoint container for complex matrices (learned inverse models
//! and simulated transmission matrices).
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! magic    4 bytes  0x4D 0x4D 0x46 0x57 ("MMFW")
//! version  u32      1
//! out_dim  u32      output side length (rows = out_dim^2)
//! in_dim   u32      input side length (cols = in_dim^2)
//! epoch    u32
//! lambda   f32
//! lr       f32
//! rng_seed u64
//! payload  out_dim^2 * in_dim^2 complex entries, interleaved f32 (re, im),
//!          row-major with row index = output pixel
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::inversion::InverseModel;
use crate::matrix::ComplexMatrix;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MMFW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training metadata stored alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: u32,
    pub lambda: f32,
    pub lr: f32,
    pub rng_seed: u64,
}

/// A complex matrix with side lengths and training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub out_side: u32,
    pub in_side: u32,
    pub meta: CheckpointMeta,
    pub matrix: ComplexMatrix,
}

impl Checkpoint {
    pub fn from_model(model: &InverseModel, meta: CheckpointMeta) -> Checkpoint {
        Checkpoint {
            out_side: model.out_side() as u32,
            in_side: model.in_side() as u32,
            meta,
            matrix: model.weights().clone(),
        }
    }

    pub fn into_model(self) -> Result<InverseModel> {
        InverseModel::from_matrix(self.matrix, self.out_side as usize, self.in_side as usize)
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let rows = (ckpt.out_side as usize).pow(2);
    let cols = (ckpt.in_side as usize).pow(2);
    if ckpt.matrix.rows() != rows || ckpt.matrix.cols() != cols {
        return Err(Error::argument(format!(
            "matrix {}x{} does not match sides {}/{}",
            ckpt.matrix.rows(),
            ckpt.matrix.cols(),
            ckpt.out_side,
            ckpt.in_side
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&ckpt.out_side.to_le_bytes())?;
    w.write_all(&ckpt.in_side.to_le_bytes())?;
    w.write_all(&ckpt.meta.epoch.to_le_bytes())?;
    w.write_all(&ckpt.meta.lambda.to_le_bytes())?;
    w.write_all(&ckpt.meta.lr.to_le_bytes())?;
    w.write_all(&ckpt.meta.rng_seed.to_le_bytes())?;
    let re = ckpt.matrix.re();
    let im = ckpt.matrix.im();
    for i in 0..re.len() {
        w.write_all(&re[i].to_le_bytes())?;
        w.write_all(&im[i].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        }
        .into());
    }
    let version = read_u32(&mut r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::UnknownVersion(version).into());
    }
    let out_side = read_u32(&mut r, "out_dim")?;
    let in_side = read_u32(&mut r, "in_dim")?;
    let epoch = read_u32(&mut r, "epoch")?;
    let lambda = f32::from_le_bytes(read_array(&mut r, "lambda")?);
    let lr = f32::from_le_bytes(read_array(&mut r, "lr")?);
    let mut seed_bytes = [0u8; 8];
    read_exact(&mut r, &mut seed_bytes, "rng_seed")?;
    let rng_seed = u64::from_le_bytes(seed_bytes);

    let rows = (out_side as usize).pow(2);
    let cols = (in_side as usize).pow(2);
    let entries = rows
        .checked_mul(cols)
        .ok_or_else(|| FormatError::Header("matrix size overflows".into()))?;
    let mut re = Vec::with_capacity(entries);
    let mut im = Vec::with_capacity(entries);
    let mut buf = [0u8; 8];
    for _ in 0..entries {
        read_exact(&mut r, &mut buf, "weight payload")?;
        re.push(f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]));
        im.push(f32::from_le_bytes([buf[4], buf[5], buf[6], buf[7]]));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(FormatError::TrailingData.into());
    }

    let matrix = ComplexMatrix::from_planar(rows, cols, re, im)
        .map_err(|e| FormatError::Header(format!("payload: {e}")))?;
    Ok(Checkpoint {
        out_side,
        in_side,
        meta: CheckpointMeta {
            epoch,
            lambda,
            lr,
            rng_seed,
        },
        matrix,
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(FormatError::Truncated(what))
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read, what: &'static str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r, what)?))
}

fn read_array(r: &mut impl Read, what: &'static str) -> Result<[u8; 4]> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(buf)
}
