//! SPKL binary container for (speckle, image) pair sets.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! magic   4 bytes   0x53 0x50 0x4B 0x4C ("SPKL")
//! version u32       1
//! count   u32       number of records
//! slen    u32       speckle amplitude vector length
//! ilen    u32       image intensity vector length
//! then per record: slen f32 amplitudes, ilen f32 intensities
//! ```
//!
//! The container stores vector lengths only, so both vectors must describe
//! square layouts; side lengths are recovered as integer square roots on
//! load and the split defaults to the proportional 9:1 partition.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::{ImagePlane, PairSet, SpeckleRecord};
use crate::error::{Error, FormatError, Result};

pub const SPKL_MAGIC: [u8; 4] = *b"SPKL";
pub const SPKL_VERSION: u32 = 1;

pub fn write_spkl(path: &Path, pairs: &PairSet) -> Result<()> {
    let (slen, ilen) = match pairs.records().first() {
        Some((rec, img)) => {
            if !img.is_square() {
                return Err(Error::argument("SPKL images must be square"));
            }
            (rec.amplitudes().len(), img.pixel_count())
        }
        None => (0, 0),
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&SPKL_MAGIC)?;
    w.write_all(&SPKL_VERSION.to_le_bytes())?;
    w.write_all(&(pairs.len() as u32).to_le_bytes())?;
    w.write_all(&(slen as u32).to_le_bytes())?;
    w.write_all(&(ilen as u32).to_le_bytes())?;
    for (rec, img) in pairs.records() {
        for &a in rec.amplitudes() {
            w.write_all(&a.to_le_bytes())?;
        }
        for &v in img.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_spkl(path: &Path) -> Result<PairSet> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != SPKL_MAGIC {
        return Err(FormatError::BadMagic {
            expected: SPKL_MAGIC,
            found: magic,
        }
        .into());
    }
    let version = read_u32(&mut r, "version")?;
    if version != SPKL_VERSION {
        return Err(FormatError::UnknownVersion(version).into());
    }
    let count = read_u32(&mut r, "record count")? as usize;
    let slen = read_u32(&mut r, "speckle length")? as usize;
    let ilen = read_u32(&mut r, "image length")? as usize;

    let (crop_dim, image_side) = if count > 0 {
        let crop_dim = exact_sqrt(slen).ok_or_else(|| {
            FormatError::Header(format!("speckle length {slen} is not a perfect square"))
        })?;
        let image_side = exact_sqrt(ilen).ok_or_else(|| {
            FormatError::Header(format!("image length {ilen} is not a perfect square"))
        })?;
        (crop_dim, image_side)
    } else {
        (0, 0)
    };

    let mut records = Vec::with_capacity(count);
    for idx in 0..count {
        let amplitudes = read_f32_vec(&mut r, slen, "speckle payload")?;
        let intensities = read_f32_vec(&mut r, ilen, "image payload")?;
        let rec = SpeckleRecord::new(
            amplitudes,
            crop_dim as u32,
            crop_dim as u32,
            format!("spkl#{idx}"),
        )
        .map_err(|e| FormatError::Header(format!("record {idx}: {e}")))?;
        let img = ImagePlane::new(image_side, image_side, intensities)
            .map_err(|e| FormatError::Header(format!("record {idx}: {e}")))?;
        records.push((rec, img));
    }

    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(FormatError::TrailingData.into());
    }
    PairSet::new(records)
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
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32_vec(r: &mut impl Read, len: usize, what: &'static str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; len * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}
