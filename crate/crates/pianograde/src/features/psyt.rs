//! The PSYT tensor file format.
//!
//! Layout: magic bytes `PSYT`, version `u32 = 1`, `ndim: u32`, `ndim` many
//! `u32` dims, then the row-major `f32` payload. All integers and floats are
//! little endian.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array3, ArrayD, IxDyn};

use crate::error::{Error, Result};
use crate::features::{FeatureTensor, Modality, TARGET_FPS};

const MAGIC: &[u8; 4] = b"PSYT";
const VERSION: u32 = 1;

/// Writes an arbitrary-rank tensor (dims + row-major payload).
pub fn write_psyt_raw<W: Write>(mut w: W, dims: &[usize], values: &[f32]) -> Result<()> {
    let expect: usize = dims.iter().product();
    if expect != values.len() {
        return Err(Error::Shape(format!(
            "dims {dims:?} imply {expect} values, got {}",
            values.len()
        )));
    }
    let io_err = |e: std::io::Error| Error::Format(format!("psyt write failed: {e}"));
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(dims.len() as u32).to_le_bytes()).map_err(io_err)?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
    }
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

/// Reads back dims + row-major payload.
pub fn read_psyt_raw<R: Read>(mut r: R) -> Result<(Vec<usize>, Vec<f32>)> {
    let io_err = |e: std::io::Error| Error::Format(format!("psyt read failed: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected PSYT")));
    }
    let mut u = [0u8; 4];
    r.read_exact(&mut u).map_err(io_err)?;
    let version = u32::from_le_bytes(u);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PSYT version {version}")));
    }
    r.read_exact(&mut u).map_err(io_err)?;
    let ndim = u32::from_le_bytes(u) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        r.read_exact(&mut u).map_err(io_err)?;
        dims.push(u32::from_le_bytes(u) as usize);
    }
    let count: usize = dims.iter().product();
    let mut payload = vec![0u8; count * 4];
    r.read_exact(&mut payload).map_err(io_err)?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((dims, values))
}

/// Writes a feature tensor to disk, dims `[bins, time, channels]`.
pub fn write_psyt(path: impl AsRef<Path>, tensor: &FeatureTensor) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let (b, t, c) = tensor.data.dim();
    let values: Vec<f32> = tensor.data.iter().copied().collect();
    write_psyt_raw(std::io::BufWriter::new(file), &[b, t, c], &values)
}

/// Reads a feature tensor; the modality is implied by the channel count and
/// the frame rate is assumed to be the 5 fps model rate.
pub fn read_psyt(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (dims, values) = read_psyt_raw(std::io::BufReader::new(file))?;
    if dims.len() != 3 {
        return Err(Error::Format(format!(
            "{}: feature tensors are rank 3, got dims {dims:?}",
            path.display()
        )));
    }
    let modality = match dims[2] {
        1 => Modality::Cqt,
        2 => Modality::PianoRoll,
        3 => Modality::Multimodal,
        c => return Err(Error::Format(format!("{}: {c} channels", path.display()))),
    };
    let data = Array3::from_shape_vec((dims[0], dims[1], dims[2]), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    FeatureTensor::new(data, TARGET_FPS, modality)
}

/// Writes an arbitrary-rank named tensor (used for checkpoint parameters).
pub fn write_psyt_tensor(path: impl AsRef<Path>, tensor: &ArrayD<f32>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let values: Vec<f32> = tensor.iter().copied().collect();
    write_psyt_raw(std::io::BufWriter::new(file), tensor.shape(), &values)
}

pub fn read_psyt_tensor(path: impl AsRef<Path>) -> Result<ArrayD<f32>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (dims, values) = read_psyt_raw(std::io::BufReader::new(file))?;
    ArrayD::from_shape_vec(IxDyn(&dims), values).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::NUM_BINS;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"NOPE\x01\x00\x00\x00".to_vec();
        assert!(read_psyt_raw(&bytes[..]).is_err());
    }

    #[test]
    fn feature_tensor_round_trip() {
        let data = Array3::from_shape_fn((NUM_BINS, 7, 2), |(b, t, c)| {
            (b as f32).sin() + t as f32 + c as f32
        });
        let x = FeatureTensor::new(data, 5.0, Modality::PianoRoll).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_psyt(f.path(), &x).unwrap();
        let y = read_psyt(f.path()).unwrap();
        assert_eq!(x, y);
    }

    proptest! {
        #[test]
        fn raw_round_trip(values in proptest::collection::vec(-1e6f32..1e6, 1..200)) {
            let dims = vec![values.len()];
            let mut buf = Vec::new();
            write_psyt_raw(&mut buf, &dims, &values).unwrap();
            let (d2, v2) = read_psyt_raw(&buf[..]).unwrap();
            prop_assert_eq!(dims, d2);
            prop_assert_eq!(values, v2);
        }
    }
}
