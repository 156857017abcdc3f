//! On-disk formats: the LTNS tensor container and binary PGM images.
//!
//! LTNS is little-endian: magic `LTNS`, version `u16` (currently 1), then
//! `channels`, `height`, `width` as `u32`, then the `f32` samples in
//! channel-major, row-major order. Write followed by read reproduces every
//! sample bit for bit.
//!
//! PGM is the plain binary `P5` flavor with maxval 255, used for quantized
//! mosaics and loss masks so other tools can look at them.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use thiserror::Error;

use crate::tensor::{FeatureTensor, TensorError};

const LTNS_MAGIC: [u8; 4] = *b"LTNS";
const LTNS_VERSION: u16 = 1;

/// Largest header dimension accepted on read; keeps a corrupt header from
/// triggering a giant allocation.
const MAX_DIM: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:02x?}, expected \"LTNS\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported LTNS version {0}")]
    UnsupportedVersion(u16),
    #[error("header dimension {0} exceeds the {MAX_DIM} limit")]
    OversizedDimension(u32),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("malformed PGM header: {0}")]
    PgmHeader(String),
    #[error("PGM pixel data ends after {got} of {expected} bytes")]
    PgmTruncated { expected: usize, got: usize },
}

/// Serializes a tensor into any writer.
pub fn write_tensor_to<W: Write>(mut w: W, tensor: &FeatureTensor) -> Result<(), FileError> {
    w.write_all(&LTNS_MAGIC)?;
    w.write_all(&LTNS_VERSION.to_le_bytes())?;
    w.write_all(&(tensor.channels() as u32).to_le_bytes())?;
    w.write_all(&(tensor.height() as u32).to_le_bytes())?;
    w.write_all(&(tensor.width() as u32).to_le_bytes())?;
    // Standard layout of (channel, row, col) arrays is exactly the wire
    // order, so a straight iteration serializes correctly.
    let mut buf = Vec::with_capacity(tensor.data().len() * 4);
    for &v in tensor.data().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Parses a tensor from any reader, validating magic, version, and values.
pub fn read_tensor_from<R: Read>(mut r: R) -> Result<FeatureTensor, FileError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != LTNS_MAGIC {
        return Err(FileError::BadMagic { found: magic });
    }
    let version = read_u16(&mut r)?;
    if version != LTNS_VERSION {
        return Err(FileError::UnsupportedVersion(version));
    }
    let channels = read_u32(&mut r)?;
    let height = read_u32(&mut r)?;
    let width = read_u32(&mut r)?;
    for dim in [channels, height, width] {
        if dim > MAX_DIM {
            return Err(FileError::OversizedDimension(dim));
        }
    }
    let count = channels as usize * height as usize * width as usize;
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let data = Array3::from_shape_vec(
        (channels as usize, height as usize, width as usize),
        samples,
    )
    .expect("sample count was sized from the header");
    Ok(FeatureTensor::new(data)?)
}

pub fn write_tensor(path: &Path, tensor: &FeatureTensor) -> Result<(), FileError> {
    let file = BufWriter::new(File::create(path)?);
    write_tensor_to(file, tensor)
}

pub fn read_tensor(path: &Path) -> Result<FeatureTensor, FileError> {
    let file = BufReader::new(File::open(path)?);
    read_tensor_from(file)
}

/// Writes an 8-bit grayscale image as binary PGM (P5, maxval 255).
pub fn write_pgm_to<W: Write>(mut w: W, image: &Array2<u8>) -> Result<(), FileError> {
    let (rows, cols) = image.dim();
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    if let Some(slice) = image.as_slice() {
        w.write_all(slice)?;
    } else {
        for &b in image.iter() {
            w.write_all(&[b])?;
        }
    }
    Ok(())
}

/// Reads a binary PGM (maxval must be 255). Whitespace and `#` comments in
/// the header are tolerated because other emitters produce them.
pub fn read_pgm_from<R: Read>(mut r: R) -> Result<Array2<u8>, FileError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(FileError::PgmHeader("missing P5 signature".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = next_pgm_int(&bytes, &mut pos)?;
    }
    let [cols, rows, maxval] = fields;
    if maxval != 255 {
        return Err(FileError::PgmHeader(format!(
            "maxval {maxval} unsupported, expected 255"
        )));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    pos += 1;
    let expected = rows * cols;
    let got = bytes.len().saturating_sub(pos);
    if got < expected {
        return Err(FileError::PgmTruncated { expected, got });
    }
    let pixels = bytes[pos..pos + expected].to_vec();
    Ok(Array2::from_shape_vec((rows, cols), pixels)
        .expect("pixel count was sized from the header"))
}

pub fn write_pgm(path: &Path, image: &Array2<u8>) -> Result<(), FileError> {
    let file = BufWriter::new(File::create(path)?);
    write_pgm_to(file, image)
}

pub fn read_pgm(path: &Path) -> Result<Array2<u8>, FileError> {
    let file = BufReader::new(File::open(path)?);
    read_pgm_from(file)
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, FileError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, FileError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads the next unsigned decimal from a PGM header, skipping whitespace
/// and comment lines, leaving `pos` just past the last digit.
fn next_pgm_int(bytes: &[u8], pos: &mut usize) -> Result<usize, FileError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while !matches!(bytes.get(*pos), None | Some(b'\n')) {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => {
                return Err(FileError::PgmHeader(format!(
                    "unexpected byte 0x{b:02x} in header"
                )))
            }
            None => return Err(FileError::PgmHeader("header ends early".into())),
        }
    }
    let mut value = 0usize;
    while let Some(b) = bytes.get(*pos).filter(|b| b.is_ascii_digit()) {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as usize))
            .ok_or_else(|| FileError::PgmHeader("dimension overflow".into()))?;
        *pos += 1;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn tensor_round_trip_is_bit_exact() {
        let mut rng = SplitMix64::new(17);
        let t = FeatureTensor::from_fn(3, 5, 7, |_, _, _| rng.next_in(-1e6, 1e6) as f32).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();
        let back = read_tensor_from(buf.as_slice()).unwrap();
        assert_eq!(back.data().dim(), (3, 5, 7));
        for (a, b) in t.data().iter().zip(back.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn negative_zero_survives_round_trip() {
        let t = FeatureTensor::from_fn(1, 1, 2, |_, _, c| if c == 0 { -0.0 } else { 1.0 }).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();
        let back = read_tensor_from(buf.as_slice()).unwrap();
        assert_eq!(back.data()[[0, 0, 0]].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn header_layout_is_frozen() {
        let t = FeatureTensor::from_fn(2, 1, 3, |_, _, _| 0.0).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();
        assert_eq!(&buf[..4], b"LTNS");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(u32::from_le_bytes([buf[6], buf[7], buf[8], buf[9]]), 2);
        assert_eq!(u32::from_le_bytes([buf[10], buf[11], buf[12], buf[13]]), 1);
        assert_eq!(u32::from_le_bytes([buf[14], buf[15], buf[16], buf[17]]), 3);
        assert_eq!(buf.len(), 18 + 2 * 1 * 3 * 4);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let t = FeatureTensor::from_fn(1, 1, 1, |_, _, _| 0.0).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();

        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            read_tensor_from(wrong_magic.as_slice()),
            Err(FileError::BadMagic { .. })
        ));

        let mut wrong_version = buf.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            read_tensor_from(wrong_version.as_slice()),
            Err(FileError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn rejects_truncated_payload() {
        let t = FeatureTensor::from_fn(1, 2, 2, |_, _, _| 1.0).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_tensor_from(buf.as_slice()),
            Err(FileError::Io(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ltns");
        let t = FeatureTensor::from_fn(4, 3, 3, |c, r, w| (c * 9 + r * 3 + w) as f32).unwrap();
        write_tensor(&path, &t).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn pgm_round_trip() {
        let mut rng = SplitMix64::new(5);
        let img = Array2::from_shape_fn((9, 13), |_| (rng.next_u64() % 256) as u8);
        let mut buf = Vec::new();
        write_pgm_to(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"P5\n13 9\n255\n"));
        assert_eq!(read_pgm_from(buf.as_slice()).unwrap(), img);
    }

    #[test]
    fn pgm_reader_skips_comments() {
        let data = b"P5\n# made elsewhere\n2 2\n255\n\x00\x40\x80\xff";
        let img = read_pgm_from(&data[..]).unwrap();
        assert_eq!(img[[0, 0]], 0);
        assert_eq!(img[[1, 1]], 255);
    }

    #[test]
    fn pgm_rejects_wrong_maxval_and_short_data() {
        let wrong = b"P5\n2 2\n65535\n\x00\x00\x00\x00";
        assert!(matches!(
            read_pgm_from(&wrong[..]),
            Err(FileError::PgmHeader(_))
        ));
        let short = b"P5\n2 2\n255\n\x00\x00";
        assert!(matches!(
            read_pgm_from(&short[..]),
            Err(FileError::PgmTruncated {
                expected: 4,
                got: 2
            })
        ));
    }
}
