//! Reader for the IDX files MNIST ships in.
//!
//! Images: magic `0x00000803`, then `count`, `rows`, `cols` as big-endian
//! `u32`, then `count·rows·cols` unsigned bytes. Labels: magic `0x00000801`,
//! `count`, then `count` bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Batch;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count × rows·cols` raw pixels.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let b = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| format_err(bytes.len(), format!("file ends before the header field at byte {offset}")))?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != want {
        return Err(format_err(0, format!("bad magic {magic:#010x}, expected {want:#010x}")));
    }
    Ok(())
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    bytes.get(start..start + len).ok_or_else(|| {
        format_err(
            bytes.len(),
            format!("truncated payload: need {} bytes, file has {}", start + len, bytes.len()),
        )
    })
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let pixels = payload(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

/// Pairs an image file with a label file into a batch of pixels scaled to
/// `[0, 1]`, keeping the first `limit` examples.
pub fn idx_to_batch(images: &IdxImages, labels: &[u8], limit: Option<usize>) -> Result<Batch> {
    if images.count() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: images.count(),
            actual: labels.len(),
        });
    }
    let n = limit.map_or(labels.len(), |l| l.min(labels.len()));
    let dim = images.rows * images.cols;
    let features = images.pixels[..n * dim].iter().map(|&p| p as f64 / 255.0).collect();
    let labels = labels[..n].iter().map(|&y| y as usize).collect();
    Batch::new(dim, features, labels)
}

/// Loads the four standard files from `dir`. The optional limits take the
/// first `n` examples of each split.
pub fn load_mnist_idx(
    dir: &Path,
    n_train: Option<usize>,
    n_test: Option<usize>,
) -> Result<(Batch, Batch)> {
    let read = |name: &str| std::fs::read(dir.join(name));
    let train_images = parse_idx_images(&read(TRAIN_IMAGES)?)?;
    let train_labels = parse_idx_labels(&read(TRAIN_LABELS)?)?;
    let test_images = parse_idx_images(&read(TEST_IMAGES)?)?;
    let test_labels = parse_idx_labels(&read(TEST_LABELS)?)?;
    Ok((
        idx_to_batch(&train_images, &train_labels, n_train)?,
        idx_to_batch(&test_images, &test_labels, n_test)?,
    ))
}

/// Serialises images back to IDX bytes (used to build fixtures).
pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> IdxImages {
        IdxImages {
            rows: 2,
            cols: 3,
            pixels: (0..12).map(|i| (i * 20) as u8).collect(),
        }
    }

    #[test]
    fn round_trip() {
        let img = tiny();
        let parsed = parse_idx_images(&encode_idx_images(&img)).unwrap();
        assert_eq!(parsed, img);
        assert_eq!(parse_idx_labels(&encode_idx_labels(&[3, 7])).unwrap(), vec![3, 7]);
    }

    #[test]
    fn swapped_files_fail_at_offset_zero() {
        let bytes = encode_idx_images(&tiny());
        match parse_idx_labels(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_idx_images(&tiny());
        match parse_idx_images(&bytes[..20]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_idx_images(&bytes[..6]), Err(Error::Format { .. })));
    }

    #[test]
    fn batch_scaling_and_limit() {
        let b = idx_to_batch(&tiny(), &[1, 2], Some(1)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.dim(), 6);
        assert_eq!(b.input(0)[1], 20.0 / 255.0);
        assert!(idx_to_batch(&tiny(), &[1], None).is_err());
    }
}
