//! IDX reader for MNIST-style image and label files (big-endian headers).

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

impl MnistSplit {
    fn prefix(&self) -> &'static str {
        match self {
            MnistSplit::Train => "train",
            MnistSplit::Test => "t10k",
        }
    }
}

/// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte` from `dir`.
pub fn load_mnist(dir: &Path, split: MnistSplit) -> Result<Dataset> {
    let p = split.prefix();
    load_idx(
        &dir.join(format!("{p}-images-idx3-ubyte")),
        &dir.join(format!("{p}-labels-idx1-ubyte")),
    )
}

/// Parses an image file and a label file into a dataset with pixels scaled
/// to `[0, 1]` and images flattened row-major.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_idx(&images, &labels)
}

fn header(bytes: &[u8], words: usize, what: &str) -> Result<Vec<u32>> {
    if bytes.len() < 4 * words {
        return Err(Error::MalformedIdx(format!(
            "{what} file shorter than its header"
        )));
    }
    Ok(bytes[..4 * words]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let ih = header(images, 4, "image")?;
    if ih[0] != IMAGES_MAGIC {
        return Err(Error::MalformedIdx(format!(
            "bad image magic {:#010x}, expected {IMAGES_MAGIC:#010x}",
            ih[0]
        )));
    }
    let lh = header(labels, 2, "label")?;
    if lh[0] != LABELS_MAGIC {
        return Err(Error::MalformedIdx(format!(
            "bad label magic {:#010x}, expected {LABELS_MAGIC:#010x}",
            lh[0]
        )));
    }
    let (count, rows, cols) = (ih[1] as usize, ih[2] as usize, ih[3] as usize);
    let label_count = lh[1] as usize;
    if count != label_count {
        return Err(Error::MalformedIdx(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let pixels = rows * cols;
    let payload = &images[16..];
    if payload.len() < count * pixels {
        return Err(Error::MalformedIdx(format!(
            "image payload truncated: {} of {} bytes",
            payload.len(),
            count * pixels
        )));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() < count {
        return Err(Error::MalformedIdx(format!(
            "label payload truncated: {} of {count} bytes",
            label_bytes.len()
        )));
    }
    let inputs = Array2::from_shape_fn((count, pixels), |(i, j)| {
        f64::from(payload[i * pixels + j]) / 255.0
    });
    let labels: Vec<usize> = label_bytes[..count].iter().map(|&b| b as usize).collect();
    if let Some(bad) = labels.iter().find(|&&l| l >= MNIST_CLASSES) {
        return Err(Error::MalformedIdx(format!("label {bad} is not a digit")));
    }
    Dataset::new(inputs, labels, MNIST_CLASSES)
}

/// Serializes images in IDX3 layout.
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for word in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

/// Serializes labels in IDX1 layout.
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
