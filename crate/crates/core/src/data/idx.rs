//! IDX container format (MNIST): big-endian magic, big-endian `u32`
//! dimension sizes, then raw unsigned bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded image file: `count` images of `rows x cols` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

/// Linear map of a pixel byte from `[0, 255]` to `[-1, 1]`.
pub fn pixel_to_feature(byte: u8) -> f64 {
    byte as f64 / 255.0 * 2.0 - 1.0
}

fn format_err(source_name: &str, offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        source_name: source_name.to_string(),
        offset,
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, source_name: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(source_name, bytes.len(), "truncated header"))
}

fn read_header(bytes: &[u8], magic: u32, ndims: usize, source_name: &str) -> Result<Vec<usize>> {
    let found = read_u32(bytes, 0, source_name)?;
    if found != magic {
        return Err(format_err(
            source_name,
            0,
            format!("bad magic 0x{found:08x}, expected 0x{magic:08x}"),
        ));
    }
    (0..ndims)
        .map(|i| read_u32(bytes, 4 + 4 * i, source_name).map(|v| v as usize))
        .collect()
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize, source_name: &str) -> Result<&'a [u8]> {
    let end = start
        .checked_add(len)
        .ok_or_else(|| format_err(source_name, start, "payload size overflows"))?;
    if bytes.len() < end {
        return Err(format_err(
            source_name,
            bytes.len(),
            format!("truncated payload: need {end} bytes, have {}", bytes.len()),
        ));
    }
    if bytes.len() > end {
        return Err(format_err(source_name, end, "trailing bytes after payload"));
    }
    Ok(&bytes[start..end])
}

pub fn parse_idx_images(bytes: &[u8], source_name: &str) -> Result<IdxImages> {
    let dims = read_header(bytes, IMAGES_MAGIC, 3, source_name)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| format_err(source_name, 4, "dimension product overflows"))?;
    let pixels = payload(bytes, 16, len, source_name)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8], source_name: &str) -> Result<Vec<u8>> {
    let dims = read_header(bytes, LABELS_MAGIC, 1, source_name)?;
    Ok(payload(bytes, 8, dims[0], source_name)?.to_vec())
}

/// Reads an image/label file pair into a dataset with features in `[-1, 1]`.
/// The class count is one past the largest label present.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let img_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lbl_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    idx_pair_to_dataset(
        &img_bytes,
        &lbl_bytes,
        &images_path.display().to_string(),
        &labels_path.display().to_string(),
    )
}

pub(crate) fn idx_pair_to_dataset(
    img_bytes: &[u8],
    lbl_bytes: &[u8],
    img_name: &str,
    lbl_name: &str,
) -> Result<LabeledDataset> {
    let images = parse_idx_images(img_bytes, img_name)?;
    let labels = parse_idx_labels(lbl_bytes, lbl_name)?;
    if labels.len() != images.count {
        return Err(format_err(
            lbl_name,
            4,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let dim = images.rows * images.cols;
    let features = Array2::from_shape_vec(
        (images.count, dim),
        images.pixels.iter().map(|&b| pixel_to_feature(b)).collect(),
    )
    .expect("payload length checked");
    let n_classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    LabeledDataset::new(
        features,
        labels.into_iter().map(usize::from).collect(),
        n_classes,
    )
}
